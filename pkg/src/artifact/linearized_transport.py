"""Linearized collision operators, Fredholm solves and transport coefficients.

An operator acts on node vectors restricted to a velocity support (stacked per
species for the two-species form).  Inner products are weighted by w*M, the
quadrature weight times the reference Maxwellian, so the operator is symmetric
and nonnegative in L^2_M.  Hard-sphere operators are dense matrices; BGK
operators are nu (I - P_ker) and stay matrix-free.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.sparse.linalg import LinearOperator, cg

from . import _kernels
from .collision import (
    BGK,
    AngularQuadrature,
    CollisionError,
    CollisionKernel,
    HardSphere,
    _DEFAULT_ANGULAR,
    _check_budget,
    _pair_tables,
    collide,
    mixture_maxwellian,
)
from .kinetic_core import ELECTRON, ION, Species, VelocityGrid, discrete_maxwellian

KINDS = ("two_species", "one_species_L", "one_species_calL")
_EXPECTED_DIM = {"two_species": 6, "one_species_L": 5, "one_species_calL": 1}


class TransportError(RuntimeError):
    pass


@dataclass
class LinearizedOperator:
    kind: str
    backend: str
    weight: np.ndarray
    support: tuple
    masses: tuple
    kernel_basis: np.ndarray
    grid: VelocityGrid
    T: float
    u: np.ndarray
    matrix: np.ndarray | None = None
    nu: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.weight.size

    @property
    def expected_kernel_dim(self) -> int:
        return _EXPECTED_DIM[self.kind]

    def inner(self, f, g):
        return np.sum(self.weight * f * g, axis=-1)

    def norm(self, f):
        return np.sqrt(self.inner(f, f))

    def kernel_part(self, f):
        K = self.kernel_basis
        return ((f * self.weight) @ K.T) @ K

    def apply(self, f):
        f = np.asarray(f, dtype=float)
        if self.matrix is not None:
            return f @ self.matrix.T
        return self.nu * (f - self.kernel_part(f))

    def dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        if self.dim > 6000:
            raise TransportError(f"refusing to densify a {self.dim}-dimensional BGK operator")
        return self.apply(np.eye(self.dim)).T

    def symmetric_form(self):
        """W^{1/2} A W^{-1/2}, symmetric when A is weighted-symmetric."""
        s = np.sqrt(self.weight)
        return self.dense() * s[:, None] / s[None, :]

    def spectrum(self):
        if self.matrix is None:
            k = self.expected_kernel_dim
            return np.concatenate([np.zeros(k), np.full(self.dim - k, self.nu)])
        S = self.symmetric_form()
        return eigh(0.5 * (S + S.T), eigvals_only=True)

    def symmetry_defect(self, rng=None, trials: int = 10) -> float:
        """max |<Af,g> - <f,Ag>| / (||A|| ||f|| ||g||) over random pairs."""
        rng = rng or np.random.default_rng(0)
        A_norm = self.operator_norm()
        worst = 0.0
        for _ in range(trials):
            f = rng.standard_normal(self.dim)
            g = rng.standard_normal(self.dim)
            d = abs(self.inner(self.apply(f), g) - self.inner(f, self.apply(g)))
            worst = max(worst, d / (A_norm * self.norm(f) * self.norm(g)))
        return worst

    def operator_norm(self) -> float:
        if self.matrix is None:
            return float(self.nu)
        return float(np.max(np.abs(self.spectrum())))

    def to_nodes(self, x):
        """Split a stacked support vector into per-species full-grid arrays."""
        out = []
        off = 0
        for sup in self.support:
            a = np.zeros(np.shape(x)[:-1] + (self.grid.size,))
            a[..., sup] = x[..., off:off + sup.size]
            out.append(a)
            off += sup.size
        return out

    def from_nodes(self, *arrays):
        return np.concatenate([np.asarray(a)[..., sup] for a, sup in zip(arrays, self.support)], axis=-1)


def _rel(grid, u):
    return grid.nodes - np.asarray(u, dtype=float)


def _invariants(kind, grid, masses, support, u):
    c = _rel(grid, u)
    c2 = np.einsum("ij,ij->i", c, c)
    if kind == "one_species_calL":
        return np.ones((1, support[0].size))
    if kind == "one_species_L":
        s = support[0]
        m = masses[0]
        return np.vstack([np.ones(s.size), m * c[s].T, m * c2[s]])
    (sp, sm), (mp, mm) = support, masses
    rows = []
    rows.append(np.concatenate([np.ones(sp.size), np.zeros(sm.size)]))
    rows.append(np.concatenate([np.zeros(sp.size), np.ones(sm.size)]))
    for k in range(3):
        rows.append(np.concatenate([mp * c[sp, k], mm * c[sm, k]]))
    rows.append(np.concatenate([mp * c2[sp], mm * c2[sm]]))
    return np.vstack(rows)


def _orthonormalize(phi, weight):
    """Weighted Gram-Schmidt via Cholesky of the Gram matrix."""
    gram = (phi * weight) @ phi.T
    try:
        L = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise TransportError("invariant Gram matrix is singular") from exc
    return np.linalg.solve(L, phi)


def _continuous_maxwellian(grid, n, u, T, m):
    c = _rel(grid, u)
    return n * (m / (2 * np.pi * T)) ** 1.5 * np.exp(-m * np.einsum("ij,ij->i", c, c) / (2 * T))


def assemble_linearized(
    grid: VelocityGrid,
    kernel: CollisionKernel,
    kind: str = "two_species",
    species=(ION, ELECTRON),
    T: float = 1.0,
    u=(0.0, 0.0, 0.0),
    n=(1.0, 1.0),
    angular: AngularQuadrature | None = None,
    support_frac: float = 0.9,
    symmetrize: bool = True,
    decouple: bool | None = None,
) -> LinearizedOperator:
    """Linearization of the collision operator at Maxwellians sharing (u, T).

    ``kind`` selects the two-species operator on (f+, f-), the one-species L
    (both arguments perturbed) or the one-species calL (first argument only);
    the one-species forms use ``species[0]`` and ``n[0]``.  Two identical species
    at equal density are assembled from L and calL as [[L+calL, L-calL],
    [L-calL, L+calL]] unless ``decouple=False``.  Hard-sphere operators
    live on the support m|v-u|^2 <= support_frac * energy_cut * T of each species,
    are symmetrized in L^2_M and have the invariant directions projected out.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    u = np.asarray(u, dtype=float)
    nsp = 2 if kind == "two_species" else 1
    species = tuple(species[:nsp])
    masses = tuple(float(s.m) for s in species)
    dens = tuple(float(x) for x in np.atleast_1d(n)[:nsp])
    if isinstance(kernel, BGK):
        return _assemble_bgk(grid, kernel, kind, masses, dens, T, u)
    same = kind == "two_species" and species[0] == dataclasses.replace(species[1], sign=species[0].sign)
    if decouple is None:
        decouple = same and dens[0] == dens[1]
    if decouple:
        if not (same and dens[0] == dens[1]):
            raise TransportError("decoupled assembly needs identical species at equal density")
        opts = dict(species=species[:1], T=T, u=u, n=dens[:1], angular=angular, support_frac=support_frac,
                    symmetrize=symmetrize)
        L = assemble_linearized(grid, kernel, "one_species_L", **opts)
        cL = assemble_linearized(grid, kernel, "one_species_calL", **opts)
        A = np.block([[L.matrix + cL.matrix, L.matrix - cL.matrix], [L.matrix - cL.matrix, L.matrix + cL.matrix]])
        sup = L.support[0]
        phi = _invariants(kind, grid, masses, (sup, sup), u)
        weight = np.concatenate([L.weight, L.weight])
        diag = {k: max(L.diagnostics[k], cL.diagnostics[k]) for k in L.diagnostics}
        return LinearizedOperator(
            kind=kind, backend="hard-sphere", weight=weight, support=(sup, sup), masses=masses,
            kernel_basis=_orthonormalize(phi, weight), grid=grid, T=float(T), u=u, matrix=A, diagnostics=diag,
        )
    if kernel.scheme != "interp":
        raise TransportError("linearization needs the bilinear interpolating scheme")
    _check_budget(grid, kernel)
    kernel = dataclasses.replace(kernel, T_ref=float(T), u_ref=tuple(u))
    angular = angular or _DEFAULT_ANGULAR
    dirs, wd = angular.hemisphere()
    c = _rel(grid, u)
    r2 = np.einsum("ij,ij->i", c, c)
    support = tuple(np.nonzero(m * r2 / T <= support_frac * kernel.energy_cut)[0] for m in masses)
    Ms = [_continuous_maxwellian(grid, nn, u, T, m) for nn, m in zip(dens, masses)]
    cs = [nn * (m / (2 * np.pi * T)) ** 1.5 for nn, m in zip(dens, masses)]
    colmaps = []
    for sup in support:
        cm = -np.ones(grid.size, dtype=np.int64)
        cm[sup] = np.arange(sup.size)
        colmaps.append(cm)
    pref = kernel.prefactor * grid.h ** 3
    x0 = float(grid.axis[0])

    def block(a, b, want2):
        """Rows of species a colliding with species b: (dQ/df_a via arg 1, dQ/df_b via arg 2)."""
        ma, mb = masses[a], masses[b]
        out, us, lim = _pair_tables(grid, ma, mb, kernel.T_ref, kernel.u_ref, kernel.energy_cut)
        keep = np.isin(out, support[a])
        rows = out[keep]
        # rows come out in ascending node order, as does support[a]
        om2 = np.exp(-mb * r2 / (2 * T))
        D1, D2 = _kernels.linearized_rows(
            cs[a], cs[b], om2, grid.nodes, rows, us, lim[keep], dirs, wd, ma, mb, x0, float(grid.h),
            kernel.order, colmaps[a], colmaps[b], support[a].size, support[b].size, want2,
        )
        # dQ_i/df = pref om1_i c_arg D; dividing by M_i = c_a om1_i leaves pref c_arg / c_a
        return -pref * D1, (-pref * D2 * (cs[b] / cs[a]) if want2 else None)

    if kind == "one_species_calL":
        A, _ = block(0, 0, False)
    elif kind == "one_species_L":
        D1, D2 = block(0, 0, True)
        A = D1 + D2
    else:
        P1, P2 = block(0, 0, True)
        X1, X2 = block(0, 1, True)
        Y1, Y2 = block(1, 0, True)
        Z1, Z2 = block(1, 1, True)
        A = np.block([[P1 + P2 + X1, X2], [Y2, Y1 + Z1 + Z2]])
    weight = np.concatenate([grid.weights[s] * M[s] for s, M in zip(support, Ms)])
    phi = _invariants(kind, grid, masses, support, u)
    K = _orthonormalize(phi, weight)
    diag = {}
    A_norm = np.max(np.abs(A))
    S = A * np.sqrt(weight)[:, None] / np.sqrt(weight)[None, :]
    diag["raw_asymmetry"] = float(np.max(np.abs(S - S.T)) / np.max(np.abs(S)))
    diag["raw_kernel_residual"] = float(
        max(np.sqrt(np.sum(weight * (A @ k) ** 2)) for k in K) / A_norm
    )
    if symmetrize:
        # A <- (A + A*)/2 with A* = W^{-1} A^T W, then A <- P A P, P = I - K K^T W
        A = 0.5 * (A + (A.T * weight[None, :]) / weight[:, None])
        P = np.eye(A.shape[0]) - K.T @ (K * weight)
        A = P @ A @ P
    return LinearizedOperator(
        kind=kind, backend="hard-sphere", weight=weight, support=support, masses=masses,
        kernel_basis=K, grid=grid, T=float(T), u=u, matrix=A, diagnostics=diag,
    )


def linearize_at(M_plus, M_minus, grid: VelocityGrid, species=(ION, ELECTRON), kernel: CollisionKernel = None,
                 angular=None, rel_tol: float = 1e-6, **kw) -> LinearizedOperator:
    """Two-species operator at given Maxwellian node values sharing drift and temperature."""
    kernel = kernel if kernel is not None else HardSphere()
    w = grid.weights
    stats = []
    for M, sp in zip((M_plus, M_minus), species):
        M = np.asarray(M, dtype=float)
        if M.shape != (grid.size,) or np.any(M <= 0):
            raise TransportError("Maxwellians must be strictly positive single-cell node arrays")
        n = M @ w
        u = (M * w) @ grid.nodes / n
        c = grid.nodes - u
        T = sp.m * ((M * w) @ np.einsum("ij,ij->i", c, c)) / (3 * n)
        stats.append((n, u, T))
    (n1, u1, T1), (n2, u2, T2) = stats
    if np.max(np.abs(u1 - u2)) > rel_tol * max(1.0, np.max(np.abs(u1))) or abs(T1 - T2) > rel_tol * T1:
        raise TransportError(f"Maxwellians do not share drift and temperature: u={u1},{u2} T={T1},{T2}")
    return assemble_linearized(grid, kernel, "two_species", species, T=T1, u=u1, n=(n1, n2), angular=angular, **kw)


def _assemble_bgk(grid, kernel: BGK, kind, masses, dens, T, u):
    support = tuple(np.arange(grid.size) for _ in masses)
    Ms = [discrete_maxwellian(grid, nn, u, T, m).ravel() for nn, m in zip(dens, masses)]
    weight = np.concatenate([grid.weights * M for M in Ms])
    phi = _invariants(kind, grid, masses, support, u)
    K = _orthonormalize(phi, weight)
    return LinearizedOperator(
        kind=kind, backend="bgk", weight=weight, support=support, masses=masses, kernel_basis=K,
        grid=grid, T=float(T), u=np.asarray(u, dtype=float), nu=float(kernel.frequency(T)),
    )


def kernel_basis(op: LinearizedOperator, rel_tol: float = 1e-8):
    """Weighted-orthonormal invariant basis, checked against the numerical null space."""
    k = op.expected_kernel_dim
    found = kernel_dimension(op, rel_tol)
    if found != k:
        ev = np.sort(np.abs(op.spectrum()))
        raise TransportError(f"numerical kernel dimension {found} != {k}; smallest eigenvalues {ev[:k + 2]}")
    res = max(op.norm(op.apply(b)) for b in op.kernel_basis)
    if res > rel_tol * max(op.operator_norm(), 1e-300):
        raise TransportError(f"kernel basis residual {res:.3g} exceeds tolerance")
    return op.kernel_basis


def kernel_dimension(op: LinearizedOperator, rel_tol: float = 1e-8) -> int:
    """Number of eigenvalues below rel_tol times the spectral radius."""
    ev = np.abs(op.spectrum())
    return int(np.sum(ev <= rel_tol * ev.max()))


def coercivity_constant(op: LinearizedOperator) -> float:
    """Smallest eigenvalue on the L^2_M complement of the kernel."""
    ev = np.sort(op.spectrum())
    return float(ev[op.expected_kernel_dim])


_INVARIANT_NAMES = {
    "two_species": ("mass+", "mass-", "momentum_x", "momentum_y", "momentum_z", "energy"),
    "one_species_L": ("mass", "momentum_x", "momentum_y", "momentum_z", "energy"),
    "one_species_calL": ("mass",),
}


def fredholm_solve(op: LinearizedOperator, rhs, tol: float = 1e-10, maxiter: int | None = None,
                   solvability_tol: float | None = None):
    """x orthogonal to the kernel with A x = rhs, by CG on the kernel complement."""
    rhs = np.asarray(rhs, dtype=float)
    rn = op.norm(rhs)
    if rn == 0:
        return np.zeros_like(rhs)
    K = op.kernel_basis
    pair = (rhs * op.weight) @ K.T
    stol = tol if solvability_tol is None else solvability_tol
    if np.max(np.abs(pair)) > stol * rn:
        worst = int(np.argmax(np.abs(pair)))
        raise TransportError(
            f"rhs is not orthogonal to the kernel: pairing with {_INVARIANT_NAMES[op.kind][worst]} "
            f"is {pair[worst]:.3g} (relative {abs(pair[worst]) / rn:.3g})"
        )
    b = rhs - pair @ K
    if op.matrix is None:
        x = b / op.nu
        return x - op.kernel_part(x)
    s = np.sqrt(op.weight)
    Kt = K * s
    S = op.symmetric_form()
    S = 0.5 * (S + S.T)

    def mv(y):
        y = y - Kt.T @ (Kt @ y)
        z = S @ y
        return z - Kt.T @ (Kt @ z)

    n = op.dim
    lin = LinearOperator((n, n), matvec=mv, dtype=float)
    y, info = cg(lin, s * b, rtol=tol, atol=0.0, maxiter=maxiter or 10 * n)
    if info != 0:
        raise TransportError(f"CG did not converge within {maxiter or 10 * n} iterations")
    x = y / s
    x = x - op.kernel_part(x)
    res = op.norm(op.apply(x) - b) / op.norm(b)
    if res > 10 * tol:
        raise TransportError(f"Fredholm residual {res:.3g} above tolerance {tol}")
    return x


def resistivity(op: LinearizedOperator, tol: float = 1e-10) -> float:
    """eta from 1/eta = (1/3T) sum_i <(v-u)_i, calL^{-1} (v-u)_i>_M."""
    if op.kind != "one_species_calL":
        raise TransportError("resistivity needs the one-species calL operator")
    c = _rel(op.grid, op.u)[op.support[0]]
    tot = 0.0
    for i in range(3):
        x = fredholm_solve(op, c[:, i], tol=tol, solvability_tol=1e-8)
        tot += op.inner(c[:, i], x)
    inv_eta = tot / (3 * op.T)
    if not inv_eta > 0:
        raise TransportError(f"non-positive conductivity {inv_eta}")
    return float(1.0 / inv_eta)


def viscosity_conductivity(op: LinearizedOperator, tol: float = 1e-10):
    """nu = (1/10) <Phi, L^{-1} Phi>, kappa = (2/15) <Psi, L^{-1} Psi> (implementation-defined pairings).

    Phi_ij = c_i c_j - |c|^2/3 delta_ij, Psi_i = c_i (|c|^2 - 5)/2, c = v - u; the
    sources are projected off the kernel before solving.
    """
    if op.kind != "one_species_L":
        raise TransportError("viscosity and conductivity need the one-species L operator")
    c = _rel(op.grid, op.u)[op.support[0]]
    c2 = np.einsum("ij,ij->i", c, c)
    nu = 0.0
    for i in range(3):
        for j in range(3):
            phi = c[:, i] * c[:, j] - (c2 / 3 if i == j else 0.0)
            phi = phi - op.kernel_part(phi)
            nu += op.inner(phi, fredholm_solve(op, phi, tol=tol))
    kappa = 0.0
    for i in range(3):
        psi = 0.5 * c[:, i] * (c2 - 5)
        psi = psi - op.kernel_part(psi)
        kappa += op.inner(psi, fredholm_solve(op, psi, tol=tol))
    return float(nu / 10), float(2 * kappa / 15)


@dataclass
class TransportCoefficients:
    eta: float
    nu: float
    kappa: float
    delta0: float
    kernel_dim: int
    backend: str
    grid: tuple

    def __post_init__(self):
        for name in ("eta", "nu", "kappa"):
            if not getattr(self, name) > 0:
                raise TransportError(f"{name} must be positive, got {getattr(self, name)}")

    def as_dict(self):
        return dataclasses.asdict(self)


def transport_coefficients(grid: VelocityGrid, kernel: CollisionKernel, T: float = 1.0, rho: float = 1.0,
                           angular=None, species: Species = ION) -> TransportCoefficients:
    """eta from calL, nu and kappa from L, all at the Maxwellian (rho, 0, T) of one species."""
    calL = assemble_linearized(grid, kernel, "one_species_calL", (species,), T=T, n=(rho,), angular=angular)
    L = assemble_linearized(grid, kernel, "one_species_L", (species,), T=T, n=(rho,), angular=angular)
    eta = resistivity(calL)
    nu, kappa = viscosity_conductivity(L)
    return TransportCoefficients(
        eta=eta, nu=nu, kappa=kappa, delta0=coercivity_constant(L), kernel_dim=kernel_dimension(L),
        backend="bgk" if isinstance(kernel, BGK) else "hard-sphere", grid=(grid.N, grid.vmax),
    )


def resistivity_law(kernel: CollisionKernel, eta_ref: float | None = None, grid: VelocityGrid | None = None,
                    angular=None, species: Species = ION):
    """Callable eta(rho, T) for local Ohm closures.

    BGK: eta = nu0 T^a / rho exactly.  Hard spheres: calL scales like rho sqrt(T) and
    the pairing like rho T, so eta = eta(1, 1) sqrt(T) with no density dependence;
    eta(1, 1) is computed once on `grid` unless given.
    """
    if isinstance(kernel, BGK):
        def law(rho, T):
            return kernel.frequency(T) / np.asarray(rho, dtype=float)
        return law
    if eta_ref is None:
        if grid is None:
            raise TransportError("hard-sphere resistivity law needs eta_ref or a velocity grid")
        op = assemble_linearized(grid, kernel, "one_species_calL", (species,), angular=angular)
        eta_ref = resistivity(op)
    eta_ref = float(eta_ref)

    def law(rho, T):
        return eta_ref * np.sqrt(np.asarray(T, dtype=float)) * np.ones_like(np.asarray(rho, dtype=float))
    return law


# ---------------------------------------------------------------- Ohm's laws

def ohm_closure(E, B, u, eta):
    """J = (E + u x B) / eta, pointwise over leading axes."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0):
        raise ValueError("eta must be positive")
    E, B, u = (np.asarray(x, dtype=float) for x in (E, B, u))
    return (E + np.cross(u, B)) / eta[..., None]


def _hall_coeffs(rho, sp_plus, sp_minus, eps):
    a = sp_plus.e * sp_minus.e / (sp_plus.m * sp_minus.m)
    b = np.sqrt(eps) / np.asarray(rho, dtype=float) * (sp_plus.e * sp_minus.m - sp_minus.e * sp_plus.m) / (
        sp_plus.m * sp_minus.m
    )
    return a, b


def ohm_closure_hall(E, B, u, sigma, rho, sp_plus: Species = ION, sp_minus: Species = ELECTRON,
                     eta: float = 1.0, eps: float = 0.0, cond_max: float = 1e12):
    """Solve eta J = a (E + u x B) + b (sigma E + J x B) for J, pointwise.

    a = e+e-/(m+m-), b = sqrt(eps)/rho (e+m- - e-m+)/(m+m-).  The system
    (eta I + b [B]_x) J = a (E + u x B) + b sigma E is solved as a 3x3 system.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if np.any(np.asarray(rho) <= 0):
        raise ValueError("rho must be positive")
    E, B, u = (np.asarray(x, dtype=float) for x in (E, B, u))
    E, B, u = np.broadcast_arrays(E, B, u)
    a, b = _hall_coeffs(rho, sp_plus, sp_minus, eps)
    b = np.broadcast_to(b, E.shape[:-1])
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), E.shape[:-1])
    rhs = a * (E + np.cross(u, B)) + (b * sigma)[..., None] * E
    # J x B = -[B]_x J
    Bx = np.zeros(E.shape[:-1] + (3, 3))
    Bx[..., 0, 1], Bx[..., 0, 2] = -B[..., 2], B[..., 1]
    Bx[..., 1, 0], Bx[..., 1, 2] = B[..., 2], -B[..., 0]
    Bx[..., 2, 0], Bx[..., 2, 1] = -B[..., 1], B[..., 0]
    M = eta * np.eye(3) + b[..., None, None] * Bx
    if np.max(np.linalg.cond(M.reshape(-1, 3, 3))) > cond_max:
        raise ValueError("Hall-corrected Ohm system is numerically singular")
    return np.linalg.solve(M, rhs[..., None])[..., 0]


def ohm_hall_fixed_point(E, B, u, sigma, rho, sp_plus=ION, sp_minus=ELECTRON, eta=1.0, eps=0.0,
                         tol: float = 1e-14, maxiter: int = 10000):
    """Independent fixed-point iteration J <- (a (E+uxB) + b (sigma E + J x B)) / eta."""
    E, B, u = (np.asarray(x, dtype=float) for x in (E, B, u))
    a, b = _hall_coeffs(rho, sp_plus, sp_minus, eps)
    b = np.asarray(b)[..., None]
    src = a * (E + np.cross(u, B)) + b * np.asarray(sigma)[..., None] * E
    J = src / eta
    for _ in range(maxiter):
        Jn = (src + b * np.cross(J, B)) / eta
        if np.max(np.abs(Jn - J)) <= tol * max(np.max(np.abs(Jn)), 1e-300):
            return Jn
        J = Jn
    raise ValueError("fixed-point iteration did not converge (|b||B|/eta >= 1?)")


def ohm_residual(J, E, B, u, eta):
    """||J - (E + u x B)/eta|| / ||J|| over all points."""
    J = np.asarray(J, dtype=float)
    r = J - ohm_closure(E, B, u, eta)
    return float(np.linalg.norm(r) / max(np.linalg.norm(J), 1e-300))


@dataclass
class GeneralizedOhmDiagnostics:
    J0_residual: float
    J1_estimate: np.ndarray
    pressure_term: np.ndarray
    C_term: np.ndarray | None


def generalized_ohm_diagnostics(f_plus, f_minus, mu_plus, mu_minus, grid: VelocityGrid, eps: float, dx: float,
                                sp_plus: Species = ION, sp_minus: Species = ELECTRON,
                                kernel: CollisionKernel | None = None, angular=None):
    """Measured pieces of the two-mass Ohm balance on a periodic 1D mesh (cells along x).

    G = mu+ f+ - mu- f-.  Reports ||int v G|| (should vanish), int v G / eps, the
    pressure term -d/dx <v_x v G> and the collisional term C per cell: for a
    hard-sphere kernel C = <v, Q(mu+ f+, mu- f-) - Q(mu- f-, mu+ f+)>; for BGK the
    corresponding remainder nu <v, M+ - M-> / eps^2 of the mixture equilibrium.
    """
    f_plus = np.atleast_2d(f_plus)
    f_minus = np.atleast_2d(f_minus)
    w = grid.weights
    v = grid.nodes
    G = mu_plus * f_plus - mu_minus * f_minus
    J = G @ (w[:, None] * v)
    J0 = float(np.sqrt(np.mean(np.sum(J ** 2, axis=-1))))
    flux = G @ (w[:, None] * v * v[:, :1])
    press = -(np.roll(flux, -1, axis=0) - np.roll(flux, 1, axis=0)) / (2 * dx)
    C = None
    if isinstance(kernel, HardSphere) and kernel.scheme == "interp":
        Gp = mu_plus * f_plus
        Gm = mu_minus * f_minus
        q1 = collide(Gp, Gm, grid, sp_plus, sp_minus, kernel, angular, project=False)
        q2 = collide(Gm, Gp, grid, sp_minus, sp_plus, kernel, angular, project=False)
        C = (q1 - q2) @ (w[:, None] * v)
    elif isinstance(kernel, BGK):
        Mp, Mm, T = mixture_maxwellian(mu_plus * (1 + eps * f_plus), mu_minus * (1 + eps * f_minus),
                                       grid, sp_plus, sp_minus)
        C = kernel.frequency(T)[:, None] * ((Mp - Mm) @ (w[:, None] * v)) / eps ** 2
    return GeneralizedOhmDiagnostics(J0, J / eps, press, C)
