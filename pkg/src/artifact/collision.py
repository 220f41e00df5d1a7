"""Hard-sphere Boltzmann operator, BGK surrogate and entropy.

The hard-sphere operator is evaluated node by node in gather form.  For an output
node v and a partner node u the post-collision velocities are off-lattice; the
operator interpolates the ratio h = G / w_ref, with w_ref = exp(-m|v-u_ref|^2/2T_ref),
at v' and u'.  Since m1|v-u_ref|^2 + m2|u-u_ref|^2 is a collision invariant the
weight product is exact and only h is interpolated (cubic Lagrange by default).
Pairs are restricted to the invariant energy ball
m1|v-u_ref|^2 + m2|u-u_ref|^2 <= cut*T_ref for gain and loss alike, which keeps the
truncated kernel exactly conservative in the continuum.
"""
from __future__ import annotations

import dataclasses
import functools
from fractions import Fraction
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import _kernels
from .kinetic_core import Species, VelocityGrid, collision_invariants, two_species_invariants


class CollisionError(RuntimeError):
    pass


@dataclass(frozen=True)
class AngularQuadrature:
    """Directions on S^2 with weights summing to 4 pi."""

    directions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.directions, dtype=float)
        w = np.ascontiguousarray(self.weights, dtype=float)
        if d.ndim != 2 or d.shape[1] != 3 or w.shape != (d.shape[0],):
            raise ValueError("directions must be (n, 3) with n weights")
        if np.any(np.abs(np.linalg.norm(d, axis=1) - 1) > 1e-12):
            raise ValueError("directions must be unit vectors")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "weights", w)

    @classmethod
    def product_gauss(cls, n_theta: int = 6, n_phi: int = 12) -> "AngularQuadrature":
        """Gauss-Legendre in cos(theta) times the midpoint rule in phi.

        With even ``n_phi`` the rule is antipodally symmetric.
        """
        if n_theta < 1 or n_phi < 2 or n_phi % 2:
            raise ValueError("need n_theta >= 1 and an even n_phi >= 2")
        x, wx = leggauss(n_theta)
        ph = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
        ct = np.repeat(x, n_phi)
        st = np.sqrt(1 - ct ** 2)
        p = np.tile(ph, n_theta)
        d = np.stack([st * np.cos(p), st * np.sin(p), ct], axis=1)
        return cls(d, np.repeat(wx, n_phi) * 2 * np.pi / n_phi)

    def hemisphere(self):
        """Upper half (omega_z > 0) with doubled weights.

        Valid for integrands even in omega, which the collision integrand is.
        """
        keep = self.directions[:, 2] > 0
        if 2 * keep.sum() != len(self.weights):
            raise ValueError("rule has directions on the equator or is not antipodal")
        return np.ascontiguousarray(self.directions[keep]), 2 * self.weights[keep]

    @property
    def size(self) -> int:
        return len(self.weights)


def parse_angular_order(spec) -> tuple[int, int]:
    """'6x12' -> (6, 12); a bare integer n -> (n, 2n)."""
    if isinstance(spec, (tuple, list)):
        a, b = spec
        return int(a), int(b)
    s = str(spec).lower()
    if "x" in s:
        a, b = s.split("x")
        return int(a), int(b)
    n = int(s)
    return n, 2 * n


@dataclass(frozen=True)
class HardSphere:
    """Hard-sphere kernel |(u-v).w| with prefactor (sigma1+sigma2)^2 / 4.

    ``T_ref`` and ``u_ref`` define the interpolation weight and the energy ball;
    choose them as the temperature and drift of the state being collided.
    ``scheme="interp"`` is the bilinear interpolating operator followed by
    conservation_project; ``scheme="entropic"`` is the discrete-velocity variant
    with exact conservation and a discrete H-theorem (not bilinear).
    """

    sigma1: float = 1.0
    sigma2: float = 1.0
    T_ref: float = 1.0
    u_ref: tuple = (0.0, 0.0, 0.0)
    energy_cut: float = 25.0
    order: int = 3
    budget: int = 24 ** 3
    scheme: str = "interp"

    def __post_init__(self):
        if self.scheme not in ("interp", "entropic"):
            raise ValueError("scheme must be 'interp' or 'entropic'")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("hard-sphere diameters must be positive")
        if self.T_ref <= 0 or self.energy_cut <= 0:
            raise ValueError("T_ref and energy_cut must be positive")
        if self.order not in (1, 3):
            raise ValueError("interpolation order must be 1 (trilinear) or 3 (cubic)")
        object.__setattr__(self, "u_ref", tuple(float(x) for x in self.u_ref))

    @property
    def prefactor(self) -> float:
        return 0.25 * (self.sigma1 + self.sigma2) ** 2


@dataclass(frozen=True)
class BGK:
    """Relaxation surrogate with frequency nu0 * T**temp_exponent."""

    nu0: float = 1.0
    temp_exponent: float = -1.0

    def __post_init__(self):
        if not self.nu0 > 0:
            raise ValueError("nu0 must be positive")

    def frequency(self, T):
        return self.nu0 * np.asarray(T, dtype=float) ** self.temp_exponent


CollisionKernel = Union[HardSphere, BGK]


def post_collision_velocities(v, u, omega, m1: float = 1.0, m2: float = 1.0):
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if np.any(np.abs(np.linalg.norm(omega, axis=-1) - 1) > 1e-12):
        raise ValueError("omega must be a unit vector")
    s = np.sum((v - u) * omega, axis=-1, keepdims=True)
    vp = v - (2 * m2 / (m1 + m2)) * s * omega
    up = u + (2 * m1 / (m1 + m2)) * s * omega
    return vp, up


def reference_weight(grid: VelocityGrid, m: float, kernel: HardSphere):
    d = grid.nodes - np.asarray(kernel.u_ref)
    return np.exp(-m * np.einsum("ij,ij->i", d, d) / (2 * kernel.T_ref))


@functools.lru_cache(maxsize=32)
def _pair_tables(grid: VelocityGrid, m1: float, m2: float, T_ref: float, u_ref: tuple, cut: float):
    d = grid.nodes - np.asarray(u_ref)
    r2 = np.einsum("ij,ij->i", d, d)
    e1 = m1 * r2 / T_ref
    e2 = m2 * r2 / T_ref
    out = np.nonzero(e1 <= cut)[0]
    us = np.argsort(e2, kind="stable")
    lim = np.searchsorted(e2[us], cut - e1[out], side="right")
    radius = np.sqrt(cut * T_ref / min(m1, m2)) + np.max(np.abs(u_ref))
    if radius > grid.vmax:
        warnings.warn(
            f"energy ball radius {radius:.3g} exceeds vmax={grid.vmax}; post-collision values are clamped",
            RuntimeWarning,
            stacklevel=3,
        )
    return out, us, lim.astype(np.int64)


def _check_budget(grid: VelocityGrid, kernel: HardSphere):
    if grid.size > kernel.budget:
        raise CollisionError(
            f"hard-sphere collision budget exceeded: {grid.size} velocity nodes > {kernel.budget}; "
            "use the BGK backend or a coarser grid"
        )


_DEFAULT_ANGULAR = AngularQuadrature.product_gauss(6, 12)


def hs_gain_loss(G1, G2, grid: VelocityGrid, m1: float, m2: float, kernel: HardSphere, angular=None):
    """Gain and loss parts of Q(G1, G2) for a single cell, without projection."""
    _check_budget(grid, kernel)
    angular = angular or _DEFAULT_ANGULAR
    dirs, wd = angular.hemisphere()
    N = grid.N
    om1 = reference_weight(grid, m1, kernel)
    om2 = reference_weight(grid, m2, kernel)
    h1 = np.ascontiguousarray((G1 / om1).reshape(N, N, N))
    h2 = np.ascontiguousarray((G2 / om2).reshape(N, N, N))
    out, us, lim = _pair_tables(grid, float(m1), float(m2), kernel.T_ref, kernel.u_ref, kernel.energy_cut)
    S, R = _kernels.pair_sums(
        h1, h2, om2, grid.nodes, out, us, lim, dirs, wd, float(m1), float(m2),
        float(grid.axis[0]), float(grid.h), kernel.order,
    )
    c = kernel.prefactor * grid.h ** 3
    gain = np.zeros(grid.size)
    loss = np.zeros(grid.size)
    gain[out] = c * om1[out] * S
    loss[out] = c * G1[out] * R
    return gain, loss


def _mass_ratio(m1: float, m2: float):
    fr = Fraction(m1 / m2).limit_denominator(8)
    if abs(fr.numerator / fr.denominator - m1 / m2) > 1e-12 * (m1 / m2):
        raise CollisionError(f"entropic scheme needs a rational mass ratio with small terms, got {m1 / m2}")
    return np.array([fr.numerator, fr.denominator], dtype=np.int64)


def hs_entropic(F1, F2, grid: VelocityGrid, m1: float, m2: float, kernel: HardSphere, angular=None, same=False):
    """Entropic discrete-velocity rates for the pair (F1, F2) in one cell.

    ``same=True`` treats F1 = F2 as one species (ordered pairs, rate 1/4);
    otherwise the cross pair contributes to both species (rate 1/2).
    Returns (dF1, dF2); for ``same`` dF2 is None.
    """
    _check_budget(grid, kernel)
    angular = angular or _DEFAULT_ANGULAR
    dirs, wd = angular.hemisphere()
    F1 = np.ascontiguousarray(_clip(F1, "F1"))
    F2 = np.ascontiguousarray(_clip(F2, "F2"))
    with np.errstate(divide="ignore"):
        l1 = np.log(np.maximum(F1, 1e-300))
        l2 = np.log(np.maximum(F2, 1e-300))
    out, us, lim = _pair_tables(grid, float(m1), float(m2), kernel.T_ref, kernel.u_ref, kernel.energy_cut)
    rate = (0.25 if same else 0.5) * kernel.prefactor * grid.h ** 3
    d1, d2 = _kernels.entropic_rates(
        F1, F2, l1, l2, grid.nodes, out, us, lim, dirs, wd, float(m1), float(m2),
        _mass_ratio(m1, m2), float(grid.axis[0]), float(grid.h), grid.N, rate, same,
        np.asarray(kernel.u_ref, dtype=float), kernel.energy_cut * kernel.T_ref,
    )
    return (d1, None) if same else (d1, d2)


def _cells(*arrays):
    shape = np.shape(arrays[0])[:-1]
    flat = [np.reshape(np.asarray(a, dtype=float), (-1, np.shape(a)[-1])) for a in arrays]
    return shape, flat


def conservation_project(blocks, invariants, maxwellians, quad_weights):
    """Least-norm correction so that sum_s <Q_s, phi_k,s> = 0 for every invariant k.

    ``blocks`` holds per-species arrays (cells..., nodes), ``invariants`` has shape
    (K, n_species, nodes) and ``maxwellians`` (n_species, nodes) is a positive
    reference.  The correction of species s is M_s sum_k c_k phi_k,s, the minimiser
    of sum w Q^2 / M under the constraints.  Applying it twice changes nothing.
    """
    phi = np.asarray(invariants, dtype=float)
    Mw = np.asarray(maxwellians, dtype=float) * np.asarray(quad_weights, dtype=float)
    gram = np.einsum("asn,bsn,sn->ab", phi, phi, Mw)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e14:
        raise CollisionError(f"singular invariant Gram matrix (condition {cond:.3g})")
    Q = [np.asarray(b, dtype=float) for b in blocks]
    # pairings per cell, shape (cells..., K)
    pair = sum((Q[s] * quad_weights) @ phi[:, s, :].T for s in range(len(Q)))
    c = np.linalg.solve(gram, -pair[..., None])[..., 0]
    return tuple(Q[s] + (c @ phi[:, s, :]) * maxwellians[s] for s in range(len(Q)))


def _hs_reference(grid, masses, kernel):
    return np.stack([reference_weight(grid, m, kernel) for m in masses])


def collide(G1, G2, grid: VelocityGrid, sp1: Species, sp2: Species, kernel: HardSphere, angular=None, project=True):
    """Bilinear hard-sphere Q(G1, G2) for the species of G1 colliding with those of G2.

    Leading cell axes are looped over.  For a single bilinear term only mass is a
    collision invariant, so ``project`` enforces <Q, 1> = 0; momentum and energy are
    restored by :func:`collide_pair` and :func:`collide_self`, which own the
    symmetric combinations.
    """
    if isinstance(kernel, BGK):
        raise CollisionError("the BGK surrogate is not bilinear; use collide_pair or bgk_relax")
    if kernel.scheme != "interp":
        raise CollisionError("the entropic scheme is not bilinear; use collide_pair or collide_self")
    shape, (a, b) = _cells(G1, G2)
    out = np.empty_like(a)
    for k in range(a.shape[0]):
        g, l = hs_gain_loss(a[k], b[k], grid, sp1.m, sp2.m, kernel, angular)
        out[k] = g - l
    if project:
        ref = reference_weight(grid, sp1.m, kernel)
        (out,) = conservation_project([out], np.ones((1, 1, grid.size)), ref[None], grid.weights)
    return out.reshape(shape + (grid.size,))


def collide_self(F, grid: VelocityGrid, sp: Species, kernel: CollisionKernel, angular=None, project=True):
    """One-species Q(F, F), projected onto the five invariants."""
    if isinstance(kernel, BGK):
        return bgk_relax(F, grid, sp, kernel.nu0, kernel.temp_exponent)
    shape, (a,) = _cells(F)
    out = np.empty_like(a)
    if kernel.scheme == "entropic":
        for k in range(a.shape[0]):
            out[k] = hs_entropic(a[k], a[k], grid, sp.m, sp.m, kernel, angular, same=True)[0]
        return out.reshape(shape + (grid.size,))
    for k in range(a.shape[0]):
        g, l = hs_gain_loss(a[k], a[k], grid, sp.m, sp.m, kernel, angular)
        out[k] = g - l
    if project:
        phi = collision_invariants(grid, sp.m)[:, None, :]
        (out,) = conservation_project([out], phi, _hs_reference(grid, [sp.m], kernel), grid.weights)
    return out.reshape(shape + (grid.size,))


def collide_pair(F_plus, F_minus, grid: VelocityGrid, sp_plus: Species, sp_minus: Species,
                 kernel: CollisionKernel, angular=None, project=True, parts=False):
    """(Q_+, Q_-) = (Q(F+,F+) + Q(F+,F-), Q(F-,F+) + Q(F-,F-)), projected onto phi_0..phi_5.

    With ``parts=True`` the unprojected (gain_+, loss_+, gain_-, loss_-) are returned.
    """
    if isinstance(kernel, BGK):
        return bgk_mixture(F_plus, F_minus, grid, sp_plus, sp_minus, kernel)
    shape, (a, b) = _cells(F_plus, F_minus)
    mp, mm = sp_plus.m, sp_minus.m
    if kernel.scheme == "entropic":
        if parts:
            raise CollisionError("the entropic scheme has no gain/loss split")
        Qp = np.empty_like(a)
        Qm = np.empty_like(b)
        for k in range(a.shape[0]):
            pp = hs_entropic(a[k], a[k], grid, mp, mp, kernel, angular, same=True)[0]
            mm_ = hs_entropic(b[k], b[k], grid, mm, mm, kernel, angular, same=True)[0]
            xp, xm = hs_entropic(a[k], b[k], grid, mp, mm, kernel, angular)
            Qp[k] = pp + xp
            Qm[k] = mm_ + xm
        return Qp.reshape(shape + (grid.size,)), Qm.reshape(shape + (grid.size,))
    gp = np.zeros_like(a)
    lp = np.zeros_like(a)
    gm = np.zeros_like(a)
    lm = np.zeros_like(a)
    for k in range(a.shape[0]):
        for G1, G2, m1, m2, g_acc, l_acc in (
            (a[k], a[k], mp, mp, gp, lp),
            (a[k], b[k], mp, mm, gp, lp),
            (b[k], a[k], mm, mp, gm, lm),
            (b[k], b[k], mm, mm, gm, lm),
        ):
            g, l = hs_gain_loss(G1, G2, grid, m1, m2, kernel, angular)
            g_acc[k] += g
            l_acc[k] += l
    if parts:
        return tuple(x.reshape(shape + (grid.size,)) for x in (gp, lp, gm, lm))
    Qp, Qm = gp - lp, gm - lm
    if project:
        Qp, Qm = conservation_project(
            [Qp, Qm], two_species_invariants(grid, mp, mm), _hs_reference(grid, [mp, mm], kernel), grid.weights
        )
    return Qp.reshape(shape + (grid.size,)), Qm.reshape(shape + (grid.size,))


# ---------------------------------------------------------------- BGK surrogate

def _temperature(F, grid, m):
    w = grid.weights
    n = F @ w
    j = F @ (w[:, None] * grid.nodes) / n[..., None]
    e = F @ (w * grid.v2) / n
    return n, j, m * (e - np.einsum("...k,...k->...", j, j)) / 3


def bgk_relax(F, grid: VelocityGrid, species: Species, nu0: float, temp_exponent: float = 0.0):
    """nu (M[F] - F) with M[F] the discrete Maxwellian sharing F's five discrete moments."""
    from .kinetic_core import discrete_maxwellian

    F = np.asarray(F, dtype=float)
    n, u, T = _temperature(F, grid, species.m)
    if np.any(n <= 0) or np.any(T <= 0):
        raise CollisionError("BGK relaxation needs positive density and temperature in every cell")
    M = discrete_maxwellian(grid, n, u, T, species.m).reshape(F.shape)
    nu = nu0 * T ** temp_exponent
    return nu[..., None] * (M - F)


def mixture_maxwellian(F_plus, F_minus, grid: VelocityGrid, sp_plus: Species, sp_minus: Species,
                       tol: float = 1e-14, maxiter: int = 60):
    """Discrete two-species equilibrium exp(sum_k lam_k phi_k,s).

    The six multipliers are fitted by Newton's method so that the discrete pairings
    with phi_0..phi_5 (both densities, total momentum, total energy) equal those of
    (F+, F-).  The common drift and temperature are encoded in the shared multipliers,
    which gives the discrete Gibbs inequality H(M) <= H(F) exactly.
    Returns (M_plus, M_minus, T_mix).
    """
    shape, (a, b) = _cells(F_plus, F_minus)
    phi = two_species_invariants(grid, sp_plus.m, sp_minus.m)
    w = grid.weights
    target = (a * w) @ phi[:, 0].T + (b * w) @ phi[:, 1].T
    n_p, n_m = target[:, 0], target[:, 1]
    if np.any(n_p <= 0) or np.any(n_m <= 0):
        raise CollisionError("mixture equilibrium needs positive densities")
    rho = sp_plus.m * n_p + sp_minus.m * n_m
    u = target[:, 2:5] / rho[:, None]
    T = (target[:, 5] - rho * np.einsum("ij,ij->i", u, u)) / (3 * (n_p + n_m))
    if np.any(T <= 0):
        raise CollisionError("non-positive mixture temperature")
    lam = np.zeros((a.shape[0], 6))
    for s, (n, m) in enumerate(((n_p, sp_plus.m), (n_m, sp_minus.m))):
        lam[:, s] = np.log(n) + 1.5 * np.log(m / (2 * np.pi * T)) - 0.5 * m * np.einsum("ij,ij->i", u, u) / T
    lam[:, 2:5] = u / T[:, None]
    lam[:, 5] = -0.5 / T
    for _ in range(maxiter):
        Mp = np.exp(lam @ phi[:, 0])
        Mm = np.exp(lam @ phi[:, 1])
        mom = (Mp * w) @ phi[:, 0].T + (Mm * w) @ phi[:, 1].T
        res = mom - target
        scale = np.abs(target).max(axis=1, keepdims=True)
        if np.all(np.abs(res) <= tol * scale):
            break
        jac = np.einsum("cn,an,bn->cab", Mp * w, phi[:, 0], phi[:, 0]) + np.einsum(
            "cn,an,bn->cab", Mm * w, phi[:, 1], phi[:, 1]
        )
        lam -= np.linalg.solve(jac, res[..., None])[..., 0]
    Mp = np.exp(lam @ phi[:, 0]).reshape(shape + (grid.size,))
    Mm = np.exp(lam @ phi[:, 1]).reshape(shape + (grid.size,))
    return Mp, Mm, T.reshape(shape)


def bgk_mixture(F_plus, F_minus, grid, sp_plus, sp_minus, kernel: BGK):
    """Both species relax to the shared-drift, shared-temperature equilibrium."""
    Mp, Mm, T = mixture_maxwellian(F_plus, F_minus, grid, sp_plus, sp_minus)
    nu = kernel.frequency(T)[..., None]
    return nu * (Mp - F_plus), nu * (Mm - F_minus)


# ---------------------------------------------------------------- relaxation and entropy

def _clip(F, name="F"):
    F = np.asarray(F, dtype=float)
    lo = F.min(initial=0.0)
    if lo < -1e-14:
        raise CollisionError(f"{name} has negative values down to {lo:.3g}")
    return np.where(F < 0, 0.0, F)


def entropy(F_plus, F_minus, grid: VelocityGrid):
    """sum w (F+ ln F+ + F- ln F-) with 0 ln 0 = 0, per cell."""
    tot = 0.0
    for name, F in (("F_plus", F_plus), ("F_minus", F_minus)):
        F = _clip(F, name)
        with np.errstate(divide="ignore", invalid="ignore"):
            tot = tot + (np.where(F > 0, F * np.log(np.where(F > 0, F, 1.0)), 0.0) @ grid.weights)
    return tot


def collision_frequency_bound(F_plus, F_minus, grid, sp_plus, sp_minus, kernel: HardSphere, angular=None):
    """Largest loss rate nu(v) = loss/F over both species (interpolating evaluation)."""
    kernel = dataclasses.replace(kernel, scheme="interp")
    gp, lp, gm, lm = collide_pair(F_plus, F_minus, grid, sp_plus, sp_minus, kernel, angular, parts=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.concatenate([np.ravel(lp / F_plus), np.ravel(lm / F_minus)])
    return float(np.nanmax(r[np.isfinite(r)]))


def relax_step(F_plus, F_minus, grid, sp_plus, sp_minus, kernel: CollisionKernel, dt: float, angular=None):
    """One space-homogeneous collision step.

    BGK: exact solution M + (F - M) exp(-nu dt), since M depends only on conserved
    moments.  Hard spheres: forward Euler on the projected operator; the caller keeps
    dt * nu_max below one.
    """
    if isinstance(kernel, BGK):
        Mp, Mm, T = mixture_maxwellian(F_plus, F_minus, grid, sp_plus, sp_minus)
        decay = np.exp(-kernel.frequency(T) * dt)[..., None]
        return Mp + (F_plus - Mp) * decay, Mm + (F_minus - Mm) * decay
    Qp, Qm = collide_pair(F_plus, F_minus, grid, sp_plus, sp_minus, kernel, angular)
    return F_plus + dt * Qp, F_minus + dt * Qm
