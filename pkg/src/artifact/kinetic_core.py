"""Velocity lattice, Maxwellians, moments and the mass/charge change of variables.

Velocity data is stored with the flattened velocity index last, so a
distribution on a spatial mesh of shape ``S`` is an array of shape
``S + (N**3,)``.  Everything here is plain numpy and side-effect free.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Species:
    """Particle constants of one species; ``sign`` is +1 for ions, -1 for electrons."""

    m: float = 1.0
    e: float = 1.0
    sign: int = 1

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"species mass must be positive, got {self.m}")
        if not self.e > 0:
            raise ValueError(f"species charge magnitude must be positive, got {self.e}")
        if self.sign not in (1, -1):
            raise ValueError("species sign must be +1 or -1")

    @property
    def charge(self) -> float:
        return self.sign * self.e


ION = Species(1.0, 1.0, 1)
ELECTRON = Species(1.0, 1.0, -1)


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform midpoint lattice on [-vmax, vmax]^3 with N points per axis."""

    vmax: float
    N: int

    def __post_init__(self):
        if not self.vmax > 0:
            raise GridError(f"vmax must be positive, got {self.vmax}")
        if int(self.N) != self.N or self.N < 8:
            raise GridError(f"N must be an integer >= 8, got {self.N}")
        if self.N % 2:
            raise GridError(f"N must be even so the lattice has no node at v=0, got {self.N}")

    @property
    def h(self) -> float:
        return 2.0 * self.vmax / self.N

    @cached_property
    def axis(self) -> np.ndarray:
        k = np.arange(self.N)
        return -self.vmax + (k + 0.5) * self.h

    @property
    def size(self) -> int:
        return self.N ** 3

    @cached_property
    def nodes(self) -> np.ndarray:
        a = self.axis
        vx, vy, vz = np.meshgrid(a, a, a, indexing="ij")
        out = np.stack([vx.ravel(), vy.ravel(), vz.ravel()], axis=1)
        out.setflags(write=False)
        return out

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.size, self.h ** 3)
        w.setflags(write=False)
        return w

    @cached_property
    def v2(self) -> np.ndarray:
        out = np.einsum("ij,ij->i", self.nodes, self.nodes)
        out.setflags(write=False)
        return out

    @cached_property
    def mirror(self) -> np.ndarray:
        """Index of -v for every node (the lattice is centrosymmetric)."""
        idx = np.arange(self.size).reshape(self.N, self.N, self.N)
        out = idx[::-1, ::-1, ::-1].ravel().copy()
        out.setflags(write=False)
        return out

    def integrate(self, f):
        return np.asarray(f) @ self.weights

    def shape3(self, f):
        f = np.asarray(f)
        return f.reshape(f.shape[:-1] + (self.N, self.N, self.N))


def build_velocity_grid(v_max: float, N: int) -> VelocityGrid:
    return VelocityGrid(float(v_max), int(N))


def default_vmax(T_ref: float = 1.0, m_min: float = 1.0, u_max: float = 0.0, widths: float = 6.0) -> float:
    """Truncation rule: a fixed number of thermal widths of the lightest species plus the drift."""
    return widths * np.sqrt(T_ref / m_min) + abs(u_max)


def maxwellian(grid: VelocityGrid, n=1.0, u=(0.0, 0.0, 0.0), T=1.0, m=1.0, tail_tol: float = 1e-6):
    """n (m/2 pi T)^{3/2} exp(-m|v-u|^2 / 2T), broadcast over leading cell axes.

    ``n`` and ``T`` have the cell shape, ``u`` has the cell shape plus a trailing 3.
    """
    n = np.asarray(n, dtype=float)
    T = np.asarray(T, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(T <= 0):
        raise ValueError("temperature must be positive")
    if np.any(n < 0):
        raise ValueError("density must be nonnegative")
    if m <= 0:
        raise ValueError("mass must be positive")
    c = u[..., None, :] - grid.nodes
    d2 = np.einsum("...k,...k->...", c, c)
    Tb = T[..., None]
    out = n[..., None] * (m / (2 * np.pi * Tb)) ** 1.5 * np.exp(-m * d2 / (2 * Tb))
    if tail_tol is not None and np.any(n > 0):
        lost = np.abs(out @ grid.weights - n)
        if np.any(lost > tail_tol * np.maximum(n, 1e-300)):
            warnings.warn(
                f"Maxwellian mass outside the velocity box exceeds {tail_tol:g}; increase vmax",
                RuntimeWarning,
                stacklevel=2,
            )
    return out


def moments(F, grid: VelocityGrid, m: float = 1.0):
    """Mass-weighted density, momentum density and kinetic energy density per cell."""
    F = np.asarray(F, dtype=float)
    if F.shape[-1] != grid.size:
        raise ValueError(f"last axis has {F.shape[-1]} nodes, grid has {grid.size}")
    wF = F * grid.weights
    dens = m * wF.sum(axis=-1)
    mom = m * (wF @ grid.nodes)
    ener = 0.5 * m * (wF @ grid.v2)
    return dens, mom, ener


def collision_invariants(grid: VelocityGrid, m: float = 1.0):
    """Rows 1, m v_x, m v_y, m v_z, m |v|^2 on the grid."""
    v = grid.nodes
    return np.vstack([np.ones(grid.size), m * v[:, 0], m * v[:, 1], m * v[:, 2], m * grid.v2])


def two_species_invariants(grid: VelocityGrid, m_plus: float, m_minus: float):
    """phi_0..phi_5 as stacked (plus, minus) rows of shape (6, 2, N^3)."""
    ip = collision_invariants(grid, m_plus)
    im = collision_invariants(grid, m_minus)
    z = np.zeros(grid.size)
    out = np.empty((6, 2, grid.size))
    out[0] = [ip[0], z]
    out[1] = [z, im[0]]
    for k in range(3):
        out[2 + k] = [ip[1 + k], im[1 + k]]
    out[5] = [ip[4], im[4]]
    return out


def discrete_maxwellian(grid: VelocityGrid, n, u, T, m: float = 1.0, tol: float = 1e-14, maxiter: int = 50):
    """Maxwellian exp(a + b.v - c|v|^2) whose *discrete* moments equal (n, n u, n|u|^2 + 3nT/m).

    Solved per cell by Newton's method on the five exponential parameters, starting
    from the continuous Maxwellian.  Exact discrete moments make the relaxation
    operators conservative and give a discrete Gibbs inequality.
    """
    n = np.atleast_1d(np.asarray(n, dtype=float))
    shape = n.shape
    n = n.ravel()
    u = np.asarray(u, dtype=float).reshape(-1, 3)
    T = np.atleast_1d(np.asarray(T, dtype=float)).ravel()
    if np.any(T <= 0):
        raise ValueError("temperature must be positive")
    phi = collision_invariants(grid, 1.0)
    target = np.stack([n, n * u[:, 0], n * u[:, 1], n * u[:, 2], n * (np.einsum("ij,ij->i", u, u) + 3 * T / m)], axis=1)
    beta = m / T
    a = np.log(np.maximum(n, 1e-300)) + 1.5 * np.log(beta / (2 * np.pi)) - 0.5 * beta * np.einsum("ij,ij->i", u, u)
    lam = np.column_stack([a, beta[:, None] * u, -0.5 * beta])
    live = n > 0
    out = np.zeros((n.size, grid.size))
    w = grid.weights
    for it in range(maxiter):
        expo = lam[live] @ phi
        f = np.exp(expo)
        mom = (f * w) @ phi.T
        res = mom - target[live]
        scale = np.maximum(np.abs(target[live]).max(axis=1, keepdims=True), 1e-300)
        if np.all(np.abs(res) <= tol * scale):
            break
        Jac = np.einsum("ck,ak,bk->cab", f * w, phi, phi)
        step = np.linalg.solve(Jac, res[..., None])[..., 0]
        lam[live] -= step
    out[live] = np.exp(lam[live] @ phi)
    return out.reshape(shape + (grid.size,))


@dataclass
class MacroState:
    """Fluid moments per spatial cell."""

    n_plus: np.ndarray
    n_minus: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    T: np.ndarray
    sigma: np.ndarray
    J: np.ndarray

    def as_columns(self):
        u = np.reshape(self.u, (-1, 3))
        J = np.reshape(self.J, (-1, 3))
        return {
            "n_plus": np.ravel(self.n_plus),
            "n_minus": np.ravel(self.n_minus),
            "rho": np.ravel(self.rho),
            "ux": u[:, 0], "uy": u[:, 1], "uz": u[:, 2],
            "T": np.ravel(self.T),
            "sigma": np.ravel(self.sigma),
            "Jx": J[:, 0], "Jy": J[:, 1], "Jz": J[:, 2],
        }


def macro_state(F_plus, F_minus, grid: VelocityGrid, sp_plus: Species = ION, sp_minus: Species = ELECTRON) -> MacroState:
    """Common-velocity, common-temperature moments of a two-species state."""
    w = grid.weights
    v = grid.nodes
    n_p = F_plus @ w
    n_m = F_minus @ w
    j_p = F_plus @ (w[:, None] * v)
    j_m = F_minus @ (w[:, None] * v)
    rho = sp_plus.m * n_p + sp_minus.m * n_m
    mom = sp_plus.m * j_p + sp_minus.m * j_m
    u = mom / np.where(rho > 0, rho, 1.0)[..., None]
    e2 = sp_plus.m * (F_plus @ (w * grid.v2)) + sp_minus.m * (F_minus @ (w * grid.v2))
    ntot = n_p + n_m
    T = (e2 - rho * np.einsum("...k,...k->...", u, u)) / (3 * np.where(ntot > 0, ntot, 1.0))
    sigma = sp_plus.e * n_p - sp_minus.e * n_m
    J = sp_plus.e * j_p - sp_minus.e * j_m
    return MacroState(n_p, n_m, rho, u, T, sigma, J)


def to_mass_charge(F_plus, F_minus, sp_plus: Species = ION, sp_minus: Species = ELECTRON):
    F = sp_plus.m * np.asarray(F_plus) + sp_minus.m * np.asarray(F_minus)
    G = sp_plus.e * np.asarray(F_plus) - sp_minus.e * np.asarray(F_minus)
    return F, G


def from_mass_charge(F, G, sp_plus: Species = ION, sp_minus: Species = ELECTRON):
    det = sp_minus.e * sp_plus.m + sp_plus.e * sp_minus.m
    if det == 0:
        raise ValueError("e_- m_+ + e_+ m_- vanishes; the mass/charge map is not invertible")
    F = np.asarray(F)
    G = np.asarray(G)
    F_plus = (sp_minus.e * F + sp_minus.m * G) / det
    F_minus = (sp_plus.e * F - sp_plus.m * G) / det
    return F_plus, F_minus


def fluctuation_decompose(F, mu, eps: float):
    """f with F = mu (1 + eps f)."""
    mu = np.asarray(mu, dtype=float)
    if np.any(mu <= 0):
        raise ValueError("reference Maxwellian must be strictly positive on the grid")
    if eps <= 0:
        raise ValueError("eps must be positive")
    return (np.asarray(F) / mu - 1.0) / eps


def fluctuation_reconstruct(f, mu, eps: float):
    return np.asarray(mu) * (1.0 + eps * np.asarray(f))


class Regime(str, enum.Enum):
    A = "A"
    B = "B"
    Bp = "Bp"
    C = "C"
    Cp = "Cp"
    D = "D"
    E = "E"

    @property
    def perturbative(self) -> bool:
        return self in (Regime.C, Regime.Cp, Regime.D, Regime.E)

    @property
    def mass_charge_form(self) -> bool:
        """Regimes written for (F, G) with unit masses and charges."""
        return self in (Regime.B, Regime.Bp, Regime.C, Regime.Cp, Regime.D)


@dataclass(frozen=True)
class ScalingRegime:
    regime: Regime = Regime.A
    epsilon: float = 0.1
    mu0: float = 1.0
    eps0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.mu0 <= 0 or self.eps0 <= 0:
            raise ValueError("mu0 and eps0 must be positive")

    @property
    def light_speed(self) -> float:
        return 1.0 / np.sqrt(self.mu0 * self.eps0)

    @property
    def effective_eps0(self) -> float:
        """Permittivity actually used in the field equations (eps0 = epsilon in B' and C')."""
        if self.regime in (Regime.Bp, Regime.Cp):
            return self.epsilon
        return self.eps0
