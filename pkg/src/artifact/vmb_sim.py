"""Kinetic Vlasov-Maxwell-Boltzmann time stepping on a periodic mesh.

Fields live on a 2D Yee mesh (z-invariant, all six components); kinetic runs use
ny = 1, so x is the only resolved direction while velocities stay three-dimensional.
Staggering: Ex (i+1/2, j), Ey (i, j+1/2), Ez (i, j), Bx (i, j+1/2), By (i+1/2, j),
Bz (i+1/2, j+1/2).  Distributions are arrays (nx, N^3).

Each regime is written as

    dF/dt = -a_x v.grad_x F - (cE E + cB v x B).grad_v H + a_Q Q

with H = G for the F equation and H = F for the G equation in the mass-charge
regimes (unit masses and charges), H = F_s with factor +-e_s/m_s in the species
regimes A and E, and Maxwell written as d_t E = (curl B - mu0 J)/(mu0 eps0_eff).
"""
from __future__ import annotations

import copy
import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .collision import (
    BGK,
    AngularQuadrature,
    CollisionKernel,
    HardSphere,
    collide,
    collide_self,
    collision_frequency_bound,
    entropy,
    mixture_maxwellian,
    relax_step,
)
from .kinetic_core import (
    ELECTRON,
    ION,
    Regime,
    ScalingRegime,
    Species,
    VelocityGrid,
    discrete_maxwellian,
    from_mass_charge,
    macro_state,
)


class SimError(RuntimeError):
    pass


class CFLError(SimError):
    pass


# ---------------------------------------------------------------- Yee mesh

def _dfwd(a, axis, d):
    return (np.roll(a, -1, axis=axis) - a) / d


def _dbwd(a, axis, d):
    return (a - np.roll(a, 1, axis=axis)) / d


@dataclass
class EMField:
    E: np.ndarray
    B: np.ndarray
    dx: float
    dy: float = 1.0

    @classmethod
    def zeros(cls, nx: int, ny: int = 1, length: float = 2 * np.pi, length_y: float | None = None):
        dy = (length_y if length_y is not None else length) / ny
        return cls(np.zeros((3, nx, ny)), np.zeros((3, nx, ny)), length / nx, dy)

    @property
    def shape(self):
        return self.E.shape[1:]

    def copy(self):
        return EMField(self.E.copy(), self.B.copy(), self.dx, self.dy)

    def curl_E(self):
        return self.curl_E_of(self.E)

    def curl_E_of(self, E):
        """Discrete curl of an array laid out like E (result laid out like B)."""
        return np.stack([
            _dfwd(E[2], 1, self.dy),
            -_dfwd(E[2], 0, self.dx),
            _dfwd(E[1], 0, self.dx) - _dfwd(E[0], 1, self.dy),
        ])

    def curl_B(self):
        B = self.B
        return np.stack([
            _dbwd(B[2], 1, self.dy),
            -_dbwd(B[2], 0, self.dx),
            _dbwd(B[1], 0, self.dx) - _dbwd(B[0], 1, self.dy),
        ])

    def div_B(self):
        """At (i+1/2, j+1/2); identically preserved by the update."""
        return _dfwd(self.B[0], 0, self.dx) + _dfwd(self.B[1], 1, self.dy)

    def div_E(self):
        """At cell centres (i, j)."""
        return _dbwd(self.E[0], 0, self.dx) + _dbwd(self.E[1], 1, self.dy)

    def cell_E(self):
        """E averaged to cell centres, shape (nx, ny, 3)."""
        E = self.E
        return np.stack([0.5 * (E[0] + np.roll(E[0], 1, 0)), 0.5 * (E[1] + np.roll(E[1], 1, 1)), E[2]], axis=-1)

    def cell_B(self):
        B = self.B
        bz = 0.25 * (B[2] + np.roll(B[2], 1, 0) + np.roll(B[2], 1, 1) + np.roll(np.roll(B[2], 1, 0), 1, 1))
        return np.stack([0.5 * (B[0] + np.roll(B[0], 1, 1)), 0.5 * (B[1] + np.roll(B[1], 1, 0)), bz], axis=-1)

    def energy(self, mu0: float, eps0: float) -> float:
        cell = self.dx * self.dy
        return float(0.5 * cell * (eps0 * np.sum(self.E ** 2) + np.sum(self.B ** 2) / mu0))


def light_speed(mu0: float, eps0: float) -> float:
    return 1.0 / math.sqrt(mu0 * eps0)


def maxwell_cfl(em: EMField, dt: float, mu0: float, eps0: float) -> float:
    ny = em.shape[1]
    s = 1.0 / em.dx ** 2 + (1.0 / em.dy ** 2 if ny > 1 else 0.0)
    return light_speed(mu0, eps0) * dt * math.sqrt(s)


def maxwell_step(em: EMField, J, dt: float, mu0: float = 1.0, eps0: float = 1.0) -> EMField:
    """Leapfrog (B half, E full, B half) for mu0 eps0 dE/dt - curl B = -mu0 J, dB/dt + curl E = 0.

    J has the layout of E (Jx on x-faces).  The discrete curl/div pair makes div B
    exactly invariant and changes div E only through div J.
    """
    if maxwell_cfl(em, dt, mu0, eps0) > 1.0 + 1e-12:
        raise CFLError(f"Maxwell CFL number {maxwell_cfl(em, dt, mu0, eps0):.3g} exceeds 1")
    J = np.zeros_like(em.E) if J is None else np.asarray(J, dtype=float).reshape(em.E.shape)
    out = em.copy()
    out.B = out.B - 0.5 * dt * out.curl_E()
    out.E = out.E + dt * (out.curl_B() - mu0 * J) / (mu0 * eps0)
    out.B = out.B - 0.5 * dt * out.curl_E()
    return out


def yee_dispersion(kx: float, ky: float, dx: float, dy: float, dt: float, c: float) -> float:
    """Angular frequency of a vacuum mode of the leapfrog scheme."""
    s = c * dt * math.sqrt((math.sin(kx * dx / 2) / dx) ** 2 + (math.sin(ky * dy / 2) / dy) ** 2)
    if s > 1:
        raise CFLError("mode is unstable at this time step")
    return 2.0 * math.asin(s) / dt


def gauss_consistent_Ex(sigma, dx: float, kappa: float):
    """Zero-mean Ex on x-faces with (Ex_i+1/2 - Ex_i-1/2)/dx = kappa sigma_i (1D, periodic)."""
    sigma = np.asarray(sigma, dtype=float)
    s = sigma - sigma.mean(axis=0)
    Ex = np.cumsum(kappa * s * dx, axis=0)
    return Ex - Ex.mean(axis=0)


# ---------------------------------------------------------------- regimes

@dataclass(frozen=True)
class RegimeCoefficients:
    a_x: float
    cF_E: float
    cF_B: float
    cG_E: float
    cG_B: float
    a_Q: float
    eps0_eff: float

    @property
    def gauss_kappa(self) -> float:
        """sigma coefficient of the Gauss law implied by the Ampere and continuity equations."""
        return 1.0 / (self.eps0_eff * self.a_x)


def regime_coefficients(scaling: ScalingRegime) -> RegimeCoefficients:
    """epsilon powers of each displayed system, after dividing by the time-derivative factor."""
    e = scaling.epsilon
    r = scaling.regime
    e0 = scaling.eps0
    if r is Regime.A:
        return RegimeCoefficients(1.0, 1.0, 1.0, 1.0, 1.0, 1 / e, e0)
    if r in (Regime.B, Regime.Bp):
        return RegimeCoefficients(1.0, 1.0, 1.0, 1 / e, 1 / e, 1 / e, e if r is Regime.Bp else e0)
    if r in (Regime.C, Regime.Cp):
        return RegimeCoefficients(1 / e, 1.0, 1 / e, 1 / e ** 2, 1 / e ** 3, 1 / e ** 2, e if r is Regime.Cp else e0)
    if r is Regime.D:
        return RegimeCoefficients(1 / e, 1.0, 1 / e, 1 / e ** 3, 1 / e ** 4, 1 / e ** 3, e0 * e ** 3)
    # E: species form, (1/eps m)(E + v x B/eps) force, 1/eps^2 collisions, eps0 = eps
    return RegimeCoefficients(1 / e, 1 / e, 1 / e ** 2, 1 / e, 1 / e ** 2, 1 / e ** 2, e)


@dataclass
class KineticSetup:
    grid: VelocityGrid
    nx: int
    scaling: ScalingRegime = field(default_factory=ScalingRegime)
    species: tuple = (ION, ELECTRON)
    kernel: CollisionKernel = field(default_factory=BGK)
    length: float = 2 * np.pi
    limiter: str = "mc"
    angular: AngularQuadrature | None = None

    def __post_init__(self):
        if self.limiter not in _LIMITERS:
            raise ValueError(f"limiter must be one of {sorted(_LIMITERS)}")
        if self.nx < 4:
            raise ValueError("need at least 4 cells")
        if self.scaling.regime.mass_charge_form and any(
            s.m != 1.0 or s.e != 1.0 for s in self.species
        ):
            raise ValueError("mass-charge regimes are written for unit masses and charges")

    @property
    def dx(self) -> float:
        return self.length / self.nx

    @property
    def form(self) -> str:
        return "fg" if self.scaling.regime.mass_charge_form else "pm"

    @property
    def coefficients(self) -> RegimeCoefficients:
        return regime_coefficients(self.scaling)

    @property
    def x(self):
        return -self.length / 2 + (np.arange(self.nx) + 0.5) * self.dx


@dataclass
class KineticState:
    """(f1, f2) = (F+, F-) in species form or (F, G) in mass-charge form."""

    f1: np.ndarray
    f2: np.ndarray
    em: EMField
    t: float = 0.0
    step: int = 0
    last: dict = field(default_factory=dict)

    def copy(self):
        return KineticState(self.f1.copy(), self.f2.copy(), self.em.copy(), self.t, self.step, copy.deepcopy(self.last))


# ---------------------------------------------------------------- transport pieces

def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _mc(a, b):
    return _minmod(0.5 * (a + b), 2 * _minmod(a, b))


_LIMITERS = {
    "upwind": lambda a, b: np.zeros_like(a),
    "minmod": _minmod,
    "mc": _mc,
    "none": lambda a, b: 0.5 * (a + b),
}


def _face_flux(F, vx, limiter):
    """Upwind MUSCL flux v_x F at faces i+1/2 (periodic), F of shape (nx, Nv)."""
    fwd = np.roll(F, -1, axis=0) - F
    bwd = F - np.roll(F, 1, axis=0)
    slope = _LIMITERS[limiter](bwd, fwd)
    left = F + 0.5 * slope
    right = np.roll(F - 0.5 * slope, -1, axis=0)
    return np.where(vx > 0, vx * left, vx * right)


def _transport(F, vx, a_x, dx, dt, limiter):
    """SSP-RK2 step of dF/dt + a_x v_x dF/dx = 0; returns (F_new, time-averaged face flux)."""
    f0 = _face_flux(F, vx, limiter)
    F1 = F - dt * a_x * (f0 - np.roll(f0, 1, axis=0)) / dx
    f1 = _face_flux(F1, vx, limiter)
    flux = 0.5 * (f0 + f1)
    return F - dt * a_x * (flux - np.roll(flux, 1, axis=0)) / dx, flux


def _dv(F3, axis, h):
    """Fourth-order flux-form d/dv along one velocity axis, zero flux through the box faces."""
    n = F3.shape[axis]
    pad = [(0, 0)] * F3.ndim
    pad[axis] = (2, 2)
    P = np.pad(F3, pad)

    def sl(a, b):
        idx = [slice(None)] * F3.ndim
        idx[axis] = slice(a, b)
        return P[tuple(idx)]

    face = (-sl(0, n + 1) + 7 * sl(1, n + 2) + 7 * sl(2, n + 3) - sl(3, n + 4)) / 12.0
    idx0 = [slice(None)] * F3.ndim
    idx0[axis] = 0
    face[tuple(idx0)] = 0.0
    idx0[axis] = n
    face[tuple(idx0)] = 0.0
    hi = [slice(None)] * F3.ndim
    lo = [slice(None)] * F3.ndim
    hi[axis] = slice(1, None)
    lo[axis] = slice(0, n)
    return (face[tuple(hi)] - face[tuple(lo)]) / h


def velocity_gradient(F, grid: VelocityGrid):
    """(3, ..., N^3) array of d F / d v_k."""
    N = grid.N
    F3 = F.reshape(F.shape[:-1] + (N, N, N))
    nd = F3.ndim
    return np.stack([_dv(F3, nd - 3 + k, grid.h).reshape(F.shape) for k in range(3)])


def lorentz_term(F, grid: VelocityGrid, E, B, cE: float = 1.0, cB: float = 1.0):
    """(cE E + cB v x B) . grad_v F with per-cell E, B of shape (nx, 3)."""
    v = grid.nodes
    gF = velocity_gradient(F, grid)
    E = np.asarray(E).reshape(-1, 3)
    B = np.asarray(B).reshape(-1, 3)
    vxB = np.stack([
        v[None, :, 1] * B[:, None, 2] - v[None, :, 2] * B[:, None, 1],
        v[None, :, 2] * B[:, None, 0] - v[None, :, 0] * B[:, None, 2],
        v[None, :, 0] * B[:, None, 1] - v[None, :, 1] * B[:, None, 0],
    ])
    out = np.zeros_like(F)
    for k in range(3):
        out += (cE * E[:, k, None] + cB * vxB[k]) * gF[k]
    return out


# ---------------------------------------------------------------- diagnostics

def _unit_moments(F, grid):
    w = grid.weights
    n = F @ w
    j = F @ (w[:, None] * grid.nodes)
    e = F @ (w * grid.v2)
    return n, j, e


def conserved_densities(state: KineticState, setup: KineticSetup):
    """Per-cell (mass, momentum (nx,3), energy, charge) of the state."""
    g = setup.grid
    if setup.form == "fg":
        n, j, e = _unit_moments(state.f1, g)
        s, _, _ = _unit_moments(state.f2, g)
        return n, j, 0.5 * e, s
    sp, sm = setup.species
    n1, j1, e1 = _unit_moments(state.f1, g)
    n2, j2, e2 = _unit_moments(state.f2, g)
    return sp.m * n1 + sm.m * n2, sp.m * j1 + sm.m * j2, 0.5 * (sp.m * e1 + sm.m * e2), sp.e * n1 - sm.e * n2


def charge_current(state: KineticState, setup: KineticSetup):
    """(sigma, J) per cell, J = int v G."""
    g = setup.grid
    if setup.form == "fg":
        s, J, _ = _unit_moments(state.f2, g)
        return s, J
    sp, sm = setup.species
    n1, j1, _ = _unit_moments(state.f1, g)
    n2, j2, _ = _unit_moments(state.f2, g)
    return sp.e * n1 - sm.e * n2, sp.e * j1 - sm.e * j2


def species_distributions(state: KineticState, setup: KineticSetup):
    if setup.form == "fg":
        return from_mass_charge(state.f1, state.f2, *setup.species)
    return state.f1, state.f2


def macro(state: KineticState, setup: KineticSetup):
    Fp, Fm = species_distributions(state, setup)
    return macro_state(Fp, Fm, setup.grid, *setup.species)


def gauss_residual(state: KineticState, setup: KineticSetup) -> float:
    sigma, _ = charge_current(state, setup)
    r = state.em.div_E()[:, 0] - setup.coefficients.gauss_kappa * sigma
    return float(np.max(np.abs(r - r.mean())))


def _lorentz_sources(state, setup):
    c = setup.coefficients
    sigma, J = charge_current(state, setup)
    E = state.em.cell_E()[:, 0]
    B = state.em.cell_B()[:, 0]
    mom = c.cF_E * sigma[:, None] * E + c.cF_B * np.cross(J, B)
    ener = c.cF_E * np.einsum("ij,ij->i", E, J)
    return mom, ener


def local_conservation_report(before: KineticState, after: KineticState, setup: KineticSetup):
    """Defects d_t U + d_x Phi - S per cell for mass, momentum, energy and charge.

    Phi is the time-averaged face flux actually used by the step; Lorentz sources
    are averaged over the step end points.
    """
    dt = after.t - before.t
    if dt <= 0 or "face_flux" not in after.last:
        raise SimError("report needs two consecutive states from vmb_step")
    c = setup.coefficients
    U0 = conserved_densities(before, setup)
    U1 = conserved_densities(after, setup)
    fl = after.last["face_flux"]
    m0, e0 = _lorentz_sources(before, setup)
    m1, e1 = _lorentz_sources(after, setup)
    src = {"mass": 0.0, "momentum": 0.5 * (m0 + m1), "energy": 0.5 * (e0 + e1), "charge": 0.0}
    out = {}
    for k, name in enumerate(("mass", "momentum", "energy", "charge")):
        phi = fl[name]
        div = c.a_x * (phi - np.roll(phi, 1, axis=0)) / setup.dx
        d = (U1[k] - U0[k]) / dt + div - src[name]
        out[name] = d
    out["global"] = {k: (np.sum(v, axis=0) * setup.dx).tolist() if np.ndim(v) > 1 else float(np.sum(v) * setup.dx)
                     for k, v in out.items()}
    return out


def step_diagnostics(state: KineticState, setup: KineticSetup) -> dict:
    """Scalar per-step record: totals, field energy, entropy and constraint residuals."""
    n, j, e, s = conserved_densities(state, setup)
    dx = setup.dx
    c = setup.coefficients
    fe = state.em.energy(setup.scaling.mu0, c.eps0_eff) / state.em.dy
    rec = {
        "t": state.t,
        "step": state.step,
        "mass": float(n.sum() * dx),
        "momentum_x": float(j[:, 0].sum() * dx),
        "momentum_y": float(j[:, 1].sum() * dx),
        "momentum_z": float(j[:, 2].sum() * dx),
        "kinetic_energy": float(e.sum() * dx),
        "field_energy": fe,
        "charge": float(s.sum() * dx),
        "divB_max": float(np.max(np.abs(state.em.div_B()))),
        "gauss_residual": gauss_residual(state, setup),
    }
    Fp, Fm = species_distributions(state, setup)
    if Fp.min() >= 0 and Fm.min() >= 0:
        rec["entropy"] = float(entropy(Fp, Fm, setup.grid).sum() * dx)
    else:
        rec["entropy"] = float("nan")
    return rec


# ---------------------------------------------------------------- stepping

def stable_dt(state: KineticState, setup: KineticSetup, cfl: float = 0.4) -> float:
    """Largest dt respecting transport, Maxwell and explicit-force limits, times cfl."""
    c = setup.coefficients
    g = setup.grid
    lims = [setup.dx / (c.a_x * g.vmax)]
    em = state.em
    ny = em.shape[1]
    s = 1.0 / em.dx ** 2 + (1.0 / em.dy ** 2 if ny > 1 else 0.0)
    lims.append(1.0 / (light_speed(setup.scaling.mu0, c.eps0_eff) * math.sqrt(s)))
    E = np.abs(em.cell_E()).max()
    B = np.abs(em.cell_B()).max()
    qm = max(s.e / s.m for s in setup.species) if setup.form == "pm" else 1.0
    force = qm * (c.cF_E * E + c.cF_B * math.sqrt(3) * g.vmax * B)
    if force > 0:
        lims.append(g.h / force)
    return cfl * min(lims)


def _local_fg(F, G, em, setup, tau):
    """Forces and collisions of the mass-charge form over tau (F frozen in the G update)."""
    c = setup.coefficients
    g = setup.grid
    E = em.cell_E()[:, 0]
    B = em.cell_B()[:, 0]
    kernel = setup.kernel
    if isinstance(kernel, BGK):
        n, j, e = _unit_moments(F, g)
        u = j / n[:, None]
        T = (e / n - np.einsum("ij,ij->i", u, u)) / 3
        if np.any(n <= 0) or np.any(T <= 0):
            raise SimError("non-positive density or temperature")
        M = discrete_maxwellian(g, n, u, T).reshape(F.shape)
        lam = c.a_Q * kernel.frequency(T)[:, None]
        sigma = G @ g.weights
        S = lorentz_term(F, g, E, B, c.cG_E, c.cG_B)
        G_eq = (sigma / n)[:, None] * M - S / lam
        G_new = G_eq + (G - G_eq) * np.exp(-lam * tau)
        F = F - tau * lorentz_term(0.5 * (G + G_new), g, E, B, c.cF_E, c.cF_B)
        n, j, e = _unit_moments(F, g)
        u = j / n[:, None]
        T = (e / n - np.einsum("ij,ij->i", u, u)) / 3
        if np.any(n <= 0) or np.any(T <= 0):
            raise SimError("non-positive density or temperature")
        M = discrete_maxwellian(g, n, u, T).reshape(F.shape)
        lamF = c.a_Q * kernel.frequency(T)[:, None]
        return M + (F - M) * np.exp(-lamF * tau), G_new
    sp = Species(1.0, 1.0, 1)
    nsub = _hs_substeps(F, F, setup, tau, (sp, sp))
    h = tau / nsub
    for _ in range(nsub):
        def rhs(F, G):
            QF = np.stack([collide_self(f, g, sp, kernel, setup.angular) for f in F])
            QG = np.stack([collide(gg, f, g, sp, sp, kernel, setup.angular) for gg, f in zip(G, F)])
            return (c.a_Q * QF - lorentz_term(G, g, E, B, c.cF_E, c.cF_B),
                    c.a_Q * QG - lorentz_term(F, g, E, B, c.cG_E, c.cG_B))
        k1 = rhs(F, G)
        k2 = rhs(F + h * k1[0], G + h * k1[1])
        F = F + 0.5 * h * (k1[0] + k2[0])
        G = G + 0.5 * h * (k1[1] + k2[1])
    return F, G


def _hs_substeps(F1, F2, setup, tau, species):
    c = setup.coefficients
    nu = max(collision_frequency_bound(a, b, setup.grid, *species, setup.kernel, setup.angular)
             for a, b in zip(F1, F2))
    return max(1, int(math.ceil(4 * c.a_Q * nu * tau)))


def _local_pm(Fp, Fm, em, setup, tau):
    """Lorentz force (Heun) and collisions over tau for the species form."""
    c = setup.coefficients
    g = setup.grid
    sp, sm = setup.species
    E = em.cell_E()[:, 0]
    B = em.cell_B()[:, 0]

    def force(Fp, Fm):
        return (-(sp.e / sp.m) * lorentz_term(Fp, g, E, B, c.cF_E, c.cF_B),
                (sm.e / sm.m) * lorentz_term(Fm, g, E, B, c.cF_E, c.cF_B))

    kernel = setup.kernel
    Fp0, Fm0 = Fp, Fm
    if np.any(E) or np.any(B):
        k1 = force(Fp, Fm)
        k2 = force(Fp + tau * k1[0], Fm + tau * k1[1])
        Fp = Fp + 0.5 * tau * (k1[0] + k2[0])
        Fm = Fm + 0.5 * tau * (k1[1] + k2[1])
    if isinstance(kernel, BGK):
        # exponential integrator: g = F - M decays while the non-equilibrium part of the
        # force feeds it with weight (1 - e^{-lam tau})/(lam tau); stiff limit gives g = S/lam
        Mp0, Mm0, _ = mixture_maxwellian(Fp0, Fm0, g, sp, sm)
        Mp, Mm, T = mixture_maxwellian(Fp, Fm, g, sp, sm)
        lt = c.a_Q * kernel.frequency(T) * tau
        decay = np.exp(-lt)[:, None]
        phi = np.where(lt > 1e-8, -np.expm1(-lt) / np.where(lt > 1e-8, lt, 1.0), 1.0)[:, None]
        Fp = Mp + decay * (Fp0 - Mp0) + phi * ((Fp - Fp0) - (Mp - Mp0))
        Fm = Mm + decay * (Fm0 - Mm0) + phi * ((Fm - Fm0) - (Mm - Mm0))
        return Fp, Fm
    nsub = _hs_substeps(Fp, Fm, setup, tau, (sp, sm))
    h = c.a_Q * tau / nsub
    for _ in range(nsub):
        Fp, Fm = zip(*(relax_step(a, b, g, sp, sm, kernel, h, setup.angular) for a, b in zip(Fp, Fm)))
        Fp, Fm = np.stack(Fp), np.stack(Fm)
    return Fp, Fm


def _local(state, setup, tau):
    if setup.form == "fg":
        state.f1, state.f2 = _local_fg(state.f1, state.f2, state.em, setup, tau)
    else:
        state.f1, state.f2 = _local_pm(state.f1, state.f2, state.em, setup, tau)


def vmb_step(state: KineticState, setup: KineticSetup, dt: float) -> KineticState:
    """Strang step: local half, x-transport, Maxwell, local half."""
    c = setup.coefficients
    g = setup.grid
    if c.a_x * g.vmax * dt / setup.dx > 1.0:
        raise CFLError(f"transport CFL {c.a_x * g.vmax * dt / setup.dx:.3g} exceeds 1")
    s = state.copy()
    _local(s, setup, 0.5 * dt)
    vx = g.nodes[:, 0]
    s.f1, fl1 = _transport(s.f1, vx, c.a_x, setup.dx, dt, setup.limiter)
    s.f2, fl2 = _transport(s.f2, vx, c.a_x, setup.dx, dt, setup.limiter)
    w = g.weights
    if setup.form == "fg":
        mass, mom, ener = fl1 @ w, fl1 @ (w[:, None] * g.nodes), 0.5 * (fl1 @ (w * g.v2))
        charge = fl2 @ w
    else:
        sp, sm = setup.species
        mass = sp.m * (fl1 @ w) + sm.m * (fl2 @ w)
        mom = sp.m * (fl1 @ (w[:, None] * g.nodes)) + sm.m * (fl2 @ (w[:, None] * g.nodes))
        ener = 0.5 * (sp.m * (fl1 @ (w * g.v2)) + sm.m * (fl2 @ (w * g.v2)))
        charge = sp.e * (fl1 @ w) - sm.e * (fl2 @ w)
    _, Jc = charge_current(s, setup)
    J = np.zeros_like(s.em.E)
    J[0, :, 0] = charge
    J[1, :, 0] = Jc[:, 1]
    J[2, :, 0] = Jc[:, 2]
    s.em = maxwell_step(s.em, J, dt, setup.scaling.mu0, c.eps0_eff)
    _local(s, setup, 0.5 * dt)
    s.t = state.t + dt
    s.step = state.step + 1
    s.last = {"face_flux": {"mass": mass, "momentum": mom, "energy": ener, "charge": charge}, "dt": dt}
    return s


def run(state: KineticState, setup: KineticSetup, tmax: float, dt: float | None = None, callback=None,
        cfl: float = 0.4):
    """Advance to tmax with equal steps; callback(state) after every step."""
    if dt is None:
        dt = stable_dt(state, setup, cfl)
    if tmax <= state.t:
        return state
    nsteps = max(1, int(math.ceil((tmax - state.t) / dt - 1e-9)))
    dt = (tmax - state.t) / nsteps
    for _ in range(nsteps):
        state = vmb_step(state, setup, dt)
        if callback is not None:
            callback(state)
    return state


def equilibrium_state(setup: KineticSetup, n=(1.0, 1.0), T: float = 1.0) -> KineticState:
    """Global Maxwellians at rest with E = B = 0 (charge-neutral for the given densities)."""
    g = setup.grid
    sp, sm = setup.species
    ones = np.ones(setup.nx)
    Fp = discrete_maxwellian(g, n[0] * ones, np.zeros((setup.nx, 3)), T * ones, sp.m)
    Fm = discrete_maxwellian(g, n[1] * ones, np.zeros((setup.nx, 3)), T * ones, sm.m)
    em = EMField.zeros(setup.nx, 1, setup.length)
    if setup.form == "fg":
        from .kinetic_core import to_mass_charge

        F, G = to_mass_charge(Fp, Fm, sp, sm)
        return KineticState(F, G, em)
    # shared multipliers, so the species-form relaxation leaves it fixed
    Fp, Fm, _ = mixture_maxwellian(Fp, Fm, g, sp, sm)
    return KineticState(Fp, Fm, em)
