"""Limit-system solvers.

Compressible models (1D periodic, cells of width dx): finite volumes with MUSCL
reconstruction and a Rusanov flux, SSP-RK2 in time, fields on the Yee mesh of
`vmb_sim` with ny = 1.  Conserved variables are (rho, sigma, rho u, e) with
e = rho|u|^2/2 + 3/2 (n+ + n-) T and p = (n+ + n-) T.

Incompressible models (2D periodic, collocated spectral grid): velocity and
temperature are Fourier pseudo-spectral with 2/3 dealiasing, Leray projection and
an integrating factor for diffusion (SSP-RK3); the magnetic field stays on the
staggered mesh so that div B is preserved by the discrete curl.  rho = -theta.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .kinetic_core import ELECTRON, ION, Species
from .vmb_sim import CFLError, EMField, _LIMITERS, maxwell_cfl, maxwell_step


class FluidError(RuntimeError):
    pass


class Model(str, enum.Enum):
    EulerMaxwell15 = "EulerMaxwell15"
    EMHD = "EMHD"
    ResistiveMHD = "ResistiveMHD"
    NSFMaxwell = "NSFMaxwell"
    ViscousMHD = "ViscousMHD"
    InviscidMHD = "InviscidMHD"

    @property
    def incompressible(self) -> bool:
        return self in (Model.NSFMaxwell, Model.ViscousMHD, Model.InviscidMHD)


@dataclass(frozen=True)
class FluidCoefficients:
    eta: float = 1.0
    nu: float = 0.0
    kappa: float = 0.0
    mu0: float = 1.0
    eps0: float = 1.0

    def __post_init__(self):
        for k in ("eta", "nu", "kappa", "mu0", "eps0"):
            if getattr(self, k) < 0:
                raise ValueError(f"{k} must be non-negative")
        if self.mu0 == 0 or self.eps0 == 0:
            raise ValueError("mu0 and eps0 must be positive")


@dataclass
class FluidState:
    """Primitive fields on the mesh; u has shape (3, nx, ny)."""

    model: Model
    rho: np.ndarray
    u: np.ndarray
    T: np.ndarray
    sigma: np.ndarray
    em: EMField
    coeffs: FluidCoefficients = field(default_factory=FluidCoefficients)
    species: tuple = (ION, ELECTRON)
    t: float = 0.0
    theta: np.ndarray | None = None

    def __post_init__(self):
        self.model = Model(self.model)

    def copy(self):
        return dataclasses.replace(
            self, rho=self.rho.copy(), u=self.u.copy(), T=self.T.copy(), sigma=self.sigma.copy(),
            em=self.em.copy(), theta=None if self.theta is None else self.theta.copy(),
        )

    @property
    def J(self):
        """Current at cell centres, (3, nx, ny)."""
        return current(self)


def partial_densities(rho, sigma, sp_plus: Species = ION, sp_minus: Species = ELECTRON):
    """n+- = (e-+ rho +- m-+ sigma) / (e- m+ + e+ m-)."""
    det = sp_minus.e * sp_plus.m + sp_plus.e * sp_minus.m
    if det == 0:
        raise ValueError("e_- m_+ + e_+ m_- vanishes")
    rho = np.asarray(rho, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return (sp_minus.e * rho + sp_minus.m * sigma) / det, (sp_plus.e * rho - sp_plus.m * sigma) / det


def pressure(rho, sigma, T, species=(ION, ELECTRON)):
    n_p, n_m = partial_densities(rho, sigma, *species)
    return (n_p + n_m) * T


# ---------------------------------------------------------------- compressible 1D

def _cell(a):
    """Face (i+1/2) values averaged to cells along x."""
    return 0.5 * (a + np.roll(a, 1, axis=0))


def _face(a):
    """Cell values averaged to faces i+1/2 along x."""
    return 0.5 * (a + np.roll(a, -1, axis=0))


def _conserved(rho, sigma, u, T, species):
    N = sum(partial_densities(rho, sigma, *species))
    e = 0.5 * rho * np.sum(u ** 2, axis=0) + 1.5 * N * T
    return np.concatenate([rho[None], sigma[None], rho[None] * u, e[None]])


def _primitive(U, species):
    rho, sigma = U[0], U[1]
    if np.any(rho <= 0):
        raise FluidError("vacuum: non-positive density")
    u = U[2:5] / rho
    N = sum(partial_densities(rho, sigma, *species))
    T = (U[5] - 0.5 * rho * np.sum(u ** 2, axis=0)) / (1.5 * N)
    if np.any(T <= 0) or np.any(N <= 0):
        raise FluidError("negative temperature or particle density")
    return rho, sigma, u, T


def _physical_flux(rho, sigma, u, T, species, advect_sigma):
    p = pressure(rho, sigma, T, species)
    e = 0.5 * rho * np.sum(u ** 2, axis=0) + 1.5 * p
    ux = u[0]
    f = np.empty((6,) + rho.shape)
    f[0] = rho * ux
    f[1] = sigma * ux if advect_sigma else 0.0
    f[2:5] = rho * ux * u
    f[2] += p
    f[5] = (e + p) * ux
    return f, p


def _rusanov(U, species, limiter, advect_sigma, dx):
    """Face flux at i+1/2 along axis 1 of U (6, nx, ...)."""
    rho, sigma, u, T = _primitive(U, species)
    p = pressure(rho, sigma, T, species)
    W = np.concatenate([rho[None], sigma[None], u, p[None]])
    fwd = np.roll(W, -1, axis=1) - W
    bwd = W - np.roll(W, 1, axis=1)
    slope = _LIMITERS[limiter](bwd, fwd)
    WL = W + 0.5 * slope
    WR = np.roll(W - 0.5 * slope, -1, axis=1)
    out = []
    for Wf in (WL, WR):
        r, s, uu, pp = Wf[0], Wf[1], Wf[2:5], Wf[5]
        if np.any(r <= 0) or np.any(pp <= 0):
            raise FluidError("reconstruction produced vacuum")
        N = sum(partial_densities(r, s, *species))
        TT = pp / N
        f, _ = _physical_flux(r, s, uu, TT, species, advect_sigma)
        Uf = _conserved(r, s, uu, TT, species)
        c = np.abs(uu[0]) + np.sqrt(5 * pp / (3 * r))
        out.append((f, Uf, c))
    (fL, UL, cL), (fR, UR, cR) = out
    a = np.maximum(cL, cR)
    return 0.5 * (fL + fR) - 0.5 * a * (UR - UL)


def max_wave_speed(state: FluidState) -> float:
    p = pressure(state.rho, state.sigma, state.T, state.species)
    return float(np.max(np.abs(state.u[0]) + np.sqrt(5 * p / (3 * state.rho))))


def _hyperbolic(U, dt, dx, species, limiter, advect_sigma, source):
    """SSP-RK2 with a frozen source; returns (U_new, time-averaged face flux)."""
    F0 = _rusanov(U, species, limiter, advect_sigma, dx)
    U1 = U - dt * (F0 - np.roll(F0, 1, axis=1)) / dx + dt * source
    F1 = _rusanov(U1, species, limiter, advect_sigma, dx)
    F = 0.5 * (F0 + F1)
    return U - dt * (F - np.roll(F, 1, axis=1)) / dx + dt * source, F


def _check_1d(state):
    if state.model.incompressible:
        raise FluidError(f"{state.model.value} is an incompressible model")
    if state.em.shape[1] != 1:
        raise FluidError("compressible solvers are one-dimensional (ny = 1)")


def _lorentz_source(sigma, J, E, B):
    """Momentum and energy sources sigma E + J x B and E.J at cells; vectors (3, nx, ny)."""
    src = np.zeros((6,) + sigma.shape)
    src[2:5] = sigma * E + np.cross(J, B, axis=0)
    src[5] = np.sum(E * J, axis=0)
    return src


def _cell_fields(em):
    return np.moveaxis(em.cell_E(), -1, 0), np.moveaxis(em.cell_B(), -1, 0)


def _ohm_implicit(em, u, coeffs, dt, cfl_check=True):
    """Leapfrog Maxwell with J = (E + u x B)/eta taken implicitly in the E update.

    Returns (em_new, J on the E-mesh).
    """
    mu0, eps0, eta = coeffs.mu0, coeffs.eps0, coeffs.eta
    if cfl_check and maxwell_cfl(em, dt, mu0, eps0) > 1.0 + 1e-12:
        raise CFLError("Maxwell CFL number exceeds 1")
    out = em.copy()
    out.B = out.B - 0.5 * dt * out.curl_E()
    uxB = _uxB_on_E_mesh(u, out)
    a = dt / (eps0 * eta)
    out.E = (out.E + dt * out.curl_B() / (mu0 * eps0) - a * uxB) / (1.0 + a)
    J = (out.E + uxB) / eta
    out.B = out.B - 0.5 * dt * out.curl_E()
    return out, J


def _uxB_on_E_mesh(u, em):
    """(u x B) at the E staggering from cell-centred u (compressible 1D layout)."""
    B = np.moveaxis(em.cell_B(), -1, 0)
    c = np.cross(u, B, axis=0)
    c[0] = _face(c[0])
    return c


def euler_maxwell_step(state: FluidState, dt: float, limiter: str = "mc") -> FluidState:
    """1.5-fluid Euler-Maxwell: Lorentz sources sigma E + sigma u x B, J = sigma u."""
    _check_1d(state)
    s = state.copy()
    sp = s.species
    dx = s.em.dx
    if max_wave_speed(s) * dt / dx > 1.0:
        raise CFLError("fluid CFL number exceeds 1")
    E, B = _cell_fields(s.em)
    U = _conserved(s.rho, s.sigma, s.u, s.T, sp)
    src = _lorentz_source(s.sigma, s.sigma * s.u, E, B)
    U, F = _hyperbolic(U, dt, dx, sp, limiter, True, src)
    s.rho, s.sigma, s.u, s.T = _primitive(U, sp)
    J = s.sigma * s.u
    J[0] = F[1]
    s.em = maxwell_step(s.em, J, dt, s.coeffs.mu0, s.coeffs.eps0)
    s.t += dt
    return s


def emhd_step(state: FluidState, dt: float, limiter: str = "mc") -> FluidState:
    """Electromagneto-hydrodynamics: J = (E + u x B)/eta, d_t sigma + div J = 0, full Maxwell."""
    _check_1d(state)
    s = state.copy()
    sp = s.species
    dx = s.em.dx
    if max_wave_speed(s) * dt / dx > 1.0:
        raise CFLError("fluid CFL number exceeds 1")
    s.em, J = _ohm_implicit(s.em, s.u, s.coeffs, dt)
    s.sigma = s.sigma - dt * (J[0] - np.roll(J[0], 1, axis=0)) / dx
    Jc = J.copy()
    Jc[0] = _cell(J[0])
    E, B = _cell_fields(s.em)
    U = _conserved(s.rho, s.sigma, s.u, s.T, sp)
    U, _ = _hyperbolic(U, dt, dx, sp, limiter, False, _lorentz_source(s.sigma, Jc, E, B))
    s.rho, s.sigma, s.u, s.T = _primitive(U, sp)
    s.t += dt
    return s


def _resistive_E(em, u, coeffs):
    J = em.curl_B() / coeffs.mu0
    return coeffs.eta * J - _uxB_on_E_mesh(u, em), J


def resistive_mhd_step(state: FluidState, dt: float, limiter: str = "mc", freeze_flow: bool = False) -> FluidState:
    """Compressible resistive MHD: J = curl B/mu0, E = eta J - u x B, d_t B = -curl E, sigma = 0.

    freeze_flow skips the fluid update (pure induction-diffusion with a prescribed u).
    """
    _check_1d(state)
    s = state.copy()
    sp = s.species
    dx = s.em.dx
    c = s.coeffs
    if max_wave_speed(s) * dt / dx > 1.0:
        raise CFLError("fluid CFL number exceeds 1")
    if c.eta * dt / (c.mu0 * dx ** 2) > 0.5:
        raise CFLError("magnetic diffusion number exceeds 1/2")
    s.sigma = np.zeros_like(s.sigma)
    em = s.em
    # Heun for the induction equation with u frozen
    E0, J0 = _resistive_E(em, s.u, c)
    em1 = em.copy()
    em1.B = em.B - dt * em.curl_E_of(E0)
    E1, J1 = _resistive_E(em1, s.u, c)
    Eh = 0.5 * (E0 + E1)
    Jh = 0.5 * (J0 + J1)
    em.B = em.B - dt * em.curl_E_of(Eh)
    em.E = _resistive_E(em, s.u, c)[0]
    Jc = Jh.copy()
    Jc[0] = _cell(Jh[0])
    Ec = Eh.copy()
    Ec[0] = _cell(Eh[0])
    Bc = 0.5 * (np.moveaxis(em1.cell_B(), -1, 0) + np.moveaxis(em.cell_B(), -1, 0))
    if freeze_flow:
        s.t += dt
        return s
    U = _conserved(s.rho, s.sigma, s.u, s.T, sp)
    U, _ = _hyperbolic(U, dt, dx, sp, limiter, False, _lorentz_source(s.sigma, Jc, Ec, Bc))
    s.rho, s.sigma, s.u, s.T = _primitive(U, sp)
    s.t += dt
    return s


# ---------------------------------------------------------------- incompressible 2D

class Spectral2D:
    """Wavenumbers, dealiasing mask and half-cell shifts for an nx x ny periodic box."""

    def __init__(self, nx: int, ny: int, lx: float = 2 * np.pi, ly: float = 2 * np.pi):
        self.nx, self.ny = nx, ny
        self.dx, self.dy = lx / nx, ly / ny
        kx = 2 * np.pi * np.fft.fftfreq(nx, d=self.dx)
        ky = 2 * np.pi * np.fft.fftfreq(ny, d=self.dy)
        self.kx, self.ky = np.meshgrid(kx, ky, indexing="ij")
        self.k2 = self.kx ** 2 + self.ky ** 2
        self.k2_safe = np.where(self.k2 == 0, 1.0, self.k2)
        ix = np.abs(np.fft.fftfreq(nx) * nx)
        iy = np.abs(np.fft.fftfreq(ny) * ny)
        IX, IY = np.meshgrid(ix, iy, indexing="ij")
        self.mask = (IX < nx / 3) & (IY < ny / 3)
        # Nyquist modes are dropped so that shifted fields stay real
        self.nyq = (IX == nx // 2) | (IY == ny // 2) if (nx % 2 == 0 or ny % 2 == 0) else np.zeros_like(IX, bool)

    def fft(self, a):
        return np.fft.fft2(a, axes=(-2, -1))

    def ifft(self, a):
        return np.real(np.fft.ifft2(a, axes=(-2, -1)))

    def shift(self, a, sx: float, sy: float):
        """a evaluated at x + sx dx, y + sy dy."""
        h = self.fft(a) * np.exp(1j * (self.kx * sx * self.dx + self.ky * sy * self.dy))
        h = np.where(self.nyq, 0.0, h)
        return self.ifft(h)

    def project(self, uh):
        """Leray projection of the in-plane components; the z component is untouched."""
        kdotu = (self.kx * uh[0] + self.ky * uh[1]) / self.k2_safe
        out = uh.copy()
        out[0] = uh[0] - self.kx * kdotu
        out[1] = uh[1] - self.ky * kdotu
        return out

    def grad(self, ah):
        return 1j * self.kx * ah, 1j * self.ky * ah

    def div(self, u):
        uh = self.fft(u)
        return self.ifft(1j * self.kx * uh[0] + 1j * self.ky * uh[1])


def _inc_check(state):
    if not state.model.incompressible:
        raise FluidError(f"{state.model.value} is a compressible model")


def _cell_B2(em):
    return np.moveaxis(em.cell_B(), -1, 0)


def _to_E_mesh(sp: Spectral2D, v):
    """Collocated vector (3, nx, ny) to the E staggering."""
    return np.stack([sp.shift(v[0], 0.5, 0.0), sp.shift(v[1], 0.0, 0.5), v[2]])


def _from_E_mesh(sp: Spectral2D, v):
    return np.stack([sp.shift(v[0], -0.5, 0.0), sp.shift(v[1], 0.0, -0.5), v[2]])


def _from_B_mesh(sp: Spectral2D, B):
    return np.stack([sp.shift(B[0], 0.0, -0.5), sp.shift(B[1], -0.5, 0.0), sp.shift(B[2], -0.5, -0.5)])


def _advection(sp: Spectral2D, u, a):
    """u . grad a, pseudo-spectral with dealiasing; a of shape (..., nx, ny)."""
    ah = sp.fft(a) * sp.mask
    gx, gy = sp.grad(ah)
    return u[0] * sp.ifft(gx) + u[1] * sp.ifft(gy)


def _if_rk3(uh, theta_h, rhs, decay_u, decay_t, dt):
    """Integrating-factor SSP-RK3 on Fourier coefficients; rhs returns (Nu_hat, Nt_hat)."""
    def E(d, tau):
        return np.exp(-d * tau)

    Nu, Nt = rhs(uh, theta_h)
    u1 = E(decay_u, dt) * (uh + dt * Nu)
    t1 = E(decay_t, dt) * (theta_h + dt * Nt)
    Nu, Nt = rhs(u1, t1)
    u2 = 0.75 * E(decay_u, dt / 2) * uh + 0.25 * E(decay_u, -dt / 2) * (u1 + dt * Nu)
    t2 = 0.75 * E(decay_t, dt / 2) * theta_h + 0.25 * E(decay_t, -dt / 2) * (t1 + dt * Nt)
    Nu, Nt = rhs(u2, t2)
    un = E(decay_u, dt) * uh / 3 + 2 / 3 * E(decay_u, dt / 2) * (u2 + dt * Nu)
    tn = E(decay_t, dt) * theta_h / 3 + 2 / 3 * E(decay_t, dt / 2) * (t2 + dt * Nt)
    return un, tn


def _fluid_inc(state: FluidState, sp: Spectral2D, dt: float, force):
    """Advance u (projected) and theta with frozen body force (3, nx, ny)."""
    c = state.coeffs
    fh = sp.fft(force)

    def rhs(uh, th):
        u = sp.ifft(uh * sp.mask)
        adv = np.stack([_advection(sp, u, u[k]) for k in range(3)])
        Nu = sp.project(-sp.fft(adv) + fh) * sp.mask
        Nt = -sp.fft(_advection(sp, u, sp.ifft(th))) * sp.mask
        return Nu, Nt

    uh = sp.project(sp.fft(state.u))
    th = sp.fft(state.theta)
    uh, th = _if_rk3(uh, th, rhs, c.nu * sp.k2, c.kappa * sp.k2, dt)
    state.u = sp.ifft(uh)
    state.theta = sp.ifft(th)


def _streamfunction_faces(sp: Spectral2D, u):
    """Discretely divergence-free face velocities from psi at cell corners."""
    uh = sp.fft(u)
    omega = 1j * sp.kx * uh[1] - 1j * sp.ky * uh[0]
    psi_h = omega / sp.k2_safe
    psi_h = np.where(sp.k2 == 0, 0.0, psi_h)
    psi = sp.shift(sp.ifft(psi_h), 0.5, 0.5)
    # u = (d psi/dy, -d psi/dx): ux at (i+1/2, j), uy at (i, j+1/2)
    ux = (psi - np.roll(psi, 1, axis=1)) / sp.dy
    uy = -(psi - np.roll(psi, 1, axis=0)) / sp.dx
    return ux, uy


def _fv_advect(theta, ux, uy, dx, dy, dt, limiter="mc"):
    """SSP-RK2 MUSCL upwind advection of theta by divergence-free face velocities."""
    def flux_div(a):
        out = np.zeros_like(a)
        for axis, vel, d in ((0, ux, dx), (1, uy, dy)):
            fwd = np.roll(a, -1, axis=axis) - a
            bwd = a - np.roll(a, 1, axis=axis)
            slope = _LIMITERS[limiter](bwd, fwd)
            left = a + 0.5 * slope
            right = np.roll(a - 0.5 * slope, -1, axis=axis)
            f = np.where(vel > 0, vel * left, vel * right)
            out += (f - np.roll(f, 1, axis=axis)) / d
        return out

    a1 = theta - dt * flux_div(theta)
    return 0.5 * theta + 0.5 * (a1 - dt * flux_div(a1))


def _induction_ohm(em, sp, u, coeffs, dt):
    """Heun for d_t B = -curl(eta J - u x B), J = curl B/mu0; returns (em, J collocated at mid-step)."""
    def E_of(em_):
        Jm = em_.curl_B() / coeffs.mu0
        Bc = _cell_B2(em_)
        uxB = _to_E_mesh(sp, np.cross(u, Bc, axis=0))
        return coeffs.eta * Jm - uxB, Jm

    E0, J0 = E_of(em)
    em1 = em.copy()
    em1.B = em.B - dt * em.curl_E_of(E0)
    E1, J1 = E_of(em1)
    out = em.copy()
    out.B = em.B - dt * em.curl_E_of(0.5 * (E0 + E1))
    out.E = E_of(out)[0]
    Jh = 0.5 * (J0 + J1)
    Bh = 0.5 * (_cell_B2(em) + _cell_B2(em1))
    return out, _from_E_mesh(sp, Jh), Bh


def _check_inc_dt(state, sp, dt, diffusive_B=True):
    c = state.coeffs
    umax = float(np.max(np.abs(state.u[:2]))) if state.u.size else 0.0
    if umax * dt * (1 / sp.dx + 1 / sp.dy) > 1.0:
        raise CFLError("advective CFL number exceeds 1")
    if diffusive_B and c.eta * dt / c.mu0 * (1 / sp.dx ** 2 + 1 / sp.dy ** 2) > 0.5:
        raise CFLError("magnetic diffusion number exceeds 1/2")


def nsfm_step(state: FluidState, dt: float) -> FluidState:
    """Incompressible Navier-Stokes-Fourier-Maxwell with Ohm's law E + u x B = eta J."""
    _inc_check(state)
    s = state.copy()
    sp = Spectral2D(*s.rho.shape, s.em.dx * s.rho.shape[0], s.em.dy * s.rho.shape[1])
    _check_inc_dt(s, sp, dt, diffusive_B=False)
    c = s.coeffs
    if maxwell_cfl(s.em, dt, c.mu0, c.eps0) > 1.0 + 1e-12:
        raise CFLError("Maxwell CFL number exceeds 1")
    out = s.em.copy()
    out.B = out.B - 0.5 * dt * out.curl_E()
    uxB = _to_E_mesh(sp, np.cross(s.u, _cell_B2(out), axis=0))
    a = dt / (c.eps0 * c.eta)
    out.E = (out.E + dt * out.curl_B() / (c.mu0 * c.eps0) - a * uxB) / (1.0 + a)
    J = (out.E + uxB) / c.eta
    Bmid = _cell_B2(out)
    out.B = out.B - 0.5 * dt * out.curl_E()
    s.em = out
    _fluid_inc(s, sp, dt, np.cross(_from_E_mesh(sp, J), Bmid, axis=0))
    s.rho = -s.theta
    s.sigma = np.zeros_like(s.rho)
    s.t += dt
    return s


def viscous_mhd_step(state: FluidState, dt: float) -> FluidState:
    """Incompressible viscous resistive MHD with Ampere closure curl B = mu0 J."""
    _inc_check(state)
    s = state.copy()
    sp = Spectral2D(*s.rho.shape, s.em.dx * s.rho.shape[0], s.em.dy * s.rho.shape[1])
    _check_inc_dt(s, sp, dt)
    s.em, J, Bh = _induction_ohm(s.em, sp, s.u, s.coeffs, dt)
    _fluid_inc(s, sp, dt, np.cross(J, Bh, axis=0))
    s.rho = -s.theta
    s.sigma = np.zeros_like(s.rho)
    s.t += dt
    return s


def inviscid_mhd_step(state: FluidState, dt: float, limiter: str = "mc") -> FluidState:
    """Incompressible inviscid resistive MHD; theta by limited finite volumes (no diffusion)."""
    _inc_check(state)
    s = state.copy()
    s.coeffs = dataclasses.replace(s.coeffs, nu=0.0, kappa=0.0)
    sp = Spectral2D(*s.rho.shape, s.em.dx * s.rho.shape[0], s.em.dy * s.rho.shape[1])
    _check_inc_dt(s, sp, dt)
    ux, uy = _streamfunction_faces(sp, s.u)
    theta = _fv_advect(s.theta, ux, uy, sp.dx, sp.dy, dt, limiter)
    s.em, J, Bh = _induction_ohm(s.em, sp, s.u, s.coeffs, dt)
    _fluid_inc(s, sp, dt, np.cross(J, Bh, axis=0))
    s.theta = theta
    s.rho = -s.theta
    s.sigma = np.zeros_like(s.rho)
    s.t += dt
    return s


STEPPERS = {
    Model.EulerMaxwell15: euler_maxwell_step,
    Model.EMHD: emhd_step,
    Model.ResistiveMHD: resistive_mhd_step,
    Model.NSFMaxwell: nsfm_step,
    Model.ViscousMHD: viscous_mhd_step,
    Model.InviscidMHD: inviscid_mhd_step,
}


def fluid_step(state: FluidState, dt: float) -> FluidState:
    return STEPPERS[state.model](state, dt)


def stable_fluid_dt(state: FluidState, cfl: float = 0.4) -> float:
    c = state.coeffs
    em = state.em
    lims = []
    if state.model.incompressible:
        umax = float(np.max(np.abs(state.u[:2])))
        if umax > 0:
            lims.append(1.0 / (umax * (1 / em.dx + 1 / em.dy)))
        if state.model is Model.NSFMaxwell:
            lims.append(1.0 / (math.sqrt(1 / (c.mu0 * c.eps0)) * math.sqrt(1 / em.dx ** 2 + 1 / em.dy ** 2)))
        elif c.eta > 0:
            lims.append(0.5 * c.mu0 / (c.eta * (1 / em.dx ** 2 + 1 / em.dy ** 2)))
    else:
        lims.append(em.dx / max_wave_speed(state))
        if state.model is Model.ResistiveMHD:
            if c.eta > 0:
                lims.append(0.5 * c.mu0 * em.dx ** 2 / c.eta)
        else:
            lims.append(em.dx * math.sqrt(c.mu0 * c.eps0))
    return cfl * min(lims)


def run_fluid(state: FluidState, tmax: float, dt: float | None = None, callback=None, cfl: float = 0.4):
    if dt is None:
        dt = stable_fluid_dt(state, cfl)
    if tmax <= state.t:
        return state
    nsteps = max(1, int(math.ceil((tmax - state.t) / dt - 1e-9)))
    dt = (tmax - state.t) / nsteps
    for _ in range(nsteps):
        state = fluid_step(state, dt)
        if callback is not None:
            callback(state)
    return state


# ---------------------------------------------------------------- diagnostics

def current(state: FluidState):
    """Model current at cell centres."""
    m = state.model
    c = state.coeffs
    if m is Model.EulerMaxwell15:
        return state.sigma * state.u
    if m is Model.ResistiveMHD:
        J = state.em.curl_B() / c.mu0
        J[0] = _cell(J[0])
        return J
    if m is Model.EMHD:
        E, B = _cell_fields(state.em)
        return (E + np.cross(state.u, B, axis=0)) / c.eta
    sp = Spectral2D(*state.rho.shape, state.em.dx * state.rho.shape[0], state.em.dy * state.rho.shape[1])
    if m is Model.NSFMaxwell:
        E = _from_E_mesh(sp, state.em.E)
        return (E + np.cross(state.u, _cell_B2(state.em), axis=0)) / c.eta
    return _from_E_mesh(sp, state.em.curl_B() / c.mu0)


def energies(state: FluidState) -> dict:
    """Kinetic, internal and field energies (domain integrals)."""
    cell = state.em.dx * state.em.dy
    c = state.coeffs
    ke = 0.5 * np.sum(state.rho * np.sum(state.u ** 2, axis=0)) * cell
    if state.model.incompressible:
        ke = 0.5 * np.sum(state.u ** 2) * cell
        ie = 0.0
    else:
        ie = 1.5 * np.sum(pressure(state.rho, state.sigma, state.T, state.species)) * cell
    fe = 0.5 * cell * (np.sum(state.em.B ** 2) / c.mu0)
    if state.model in (Model.EulerMaxwell15, Model.EMHD, Model.NSFMaxwell):
        fe += 0.5 * cell * c.eps0 * np.sum(state.em.E ** 2)
    return {"kinetic": float(ke), "internal": float(ie), "field": float(fe), "total": float(ke + ie + fe)}


def constraint_defects(state: FluidState) -> dict:
    out = {"divB": float(np.max(np.abs(state.em.div_B())))}
    if state.model.incompressible:
        sp = Spectral2D(*state.rho.shape, state.em.dx * state.rho.shape[0], state.em.dy * state.rho.shape[1])
        out["divu"] = float(np.max(np.abs(sp.div(state.u))))
        out["boussinesq"] = float(np.max(np.abs(state.rho + state.theta)))
    if state.model in (Model.ResistiveMHD, Model.ViscousMHD, Model.InviscidMHD):
        out["sigma"] = float(np.max(np.abs(state.sigma)))
    return out


def make_state(model, nx: int, ny: int = 1, length: float = 2 * np.pi, coeffs: FluidCoefficients | None = None,
               species=(ION, ELECTRON), rho=1.0, T=1.0) -> FluidState:
    """Uniform state at rest with zero fields."""
    model = Model(model)
    if not model.incompressible and ny != 1:
        raise FluidError("compressible models are one-dimensional")
    shape = (nx, ny)
    em = EMField.zeros(nx, ny, length)
    st = FluidState(model, np.full(shape, float(rho)), np.zeros((3,) + shape), np.full(shape, float(T)),
                    np.zeros(shape), em, coeffs or FluidCoefficients(), species)
    if model.incompressible:
        st.theta = np.zeros(shape)
        st.rho = -st.theta
    return st
