import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import fluid_models as fm
from artifact.kinetic_core import Species


@settings(max_examples=50, deadline=None)
@given(np_=st.floats(0.1, 5), nm=st.floats(0.1, 5), mp=st.floats(0.2, 3), mm=st.floats(0.2, 3))
def test_partial_densities_invert_mass_and_charge(np_, nm, mp, mm):
    sp, sm = Species(mp, 1.0, 1), Species(mm, 1.0, -1)
    rho = mp * np_ + mm * nm
    sigma = np_ - nm
    a, b = fm.partial_densities(rho, sigma, sp, sm)
    assert a == pytest.approx(np_, rel=1e-10) and b == pytest.approx(nm, rel=1e-10)


def test_coefficients_and_shape_validation():
    with pytest.raises(ValueError):
        fm.FluidCoefficients(eta=-1)
    with pytest.raises(ValueError):
        fm.FluidCoefficients(mu0=0)
    with pytest.raises(fm.FluidError):
        fm.make_state("EMHD", 8, 4)


@pytest.mark.parametrize("model", [m.value for m in fm.Model])
def test_uniform_state_is_stationary(model):
    ny = 8 if fm.Model(model).incompressible else 1
    s = fm.make_state(model, 16, ny, coeffs=fm.FluidCoefficients(eta=0.5, nu=0.1, kappa=0.1))
    out = fm.run_fluid(s.copy(), 0.05, dt=0.005)
    for a, b in ((out.rho, s.rho), (out.u, s.u), (out.T, s.T), (out.em.E, s.em.E), (out.em.B, s.em.B)):
        assert np.max(np.abs(a - b)) < 1e-13
    assert math.isclose(out.t, 0.05)


def _grid(n):
    return (np.arange(n) + 0.5) * 2 * np.pi / n


def test_euler_maxwell_conserves_mass_and_charge():
    n = 64
    s = fm.make_state("EulerMaxwell15", n)
    x = _grid(n)
    s.rho[:, 0] += 0.1 * np.sin(x)
    s.u[1, :, 0] = 0.2 * np.cos(x)
    s.em.B[2, :, 0] = 0.3 * np.sin(2 * x)
    m0, q0 = s.rho.sum(), s.sigma.sum()
    s = fm.run_fluid(s, 0.2)
    assert abs(s.rho.sum() - m0) < 1e-11 * m0
    assert abs(s.sigma.sum() - q0) < 1e-11
    assert fm.constraint_defects(s)["divB"] < 1e-12


def test_acoustic_pulse_travels_at_sound_speed():
    n, a = 512, 1e-3
    s = fm.make_state("EulerMaxwell15", n)
    c = math.sqrt(5.0 / 3.0 * float(fm.pressure(1.0, 0.0, 1.0)))
    x = _grid(n)
    g = np.exp(-((x - 2.0) / 0.3) ** 2)
    s.rho[:, 0] = 1 + a * g
    s.T[:, 0] = (1 + a * g) ** (2.0 / 3.0)
    s.u[0, :, 0] = c * a * g
    tm = 1.0
    out = fm.run_fluid(s, tm, cfl=0.3)
    d = out.rho[:, 0] - 1
    shift = np.sum(x * d) / np.sum(d) - np.sum(x * (s.rho[:, 0] - 1)) / np.sum(s.rho[:, 0] - 1)
    assert shift == pytest.approx(c * tm, rel=0.02)


def test_resistive_mhd_diffusion_rate():
    eta, n = 0.5, 64
    s = fm.make_state("ResistiveMHD", n, coeffs=fm.FluidCoefficients(eta=eta))
    s.em.B[2, :, 0] = np.cos(3 * (np.arange(n) + 1.0) * 2 * np.pi / n)
    b0 = np.abs(s.em.B[2]).max()
    for _ in range(100):
        s = fm.resistive_mhd_step(s, 0.001, freeze_flow=True)
    rate = -math.log(np.abs(s.em.B[2]).max() / b0) / 0.1
    assert rate == pytest.approx(9 * eta, rel=0.03)


@pytest.mark.parametrize("model", ["NSFMaxwell", "ViscousMHD", "InviscidMHD"])
def test_incompressible_constraints_and_energy(model):
    n = 32
    s = fm.make_state(model, n, n, coeffs=fm.FluidCoefficients(eta=1.0, nu=0.05, kappa=0.05))
    X, Y = np.meshgrid(_grid(n), _grid(n), indexing="ij")
    s.u[0] = np.sin(X) * np.cos(Y)
    s.u[1] = -np.cos(X) * np.sin(Y)
    s.theta = 0.1 * np.cos(X + Y)
    s.rho = -s.theta
    s.em.B[2] = 0.2 * np.sin(2 * X)
    e0 = fm.energies(s)["total"]
    s = fm.run_fluid(s, 0.2)
    d = fm.constraint_defects(s)
    assert d["divu"] < 1e-10 and d["boussinesq"] < 1e-12 and d["divB"] < 1e-10
    if model != "NSFMaxwell":
        assert d["sigma"] == 0.0
    assert fm.energies(s)["total"] <= e0 * (1 + 1e-9)


def test_taylor_green_decay():
    nu, n = 0.2, 16
    s = fm.make_state("ViscousMHD", n, n, coeffs=fm.FluidCoefficients(nu=nu))
    X, Y = np.meshgrid(_grid(n), _grid(n), indexing="ij")
    s.u[0] = np.sin(X) * np.cos(Y)
    s.u[1] = -np.cos(X) * np.sin(Y)
    a0 = np.abs(s.u[0]).max()
    s = fm.run_fluid(s, 0.5, dt=0.01)
    assert np.abs(s.u[0]).max() / a0 == pytest.approx(math.exp(-2 * nu * 0.5), rel=1e-6)
