import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import limit_harness as lh
from artifact import vmb_sim as vs
from artifact.collision import BGK
from artifact.kinetic_core import Regime, ScalingRegime, Species, VelocityGrid, discrete_maxwellian

G8 = VelocityGrid(6.0, 8)


def _setup(regime, eps=0.1, nx=8, grid=G8, species=None, **kw):
    sp = species or (Species(1.0, 1.0, 1), Species(1.0, 1.0, -1))
    return vs.KineticSetup(grid, nx, ScalingRegime(regime, eps), sp, BGK(1.0), **kw)


def test_discrete_div_curl_identities():
    rng = np.random.default_rng(0)
    em = vs.EMField(rng.standard_normal((3, 6, 5)), rng.standard_normal((3, 6, 5)), 0.3, 0.4)
    assert np.max(np.abs(em.__class__(em.E, em.curl_E(), em.dx, em.dy).div_B())) < 1e-12
    curlB = em.curl_B()
    d = (curlB[0] - np.roll(curlB[0], 1, 0)) / em.dx + (curlB[1] - np.roll(curlB[1], 1, 1)) / em.dy
    assert np.max(np.abs(d)) < 1e-12
    assert em.cell_E().shape == (6, 5, 3) and em.cell_B().shape == (6, 5, 3)


def test_maxwell_cfl_guard_and_dispersion_limit():
    em = vs.EMField.zeros(16, 1)
    with pytest.raises(vs.CFLError):
        vs.maxwell_step(em, None, 1.01 * em.dx)
    om = vs.yee_dispersion(1.0, 0.0, 1e-3, 1.0, 1e-4, 1.0)
    assert math.isclose(om, 1.0, rel_tol=1e-6)
    with pytest.raises(vs.CFLError):
        vs.yee_dispersion(8.0, 0.0, 0.39, 1.0, 0.5, 1.0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 16), kappa=st.floats(0.1, 100.0))
def test_gauss_consistent_field(seed, kappa):
    rng = np.random.default_rng(seed)
    sigma = rng.standard_normal(12)
    sigma -= sigma.mean()
    Ex = vs.gauss_consistent_Ex(sigma, 0.5, kappa)
    div = (Ex - np.roll(Ex, 1)) / 0.5
    assert np.allclose(div, kappa * sigma, atol=1e-10 * kappa)


def test_regime_coefficient_table():
    e = 0.1
    c = vs.regime_coefficients(ScalingRegime("D", e))
    assert np.allclose([c.a_x, c.cF_E, c.cF_B, c.cG_E, c.cG_B, c.a_Q], [10, 1, 10, 1e3, 1e4, 1e3])
    assert math.isclose(c.eps0_eff, e ** 3)
    a = vs.regime_coefficients(ScalingRegime("A", e))
    assert a.a_Q == pytest.approx(10) and a.gauss_kappa == pytest.approx(1.0)
    assert vs.regime_coefficients(ScalingRegime("Cp", e)).gauss_kappa == pytest.approx(1.0)


def test_setup_validation():
    with pytest.raises(ValueError):
        _setup("B", species=(Species(2.0, 1.0, 1), Species(1.0, 1.0, -1)))
    with pytest.raises(ValueError):
        _setup("A", limiter="weno")
    with pytest.raises(ValueError):
        _setup("A", nx=2)
    assert _setup("B").form == "fg" and _setup("E").form == "pm"


@pytest.mark.parametrize("regime", [r.value for r in Regime])
def test_equilibrium_is_stationary(regime):
    sp = (Species(0.6, 1.0, 1), Species(0.4, 1.0, -1)) if regime == "E" else None
    s = _setup(regime, species=sp)
    st0 = vs.equilibrium_state(s)
    st1 = vs.run(st0.copy(), s, 5 * vs.stable_dt(st0, s))
    assert np.max(np.abs(st1.f1 - st0.f1)) < 1e-13
    assert np.max(np.abs(st1.f2 - st0.f2)) < 1e-13
    assert np.max(np.abs(st1.em.E)) < 1e-13


def test_local_conservation_regime_B():
    s = _setup("B", nx=16, grid=VelocityGrid(6.0, 10))
    md = lh.default_macro("B", s)
    st = lh.well_prepared_init(s, md)
    dt = vs.stable_dt(st, s)
    nxt = vs.vmb_step(st, s, dt)
    rep = vs.local_conservation_report(st, nxt, s)
    assert np.max(np.abs(rep["mass"])) < 1e-11
    assert np.max(np.abs(rep["charge"])) < 1e-11
    assert abs(rep["global"]["mass"]) < 1e-11
    with pytest.raises(vs.SimError):
        vs.local_conservation_report(st, st, s)


@settings(max_examples=5, deadline=None)
@given(amp=st.floats(0.1, 1.0), eps=st.sampled_from([0.1, 0.5, 1.0]))
def test_regime_A_invariants_under_stepping(amp, eps):
    s = _setup("A", eps=eps, nx=8)
    st = lh.well_prepared_init(s, lh.default_macro("A", s, amp))
    d0 = vs.step_diagnostics(st, s)
    st = vs.run(st, s, 4 * vs.stable_dt(st, s))
    d1 = vs.step_diagnostics(st, s)
    assert abs(d1["mass"] - d0["mass"]) < 1e-12 * d0["mass"]
    assert abs(d1["charge"] - d0["charge"]) < 1e-12
    assert d1["divB_max"] < 1e-12 and d1["gauss_residual"] < 1e-11
    if math.isfinite(d0["entropy"]) and math.isfinite(d1["entropy"]):
        assert d1["entropy"] <= d0["entropy"] + 1e-9


def test_run_callback_and_step_count():
    s = _setup("A")
    st = vs.equilibrium_state(s)
    seen = []
    out = vs.run(st, s, 0.01, dt=0.003, callback=lambda x: seen.append(x.step))
    assert seen == [1, 2, 3, 4] and math.isclose(out.t, 0.01)


def test_lorentz_term_has_zero_mass():
    rng = np.random.default_rng(2)
    F = discrete_maxwellian(G8, np.ones(3), rng.normal(0, 0.2, (3, 3)), np.ones(3))
    S = vs.lorentz_term(F, G8, rng.standard_normal((3, 3)), rng.standard_normal((3, 3)))
    assert np.max(np.abs(S @ G8.weights)) < 1e-13
