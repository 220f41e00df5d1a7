import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.kinetic_core import (
    GridError,
    Regime,
    ScalingRegime,
    Species,
    VelocityGrid,
    collision_invariants,
    discrete_maxwellian,
    fluctuation_decompose,
    fluctuation_reconstruct,
    from_mass_charge,
    macro_state,
    maxwellian,
    moments,
    to_mass_charge,
)

G = VelocityGrid(6.0, 12)


def test_grid_geometry():
    g = VelocityGrid(4.0, 8)
    assert g.size == 512 and g.h == 1.0
    assert np.allclose(g.axis, np.arange(-3.5, 4.0, 1.0))
    assert np.all(g.nodes[g.mirror] == -g.nodes)
    assert np.isclose(g.weights.sum(), 8.0 ** 3)


@pytest.mark.parametrize("vmax,N", [(0.0, 8), (-1.0, 8), (4.0, 6), (4.0, 9), (4.0, 10.5)])
def test_grid_rejects_bad_parameters(vmax, N):
    with pytest.raises(GridError):
        VelocityGrid(vmax, N)


def test_species_validation():
    with pytest.raises(ValueError):
        Species(-1.0)
    with pytest.raises(ValueError):
        Species(1.0, 0.0)
    with pytest.raises(ValueError):
        Species(1.0, 1.0, 0)
    assert Species(2.0, 1.0, -1).charge == -1.0


def test_maxwellian_tail_warning():
    with pytest.warns(RuntimeWarning, match="vmax"):
        maxwellian(VelocityGrid(2.0, 8), 1.0, (0, 0, 0), 1.0)


@settings(max_examples=20, deadline=None)
@given(n=st.floats(0.2, 3.0), T=st.floats(0.5, 1.5), m=st.floats(0.5, 2.0),
       u=st.tuples(*[st.floats(-0.5, 0.5)] * 3))
def test_discrete_maxwellian_has_exact_moments(n, T, m, u):
    M = discrete_maxwellian(G, n, np.array(u), T, m)[0]
    d, j, e = moments(M, G, m)
    u = np.array(u)
    assert np.isclose(d, m * n, rtol=1e-12)
    assert np.allclose(j, m * n * u, atol=1e-12 * n)
    assert np.isclose(e, 0.5 * m * n * (u @ u) + 1.5 * n * T, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(mp=st.floats(0.2, 5), mm=st.floats(0.2, 5), ep=st.floats(0.2, 3), em=st.floats(0.2, 3),
       seed=st.integers(0, 2 ** 16))
def test_mass_charge_map_roundtrip(mp, mm, ep, em, seed):
    rng = np.random.default_rng(seed)
    Fp, Fm = rng.random((2, 5, 7))
    sp, sm = Species(mp, ep, 1), Species(mm, em, -1)
    F, Gc = to_mass_charge(Fp, Fm, sp, sm)
    a, b = from_mass_charge(F, Gc, sp, sm)
    assert np.allclose(a, Fp, rtol=1e-10, atol=1e-12) and np.allclose(b, Fm, rtol=1e-10, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(eps=st.floats(1e-3, 1.0), seed=st.integers(0, 2 ** 16))
def test_fluctuation_roundtrip(eps, seed):
    rng = np.random.default_rng(seed)
    mu = 0.1 + rng.random(20)
    f = rng.standard_normal(20)
    F = fluctuation_reconstruct(f, mu, eps)
    assert np.allclose(fluctuation_decompose(F, mu, eps), f, atol=1e-9)


def test_fluctuation_rejects_bad_input():
    with pytest.raises(ValueError):
        fluctuation_decompose(np.ones(3), np.array([1.0, 0.0, 1.0]), 0.1)
    with pytest.raises(ValueError):
        fluctuation_decompose(np.ones(3), np.ones(3), 0.0)


def test_macro_state_of_shared_maxwellians():
    sp, sm = Species(2.0, 1.0, 1), Species(1.0, 1.0, -1)
    u = np.array([0.2, -0.1, 0.05])
    Mp = discrete_maxwellian(G, 1.3, u, 0.9, sp.m)
    Mm = discrete_maxwellian(G, 0.7, u, 0.9, sm.m)
    ms = macro_state(Mp, Mm, G, sp, sm)
    assert np.allclose(ms.u, u) and np.allclose(ms.T, 0.9)
    assert np.isclose(ms.rho, 2.0 * 1.3 + 0.7) and np.isclose(ms.sigma, 0.6)
    cols = ms.as_columns()
    assert set(cols) >= {"rho", "ux", "uy", "uz", "T", "sigma", "Jx"}


def test_invariants_and_regimes():
    phi = collision_invariants(G, 2.0)
    assert phi.shape == (5, G.size) and np.allclose(phi[1], 2.0 * G.nodes[:, 0])
    assert Regime.C.perturbative and not Regime.A.perturbative
    assert Regime.B.mass_charge_form and not Regime.E.mass_charge_form
    assert ScalingRegime("Cp", 0.1).effective_eps0 == 0.1
    with pytest.raises(ValueError):
        ScalingRegime("A", 0.0)
    with pytest.raises(ValueError):
        ScalingRegime("A", 0.1, mu0=-1.0)
