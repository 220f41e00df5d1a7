import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.collision import (
    BGK,
    AngularQuadrature,
    CollisionError,
    HardSphere,
    collide,
    collide_pair,
    collide_self,
    conservation_project,
    entropy,
    mixture_maxwellian,
    parse_angular_order,
    post_collision_velocities,
    relax_step,
)
from artifact.kinetic_core import Species, VelocityGrid, collision_invariants, two_species_invariants
from conftest import smooth_random

G = VelocityGrid(4.5, 10)
SP, SM = Species(2.0, 1.0, 1), Species(1.0, 1.0, -1)
ANG = AngularQuadrature.product_gauss(2, 4)


def _pairings(Qp, Qm, grid=G):
    phi = two_species_invariants(grid, SP.m, SM.m)
    return np.array([(phi[i, 0] * Qp + phi[i, 1] * Qm) @ grid.weights for i in range(6)])


def test_angular_rule():
    a = AngularQuadrature.product_gauss(4, 8)
    assert np.isclose(a.weights.sum(), 4 * np.pi)
    assert np.allclose(a.directions.T @ a.weights, 0, atol=1e-13)
    assert parse_angular_order("3x6") == (3, 6)
    with pytest.raises(ValueError):
        AngularQuadrature.product_gauss(2, 3)


@settings(max_examples=25, deadline=None)
@given(m1=st.floats(0.3, 3), m2=st.floats(0.3, 3), seed=st.integers(0, 2 ** 16))
def test_post_collision_conserves_momentum_energy(m1, m2, seed):
    rng = np.random.default_rng(seed)
    v, u = rng.standard_normal((2, 3))
    w = rng.standard_normal(3)
    w /= np.linalg.norm(w)
    vp, up = post_collision_velocities(v, u, w, m1, m2)
    assert np.allclose(m1 * vp + m2 * up, m1 * v + m2 * u)
    assert np.isclose(m1 * vp @ vp + m2 * up @ up, m1 * v @ v + m2 * u @ u)


def test_projected_hard_sphere_conserves_invariants():
    rng = np.random.default_rng(1)
    Fp, Fm = smooth_random(G, SP.m, rng), smooth_random(G, SM.m, rng)
    Qp, Qm = collide_pair(Fp, Fm, G, SP, SM, HardSphere(energy_cut=12.0), ANG)
    scale = np.sqrt((Qp ** 2 + Qm ** 2) @ G.weights)
    assert np.max(np.abs(_pairings(Qp, Qm))) <= 1e-12 * scale * 100


def test_projection_is_idempotent():
    rng = np.random.default_rng(2)
    Q = rng.standard_normal((2, G.size))
    phi = two_species_invariants(G, SP.m, SM.m)
    ref = np.stack([np.exp(-SP.m * G.v2 / 2), np.exp(-SM.m * G.v2 / 2)])
    once = conservation_project([Q[0], Q[1]], phi, ref, G.weights)
    twice = conservation_project(list(once), phi, ref, G.weights)
    assert np.allclose(once[0], twice[0], atol=1e-13) and np.allclose(once[1], twice[1], atol=1e-13)


def test_single_term_and_self_operator():
    rng = np.random.default_rng(3)
    F = smooth_random(G, 1.0, rng)
    q = collide(F, F, G, SM, SM, HardSphere(energy_cut=12.0), ANG)
    assert abs(q @ G.weights) < 1e-12
    Q = collide_self(F, G, SM, HardSphere(energy_cut=12.0), ANG)
    phi = collision_invariants(G, 1.0)
    assert np.max(np.abs(phi @ (Q * G.weights))) < 1e-12
    with pytest.raises(CollisionError):
        collide(F, F, G, SM, SM, BGK())


def test_entropic_scheme_conserves_exactly():
    rng = np.random.default_rng(4)
    Fp, Fm = smooth_random(G, SP.m, rng), smooth_random(G, SM.m, rng)
    k = HardSphere(scheme="entropic", energy_cut=12.0)
    Qp, Qm = collide_pair(Fp, Fm, G, SP, SM, k, ANG)
    scale = np.abs(Qp).max() + np.abs(Qm).max()
    assert np.max(np.abs(_pairings(Qp, Qm))) < 1e-12 * scale * G.size


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 16), nu0=st.floats(0.1, 5.0), dt=st.floats(0.01, 2.0))
def test_bgk_relaxation_conserves_and_dissipates(seed, nu0, dt):
    rng = np.random.default_rng(seed)
    Fp, Fm = smooth_random(G, SP.m, rng), smooth_random(G, SM.m, rng)
    Ap, Am = relax_step(Fp, Fm, G, SP, SM, BGK(nu0), dt)
    before, after = _pairings(Fp, Fm), _pairings(Ap, Am)
    assert np.allclose(before, after, rtol=1e-11, atol=1e-12)
    assert entropy(Ap, Am, G) <= entropy(Fp, Fm, G) + 1e-13


def test_mixture_maxwellian_is_fixed_point():
    rng = np.random.default_rng(5)
    Fp, Fm = smooth_random(G, SP.m, rng), smooth_random(G, SM.m, rng)
    Mp, Mm, T = mixture_maxwellian(Fp, Fm, G, SP, SM)
    assert np.allclose(_pairings(Mp, Mm), _pairings(Fp, Fm), rtol=1e-12, atol=1e-13)
    Np, Nm, T2 = mixture_maxwellian(Mp, Mm, G, SP, SM)
    assert np.allclose(Np, Mp, rtol=1e-10, atol=1e-14) and np.isclose(T, T2)
    assert entropy(Mp, Mm, G) <= entropy(Fp, Fm, G)


def test_mixture_rejects_nonpositive_density():
    with pytest.raises(CollisionError):
        mixture_maxwellian(np.zeros(G.size), np.ones(G.size), G, SP, SM)


def test_kernel_validation():
    with pytest.raises(ValueError):
        HardSphere(scheme="other")
    with pytest.raises(ValueError):
        HardSphere(T_ref=0.0)
    with pytest.raises(ValueError):
        BGK(0.0)
    assert np.isclose(BGK(2.0, -1.0).frequency(2.0), 1.0)
