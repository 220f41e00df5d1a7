import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.collision import BGK, AngularQuadrature, HardSphere
from artifact.kinetic_core import Species, VelocityGrid, discrete_maxwellian
from artifact.linearized_transport import (
    TransportError,
    assemble_linearized,
    coercivity_constant,
    fredholm_solve,
    generalized_ohm_diagnostics,
    kernel_basis,
    kernel_dimension,
    linearize_at,
    ohm_closure,
    ohm_closure_hall,
    ohm_hall_fixed_point,
    ohm_residual,
    resistivity,
    resistivity_law,
    transport_coefficients,
)

G = VelocityGrid(6.0, 12)
SP, SM = Species(2.0, 1.0, 1), Species(1.0, 1.0, -1)


@pytest.fixture(scope="module")
def hs_two():
    return assemble_linearized(VelocityGrid(5.0, 10), HardSphere(), "two_species", (SP, SM),
                               angular=AngularQuadrature.product_gauss(2, 4))


def test_hard_sphere_two_species_structure(hs_two):
    assert kernel_dimension(hs_two) == 6
    assert hs_two.symmetry_defect() < 1e-12
    assert coercivity_constant(hs_two) > 0
    K = kernel_basis(hs_two)
    assert np.allclose((K * hs_two.weight) @ K.T, np.eye(6), atol=1e-10)


def test_fredholm_solve_and_solvability(hs_two):
    rng = np.random.default_rng(0)
    r = rng.standard_normal(hs_two.dim)
    r -= hs_two.kernel_part(r)
    x = fredholm_solve(hs_two, r)
    assert hs_two.norm(hs_two.apply(x) - r) < 1e-8 * hs_two.norm(r)
    assert np.max(np.abs((x * hs_two.weight) @ hs_two.kernel_basis.T)) < 1e-10
    with pytest.raises(TransportError, match="orthogonal"):
        fredholm_solve(hs_two, r + hs_two.kernel_basis[0])


@settings(max_examples=10, deadline=None)
@given(nu0=st.floats(0.2, 5.0), T=st.floats(0.5, 2.0), a=st.sampled_from([-1.0, 0.0, 0.5]))
def test_bgk_resistivity_law(nu0, T, a):
    op = assemble_linearized(VelocityGrid(8 * np.sqrt(T), 16), BGK(nu0, a), "one_species_calL", T=T)
    eta = resistivity(op)
    assert np.isclose(eta, nu0 * T ** a, rtol=1e-10)
    law = resistivity_law(BGK(nu0, a))
    assert np.isclose(law(2.0, T), nu0 * T ** a / 2.0)
    assert coercivity_constant(op) == pytest.approx(nu0 * T ** a)


def test_hard_sphere_resistivity_law_scaling():
    law = resistivity_law(HardSphere(), eta_ref=3.0)
    assert np.isclose(law(5.0, 4.0), 6.0)
    with pytest.raises(TransportError):
        resistivity_law(HardSphere())


def test_transport_coefficients_bgk():
    tc = transport_coefficients(VelocityGrid(10.0, 24), BGK(2.0, 0.0))
    assert np.isclose(tc.eta, 2.0) and np.isclose(tc.nu, 0.5, rtol=1e-6) and np.isclose(tc.kappa, 0.5, rtol=1e-5)
    assert tc.kernel_dim == 5 and tc.as_dict()["backend"] == "bgk"


def test_linearize_at_rejects_mismatched_maxwellians():
    Mp = discrete_maxwellian(G, 1.0, np.zeros(3), 1.0, SP.m)[0]
    Mm = discrete_maxwellian(G, 1.0, np.zeros(3), 1.3, SM.m)[0]
    with pytest.raises(TransportError, match="share"):
        linearize_at(Mp, Mm, G, (SP, SM), BGK())


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 16), eps=st.floats(1e-4, 0.1), eta=st.floats(2.0, 20.0))
def test_hall_closure_matches_fixed_point(seed, eps, eta):
    rng = np.random.default_rng(seed)
    E, B, u = (rng.standard_normal((8, 3)) for _ in range(3))
    sig, rho = rng.standard_normal(8), 1 + rng.random(8)
    J = ohm_closure_hall(E, B, u, sig, rho, SP, SM, eta=eta, eps=eps)
    Jf = ohm_hall_fixed_point(E, B, u, sig, rho, SP, SM, eta=eta, eps=eps)
    assert np.allclose(J, Jf, rtol=1e-11, atol=1e-13)


def test_hall_closure_reduces_to_ohm():
    rng = np.random.default_rng(1)
    E, B, u = (rng.standard_normal((4, 3)) for _ in range(3))
    J = ohm_closure_hall(E, B, u, np.zeros(4), np.ones(4), Species(), Species(1.0, 1.0, -1), eta=2.0, eps=0.0)
    assert np.allclose(J, ohm_closure(E, B, u, 2.0))
    assert ohm_residual(J, E, B, u, 2.0) < 1e-15
    with pytest.raises(ValueError):
        ohm_closure(E, B, u, -1.0)


def test_generalized_ohm_equal_masses_quasineutral():
    sp = sm = Species(1.0, 1.0, 1)
    g = VelocityGrid(6.0, 12)
    mu = discrete_maxwellian(g, 1.0, np.zeros(3), 1.0)[0]
    x = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    U = 0.2 * np.sin(x)
    f = (U[:, None] * g.nodes[None, :, 0])
    d = generalized_ohm_diagnostics(f, f, mu, mu, g, 0.05, x[1] - x[0], sp, Species(1.0, 1.0, -1), BGK())
    assert d.J0_residual < 1e-14
    assert np.max(np.abs(d.C_term)) < 1e-10
