"""Symbolic Gaussian-moment oracle for the BGK transport coefficients.

For L = nu0 (I - P_ker) at the unit Maxwellian, L^{-1} acts on sources orthogonal to
the kernel as 1/nu0, so nu and kappa reduce to Gaussian moments computed here with sympy.
"""
import sympy as sp

from artifact.collision import BGK
from artifact.kinetic_core import VelocityGrid
from artifact.linearized_transport import assemble_linearized, resistivity, viscosity_conductivity

FROZEN = {"nu": 1, "kappa": 1, "eta": 1}


def _gauss_moments():
    x, y, z = sp.symbols("x y z", real=True)
    M = sp.exp(-(x ** 2 + y ** 2 + z ** 2) / 2) / (2 * sp.pi) ** sp.Rational(3, 2)
    c = (x, y, z)
    c2 = x ** 2 + y ** 2 + z ** 2

    def mean(f):
        return sp.simplify(sp.integrate(sp.expand(f * M), (x, -sp.oo, sp.oo), (y, -sp.oo, sp.oo),
                                        (z, -sp.oo, sp.oo)))

    phi2 = sum((c[i] * c[j] - (c2 / 3 if i == j else 0)) ** 2 for i in range(3) for j in range(3))
    psi2 = sum((c[i] * (c2 - 5) / 2) ** 2 for i in range(3))
    return {
        "nu": sp.Rational(1, 10) * mean(phi2),
        "kappa": sp.Rational(2, 15) * mean(psi2),
        "eta": 1 / (sp.Rational(1, 3) * mean(c2)),
        "psi_orth": mean(x * x * (c2 - 5) / 2),
    }


def test_symbolic_oracle_matches_frozen_values():
    m = _gauss_moments()
    assert m["psi_orth"] == 0
    for k, v in FROZEN.items():
        assert m[k] == v


def test_bgk_operator_against_frozen_oracle():
    L = assemble_linearized(VelocityGrid(10.0, 32), BGK(1.0), "one_species_L", T=1.0)
    nu, kappa = viscosity_conductivity(L)
    assert abs(nu - FROZEN["nu"]) < 1e-8
    assert abs(kappa - FROZEN["kappa"]) < 1e-8
    calL = assemble_linearized(VelocityGrid(8.0, 16), BGK(1.0), "one_species_calL", T=1.0)
    assert abs(resistivity(calL) - FROZEN["eta"]) < 1e-10
