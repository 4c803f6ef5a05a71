import numpy as np
import pytest
import sympy as sp

from emwf import make_grid
from emwf.potentials import (
    GaussianWell,
    PolynomialPotential,
    TabulatedPotential,
    TwoBodyPotential,
    alpha_factorial,
    build_potential,
    free,
    harmonic,
    multi_indices,
    quartic,
    separation_power,
    taylor_terms,
)


def _sympy_derivative(expr, symbols, alpha, point):
    d = expr
    for s, n in zip(symbols, alpha):
        if n:
            d = sp.diff(d, s, n)
    return float(d.subs(dict(zip(symbols, point))))


@pytest.mark.parametrize("alpha", [(0,), (1,), (2,), (3,), (4,), (5,)])
def test_quartic_derivatives_match_sympy(alpha):
    x = sp.symbols("x")
    V = quartic(0.1)
    assert V.derivative_at(alpha, [1.7]) == pytest.approx(_sympy_derivative(sp.Rational(1, 10) * x**4, [x], alpha, [1.7]),
                                                          abs=1e-12)


@pytest.mark.parametrize("alpha", [(0,), (1,), (2,), (3,), (4,)])
def test_gaussian_well_derivatives_match_sympy(alpha):
    x = sp.symbols("x")
    expr = -2.0 * sp.exp(-(x - 0.3) ** 2 / (2 * 1.5**2))
    V = GaussianWell(2.0, 1.5, [0.3])
    assert V.derivative_at(alpha, [0.9]) == pytest.approx(_sympy_derivative(expr, [x], alpha, [0.9]), rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("alpha", [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 1), (2, 2)])
def test_two_body_derivatives_match_sympy(alpha):
    x1, x2 = sp.symbols("x1 x2")
    expr = sp.Rational(1, 4) * (x1 - x2) ** 4 + (x1**2 + x2**2) / 2
    V = TwoBodyPotential(separation_power(0.25, 4), harmonic(1.0))
    pt = [0.7, -0.4]
    assert V.derivative_at(alpha, pt) == pytest.approx(_sympy_derivative(expr, [x1, x2], alpha, pt), abs=1e-12)


def test_harmonic_values_on_grid():
    g = make_grid(2, 10.0, 16)
    V = harmonic(2.0, 0.5, ndim=2)
    X, Y = g.mesh()
    assert np.allclose(V.values(g), 0.5 * 0.5 * 4.0 * (X**2 + Y**2))


def test_free_is_zero():
    assert free(3).derivative_at((1, 0, 0), [1.0, 2.0, 3.0]) == 0.0


def test_tabulated_spectral_derivative():
    g = make_grid(1, 20.0, 256)
    x = g.axis(0)
    V = TabulatedPotential(g, np.exp(-x**2))
    assert V.derivative_at((1,), [0.5]) == pytest.approx(-2 * 0.5 * np.exp(-0.25), abs=1e-10)
    with pytest.warns(RuntimeWarning):
        V.derivative_at((5,), [0.5])


def test_taylor_terms_counts():
    assert len(multi_indices(2, 3)) == 4
    assert len(taylor_terms(3, 2)) == 1 + 3 + 6
    assert alpha_factorial((2, 3)) == 12


def test_build_potential_kinds():
    assert build_potential({"kind": "harmonic", "omega": 1.0}, 1).derivative_at((2,), [0.0]) == 1.0
    pot = build_potential({"kind": "polynomial", "terms": {"2,0": 1.0, "0,1": -2.0}}, 2)
    assert pot.derivative_at((0, 1), [3.0, 1.0]) == -2.0
    tb = build_potential({"kind": "two_body", "pair": {"kind": "harmonic", "omega": 1.0},
                          "external": {"kind": "free"}}, 2)
    assert tb.derivative_at((1, 0), [1.0, 0.0]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        build_potential({"kind": "nope"}, 1)


def test_polynomial_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        PolynomialPotential({(2,): 1.0}, 2)
