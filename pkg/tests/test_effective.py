import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from emwf import make_grid, states
from emwf.dynamics import evolve
from emwf.effective import (
    FrozenMoments,
    InterpolatedMoments,
    PrescribedMoments,
    compare_trajectories,
    effective_force,
    effective_from_record,
    integrate_effective,
    relative_velocity,
    relativistic_relative_momentum,
    two_body_dipoles,
    two_body_force,
)
from emwf.errors import DipoleError, IntegrationError, MissingDerivativeError
from emwf.moments import multipoles
from emwf.potentials import GaussianWell, Potential, free, harmonic, quartic, separation_power

X = sp.Symbol("x")


def _sympy_force(expr, x0, moments, order):
    """-sum_k M_k/k! V^(k+1)(x0) with M_0 = 1, M_1 = 0."""
    total = 0
    for k in range(order + 1):
        m = {0: 1.0, 1: 0.0}.get(k, moments.get(k, 0.0))
        total += m / math.factorial(k) * sp.diff(expr, X, k + 1).subs(X, x0)
    return -float(total)


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_quartic_force_matches_sympy(order):
    lam, x0 = 0.1, 1.3
    moments = {2: 0.25, 3: -0.07, 4: 0.2}
    got = effective_force([x0], quartic(lam), {(k,): v for k, v in moments.items()}, order)[0]
    assert got == pytest.approx(_sympy_force(lam * X**4, x0, moments, order), rel=1e-13)


def test_quartic_gaussian_closed_form():
    # Gaussian moments sigma^2: F = -4 lam x^3 - 12 lam sigma^2 x
    lam, s, x0 = 0.1, 0.5, 2.0
    F = effective_force([x0], quartic(lam), {(2,): s**2, (4,): 3 * s**4}, 4)[0]
    assert F == pytest.approx(-4 * lam * x0**3 - 12 * lam * s**2 * x0, rel=1e-14)


def test_gaussian_well_force_matches_sympy():
    depth, width = 4.0, 1.2
    expr = -depth * sp.exp(-X**2 / (2 * width**2))
    moments = {2: 0.3, 3: 0.01, 4: 0.25}
    got = effective_force([0.7], GaussianWell(depth, width), {(k,): v for k, v in moments.items()}, 4)[0]
    assert got == pytest.approx(_sympy_force(expr, 0.7, moments, 4), rel=1e-12)


def test_polynomial_force_is_exact_average():
    # V' is cubic, so the order-3 force equals <-V'> over the density exactly
    g = make_grid(1, 30.0, 512)
    psi = states.oscillator_eigenstate(g, 2, 1.0, center=1.0)
    ms = multipoles(psi, order=4)
    x = g.axis(0)
    exact = -float(np.sum(0.4 * x**3 * psi.density()) * g.cell_volume)
    assert effective_force(ms.center, quartic(0.1), ms, 3)[0] == pytest.approx(exact, rel=1e-10)
    assert effective_force(ms.center, quartic(0.1), ms, 4)[0] == pytest.approx(exact, rel=1e-10)


def test_missing_derivative_and_bad_order():
    class Limited(Potential):
        kind = "limited"
        max_derivative_order = 2

        def derivative(self, alpha, *coords):
            return 0.0

    with pytest.raises(MissingDerivativeError):
        effective_force([0.0], Limited(), {(2,): 1.0}, 2)
    with pytest.raises(ValueError):
        effective_force([0.0], quartic(0.1), None, 0)
    with pytest.raises(ValueError):
        effective_force([0.0], quartic(0.1), {(2,): 1.0}, 3)  # moments too low for order 3
    with pytest.raises(ValueError):
        effective_force([0.0, 1.0], quartic(0.1), None, 1)


def test_harmonic_order_one_is_analytic():
    t = np.linspace(0, 2 * np.pi, 201)
    tr = integrate_effective([2.0], [0.0], harmonic(1.0), None, 1, t, substeps=10)
    assert np.max(np.abs(tr.x[:, 0] - 2 * np.cos(t))) < 1e-9
    assert np.max(np.abs(tr.v[:, 0] + 2 * np.sin(t))) < 1e-9
    E = 0.5 * tr.v[:, 0] ** 2 + 0.5 * tr.x[:, 0] ** 2
    assert np.max(np.abs(E - E[0])) < 1e-8 * E[0]


def test_harmonic_corrections_vanish():
    # V''' = 0: every order gives the same trajectory
    t = np.linspace(0, 3, 61)
    src = FrozenMoments(multipoles(states.gaussian(make_grid(1, 20, 256), 0, 0, 0.7)))
    ref = integrate_effective([1.0], [0.5], harmonic(1.0), None, 1, t)
    for order in (2, 3, 4):
        tr = integrate_effective([1.0], [0.5], harmonic(1.0), src, order, t)
        assert np.max(np.abs(tr.x - ref.x)) < 1e-14


def test_prescribed_free_packet_width():
    # free particle: forces vanish whatever the moments, trajectory stays linear
    t = np.linspace(0, 2, 21)
    src = PrescribedMoments(lambda s: {(2,): 1 + s**2 / 4, (4,): 3 * (1 + s**2 / 4) ** 2}, 4)
    tr = integrate_effective([0.0], [1.5], free(1), src, 4, t)
    assert np.max(np.abs(tr.x[:, 0] - 1.5 * t)) < 1e-13
    assert tr.source == "prescribed"


def test_effective_tracks_quartic_record():
    g = make_grid(1, 16.0, 512)
    rec = evolve(states.gaussian(g, 2.0, 0.0, 0.5), quartic(0.1), 2.0, 1e-3, 10)
    errs = [compare_trajectories(rec.times, rec.positions, tr.times, tr.x).rms_position_error
            for tr in (effective_from_record(rec, n) for n in (1, 2, 3, 4))]
    assert errs[3] <= 0.2 * errs[0]
    assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))
    frozen = effective_from_record(rec, 2, mode="frozen")
    assert frozen.source == "frozen"


def test_interpolated_source_out_of_range():
    g = make_grid(1, 16.0, 512)
    rec = evolve(states.gaussian(g, 2.0, 0.0, 0.5), quartic(0.1), 0.1, 1e-3, 10)
    src = InterpolatedMoments.from_record(rec, 2)
    with pytest.raises(IntegrationError):
        integrate_effective([2.0], [0.0], quartic(0.1), src, 2, np.linspace(0, 0.5, 11))


def test_two_body_force_newton_third_law():
    # pure pair interaction: equal and opposite forces, matching -d/dr (k r^2 / 2)
    V12 = separation_power(0.25, 2)
    F1, F2 = two_body_force([1.0], [-0.5], V12, free(1), None, 1)
    assert F1[0] == pytest.approx(-0.5 * 1.5, rel=1e-14)
    assert F2[0] == pytest.approx(-F1[0], rel=1e-14)


def test_two_body_quartic_pair_with_moments():
    # pair V = r^4: sympy oracle on the separation r = x1 - x2 with Var(r) = M20 + M02 - 2 M11
    x1, x2 = sp.symbols("x1 x2")
    expr = (x1 - x2) ** 4
    M = {(2, 0): 0.3, (0, 2): 0.2, (1, 1): 0.05}
    p = {x1: 1.0, x2: -0.4}
    oracle = []
    for var in (x1, x2):
        f = sp.diff(expr, var)
        corr = sum(m / (math.factorial(a) * math.factorial(b)) * sp.diff(f, x1, a, x2, b) for (a, b), m in M.items())
        oracle.append(-float((f + corr).subs(p)))
    F1, F2 = two_body_force([1.0], [-0.4], separation_power(1.0, 4), free(1), M, 2)
    assert F1[0] == pytest.approx(oracle[0], rel=1e-13)
    assert F2[0] == pytest.approx(oracle[1], rel=1e-13)


def test_two_body_dipole_guard():
    g = make_grid(2, 16.0, 64)
    ms = multipoles(states.entangled_gaussian(g, 1.0, -1.0), order=2)
    d1, d2, cross = two_body_dipoles(ms)
    assert d1 < 1e-12 and d2 < 1e-12 and cross > 0.1
    with pytest.raises(DipoleError):
        two_body_force([1.0], [-1.0], separation_power(0.5, 2), free(1), ms, 2)


@given(v=st.floats(-1.99, 1.99), c=st.floats(0.5, 1e3), m=st.floats(0.1, 10.0))
def test_relativistic_round_trip(v, c, m):
    v = v * c
    pi = relativistic_relative_momentum(v, m, c)
    assert float(relative_velocity(pi, m, c)) == pytest.approx(v, abs=1e-12 * max(1.0, abs(v)))


def test_relativistic_speed_limit():
    with pytest.raises(ValueError):
        relativistic_relative_momentum(2.0, 1.0, 1.0)
    v = relative_velocity(np.array([1e6, 0.0, 0.0]), 1.0, 1.0)
    assert np.linalg.norm(v) < 2.0


def test_compare_trajectories():
    t = np.linspace(0, 1, 101)
    x = np.sin(t)
    m = compare_trajectories(t, x, t, x)
    assert m.max_position_error == 0 and m.horizon == 1.0
    m = compare_trajectories(t, x, t, x + 0.01 * t, threshold=5.5e-3)
    assert m.max_position_error == pytest.approx(0.01)
    assert m.horizon == pytest.approx(0.56)
    # a coarser classical grid is spline-interpolated onto the quantum times
    tc = np.linspace(0, 1, 21)
    assert compare_trajectories(t, x, tc, np.sin(tc)).max_position_error < 1e-6
    with pytest.raises(ValueError):
        compare_trajectories(t, x, t + 5, x)
