import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from emwf import make_grid, states
from emwf.dynamics import (
    evolve,
    hamiltonian_expectation,
    record_from_states,
    relativistic_energy_symbol,
    relativistic_evolve,
    relativistic_step,
    relativistic_velocity,
    split_step,
)
from emwf.errors import NotNormalizedError
from emwf.grid import Units, WaveFunction, inner_product, norm_squared
from emwf.potentials import free, harmonic, quartic


def test_free_plane_wave_phase():
    g = make_grid(1, 20.0, 128)
    k = 2 * np.pi * 4 / 20.0
    psi = WaveFunction(g, np.exp(1j * k * g.axis(0)) / math.sqrt(20.0))
    out = split_step(psi, free(1), 0.01)
    assert np.max(np.abs(out.amplitudes - np.exp(-1j * k**2 / 2 * 0.01) * psi.amplitudes)) < 1e-13


def test_zero_step_is_identity(grid1):
    psi = states.gaussian(grid1, 0.5, 1.0)
    assert np.array_equal(split_step(psi, harmonic(1.0), 0.0).amplitudes, psi.amplitudes)
    with pytest.raises(ValueError):
        split_step(psi, harmonic(1.0), -1e-3)


def test_coherent_period_fidelity():
    # analytic oracle: a coherent state returns to itself after T = 2 pi / omega (up to a global phase)
    g = make_grid(1, 24.0, 256)
    psi0 = states.coherent(g, 1.0, 2.0)
    dt = 2 * np.pi / 2000
    psi = psi0
    for _ in range(2000):
        psi = split_step(psi, harmonic(1.0), dt)
    assert abs(inner_product(psi0, psi)) > 1 - 1e-6


def test_free_packet_mean_and_width():
    # analytic oracle: <x> = x0 + p0 t/m, sigma^2(t) = sigma0^2 (1 + (hbar t / 2 m sigma0^2)^2)
    g = make_grid(1, 60.0, 1024)
    rec = evolve(states.gaussian(g, -3.0, 2.0, 1.0), free(1), 3.0, 1e-3, 100)
    assert np.max(np.abs(rec.positions[:, 0] - (-3.0 + 2.0 * rec.times))) < 1e-6
    for k, psi in enumerate(rec.states()):
        var = float(np.sum((g.axis(0) - rec.positions[k, 0]) ** 2 * psi.density()) * g.cell_volume)
        assert var == pytest.approx(1 + (rec.times[k] / 2) ** 2, rel=1e-5)
    assert np.max(np.abs(rec.norms - 1)) < 1e-9


def test_ground_state_stationary():
    g = make_grid(1, 20.0, 256)
    psi0 = states.oscillator_eigenstate(g, 0)
    rec = evolve(psi0, harmonic(1.0), 2 * np.pi, 1e-3, 100)
    assert np.max(np.abs(rec.positions)) < 1e-8
    assert np.max(np.abs(rec.snapshot(len(rec) - 1).density() - psi0.density())) < 1e-8


def test_norm_drift_per_step():
    g = make_grid(1, 16.0, 512)
    rec = evolve(states.gaussian(g, 2.0, 0.0, 0.5), quartic(0.1), 1.0, 1e-3, 1, keep_snapshots=False)
    assert np.max(np.abs(np.diff(rec.norms))) < 1e-13


def test_endpoint_order_two_convergence():
    # halving dt shrinks the <x>(t_final) error by 4 +- 20% (reference: dt = 1.25e-4)
    g = make_grid(1, 16.0, 512)
    psi = states.gaussian(g, 2.0, 0.0, 0.5)
    V = quartic(0.1)
    ref = evolve(psi, V, 1.0, 1.25e-4, 8000, keep_snapshots=False).positions[-1, 0]
    errs = [abs(evolve(psi, V, 1.0, dt, int(round(1 / dt)), keep_snapshots=False).positions[-1, 0] - ref)
            for dt in (2e-3, 1e-3, 5e-4)]
    for a, b in zip(errs, errs[1:]):
        assert 3.2 <= a / b <= 4.8


@pytest.mark.parametrize("V,psi_fn", [
    (harmonic(1.0), lambda g: states.coherent(g, 1.0, 2.0)),
    (quartic(0.1), lambda g: states.gaussian(g, 2.0, 0.0, 0.5)),
])
def test_energy_conservation(V, psi_fn):
    # Strang splitting conserves <H> to O(dt^2); at dt = 1e-4 the relative error is below 1e-8
    g = make_grid(1, 16.0, 512)
    rec = evolve(psi_fn(g), V, 1.0, 1e-4, 100, keep_snapshots=False)
    E = rec.energies[:, 0]
    assert np.max(np.abs(E - E[0])) < 1e-8 * abs(E[0])


def test_hamiltonian_expectation_values(grid1):
    e = hamiltonian_expectation(states.oscillator_eigenstate(grid1, 0), harmonic(1.0))
    assert e.total == pytest.approx(0.5, abs=1e-6)
    assert e.total == pytest.approx(e.kinetic + e.potential, abs=1e-10)
    e = hamiltonian_expectation(states.gaussian(grid1, 0.0, 0.0, 1.0), free(1))
    assert e.kinetic == pytest.approx(0.125, abs=1e-6)
    bad = WaveFunction(grid1, 2 * states.gaussian(grid1).amplitudes)
    with pytest.raises(NotNormalizedError):
        hamiltonian_expectation(bad, free(1))


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_oscillator_spectrum(grid1, n):
    e = hamiltonian_expectation(states.oscillator_eigenstate(grid1, n, 1.0), harmonic(1.0))
    assert e.total == pytest.approx(n + 0.5, abs=1e-8)
    assert e.kinetic >= 0


def test_relativistic_plane_wave_phase():
    g = make_grid(1, 40.0, 256)
    k = 2 * np.pi * 3 / 40.0
    m1, m2, c, dtau = 1.0, 2.0, 5.0, 0.01
    psi = WaveFunction(g, np.exp(1j * k * g.axis(0)) / math.sqrt(40.0))
    out = relativistic_step(psi, m1, m2, c, dtau, rest_offset=0.0)
    E = c * (math.sqrt(m1**2 * c**2 + k**2) + math.sqrt(m2**2 * c**2 + k**2))
    assert np.max(np.abs(out.amplitudes - np.exp(-1j * E * dtau) * psi.amplitudes)) < 1e-12


def test_relativistic_energy_symbol_stable_form():
    # with the rest energy removed, the symbol must follow the small-p series
    # p^2/2m - p^4/(8 m^3 c^2) + p^6/(16 m^5 c^4) per particle without cancellation loss at large c
    g = make_grid(1, 40.0, 256)
    m1, m2, c = 1.0, 2.0, 1e4
    sym = relativistic_energy_symbol(g, m1, m2, c)
    p2 = g.momenta()[0] ** 2
    series = sum(p2 / (2 * m) - p2**2 / (8 * m**3 * c**2) + p2**3 / (16 * m**5 * c**4) for m in (m1, m2))
    assert np.max(np.abs(sym - series)) < 1e-12 * np.max(series)


@given(p0=st.floats(-1.0, 1.0), c=st.floats(0.5, 100.0))
def test_relativistic_momentum_conserved(p0, c):
    g = make_grid(1, 40.0, 256)
    psi = states.gaussian(g, 0.0, p0, 2.0, Units(masses=0.5))
    out = psi
    for _ in range(50):
        out = relativistic_step(out, 1.0, 1.0, c, 0.01)
    rec = relativistic_evolve(psi, 1.0, 1.0, c, 0.5, 0.01, 10)
    assert np.max(np.abs(rec.momenta - rec.momenta[0])) < 1e-12
    assert abs(norm_squared(out) - 1) < 1e-12


def test_relativistic_nonrelativistic_limit():
    g = make_grid(1, 80.0, 1024)
    rel = relativistic_evolve(states.gaussian(g, 0.0, 0.5, 2.0), 1.0, 1.0, 50.0, 2.0, 1e-3, 10)
    nr = evolve(states.gaussian(g, 0.0, 0.5, 2.0, Units(masses=0.5)), free(1), 2.0, 1e-3, 10)
    err = np.max(np.abs(rel.positions - nr.positions))
    assert err < 5e-4
    # O(1/c^2): quadrupling c cuts the discrepancy by roughly 16
    rel4 = relativistic_evolve(states.gaussian(g, 0.0, 0.5, 2.0), 1.0, 1.0, 200.0, 2.0, 1e-3, 10)
    assert np.max(np.abs(rel4.positions - nr.positions)) < err / 10


def test_relativistic_velocity_below_limit():
    p = np.linspace(-1e3, 1e3, 101)
    v = relativistic_velocity(p, 1.0, 1.0, 3.0)
    assert np.all(np.abs(v) < 6.0)


def test_record_subsample_and_from_states(grid1):
    rec = evolve(states.coherent(grid1, 1.0, 1.0), harmonic(1.0), 0.1, 1e-3, 10)
    sub = rec.subsample(2)
    assert np.array_equal(sub.times, rec.times[::2])
    assert sub.save_stride == 20
    ext = record_from_states(list(rec.states()), harmonic(1.0))
    assert np.allclose(ext.positions, rec.positions, atol=1e-14)


def test_evolve_rejects_bad_input(grid1):
    psi = states.gaussian(grid1)
    with pytest.raises(ValueError):
        evolve(psi, free(1), -1.0, 1e-3)
    with pytest.raises(ValueError):
        evolve(psi, free(1), 1.0, 1e-3, 0)
    with pytest.raises(NotNormalizedError):
        evolve(psi.with_amplitudes(2 * psi.amplitudes), free(1), 1.0, 1e-3)
