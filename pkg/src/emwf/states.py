"""Analytic initial states: Gaussian packets, oscillator eigenstates, superpositions, two-particle products."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import eval_hermite

from .grid import Grid, Units, WaveFunction, check_same_grid, normalize


def _per_axis(value, dims, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.repeat(arr, dims)
    if arr.size != dims:
        raise ValueError(f"{name} needs {dims} components, got {arr.size}")
    return arr


def gaussian(grid: Grid, x0=0.0, p0=0.0, sigma=1.0, units: Units | None = None, time: float = 0.0) -> WaveFunction:
    """Minimal-uncertainty packet; ``sigma`` is the position standard deviation of ``|psi|^2``."""
    units = units or Units()
    x0 = _per_axis(x0, grid.dims, "x0")
    p0 = _per_axis(p0, grid.dims, "p0")
    sigma = _per_axis(sigma, grid.dims, "sigma")
    amp = np.ones(grid.shape, dtype=np.complex128)
    for x, a, p, s in zip(grid.mesh(), x0, p0, sigma):
        amp = amp * np.exp(-((x - a) ** 2) / (4 * s * s) + 1j * p * x / units.hbar)
    return normalize(WaveFunction(grid, amp, time, units))


def oscillator_width(omega: float, mass: float = 1.0, hbar: float = 1.0) -> float:
    """Position standard deviation of the oscillator ground state."""
    return math.sqrt(hbar / (2 * mass * omega))


def coherent(grid: Grid, omega: float, x0=0.0, p0=0.0, units: Units | None = None) -> WaveFunction:
    units = units or Units()
    masses = units.axis_masses(grid.dims)
    sigma = [oscillator_width(omega, m, units.hbar) for m in masses]
    return gaussian(grid, x0, p0, sigma, units)


def hermite_function(n: int, x: np.ndarray, omega: float = 1.0, mass: float = 1.0, hbar: float = 1.0) -> np.ndarray:
    """Normalized oscillator eigenfunction ``psi_n(x)`` on the real line."""
    a = math.sqrt(mass * omega / hbar)
    xi = a * x
    # log form keeps the prefactor finite for large n
    log_norm = 0.5 * math.log(a / math.sqrt(math.pi)) - 0.5 * (n * math.log(2.0) + math.lgamma(n + 1))
    return math.exp(log_norm) * eval_hermite(n, xi) * np.exp(-0.5 * xi * xi)


def oscillator_eigenstate(grid: Grid, n, omega: float = 1.0, units: Units | None = None,
                          center=0.0) -> WaveFunction:
    units = units or Units()
    ns = [int(v) for v in np.atleast_1d(n)]
    if len(ns) == 1:
        ns = ns * grid.dims
    if len(ns) != grid.dims:
        raise ValueError(f"need {grid.dims} quantum numbers")
    center = _per_axis(center, grid.dims, "center")
    masses = units.axis_masses(grid.dims)
    amp = np.ones(grid.shape, dtype=np.complex128)
    for x, k, c, m in zip(grid.mesh(), ns, center, masses):
        amp = amp * hermite_function(k, x - c, omega, m, units.hbar)
    return normalize(WaveFunction(grid, amp, 0.0, units))


def superposition(states: Sequence[WaveFunction], coefficients: Sequence[complex]) -> WaveFunction:
    if len(states) != len(coefficients) or not states:
        raise ValueError("need one coefficient per state")
    for s in states[1:]:
        check_same_grid(states[0], s)
    amp = sum(complex(c) * s.amplitudes for c, s in zip(coefficients, states))
    return normalize(states[0].with_amplitudes(amp))


def product(psi1: WaveFunction, psi2: WaveFunction) -> WaveFunction:
    """Two-particle product state on the configuration-space grid ``grid1 x grid2``."""
    g1, g2 = psi1.grid, psi2.grid
    grid = Grid(g1.extents + g2.extents, g1.points + g2.points)
    amp = np.multiply.outer(psi1.amplitudes, psi2.amplitudes)
    units = Units(psi1.hbar, (psi1.units.masses[0], psi2.units.masses[0]), psi1.units.c)
    return normalize(WaveFunction(grid, amp, psi1.time, units))


def entangled_gaussian(grid: Grid, x1=0.0, x2=0.0, p1=0.0, p2=0.0, sigma_cm=1.0, sigma_rel=1.0,
                       units: Units | None = None) -> WaveFunction:
    """Correlated two-particle Gaussian in centre-of-mass/relative widths (equal masses)."""
    units = units or Units(masses=(1.0, 1.0))
    if grid.dims % 2:
        raise ValueError("two-particle grid needs an even number of axes")
    d = grid.dims // 2
    x1 = _per_axis(x1, d, "x1")
    x2 = _per_axis(x2, d, "x2")
    p1 = _per_axis(p1, d, "p1")
    p2 = _per_axis(p2, d, "p2")
    mesh = grid.mesh()
    amp = np.ones(grid.shape, dtype=np.complex128)
    for a in range(d):
        u = mesh[a] - x1[a]
        v = mesh[d + a] - x2[a]
        cm = 0.5 * (u + v)
        rel = u - v
        amp = amp * np.exp(-(cm**2) / (4 * sigma_cm**2) - rel**2 / (4 * sigma_rel**2)
                           + 1j * (p1[a] * mesh[a] + p2[a] * mesh[d + a]) / units.hbar)
    return normalize(WaveFunction(grid, amp, 0.0, units))
