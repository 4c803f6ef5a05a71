"""Time evolution.

Nonrelativistic runs use second-order Strang splitting of ``H = p^2/2m + V``.
The relativistic relative-motion propagator applies the square-root
Hamiltonian of a free two-body system exactly as a Fourier multiplier, with an
optional potential of the relative coordinate added by splitting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import _fft
from .errors import IntegrationError, NotNormalizedError
from .grid import FourierMultiplier, Grid, Units, WaveFunction, apply_fourier_multiplier, norm_squared
from .potentials import Potential

NORMALIZATION_TOL = 1e-8


class EnergyBreakdown(NamedTuple):
    total: float
    kinetic: float
    potential: float


def kinetic_symbol(grid: Grid, units: Units) -> np.ndarray:
    """``sum_a p_a^2 / 2 m_a`` on the momentum lattice."""
    masses = units.axis_masses(grid.dims)
    out = np.zeros(grid.shape)
    for p, m in zip(grid.momenta(units.hbar), masses):
        out = out + p * p / (2 * m)
    return out


def relativistic_energy_symbol(grid: Grid, m1: float, m2: float, c: float, hbar: float = 1.0,
                               rest_offset: float | None = None) -> np.ndarray:
    """``c*(sqrt(m1^2c^2+pi^2) + sqrt(m2^2c^2+pi^2)) - rest_offset`` on the lattice.

    ``rest_offset`` defaults to the rest energy ``(m1+m2) c^2``; the subtraction is
    done in the cancellation-free form ``c pi^2 / (sqrt(m^2c^2+pi^2) + m c)``.
    """
    pi2 = np.zeros(grid.shape)
    for p in grid.momenta(hbar):
        pi2 = pi2 + p * p
    rest = (m1 + m2) * c * c
    offset = rest if rest_offset is None else rest_offset
    out = np.zeros(grid.shape)
    for m in (m1, m2):
        out = out + c * pi2 / (np.sqrt(m * m * c * c + pi2) + m * c)
    return out + (rest - offset)


def relativistic_velocity(pi, m1: float, m2: float, c: float):
    """Velocity ``dE/dpi`` for the relative momentum ``pi`` (any array shape)."""
    pi = np.asarray(pi, dtype=float)
    return pi * c * (1 / np.sqrt(m1 * m1 * c * c + pi * pi) + 1 / np.sqrt(m2 * m2 * c * c + pi * pi))


class SplitStepPropagator:
    """Caches the Strang phase factors for a fixed ``(grid, V, dt)``."""

    def __init__(self, grid: Grid, units: Units, potential_values: np.ndarray, dt: float,
                 kinetic: np.ndarray | None = None):
        if not dt >= 0:
            raise ValueError(f"dt must be nonnegative, got {dt}")
        if not np.all(np.isfinite(potential_values)):
            raise IntegrationError("potential is not finite on the grid")
        self.dt = dt
        hbar = units.hbar
        kin = kinetic_symbol(grid, units) if kinetic is None else kinetic
        self.half_potential = np.exp(-0.5j * dt / hbar * potential_values)
        self.kinetic = np.exp(-1j * dt / hbar * kin)

    def step(self, amp: np.ndarray) -> np.ndarray:
        amp = self.half_potential * amp
        amp = _fft.ifftn(self.kinetic * _fft.fftn(amp))
        return self.half_potential * amp


def _potential_values(V, grid):
    if isinstance(V, Potential):
        return V.values(grid)
    return np.broadcast_to(np.asarray(V, dtype=float), grid.shape)


def split_step(psi: WaveFunction, V, dt: float) -> WaveFunction:
    """One Strang step ``e^{-iV dt/2hbar} e^{-iT dt/hbar} e^{-iV dt/2hbar}``.

    ``V`` is a :class:`Potential` or an array of values on the grid.
    """
    if dt < 0:
        raise ValueError(f"dt must be nonnegative, got {dt}")
    if dt == 0:
        return psi
    prop = SplitStepPropagator(psi.grid, psi.units, _potential_values(V, psi.grid), dt)
    out = prop.step(psi.amplitudes)
    if not np.all(np.isfinite(out)):
        raise IntegrationError("non-finite amplitudes after split step; dt too large or V pathological",
                               step=0, time=psi.time + dt)
    return psi.with_amplitudes(out, psi.time + dt)


def relativistic_step(psi_rel: WaveFunction, m1: float, m2: float, c: float, dtau: float,
                      rest_offset: float | None = None) -> WaveFunction:
    """Exact free step ``exp(-i E(pi) dtau / hbar)`` of the relative wave function."""
    if min(m1, m2) <= 0 or c <= 0:
        raise ValueError("masses and c must be positive")
    hbar = psi_rel.hbar
    energy = relativistic_energy_symbol(psi_rel.grid, m1, m2, c, hbar, rest_offset)
    mult = FourierMultiplier(lambda *p: np.exp(-1j * dtau / hbar * energy))
    out = apply_fourier_multiplier(psi_rel, mult)
    return replace(out, time=psi_rel.time + dtau)


# -- expectation values used while stepping --------------------------------------------

def _check_normalized(psi: WaveFunction) -> None:
    n2 = norm_squared(psi)
    if abs(n2 - 1.0) > NORMALIZATION_TOL:
        raise NotNormalizedError(f"state is not normalized (norm^2 = {n2:.6g})")


def _position_mean(rho, grid):
    dv = grid.cell_volume
    return np.array([float(np.sum(x * rho) * dv) for x in grid.mesh()])


def _momentum_stats(amp_hat, grid, hbar):
    weight = np.abs(amp_hat) ** 2 * (grid.cell_volume / grid.size)
    mom = grid.momenta(hbar)
    return weight, np.array([float(np.sum(p * weight)) for p in mom])


def hamiltonian_expectation(psi: WaveFunction, V) -> EnergyBreakdown:
    """``<H> = <T> + <V>`` with the kinetic part evaluated in momentum space."""
    _check_normalized(psi)
    weight = np.abs(_fft.fftn(psi.amplitudes)) ** 2 * (psi.grid.cell_volume / psi.grid.size)
    kin = float(np.sum(kinetic_symbol(psi.grid, psi.units) * weight))
    pot = float(np.sum(_potential_values(V, psi.grid) * psi.density()) * psi.grid.cell_volume)
    return EnergyBreakdown(kin + pot, kin, pot)


# -- trajectory record -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    grid: Grid
    units: Units
    times: np.ndarray
    positions: np.ndarray
    momenta: np.ndarray
    energies: np.ndarray  # columns: total, kinetic, potential
    forces: np.ndarray
    norms: np.ndarray
    snapshots: np.ndarray | None
    potential: Potential | None = None
    dt: float = 0.0
    save_stride: int = 1
    kind: str = "schrodinger"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times)
        if n and np.any(np.diff(self.times) <= 0):
            raise ValueError("record times must be strictly increasing")
        for name in ("positions", "momenta", "energies", "forces", "norms"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length does not match times")
        if self.snapshots is not None and len(self.snapshots) != n:
            raise ValueError("snapshot count does not match times")

    def __len__(self):
        return len(self.times)

    @property
    def stride_time(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def axis_masses(self) -> np.ndarray:
        return self.units.axis_masses(self.grid.dims)

    def snapshot(self, i: int) -> WaveFunction:
        if self.snapshots is None:
            raise ValueError("record was produced without snapshots")
        return WaveFunction(self.grid, self.snapshots[i], float(self.times[i]), self.units)

    def states(self):
        for i in range(len(self.times)):
            yield self.snapshot(i)

    def subsample(self, every: int) -> "TrajectoryRecord":
        """Keep every ``every``-th saved time (stride coarsening)."""
        sl = slice(None, None, every)
        return replace(
            self,
            times=self.times[sl], positions=self.positions[sl], momenta=self.momenta[sl],
            energies=self.energies[sl], forces=self.forces[sl], norms=self.norms[sl],
            snapshots=None if self.snapshots is None else self.snapshots[sl],
            save_stride=self.save_stride * every,
        )

    def with_expectations(self, positions=None, momenta=None) -> "TrajectoryRecord":
        return replace(
            self,
            positions=self.positions if positions is None else np.asarray(positions, dtype=float),
            momenta=self.momenta if momenta is None else np.asarray(momenta, dtype=float),
        )


class _Recorder:
    def __init__(self, grid, units, potential, keep_snapshots, energy_symbol):
        self.grid = grid
        self.units = units
        self.potential = potential
        self.keep = keep_snapshots
        self.energy_symbol = energy_symbol
        self.pot_values = None if potential is None else _potential_values(potential, grid)
        self.grad = None if potential is None or not isinstance(potential, Potential) else potential.gradient_field(grid)
        self.rows = {k: [] for k in ("t", "x", "p", "E", "F", "norm", "snap")}

    def add(self, amp, t):
        g = self.grid
        rho = np.abs(amp) ** 2
        dv = g.cell_volume
        weight, p = _momentum_stats(_fft.fftn(amp), g, self.units.hbar)
        kin = float(np.sum(self.energy_symbol * weight))
        pot = 0.0 if self.pot_values is None else float(np.sum(self.pot_values * rho) * dv)
        force = np.zeros(g.dims) if self.grad is None else np.array([-float(np.sum(d * rho) * dv) for d in self.grad])
        r = self.rows
        r["t"].append(t)
        r["x"].append(_position_mean(rho, g))
        r["p"].append(p)
        r["E"].append((kin + pot, kin, pot))
        r["F"].append(force)
        r["norm"].append(float(np.sum(rho) * dv))
        if self.keep:
            r["snap"].append(np.array(amp, copy=True))

    def build(self, dt, stride, kind, metadata):
        r = self.rows
        return TrajectoryRecord(
            grid=self.grid, units=self.units, times=np.array(r["t"]),
            positions=np.array(r["x"]), momenta=np.array(r["p"]), energies=np.array(r["E"]),
            forces=np.array(r["F"]), norms=np.array(r["norm"]),
            snapshots=np.array(r["snap"]) if self.keep else None,
            potential=self.potential, dt=dt, save_stride=stride, kind=kind, metadata=metadata,
        )


def _step_count(t_final, dt):
    if not t_final > 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return int(math.floor(t_final / dt + 1e-9))


def evolve(psi0: WaveFunction, V: Potential, t_final: float, dt: float, save_stride: int = 1,
           keep_snapshots: bool = True, metadata: dict | None = None) -> TrajectoryRecord:
    """Strang-split evolution for ``floor(t_final/dt)`` steps, saving every ``save_stride`` steps."""
    _check_normalized(psi0)
    n_steps = _step_count(t_final, dt)
    if save_stride < 1:
        raise ValueError("save_stride must be >= 1")
    grid, units = psi0.grid, psi0.units
    prop = SplitStepPropagator(grid, units, _potential_values(V, grid), dt)
    rec = _Recorder(grid, units, V, keep_snapshots, kinetic_symbol(grid, units))
    amp = np.array(psi0.amplitudes)
    t0 = psi0.time
    rec.add(amp, t0)
    for n in range(1, n_steps + 1):
        amp = prop.step(amp)
        if n % save_stride == 0:
            if not np.all(np.isfinite(amp)):
                raise IntegrationError(f"non-finite amplitudes at step {n} (t = {t0 + n * dt:.6g})",
                                       step=n, time=t0 + n * dt)
            rec.add(amp, t0 + n * dt)
    meta = {"integrator": "strang", "dt": dt, "steps": n_steps, "save_stride": save_stride}
    meta.update(metadata or {})
    return rec.build(dt, save_stride, "schrodinger", meta)


def relativistic_evolve(psi_rel: WaveFunction, m1: float, m2: float, c: float, t_final: float,
                        dtau: float, save_stride: int = 1, potential: Potential | None = None,
                        rest_offset: float | None = None, keep_snapshots: bool = True) -> TrajectoryRecord:
    """Relative-coordinate evolution under the free square-root Hamiltonian.

    With ``potential`` (a function of the relative coordinate) the step is
    Strang-split around the exact kinetic multiplier.
    """
    _check_normalized(psi_rel)
    if min(m1, m2) <= 0 or c <= 0:
        raise ValueError("masses and c must be positive")
    n_steps = _step_count(t_final, dtau)
    grid, units = psi_rel.grid, psi_rel.units
    energy = relativistic_energy_symbol(grid, m1, m2, c, units.hbar, rest_offset)
    vals = np.zeros(grid.shape) if potential is None else _potential_values(potential, grid)
    prop = SplitStepPropagator(grid, units, vals, dtau, kinetic=energy)
    rec = _Recorder(grid, units, potential, keep_snapshots, energy)
    amp = np.array(psi_rel.amplitudes)
    t0 = psi_rel.time
    rec.add(amp, t0)
    for n in range(1, n_steps + 1):
        if potential is None:
            amp = _fft.ifftn(prop.kinetic * _fft.fftn(amp))
        else:
            amp = prop.step(amp)
        if n % save_stride == 0:
            rec.add(amp, t0 + n * dtau)
    meta = {"integrator": "relativistic-exact" if potential is None else "relativistic-strang",
            "m1": m1, "m2": m2, "c": c, "dtau": dtau, "steps": n_steps, "save_stride": save_stride}
    return rec.build(dtau, save_stride, "relativistic", meta)


def record_from_states(states, potential: Potential | None = None) -> TrajectoryRecord:
    """Wrap explicit snapshots (e.g. analytic states) as a record."""
    states = list(states)
    grid, units = states[0].grid, states[0].units
    rec = _Recorder(grid, units, potential, True, kinetic_symbol(grid, units))
    for s in states:
        rec.add(np.array(s.amplitudes), s.time)
    return rec.build(0.0, 1, "external", {})
