"""Diagonal two-particle mixtures and the quantum-vs-classical correlation check.

A mixture is a weighted list of two-particle components, each either a full
evolved record or just a pair of precomputed trajectories.  When every
component is dipole-free about its trajectories (both single-particle dipoles
and the mixed cross moment) the correlation ``<x1^i x2^j>`` of the mixture
equals the classical average over the component trajectories.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .classifier import EMWF, emwf_check, DEFAULT_TOL_EHRENFEST
from .dynamics import TrajectoryRecord
from .errors import GridError
from .moments import multipoles

WEIGHT_TOL = 1e-12
DIPOLE_TOL = 1e-8


class MixtureWarning(UserWarning):
    """A mixture expectation was requested for an ensemble that failed the classicality check."""


@dataclass(frozen=True, eq=False)
class MixtureComponent:
    weight: float
    record: TrajectoryRecord | None = None
    times: np.ndarray | None = None
    x1: np.ndarray | None = None
    x2: np.ndarray | None = None
    verdict: str = "unchecked"

    def __post_init__(self):
        if self.record is None:
            if self.times is None or self.x1 is None or self.x2 is None:
                raise ValueError("a component needs a record or trajectories (times, x1, x2)")
            object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
            object.__setattr__(self, "x1", np.asarray(self.x1, dtype=float).reshape(len(self.times), -1))
            object.__setattr__(self, "x2", np.asarray(self.x2, dtype=float).reshape(len(self.times), -1))
            if self.verdict == "unchecked":
                object.__setattr__(self, "verdict", "assumed")
        else:
            d = self.record.grid.dims // 2
            pos = np.asarray(self.record.positions)
            object.__setattr__(self, "times", np.asarray(self.record.times))
            object.__setattr__(self, "x1", pos[:, :d])
            object.__setattr__(self, "x2", pos[:, d:])

    @property
    def particle_dim(self) -> int:
        return self.x1.shape[1]


@dataclass(frozen=True, eq=False)
class MixtureEnsemble:
    components: tuple[MixtureComponent, ...]
    report: tuple = field(default=())

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def density(self, k: int) -> np.ndarray:
        """Mixture density ``sum_w p_w |psi_w|^2`` at saved index ``k``."""
        out = None
        for c in self.components:
            if c.record is None or c.record.snapshots is None:
                raise ValueError("mixture density needs full records with snapshots")
            rho = c.weight * np.abs(c.record.snapshots[k]) ** 2
            out = rho if out is None else out + rho
        return out

    def with_report(self, report) -> "MixtureEnsemble":
        return MixtureEnsemble(self.components, tuple(report))


def reduced_density(components) -> MixtureEnsemble:
    """Validate weights and grids; accepts ``MixtureComponent`` objects or ``(weight, record)`` pairs."""
    comps = []
    for c in components:
        if isinstance(c, MixtureComponent):
            comps.append(c)
        else:
            w, rec = c
            comps.append(MixtureComponent(float(w), rec))
    if not comps:
        raise ValueError("a mixture needs at least one component")
    w = np.array([c.weight for c in comps])
    if np.any(w < 0):
        raise ValueError("mixture weights must be nonnegative")
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise ValueError(f"mixture weights sum to {w.sum()!r}, not 1")
    grids = {c.record.grid for c in comps if c.record is not None}
    if len(grids) > 1:
        raise GridError("mixture components live on different grids")
    dims = {c.particle_dim for c in comps}
    if len(dims) > 1:
        raise ValueError("components disagree on the per-particle dimension")
    return MixtureEnsemble(tuple(comps))


class ComponentReport(NamedTuple):
    index: int
    weight: float
    dipole1: float
    dipole2: float
    cross: float
    verdict: str
    passed: bool


class ClassicalityReport(NamedTuple):
    components: list
    passed: bool


def _dipole_audit(record: TrajectoryRecord):
    """Worst particle-1, particle-2 and cross dipoles over all snapshots of a two-particle record."""
    d = record.grid.dims // 2
    worst = np.zeros(3)
    for k, psi in enumerate(record.states()):
        ms = multipoles(psi, center=record.positions[k], order=2, c_max=0, validate=False)
        dip = ms.dipole()
        cross = max(abs(ms.density_moments[tuple(1 if a in (r, d + s) else 0 for a in range(2 * d))])
                    for r in range(d) for s in range(d))
        worst = np.maximum(worst, [np.linalg.norm(dip[:d]), np.linalg.norm(dip[d:]), cross])
    return worst


def classicality_check(ensemble: MixtureEnsemble, tol: float = DIPOLE_TOL,
                       tol_ehrenfest: float = DEFAULT_TOL_EHRENFEST) -> ClassicalityReport:
    """Per component: the three dipole audits and the EMWF verdict; overall flag = all pass."""
    if not ensemble.components:
        raise ValueError("empty ensemble")
    reports = []
    for i, c in enumerate(ensemble.components):
        if c.record is None:
            reports.append(ComponentReport(i, c.weight, 0.0, 0.0, 0.0, c.verdict, c.verdict in (EMWF, "assumed")))
            continue
        d1, d2, cross = _dipole_audit(c.record)
        verdict = emwf_check(c.record, tol_dipole=tol, tol_ehrenfest=tol_ehrenfest).verdict
        ok = bool(d1 < tol and d2 < tol and cross < tol and verdict == EMWF)
        reports.append(ComponentReport(i, c.weight, float(d1), float(d2), float(cross), verdict, ok))
    return ClassicalityReport(reports, all(r.passed for r in reports))


class MixtureExpectation(NamedTuple):
    quantum: float
    classical: float
    residual: float
    warning: str | None


def _time_index(times, t):
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not a saved time of the component")
    return k


def mixture_expectation(ensemble: MixtureEnsemble, i: int, j: int, t: float,
                        classicality: ClassicalityReport | None = None) -> MixtureExpectation:
    """``<x1^i x2^j>`` of the mixture computed from densities and from trajectories."""
    warning = None
    if classicality is not None and not classicality.passed:
        warning = "ensemble failed the classicality check; the classical value is not expected to agree"
        warnings.warn(warning, MixtureWarning, stacklevel=2)
    quantum = 0.0
    classical = 0.0
    have_quantum = True
    for c in ensemble.components:
        lo, hi = c.times[0], c.times[-1]
        if not (lo - 1e-12 <= t <= hi + 1e-12):
            raise ValueError(f"time {t} outside the component range [{lo}, {hi}]")
        k = _time_index(c.times, t)
        classical += c.weight * c.x1[k, i] * c.x2[k, j]
        if c.record is None or c.record.snapshots is None:
            have_quantum = False
            continue
        g = c.record.grid
        d = g.dims // 2
        mesh = g.mesh()
        rho = np.abs(c.record.snapshots[k]) ** 2
        quantum += c.weight * float(np.sum(mesh[i] * mesh[d + j] * rho) * g.cell_volume)
    if not have_quantum:
        quantum = float("nan")
    return MixtureExpectation(quantum, classical, abs(quantum - classical), warning)


def residual_series(ensemble: MixtureEnsemble, i: int = 0, j: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Quantum-minus-classical residual at every saved time shared by the components."""
    times = ensemble.components[0].times
    res = np.array([mixture_expectation(ensemble, i, j, t).residual for t in times])
    return times, res
