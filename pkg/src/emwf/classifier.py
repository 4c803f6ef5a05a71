"""NDWF / EMWF classification of evolved records.

The trajectory of a record is its stored ``<x>(t)``; the dipole condition is
then an audit of the quadrature (the central dipole about the mean vanishes
identically), and the Ehrenfest relations are checked with central
differences on the saved stride.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import TrajectoryRecord
from .errors import DegenerateStateError, GridError
from .grid import BOUNDARY_FAIL, WaveFunction, check_boundary
from .potentials import Potential

DEFAULT_TOL_DIPOLE = 1e-8
DEFAULT_TOL_EHRENFEST = 1e-5
REFERENCE_STRIDE = 1e-3

EMWF = "EMWF"
NDWF_ONLY = "NDWF-only"
NEITHER = "neither"


class NdwfResult(NamedTuple):
    trajectory: np.ndarray
    dipole_audit: np.ndarray
    passed: bool


class Residuals(NamedTuple):
    times: np.ndarray
    res1: np.ndarray
    res2: np.ndarray


class SuperpositionDiagnostic(NamedTuple):
    expectation: np.ndarray
    naive: np.ndarray
    interference: np.ndarray
    norm_squared: float


@dataclass(frozen=True, eq=False)
class ClassificationReport:
    times: np.ndarray
    trajectory: np.ndarray
    dipole_norm: np.ndarray
    residual_times: np.ndarray
    ehrenfest1_residual: np.ndarray
    ehrenfest2_residual: np.ndarray
    verdict: str
    tol_dipole: float
    tol_ehrenfest: float
    stride: float
    notes: dict = field(default_factory=dict)

    @property
    def max_dipole(self) -> float:
        return float(np.max(self.dipole_norm))

    @property
    def max_res1(self) -> float:
        return float(np.max(self.ehrenfest1_residual))

    @property
    def max_res2(self) -> float:
        return float(np.max(self.ehrenfest2_residual))

    def recompute_verdict(self) -> str:
        return decide(self.max_dipole, self.max_res1, self.max_res2, self.tol_dipole, self.tol_ehrenfest)

    def residual_rows(self):
        """Rows ``(t, res1, res2, dipole_audit)`` at interior times."""
        for k, t in enumerate(self.residual_times):
            yield t, self.ehrenfest1_residual[k], self.ehrenfest2_residual[k], self.dipole_norm[k + 1]

    def summary(self) -> dict:
        out = {
            "verdict": self.verdict,
            "stride": self.stride,
            "tol_dipole": self.tol_dipole,
            "tol_ehrenfest": self.tol_ehrenfest,
            "max_dipole_audit": self.max_dipole,
            "max_res1": self.max_res1,
            "max_res2": self.max_res2,
        }
        out.update(self.notes)
        return out


def decide(max_dipole, max_res1, max_res2, tol_dipole, tol_ehrenfest) -> str:
    if not max_dipole < tol_dipole:
        return NEITHER
    if max_res1 < tol_ehrenfest and max_res2 < tol_ehrenfest:
        return EMWF
    return NDWF_ONLY


def _require(record: TrajectoryRecord, n: int = 3):
    if len(record) < n:
        raise ValueError(f"record needs at least {n} saved times, has {len(record)}")


def ndwf_check(record: TrajectoryRecord, tol: float = DEFAULT_TOL_DIPOLE,
               fail: float = BOUNDARY_FAIL) -> NdwfResult:
    """Trajectory ``<x>(t)`` and the dipole of each snapshot about it."""
    _require(record)
    traj = np.asarray(record.positions, dtype=float)
    audit = np.empty(len(record))
    mesh = record.grid.mesh()
    dv = record.grid.cell_volume
    for i, psi in enumerate(record.states()):
        check_boundary(psi, fail=fail)
        rho = psi.density()
        dip = [np.sum((x - c) * rho) * dv for x, c in zip(mesh, traj[i])]
        audit[i] = float(np.linalg.norm(dip))
    return NdwfResult(traj, audit, bool(np.all(audit < tol)))


def _uniform_stride(times) -> float:
    steps = np.diff(times)
    h = float(steps.mean())
    if np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(h)):
        raise ValueError("Ehrenfest residuals need a uniform save stride")
    return h


def _forces(record: TrajectoryRecord, V: Potential | None) -> np.ndarray:
    if V is None or V is record.potential:
        return np.asarray(record.forces)
    grad = V.gradient_field(record.grid)
    dv = record.grid.cell_volume
    return np.array([[-float(np.sum(g * psi.density()) * dv) for g in grad] for psi in record.states()])


def ehrenfest_residuals(record: TrajectoryRecord, V: Potential | None = None) -> Residuals:
    """``|Δ<x>/Δt - <p>/m|`` and ``|Δ<p>/Δt - <-∇V>|`` at interior saved times."""
    _require(record)
    h = _uniform_stride(record.times)
    x = np.asarray(record.positions)
    p = np.asarray(record.momenta)
    f = _forces(record, V)
    m = record.axis_masses
    dx = (x[2:] - x[:-2]) / (2 * h)
    dp = (p[2:] - p[:-2]) / (2 * h)
    res1 = np.linalg.norm(dx - p[1:-1] / m, axis=1)
    res2 = np.linalg.norm(dp - f[1:-1], axis=1)
    return Residuals(np.asarray(record.times[1:-1]), res1, res2)


def convergence_order(strides, values):
    """Least-squares fit ``values ≈ C * stride^k``; returns ``(k, C)``."""
    s = np.log(np.asarray(strides, dtype=float))
    v = np.log(np.asarray(values, dtype=float))
    k, logc = np.polyfit(s, v, 1)
    return float(k), float(np.exp(logc))


def emwf_check(record: TrajectoryRecord, V: Potential | None = None,
               tol_dipole: float = DEFAULT_TOL_DIPOLE, tol_ehrenfest: float = DEFAULT_TOL_EHRENFEST,
               fail: float = BOUNDARY_FAIL, scale_tolerance: bool = True) -> ClassificationReport:
    """Verdict EMWF / NDWF-only / neither from the dipole audit and both residual maxima.

    ``tol_ehrenfest`` is quoted at a save stride of 1e-3 and scaled by
    ``(stride/1e-3)^2`` for coarser strides (unless ``scale_tolerance`` is off).
    """
    nd = ndwf_check(record, tol_dipole, fail)
    res = ehrenfest_residuals(record, V)
    stride = float(record.times[1] - record.times[0])
    notes = {"max_abs_momentum": float(np.max(np.abs(record.momenta)))}
    if len(record) >= 5:
        # two-level refinement evidence: the same residuals on the doubled stride
        coarse = ehrenfest_residuals(record.subsample(2), V)
        for name, fine_r, coarse_r in (("res1", res.res1, coarse.res1), ("res2", res.res2, coarse.res2)):
            fm, cm = float(fine_r.max()), float(coarse_r.max())
            notes[f"{name}_coarse_max"] = cm
            notes[f"{name}_refinement_ratio"] = cm / fm if fm > 0 else float("inf")
    # the Ehrenfest tolerance is quoted at the reference stride; central differences are O(h^2)
    tol_eff = tol_ehrenfest * max(1.0, (stride / REFERENCE_STRIDE) ** 2) if scale_tolerance else tol_ehrenfest
    notes["tol_ehrenfest_quoted"] = tol_ehrenfest
    verdict = decide(float(nd.dipole_audit.max()), float(res.res1.max()), float(res.res2.max()),
                     tol_dipole, tol_eff)
    return ClassificationReport(
        times=np.asarray(record.times), trajectory=nd.trajectory, dipole_norm=nd.dipole_audit,
        residual_times=res.times, ehrenfest1_residual=res.res1, ehrenfest2_residual=res.res2,
        verdict=verdict, tol_dipole=tol_dipole, tol_ehrenfest=tol_eff, stride=stride, notes=notes,
    )


def superposition_interference(psi1: WaveFunction, psi2: WaveFunction, alpha: complex,
                               beta: complex) -> SuperpositionDiagnostic:
    """Compare ``<x>`` of the normalized superposition with the weighted component trajectories."""
    if psi1.grid != psi2.grid:
        raise GridError("wave functions live on different grids")
    g = psi1.grid
    dv = g.cell_volume
    a1, a2 = psi1.amplitudes, psi2.amplitudes
    combo = alpha * a1 + beta * a2
    n2 = float(np.sum(np.abs(combo) ** 2) * dv)
    if not n2 > 1e-300:
        raise DegenerateStateError("superposition has zero norm")
    mesh = g.mesh()
    rho1, rho2 = np.abs(a1) ** 2, np.abs(a2) ** 2
    cross = 2 * (np.conj(alpha) * beta * np.conj(a1) * a2).real
    x1 = np.array([np.sum(x * rho1) * dv for x in mesh])
    x2 = np.array([np.sum(x * rho2) * dv for x in mesh])
    inter = np.array([np.sum(x * cross) * dv for x in mesh])
    w1, w2 = abs(alpha) ** 2, abs(beta) ** 2
    expectation = (w1 * x1 + w2 * x2 + inter) / n2
    naive = (w1 * x1 + w2 * x2) / (w1 + w2)
    return SuperpositionDiagnostic(expectation, naive, inter, n2)
