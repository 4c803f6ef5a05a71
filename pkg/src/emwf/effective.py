"""Effective Newton-like trajectories with multipole correction forces.

The force on the trajectory ``x(t)`` is the potential gradient averaged over the
density, Taylor-expanded about ``x``::

    F_a = -d_a V(x) - sum_{2 <= |alpha| <= N} M_alpha / alpha! * d^alpha d_a V(x)

with ``M_alpha`` the central density moments.  Two-particle systems are handled
as one trajectory in the 2d-dimensional configuration space with per-axis
masses, which is exactly the double expansion over both particles.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline

from .dynamics import TrajectoryRecord, relativistic_velocity
from .errors import DipoleError, IntegrationError, MissingDerivativeError
from .moments import MultipoleSet, multipoles
from .potentials import Potential, TwoBodyPotential, alpha_factorial, taylor_terms

FROZEN = "frozen"
INTERPOLATED = "time-interpolated"
PRESCRIBED = "prescribed"
SOURCE_MODES = (FROZEN, INTERPOLATED, PRESCRIBED)


@dataclass(frozen=True)
class EffectiveState:
    x: np.ndarray
    v: np.ndarray
    t: float
    force_order: int
    multipole_source: str

    def __post_init__(self):
        if self.force_order < 1:
            raise ValueError("force order must be >= 1")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v))):
            raise ValueError("effective state has non-finite components")


class ComparisonMetrics(NamedTuple):
    max_position_error: float
    rms_position_error: float
    error_vs_hbar2_bound: float
    horizon: float


class ClassicalTrajectory(NamedTuple):
    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    order: int
    source: str

    def rows(self):
        for t, x, v in zip(self.times, self.x, self.v):
            yield (t, *x, *v)


# -- moment sources ------------------------------------------------------------------

class MomentSource:
    mode = "?"
    order = 0

    def moments(self, t: float) -> dict:
        raise NotImplementedError


class FrozenMoments(MomentSource):
    """Moments fixed at their initial values: a closed, predictive model."""

    mode = FROZEN

    def __init__(self, ms: MultipoleSet):
        self.order = ms.order
        self._m = dict(ms.density_moments)

    def moments(self, t):
        return self._m


class InterpolatedMoments(MomentSource):
    """Moments taken from a quantum record and cubic-spline interpolated in time."""

    mode = INTERPOLATED

    def __init__(self, times, series: dict, order: int):
        self.order = order
        self.t0, self.t1 = float(times[0]), float(times[-1])
        self._splines = {alpha: CubicSpline(times, vals) for alpha, vals in series.items()}

    @classmethod
    def from_multipoles(cls, ms_list) -> "InterpolatedMoments":
        times = np.array([m.time for m in ms_list])
        order = min(m.order for m in ms_list)
        keys = [a for a in ms_list[0].density_moments if sum(a) <= order]
        series = {a: np.array([m.density_moments[a] for m in ms_list]) for a in keys}
        return cls(times, series, order)

    @classmethod
    def from_record(cls, record: TrajectoryRecord, order: int = 4) -> "InterpolatedMoments":
        return cls.from_multipoles([multipoles(s, order=order, c_max=0) for s in record.states()])

    def moments(self, t):
        if not (self.t0 - 1e-12 <= t <= self.t1 + 1e-12):
            raise ValueError(f"time {t} outside the record range [{self.t0}, {self.t1}]")
        return {a: float(s(t)) for a, s in self._splines.items()}


class PrescribedMoments(MomentSource):
    """Moments given as an analytic function of time."""

    mode = PRESCRIBED

    def __init__(self, func: Callable[[float], dict], order: int):
        self.order = order
        self._f = func

    def moments(self, t):
        return self._f(t)


# -- forces ---------------------------------------------------------------------------

def _moment_dict(multipoles_) -> tuple[dict, int]:
    if isinstance(multipoles_, MultipoleSet):
        return multipoles_.density_moments, multipoles_.order
    if multipoles_ is None:
        return {}, 0
    d = dict(multipoles_)
    return d, max((sum(a) for a in d), default=0)


def effective_force(x, V: Potential, multipoles_, order: int) -> np.ndarray:
    """Newton force plus the moment corrections up to total moment order ``order``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = len(x)
    if V.ndim != d:
        raise ValueError(f"{V.ndim}-D potential evaluated at a {d}-D point")
    if order < 1:
        raise ValueError("order must be >= 1")
    if order + 1 > V.max_derivative_order:
        raise MissingDerivativeError(
            f"{V.kind} potential supplies derivatives up to order {V.max_derivative_order}, "
            f"order-{order} force needs {order + 1}")
    moments_, available = _moment_dict(multipoles_)
    if order > 1 and available < order:
        raise ValueError(f"multipoles of order {available} cannot feed an order-{order} force")
    coords = [np.float64(v) for v in x]
    force = np.empty(d)
    for a in range(d):
        total = float(V.derivative(_unit(d, a), *coords))
        for alpha in taylor_terms(d, order):
            n = sum(alpha)
            if n < 2:
                continue
            m = moments_.get(alpha, 0.0)
            if m == 0.0:
                continue
            beta = tuple(k + (1 if i == a else 0) for i, k in enumerate(alpha))
            total += m / alpha_factorial(alpha) * float(V.derivative(beta, *coords))
        force[a] = -total
    return force


def _unit(n, a):
    out = [0] * n
    out[a] = 1
    return tuple(out)


def integrate_effective(x0, v0, V: Potential, source: MomentSource | None, order: int, t_grid,
                        mass=1.0, substeps: int = 1) -> ClassicalTrajectory:
    """Classical fourth-order Runge-Kutta for ``m x'' = F`` on the points of ``t_grid``."""
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    v = np.atleast_1d(np.asarray(v0, dtype=float)).copy()
    t_grid = np.asarray(t_grid, dtype=float)
    m = np.broadcast_to(np.asarray(mass, dtype=float), x.shape)
    if order > 1 and source is None:
        raise ValueError("order > 1 needs a moment source")
    mode = source.mode if source is not None else "none"
    EffectiveState(x, v, float(t_grid[0]), order, mode)

    def accel(t, xx):
        try:
            mom = source.moments(t) if (source is not None and order > 1) else None
            return effective_force(xx, V, mom, order) / m
        except (MissingDerivativeError, ValueError) as exc:
            raise IntegrationError(f"force evaluation failed at t={t:.6g}: {exc}", time=t) from exc

    xs = [x.copy()]
    vs = [v.copy()]
    for k in range(len(t_grid) - 1):
        t = t_grid[k]
        h = (t_grid[k + 1] - t) / substeps
        for _ in range(substeps):
            a1 = accel(t, x)
            x2, v2 = x + 0.5 * h * v, v + 0.5 * h * a1
            a2 = accel(t + 0.5 * h, x2)
            x3, v3 = x + 0.5 * h * v2, v + 0.5 * h * a2
            a3 = accel(t + 0.5 * h, x3)
            x4, v4 = x + h * v3, v + h * a3
            a4 = accel(t + h, x4)
            x = x + h / 6 * (v + 2 * v2 + 2 * v3 + v4)
            v = v + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
            t = t + h
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise IntegrationError(f"effective trajectory diverged at t={t:.6g}", step=k, time=t)
        xs.append(x.copy())
        vs.append(v.copy())
    return ClassicalTrajectory(t_grid, np.array(xs), np.array(vs), order, mode)


def effective_from_record(record: TrajectoryRecord, order: int, mode: str = INTERPOLATED,
                          V: Potential | None = None, moment_order: int | None = None,
                          source: MomentSource | None = None) -> ClassicalTrajectory:
    """Effective run with Cauchy data ``<x>(0)``, ``<p>(0)/m`` on the record's time grid."""
    V = V or record.potential
    m = record.axis_masses
    x0 = record.positions[0]
    v0 = record.momenta[0] / m
    if source is None and order > 1:
        k = moment_order or order
        if mode == INTERPOLATED:
            source = InterpolatedMoments.from_record(record, k)
        elif mode == FROZEN:
            source = FrozenMoments(multipoles(record.snapshot(0), order=k, c_max=0))
        else:
            raise ValueError(f"mode {mode!r} needs an explicit source")
    return integrate_effective(x0, v0, V, source, order, record.times, m)


# -- two bodies -----------------------------------------------------------------------

DIPOLE_TOL = 1e-8


def two_body_dipoles(ms: MultipoleSet) -> tuple[float, float, float]:
    """Dipole magnitudes of particle 1, particle 2 and the mixed (1,1) cross moment.

    The double expansion of a two-particle density about the pair ``(x1, x2)``
    has three dipole-like pieces; the cross piece is the largest mixed moment
    ``∫ (x1^r - x1c^r)(x2^s - x2c^s) rho``.
    """
    d = ms.dims // 2
    dip = ms.dipole()
    cross = 0.0
    if ms.order >= 2:
        for r in range(d):
            for s in range(d):
                alpha = [0] * ms.dims
                alpha[r] = 1
                alpha[d + s] = 1
                cross = max(cross, abs(ms.density_moments[tuple(alpha)]))
    return float(np.linalg.norm(dip[:d])), float(np.linalg.norm(dip[d:])), float(cross)


def two_body_force(x1, x2, V12: Potential, Vext: Potential, multipoles2: MultipoleSet | dict | None,
                   order: int, dipole_tol: float = DIPOLE_TOL):
    """Forces ``(F1, F2)`` on the two trajectories from the double moment expansion."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if isinstance(multipoles2, MultipoleSet):
        worst = max(two_body_dipoles(multipoles2))
        if worst > dipole_tol:
            raise DipoleError(f"source dipole {worst:.3g} exceeds {dipole_tol:.3g}")
    pot = TwoBodyPotential(V12, Vext)
    f = effective_force(np.concatenate([x1, x2]), pot, multipoles2, order)
    d = len(x1)
    return f[:d], f[d:]


# -- relativistic kinematics ----------------------------------------------------------

def relativistic_relative_momentum(v, m: float, c: float):
    """Relative momentum from relative velocity for two equal masses.

    Inverts ``v(pi) = 2 pi c / sqrt(m^2 c^2 + pi^2)``:
    ``pi = m v / sqrt(4 - v^2/c^2)``.
    """
    v = np.asarray(v, dtype=float)
    speed2 = np.sum(v * v) if v.ndim else v * v
    if not speed2 < 4 * c * c:
        raise ValueError(f"relative speed {np.sqrt(speed2):.6g} must stay below 2c = {2 * c:.6g}")
    return m * v / np.sqrt(4 - speed2 / (c * c))


def relative_velocity(pi, m: float, c: float):
    """Equal-mass velocity ``2 pi c / sqrt(m^2 c^2 + |pi|^2)``."""
    pi = np.asarray(pi, dtype=float)
    if pi.ndim == 0:
        return relativistic_velocity(pi, m, m, c)
    p2 = np.sum(pi * pi)
    return 2 * pi * c / np.sqrt(m * m * c * c + p2)


# -- comparison ---------------------------------------------------------------------------

def compare_trajectories(t_quantum, x_quantum, t_classical, x_classical, threshold: float = 1e-3,
                         hbar: float = 1.0, scale: float = 1.0) -> ComparisonMetrics:
    """Position errors of a classical path against ``<x>(t)`` on the quantum times."""
    tq = np.asarray(t_quantum, dtype=float)
    xq = np.asarray(x_quantum, dtype=float).reshape(len(tq), -1)
    tc = np.asarray(t_classical, dtype=float)
    xc = np.asarray(x_classical, dtype=float).reshape(len(tc), -1)
    lo, hi = max(tq[0], tc[0]), min(tq[-1], tc[-1])
    if lo > hi:
        raise ValueError("time ranges do not overlap")
    sel = (tq >= lo - 1e-12) & (tq <= hi + 1e-12)
    tq, xq = tq[sel], xq[sel]
    if len(tc) == len(tq) and np.array_equal(tc, tq):
        xi = xc
    elif len(tc) >= 4:
        xi = CubicSpline(tc, xc, axis=0)(tq)
    else:
        xi = np.column_stack([np.interp(tq, tc, xc[:, a]) for a in range(xc.shape[1])])
    err = np.linalg.norm(xq - xi, axis=1)
    over = np.nonzero(err > threshold)[0]
    horizon = float(tq[over[0]]) if len(over) else float(tq[-1])
    emax = float(err.max())
    return ComparisonMetrics(emax, float(np.sqrt(np.mean(err**2))), emax / (hbar**2 * scale), horizon)
