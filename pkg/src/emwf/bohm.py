"""Pilot-wave comparator: velocity field, quantum potential, trajectory bundles.

All formulas use node-safe ratio forms of the wave function and never unwrap a
phase: with ``b = d psi / psi``,

* velocity ``v_a = (hbar/m_a) Im b_a`` (equal to ``j_a / (m_a rho)``),
* ``(d_a^2 R)/R = Re(psi_aa/psi) + (Im b_a)^2`` for ``R = |psi|``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _fft
from ._kernels import interp_periodic
from .dynamics import SplitStepPropagator, TrajectoryRecord
from .errors import NodeError
from .grid import Grid, WaveFunction, fourier_evaluate, spectral_derivative
from .moments import MultipoleSet, density
from .potentials import taylor_terms, alpha_factorial

NODE_EPS = 1e-10
EULER_EPS = 1e-6
VELOCITY_CHANGE_WARN = 0.1
SPECTRAL_NOISE_FLOOR = 1e-13


def _orders(d, *axes):
    out = [0] * d
    for a in axes:
        out[a] += 1
    return tuple(out)


@dataclass(frozen=True, eq=False)
class PilotWaveFields:
    grid: Grid
    sqrt_density: np.ndarray
    velocity: tuple[np.ndarray, ...]
    quantum_potential: np.ndarray
    node_mask: np.ndarray
    eps: float


def _node_mask(rho, eps_rel):
    eps = eps_rel * float(rho.max())
    return rho < eps, eps


def _safe_ratio(num, den, mask):
    out = np.zeros(np.broadcast(num, den).shape, dtype=np.complex128)
    ok = ~mask
    out[ok] = num[ok] / den[ok]
    return out


def pilot_fields(psi: WaveFunction, eps_rel: float = NODE_EPS) -> PilotWaveFields:
    g = psi.grid
    d = g.dims
    amp = psi.amplitudes
    rho = np.abs(amp) ** 2
    mask, eps = _node_mask(rho, eps_rel)
    masses = psi.axis_masses
    hbar = psi.hbar
    vel = []
    q = np.zeros(g.shape)
    for a in range(d):
        da = spectral_derivative(amp, g, _orders(d, a))
        daa = spectral_derivative(amp, g, _orders(d, a, a))
        b = _safe_ratio(da, amp, mask)
        vel.append(np.where(mask, 0.0, hbar / masses[a] * b.imag))
        r_ratio = _safe_ratio(daa, amp, mask).real + b.imag**2
        q = q - hbar**2 / (2 * masses[a]) * r_ratio
    q = np.where(mask, 0.0, q)
    return PilotWaveFields(g, np.sqrt(rho), tuple(vel), q, mask, eps)


def velocity_forms(psi: WaveFunction, eps_rel: float = NODE_EPS):
    """``(j/(m rho), (hbar/m) Im(grad psi / psi), mask)`` — the two forms of the guidance velocity."""
    f = density(psi)
    mask, _ = _node_mask(f.rho, eps_rel)
    masses = psi.axis_masses
    ratio = tuple(np.where(mask, 0.0, j / (m * np.where(mask, 1.0, f.rho))) for j, m in zip(f.j, masses))
    im = pilot_fields(psi, eps_rel).velocity
    return ratio, im, mask


# -- trajectory bundles ------------------------------------------------------------------

class BohmBundle(NamedTuple):
    times: np.ndarray
    positions: np.ndarray        # [seed, time, axis]; NaN after truncation
    truncated: np.ndarray        # bool per seed
    truncation_time: np.ndarray  # NaN if never truncated
    ordering_preserved: bool
    max_velocity_change: float

    def rows(self, limit: int | None = None):
        """Rows ``(seed, t, x...)`` for the first ``limit`` seeds, skipping truncated samples."""
        n = self.positions.shape[0] if limit is None else min(limit, self.positions.shape[0])
        finite = np.all(np.isfinite(self.positions[:n]), axis=2)
        for s in range(n):
            for k in np.nonzero(finite[s])[0]:
                yield (s, self.times[k], *self.positions[s, k])

    def final_positions(self) -> np.ndarray:
        return self.positions[~self.truncated, -1]


def _upsample(field: np.ndarray, factor: int) -> np.ndarray:
    """Band-limited refinement by zero-padding the spectrum (exact at the coarse nodes)."""
    if factor == 1:
        return field
    spec = _fft.fftn(field)
    shape = field.shape
    big = np.zeros(tuple(n * factor for n in shape), dtype=np.complex128)
    # copy the low modes; the Nyquist mode is split symmetrically so real fields stay real
    src = [np.fft.fftfreq(n) * n for n in shape]
    dst_idx = [np.mod(s.astype(int), n * factor) for s, n in zip(src, shape)]
    big[np.ix_(*dst_idx)] = spec
    for a, n in enumerate(shape):
        nyq = n // 2
        sl_src = [slice(None)] * len(shape)
        sl_src[a] = n * factor - nyq
        sl_dst = [slice(None)] * len(shape)
        sl_dst[a] = nyq
        half = big[tuple(sl_src)] * 0.5
        big[tuple(sl_src)] = half
        big[tuple(sl_dst)] = big[tuple(sl_dst)] + half
    return _fft.ifftn(big) * (factor ** len(shape))


class _VelocityInterpolator:
    def __init__(self, grid: Grid, masses, hbar, upsample: int, order: int):
        self.grid = grid
        self.d = grid.dims
        self.masses = np.asarray(masses, dtype=float)
        self.hbar = hbar
        self.factor = upsample
        self.order = order
        origin = list(grid.origin) + [0.0] * (3 - self.d)
        spacing = [h / upsample for h in grid.spacing] + [1.0] * (3 - self.d)
        self.origin, self.spacing = origin, spacing

    def fields(self, amp):
        d = self.d
        stack = [amp] + [spectral_derivative(amp, self.grid, _orders(d, a)) for a in range(d)]
        fine = [_upsample(f, self.factor) for f in stack]
        arr = np.stack(fine)
        return arr.reshape(arr.shape[:1] + arr.shape[1:] + (1,) * (3 - d))

    def velocity(self, fields, x, eps):
        pts = np.zeros((len(x), 3))
        pts[:, :self.d] = x
        vals = interp_periodic(fields, self.origin, self.spacing, pts, self.order)
        psi = vals[:, 0]
        node = np.abs(psi) ** 2 < eps
        safe = np.where(node, 1.0, psi)
        v = np.empty((len(x), self.d))
        for a in range(self.d):
            v[:, a] = self.hbar / self.masses[a] * (vals[:, 1 + a] / safe).imag
        v[node] = 0.0
        return v, node


def _default_upsample(d):
    return {1: 4, 2: 2}.get(d, 1)


def integrate_bohm_trajectories(record: TrajectoryRecord, seeds, eps_rel: float = NODE_EPS,
                                upsample: int | None = None, order: int = 6) -> BohmBundle:
    """Integrate ``dx/dt = v(x, t)`` with classical RK4, one step per saved interval.

    Stage values at half-intervals use the wave function advanced from the
    saved snapshot by half a stride with the record's own propagator.
    """
    if record.snapshots is None:
        raise ValueError("Bohm trajectories need a record with snapshots")
    if record.potential is None or record.kind != "schrodinger":
        raise ValueError("Bohm trajectories need a Schrodinger record with its potential")
    g = record.grid
    d = g.dims
    seeds = np.asarray(seeds, dtype=float).reshape(-1, d)
    times = np.asarray(record.times)
    h = float(times[1] - times[0])
    sub_dt = record.dt if record.dt > 0 else h / 2
    n_half = max(1, int(round(h / 2 / sub_dt)))
    half_prop = SplitStepPropagator(g, record.units, record.potential.values(g), h / 2 / n_half)
    interp = _VelocityInterpolator(g, record.axis_masses, record.units.hbar,
                                   upsample or _default_upsample(d), order)
    n_seeds, n_t = len(seeds), len(times)
    pos = np.full((n_seeds, n_t, d), np.nan)
    pos[:, 0] = seeds
    alive = np.ones(n_seeds, dtype=bool)
    trunc_time = np.full(n_seeds, np.nan)
    ordering = True
    max_dv = 0.0
    v_scale = 0.0

    eps0 = eps_rel * float(np.max(np.abs(record.snapshots[0]) ** 2))
    f_now = interp.fields(record.snapshots[0])
    v0, node = interp.velocity(f_now, seeds, eps0)
    if np.any(node):
        raise NodeError(f"{int(node.sum())} seeds start on the node mask")
    if d == 1:
        order0 = np.argsort(seeds[:, 0], kind="stable")
    x = seeds.copy()
    for k in range(n_t - 1):
        amp = record.snapshots[k]
        mid = amp
        for _ in range(n_half):
            mid = half_prop.step(mid)
        eps_k = eps_rel * float(np.max(np.abs(amp) ** 2))
        f_mid = interp.fields(mid)
        f_next = interp.fields(record.snapshots[k + 1])
        idx = np.nonzero(alive)[0]
        xa = x[idx]
        k1, n1 = interp.velocity(f_now, xa, eps_k)
        k2, n2 = interp.velocity(f_mid, xa + 0.5 * h * k1, eps_k)
        k3, n3 = interp.velocity(f_mid, xa + 0.5 * h * k2, eps_k)
        k4, n4 = interp.velocity(f_next, xa + h * k3, eps_k)
        xn = xa + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        hit = n1 | n2 | n3 | n4
        if np.any(~hit):
            max_dv = max(max_dv, float(np.abs(k4 - k1)[~hit].max()))
            v_scale = max(v_scale, float(np.abs(k1[~hit]).max()), float(np.abs(k4[~hit]).max()))
        dead = idx[hit]
        alive[dead] = False
        trunc_time[dead] = times[k]
        live = idx[~hit]
        x[live] = xn[~hit]
        pos[live, k + 1] = x[live]
        if d == 1:
            cur = order0[alive[order0]]
            if np.any(np.diff(x[cur, 0]) <= 0):
                ordering = False
        f_now = f_next
    # largest change of the guidance velocity over one interval, relative to the run's speed scale
    max_change = max_dv / v_scale if v_scale > 0 else 0.0
    if max_change > VELOCITY_CHANGE_WARN:
        warnings.warn(f"guidance velocity changes by up to {100 * max_change:.0f}% within one saved "
                      "interval; consider a finer save stride", RuntimeWarning, stacklevel=2)
    return BohmBundle(times, pos, ~alive, trunc_time, ordering, max_change)


def sample_seeds(psi: WaveFunction, n: int, rng: np.random.Generator, mode: str = "density",
                 region=None, eps_rel: float = NODE_EPS) -> np.ndarray:
    """Seed positions drawn from ``|psi|^2`` (cell choice + uniform jitter) or uniformly over ``region``."""
    g = psi.grid
    d = g.dims
    if mode == "density":
        rho = psi.density().ravel()
        prob = np.where(rho < eps_rel * rho.max(), 0.0, rho)
        prob = prob / prob.sum()
        cells = rng.choice(len(prob), size=n, p=prob)
        coords = np.array(np.unravel_index(cells, g.shape), dtype=float).T
        jitter = rng.uniform(-0.5, 0.5, size=(n, d))
        return np.asarray(g.origin) + (coords + jitter) * np.asarray(g.spacing)
    if mode == "uniform":
        if region is None:
            raise ValueError("uniform seeding needs a region [(lo, hi) per axis]")
        region = np.asarray(region, dtype=float).reshape(d, 2)
        return rng.uniform(region[:, 0], region[:, 1], size=(n, d))
    raise ValueError(f"unknown seeding mode {mode!r}")


def total_variation(samples: np.ndarray, psi: WaveFunction, bins: int = 40, span=None) -> float:
    """TV distance between a 1-D sample histogram and ``|psi|^2`` integrated over the same bins."""
    if psi.grid.dims != 1:
        raise ValueError("total variation check is 1-D")
    x = psi.grid.axis(0)
    rho = psi.density()
    if span is None:
        mass = np.cumsum(rho) / rho.sum()
        lo = x[np.searchsorted(mass, 1e-6)]
        hi = x[min(np.searchsorted(mass, 1 - 1e-6), len(x) - 1)]
    else:
        lo, hi = span
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(samples, bins=edges)
    emp = counts / len(samples)
    # density mass per bin from a fine band-limited resampling
    fine = 16
    xf = psi.grid.origin[0] + np.arange(len(x) * fine) * psi.grid.spacing[0] / fine
    rf = np.abs(_upsample(psi.amplitudes, fine)) ** 2
    theo = np.histogram(xf, bins=edges, weights=rf)[0] * psi.grid.spacing[0] / fine
    outside = 1.0 - theo.sum()
    return 0.5 * (float(np.abs(emp - theo).sum()) + max(outside, 0.0))


# -- Euler-type residual -----------------------------------------------------------------------

class EulerResidual(NamedTuple):
    times: np.ndarray
    max_residual: np.ndarray
    fields: list


def _euler_terms(amp, grid, masses, hbar, mask):
    """Velocity, its spatial Jacobian, and grad of the quantum potential (node-safe forms)."""
    d = grid.dims
    D = {}

    def der(*axes):
        key = _orders(d, *axes)
        if key not in D:
            D[key] = spectral_derivative(amp, grid, key)
        return D[key]

    psi = amp
    safe = np.where(mask, 1.0, psi)
    inv = 1.0 / safe
    v = [hbar / masses[a] * (der(a) * inv).imag for a in range(d)]
    # dv_a/dx_j = (hbar/m_a) Im(psi_aj/psi - psi_a psi_j/psi^2)
    jac = [[hbar / masses[a] * (der(a, j) * inv - der(a) * der(j) * inv**2).imag for j in range(d)]
           for a in range(d)]
    gq = []
    for i in range(d):
        acc = 0.0
        for a in range(d):
            ba = der(a) * inv
            dba = der(a, i) * inv - der(a) * der(i) * inv**2
            term = (der(a, a, i) * inv - der(a, a) * der(i) * inv**2).real + 2 * ba.imag * dba.imag
            acc = acc - hbar**2 / (2 * masses[a]) * term
        gq.append(acc)
    return v, jac, gq


def euler_residual(record: TrajectoryRecord, every: int = 1, eps_rel: float = EULER_EPS,
                   keep_fields: bool = False) -> EulerResidual:
    """``m (d_t + v.grad) v + grad(V + Q)`` at interior saved times, off the node mask."""
    if record.snapshots is None or len(record) < 3:
        raise ValueError("Euler residual needs a record with at least 3 snapshots")
    rec = record.subsample(every) if every > 1 else record
    g = rec.grid
    d = g.dims
    masses = rec.axis_masses
    hbar = rec.units.hbar
    h = float(rec.times[1] - rec.times[0])
    gradV = rec.potential.gradient_field(g) if rec.potential is not None else [np.zeros(g.shape)] * d
    n = len(rec)
    maxima = np.zeros(n - 2)
    fields = []
    snaps = rec.snapshots
    for k in range(1, n - 1):
        rho = np.abs(snaps[k]) ** 2
        mask = rho < eps_rel * rho.max()
        masks_nb = [np.abs(snaps[i]) ** 2 < eps_rel * np.abs(snaps[i]).max() ** 2 for i in (k - 1, k + 1)]
        full = mask | masks_nb[0] | masks_nb[1]
        v, jac, gq = _euler_terms(snaps[k], g, masses, hbar, full)
        vm, _, _ = _euler_terms(snaps[k - 1], g, masses, hbar, full)
        vp, _, _ = _euler_terms(snaps[k + 1], g, masses, hbar, full)
        res = []
        for i in range(d):
            dvdt = (vp[i] - vm[i]) / (2 * h)
            adv = sum(v[j] * jac[i][j] for j in range(d))
            r = masses[i] * (dvdt + adv) + gradV[i] + gq[i]
            res.append(np.where(full, 0.0, r))
        mag = np.sqrt(sum(r**2 for r in res))
        maxima[k - 1] = float(mag.max())
        if keep_fields:
            fields.append(mag)
    return EulerResidual(np.asarray(rec.times[1:-1]), maxima, fields)


# -- monopole relation --------------------------------------------------------------------------

class MonopoleRelation(NamedTuple):
    momentum: np.ndarray           # <p>
    m_velocity: np.ndarray         # m v_B(x_psi)
    partial_sums: np.ndarray       # [order, axis] series through each order
    remainders: np.ndarray         # |<p> - partial sum| per order

    @property
    def correction(self) -> np.ndarray:
        return self.partial_sums[-1] - self.m_velocity


def _series_divide(num: dict, den: dict, terms) -> dict:
    """Truncated multivariate power series ``num / den`` (``den`` has nonzero constant term)."""
    zero = terms[0]
    out = {}
    for gamma in terms:
        acc = num.get(gamma, 0.0)
        for beta in terms:
            if beta == zero or any(b > c for b, c in zip(beta, gamma)):
                continue
            rest = tuple(c - b for b, c in zip(beta, gamma))
            acc = acc - den.get(beta, 0.0) * out.get(rest, 0.0)
        out[gamma] = acc / den[zero]
    return out


def monopole_relation_check(psi: WaveFunction, ms: MultipoleSet, order: int = 4,
                            eps_rel: float = NODE_EPS, noise_floor: float = SPECTRAL_NOISE_FLOOR) -> MonopoleRelation:
    """Expand ``m v_B`` about ``x_psi`` against the density moments and compare with ``<p>``.

    ``<p_i> = sum_{|alpha| <= N} M_alpha / alpha! * d^alpha (m v_i)(x_psi)``; the
    derivatives of ``v`` come from the Taylor series of ``d psi / psi`` at ``x_psi``.
    """
    if ms.order < order:
        raise ValueError(f"multipoles of order {ms.order} cannot support a series of order {order}")
    g = psi.grid
    d = g.dims
    xc = np.asarray(ms.center, dtype=float)
    rho = psi.density()
    eps = eps_rel * float(rho.max())
    terms = taylor_terms(d, order + 1)
    taylor = {}
    for beta in terms:
        val = complex(fourier_evaluate(psi.amplitudes, g, xc[None, :], beta, noise_floor)[0])
        taylor[beta] = val / alpha_factorial(beta)
    zero = terms[0]
    if abs(taylor[zero]) ** 2 < eps:
        raise NodeError("expansion center lies on the node mask")
    low = taylor_terms(d, order)
    hbar = psi.hbar
    p_exp = ms.momentum_monopole()
    partial = np.zeros((order + 1, d))
    m_v = np.zeros(d)
    for i in range(d):
        deriv = {}
        for gamma in low:
            up = tuple(c + (1 if a == i else 0) for a, c in enumerate(gamma))
            deriv[gamma] = (gamma[i] + 1) * taylor[up]
        b = _series_divide(deriv, taylor, low)
        m_v[i] = hbar * b[zero].imag
        # coefficient of the Taylor series of m v_i is hbar Im b_alpha; the moment weight is M_alpha
        running = 0.0
        by_order = np.zeros(order + 1)
        for alpha in low:
            by_order[sum(alpha)] += ms.density_moments[alpha] * hbar * b[alpha].imag
        for n in range(order + 1):
            running += by_order[n]
            partial[n, i] = running
    rem = np.linalg.norm(partial - p_exp[None, :], axis=1)
    return MonopoleRelation(p_exp, m_v, partial, rem)
