"""Densities, expectation values and central-moment (multipole) tensors.

Moments are indexed by exponent tuples ``alpha`` (one entry per axis), so the
symmetric tensor component ``M^{r1..rn}`` is stored once under the tuple that
counts how often each axis appears.  All integrals are Riemann sums; all
derivatives are spectral.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import GridError, QuadratureError
from .grid import Grid, WaveFunction, check_boundary, spectral_derivative, BOUNDARY_FAIL
from .potentials import multi_indices, taylor_terms

MAX_ORDER = 8
MAX_PAIR_ORDER = 4
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DensityField:
    """Position density ``rho = |psi|^2`` and momentum density ``j`` (with ``∫ j = <p>``)."""

    grid: Grid
    rho: np.ndarray
    j: tuple[np.ndarray, ...]
    time: float = 0.0

    def total(self) -> float:
        return float(np.sum(self.rho) * self.grid.cell_volume)


def _gradient(psi: WaveFunction) -> list[np.ndarray]:
    g = psi.grid
    return [spectral_derivative(psi.amplitudes, g, _unit(g.dims, a)) for a in range(g.dims)]


def _unit(n, a, k=1):
    out = [0] * n
    out[a] = k
    return tuple(out)


def density(psi: WaveFunction) -> DensityField:
    amp = psi.amplitudes
    # (hbar/2i)(psi* d psi - psi d psi*) = hbar Im(psi* d psi)
    j = tuple(psi.hbar * np.imag(np.conj(amp) * d) for d in _gradient(psi))
    return DensityField(psi.grid, np.abs(amp) ** 2, j, psi.time)


def position_expectation(psi: WaveFunction, fail: float = BOUNDARY_FAIL) -> np.ndarray:
    check_boundary(psi, fail=fail)
    rho = psi.density()
    dv = psi.grid.cell_volume
    return np.array([float(np.sum(x * rho) * dv) for x in psi.grid.mesh()])


def momentum_expectation(psi: WaveFunction, fail: float = BOUNDARY_FAIL) -> np.ndarray:
    check_boundary(psi, fail=fail)
    f = density(psi)
    dv = psi.grid.cell_volume
    return np.array([float(np.sum(j) * dv) for j in f.j])


@dataclass(frozen=True, eq=False)
class MultipoleSet:
    """Central moments about ``center`` up to ``order``.

    ``density_moments[alpha] = ∫ (x-center)^alpha rho``;
    ``momentum_moments[(r, alpha)] = ∫ (x-center)^alpha j_r``;
    ``derivative_pair_moments[(conj_orders, orders, alpha)] =
    ∫ (x-center)^alpha (d^conj_orders psi)* (d^orders psi)``.
    """

    center: np.ndarray
    order: int
    density_moments: dict
    momentum_moments: dict
    derivative_pair_moments: dict | None = None
    hbar: float = 1.0
    time: float = 0.0
    pair_order: int = 0

    @property
    def dims(self) -> int:
        return len(self.center)

    def moment(self, alpha) -> float:
        return self.density_moments[tuple(alpha)]

    def dipole(self) -> np.ndarray:
        return np.array([self.density_moments[_unit(self.dims, a)] for a in range(self.dims)])

    def covariance(self) -> np.ndarray:
        d = self.dims
        out = np.empty((d, d))
        for a in range(d):
            for b in range(d):
                alpha = [0] * d
                alpha[a] += 1
                alpha[b] += 1
                out[a, b] = self.density_moments[tuple(alpha)]
        return out

    def tensor(self, n: int) -> np.ndarray:
        """Full symmetric rank-``n`` tensor ``M^{r1..rn}``."""
        d = self.dims
        out = np.empty((d,) * n)
        for idx in np.ndindex(*out.shape):
            out[idx] = self.density_moments[_counts(idx, d)]
        return out

    def momentum_monopole(self) -> np.ndarray:
        return np.array([self.momentum_moments[(r, (0,) * self.dims)] for r in range(self.dims)])

    def momentum_dipole(self) -> np.ndarray:
        """``D[k, j] = ∫ (x-center)^j j_k``."""
        d = self.dims
        return np.array([[self.momentum_moments[(k, _unit(d, j))] for j in range(d)] for k in range(d)])

    def pair(self, conj_orders, orders, alpha=None) -> complex:
        if self.derivative_pair_moments is None:
            raise KeyError("derivative pair moments were not computed")
        alpha = (0,) * self.dims if alpha is None else tuple(alpha)
        return self.derivative_pair_moments[(tuple(conj_orders), tuple(orders), alpha)]

    def validate(self, scale: float = 1.0) -> None:
        zero = (0,) * self.dims
        if abs(self.density_moments[zero] - 1.0) > 1e-9:
            raise QuadratureError(f"density monopole is {self.density_moments[zero]!r}, expected 1")
        if self.order >= 2:
            cov = self.covariance()
            if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL:
                raise QuadratureError("covariance tensor is not symmetric")
            if np.linalg.eigvalsh(cov).min() < -1e-12 * max(scale, np.abs(cov).max()):
                raise QuadratureError("covariance tensor is not positive semidefinite")


def _counts(idx, d):
    out = [0] * d
    for i in idx:
        out[i] += 1
    return tuple(out)


def _power_table(grid: Grid, center, order):
    """``tab[a][k] = (x_a - center_a)^k`` as broadcastable arrays."""
    mesh = grid.mesh()
    tab = []
    for a, x in enumerate(mesh):
        u = x - center[a]
        row = [np.ones_like(u)]
        for _ in range(order):
            row.append(row[-1] * u)
        tab.append(row)
    return tab


def _weight(tab, alpha):
    w = 1.0
    for a, k in enumerate(alpha):
        if k:
            w = w * tab[a][k]
    return w


def _check_center(grid, center):
    center = np.asarray(center, dtype=float).reshape(-1)
    if len(center) != grid.dims:
        raise GridError(f"center needs {grid.dims} components")
    for c, o, L in zip(center, grid.origin, grid.extents):
        if not (o <= c <= o + L):
            raise GridError(f"center component {c} lies outside the box")
    return center


def central_moments(field: DensityField, center, order: int = 4, max_order: int = MAX_ORDER,
                    hbar: float = 1.0) -> MultipoleSet:
    if not 0 <= order <= max_order:
        raise ValueError(f"order must be in 0..{max_order}, got {order}")
    grid = field.grid
    center = _check_center(grid, center)
    tab = _power_table(grid, center, order)
    dv = grid.cell_volume
    dens = {}
    mom = {}
    for alpha in taylor_terms(grid.dims, order):
        w = _weight(tab, alpha)
        dens[alpha] = float(np.sum(w * field.rho) * dv)
        for r, j in enumerate(field.j):
            mom[(r, alpha)] = float(np.sum(w * j) * dv)
    return MultipoleSet(center, order, dens, mom, None, hbar, field.time)


def derivative_pair_moments(psi: WaveFunction, center, c_max: int = 2, n_max: int = 0) -> dict:
    """``∫ (x-center)^alpha (d^b psi)* (d^a psi)`` for ``|a|+|b| <= c_max``, ``|alpha| <= n_max``."""
    if not 0 <= c_max <= MAX_PAIR_ORDER:
        raise ValueError(f"c_max must be in 0..{MAX_PAIR_ORDER}")
    grid = psi.grid
    center = _check_center(grid, center)
    d = grid.dims
    derivs = {beta: spectral_derivative(psi.amplitudes, grid, beta) for beta in taylor_terms(d, c_max)}
    conj = {beta: np.conj(v) for beta, v in derivs.items()}
    tab = _power_table(grid, center, n_max)
    weights = {alpha: _weight(tab, alpha) for alpha in taylor_terms(d, n_max)}
    dv = grid.cell_volume
    out = {}
    for c in range(c_max + 1):
        for ca in range(c + 1):
            for b in multi_indices(d, c - ca):
                for a in multi_indices(d, ca):
                    prod = conj[b] * derivs[a]
                    for alpha, w in weights.items():
                        out[(b, a, alpha)] = complex(np.sum(w * prod) * dv)
    return out


def multipoles(psi: WaveFunction, center=None, order: int = 4, c_max: int = 2, n_max: int = 0,
               fail: float = BOUNDARY_FAIL, validate: bool = True) -> MultipoleSet:
    """Density/momentum moments plus derivative pairs, centered at ``<x>`` by default."""
    if center is None:
        center = position_expectation(psi, fail=fail)
    else:
        check_boundary(psi, fail=fail)
    f = density(psi)
    ms = central_moments(f, center, order, hbar=psi.hbar)
    pairs = derivative_pair_moments(psi, ms.center, c_max, n_max) if c_max > 0 else None
    ms = MultipoleSet(ms.center, order, ms.density_moments, ms.momentum_moments, pairs, psi.hbar,
                      psi.time, c_max if pairs else 0)
    if validate:
        ms.validate()
    return ms


def weyl_momentum_moment(pairs: dict, axes, alpha, hbar: float, dims: int) -> complex:
    """Weyl-symmetrized momentum moment along the derivative axes ``axes``.

    ``(i hbar/2)^c sum_S (-1)^{|S|} ∫ (x-center)^alpha (d_{axes\\S} psi)* (d_S psi)``
    — for ``alpha = 0`` this equals ``<p_{axes[0]} ... p_{axes[c-1]}>``.
    """
    c = len(axes)
    total = 0j
    for k in range(c + 1):
        for sub in combinations(range(c), k):
            a = _counts([axes[i] for i in sub], dims)
            b = _counts([axes[i] for i in range(c) if i not in sub], dims)
            total += (-1) ** k * pairs[(b, a, tuple(alpha))]
    return (0.5j * hbar) ** c * total


def uncertainties(psi: WaveFunction, ms: MultipoleSet, tol: float = 1e-9):
    """Per-axis ``(Δx, Δp)`` from second moments and derivative pairs."""
    if ms.order < 2 or ms.pair_order < 2:
        raise ValueError("need density moments of order >= 2 and derivative pairs up to c=2")
    d = ms.dims
    zero = (0,) * d
    dx2 = np.array([ms.density_moments[_unit(d, r, 2)] for r in range(d)])
    p1 = np.array([weyl_momentum_moment(ms.derivative_pair_moments, (r,), zero, ms.hbar, d).real for r in range(d)])
    p2 = np.array([weyl_momentum_moment(ms.derivative_pair_moments, (r, r), zero, ms.hbar, d).real for r in range(d)])
    dp2 = p2 - p1 ** 2
    scale = np.maximum(1.0, np.abs(p2))
    if np.any(dx2 < -tol) or np.any(dp2 < -tol * scale):
        raise QuadratureError("negative variance: quadrature failure")
    return np.sqrt(np.maximum(dx2, 0.0)), np.sqrt(np.maximum(dp2, 0.0))


_LEVI = {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1, (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}


def angular_momentum_expectation(psi: WaveFunction, ms: MultipoleSet):
    """``(<L>, L_psi, residual)`` with ``L = x × p`` split into trajectory and momentum-dipole parts."""
    if psi.grid.dims != 3:
        raise GridError("angular momentum needs a 3-D state")
    xc = ms.center
    p = ms.momentum_monopole()
    D = ms.momentum_dipole()  # D[k, j] = ∫ (x-xc)^j j_k
    l_psi = np.zeros(3)
    resid = np.zeros(3)
    for (i, j, k), s in _LEVI.items():
        l_psi[i] += s * xc[j] * p[k]
        resid[i] += s * D[k, j]
    return l_psi + resid, l_psi, resid


def multipole_series(states, order: int = 4, c_max: int = 0, fail: float = BOUNDARY_FAIL):
    """Multipoles of every state in an iterable (e.g. ``record.states()``)."""
    return [multipoles(s, order=order, c_max=c_max, fail=fail) for s in states]


def moment_rows(series):
    """Rows ``(t, alpha, value, kind)`` for the moments CSV."""
    for ms in series:
        for alpha, v in ms.density_moments.items():
            yield ms.time, _alpha_label(alpha), v, "density"
        for (r, alpha), v in ms.momentum_moments.items():
            yield ms.time, _alpha_label(alpha), v, f"momentum_{r}"
        if ms.derivative_pair_moments:
            for (b, a, alpha), v in ms.derivative_pair_moments.items():
                if any(alpha):
                    continue
                c = sum(a) + sum(b)
                label = f"{_alpha_label(b)}|{_alpha_label(a)}"
                yield ms.time, label, v.real, f"pair_{c}_{sum(a)}_re"
                yield ms.time, label, v.imag, f"pair_{c}_{sum(a)}_im"


def _alpha_label(alpha) -> str:
    return "".join(str(a) for a in alpha) if alpha else "-"


def interference_term(psi1: WaveFunction, psi2: WaveFunction, alpha: complex, beta: complex) -> np.ndarray:
    """``∫ x (alpha* beta psi1* psi2 + c.c.)`` per axis (unnormalized superposition)."""
    if psi1.grid != psi2.grid:
        raise GridError("wave functions live on different grids")
    cross = np.conj(alpha) * beta * np.conj(psi1.amplitudes) * psi2.amplitudes
    dv = psi1.grid.cell_volume
    return np.array([float(np.sum(x * 2 * cross.real) * dv) for x in psi1.grid.mesh()])


def second_moment(psi: WaveFunction, a: int, b: int) -> float:
    """Raw ``<x_a x_b>``."""
    mesh = psi.grid.mesh()
    return float(np.sum(mesh[a] * mesh[b] * psi.density()) * psi.grid.cell_volume)


__all__ = [
    "DensityField", "MultipoleSet", "density", "position_expectation", "momentum_expectation",
    "central_moments", "derivative_pair_moments", "multipoles", "weyl_momentum_moment",
    "uncertainties", "angular_momentum_expectation", "multipole_series", "moment_rows",
    "interference_term", "second_moment",
]
