"""Wigner phase-space function, Weyl-symbol expectations and phase-space moments.

``W(x, p) = ∫ dξ e^{i p ξ/hbar} psi(x - ξ/2) psi*(x + ξ/2)`` is evaluated on
the position lattice times the FFT-conjugate momentum lattice.  The half-lattice
shifts ``psi(x ± ξ/2)`` are exact band-limited shifts (Fourier phase ramps), so
both marginals are reproduced to roundoff.  Normalization:
``∫∫ W dx dp / (2 pi hbar)^d = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations, product
from typing import NamedTuple

import numpy as np

from . import _fft
from .errors import GridError
from .grid import Grid, WaveFunction, momentum_density, spectral_derivative
from .moments import multipoles, weyl_momentum_moment, MultipoleSet
from .potentials import taylor_terms

MAX_WIGNER_DIMS = 2
MAX_WIGNER_SIZE = 2**24
MAX_POLY_DEGREE = 4


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """``values[x..., p...]`` with momenta in ascending (fftshifted) order."""

    grid: Grid
    momenta: tuple[np.ndarray, ...]
    values: np.ndarray
    hbar: float = 1.0
    imag_residue: float = 0.0

    @property
    def dims(self) -> int:
        return self.grid.dims

    @property
    def momentum_spacing(self) -> tuple[float, ...]:
        return tuple(2 * np.pi * self.hbar / L for L in self.grid.extents)

    @property
    def measure(self) -> float:
        """Phase-space cell ``dx dp / (2 pi hbar)^d``."""
        return self.grid.cell_volume * math.prod(self.momentum_spacing) / (2 * np.pi * self.hbar) ** self.dims

    def normalization(self) -> float:
        return float(np.sum(self.values) * self.measure)

    def purity(self) -> float:
        """``(2 pi hbar)^d ∫∫ W^2 dx dp / (2 pi hbar)^{2d}`` — 1 for pure states."""
        return float(np.sum(self.values**2) * self.measure)

    def phase_mesh(self):
        """Broadcastable ``(x_1..x_d, p_1..p_d)`` arrays matching ``values``."""
        axes = list(self.grid.axes()) + list(self.momenta)
        return np.meshgrid(*axes, indexing="ij", sparse=True)


class PhaseSpacePolynomial(NamedTuple):
    """``sum c * x^alpha p^beta`` keyed by ``(alpha, beta)`` exponent tuples (Weyl symbol)."""

    terms: dict
    weyl_ordered: bool = True

    @property
    def degree(self) -> int:
        return max((sum(a) + sum(b) for a, b in self.terms), default=0)

    @classmethod
    def monomial(cls, alpha, beta, coef: float = 1.0) -> "PhaseSpacePolynomial":
        return cls({(tuple(alpha), tuple(beta)): float(coef)})


def _shifted_copies(amp_hat, grid: Grid, sign: float):
    """``psi(x + sign * j*dx/2)`` for every lattice lag ``j`` (FFT order), stacked first."""
    d = grid.dims
    ks = [2 * np.pi * np.fft.fftfreq(N, d=L / N) for L, N in zip(grid.extents, grid.points)]
    lags = [np.fft.fftfreq(N) * N for N in grid.points]
    out = np.empty(grid.points + grid.points, dtype=np.complex128)
    for idx in product(*[range(N) for N in grid.points]):
        phase = 1.0
        for a in range(d):
            s = sign * lags[a][idx[a]] * grid.spacing[a] / 2
            shape = [1] * d
            shape[a] = -1
            phase = phase * np.exp(1j * ks[a] * s).reshape(shape)
        out[idx] = _fft.ifftn(amp_hat * phase)
    return out


def wigner_transform(psi: WaveFunction) -> WignerGrid:
    g = psi.grid
    d = g.dims
    if d > MAX_WIGNER_DIMS:
        raise GridError(f"Wigner transform supports at most {MAX_WIGNER_DIMS} dimensions, got {d}")
    if g.size**2 > MAX_WIGNER_SIZE:
        raise GridError("phase-space grid too large")
    amp_hat = _fft.fftn(psi.amplitudes)
    minus = _shifted_copies(amp_hat, g, -1.0)  # psi(x - ξ/2), indexed [lag..., x...]
    plus = _shifted_copies(amp_hat, g, +1.0)
    f = minus * np.conj(plus)
    # the lag -N/2 has no +N/2 partner; it must be real for f(x,-ξ) = f(x,ξ)*
    for a in range(d):
        sl = [slice(None)] * (2 * d)
        sl[a] = g.points[a] // 2
        f[tuple(sl)] = f[tuple(sl)].real
    lag_axes = tuple(range(d))
    w = _fft.ifftn(f, axes=lag_axes) * (g.size * g.cell_volume)
    w = np.fft.fftshift(w, axes=lag_axes)
    # reorder to [x..., p...]
    w = np.moveaxis(w, lag_axes, tuple(range(d, 2 * d)))
    p_axes = tuple(np.fft.fftshift(psi.hbar * 2 * np.pi * np.fft.fftfreq(N, d=L / N))
                   for L, N in zip(g.extents, g.points))
    scale = max(float(np.abs(w).max()), 1e-300)
    return WignerGrid(g, p_axes, np.ascontiguousarray(w.real), psi.hbar, float(np.abs(w.imag).max() / scale))


def marginals(W: WignerGrid):
    """``(rho_x, rho_p)``; ``rho_p`` is on the ascending momentum lattice."""
    d = W.dims
    dp = math.prod(W.momentum_spacing) / (2 * np.pi * W.hbar) ** d
    dx = W.grid.cell_volume / (2 * np.pi * W.hbar) ** d
    rho_x = W.values.sum(axis=tuple(range(d, 2 * d))) * dp
    rho_p = W.values.sum(axis=tuple(range(d))) * dx
    return rho_x, rho_p


def momentum_density_shifted(psi: WaveFunction) -> np.ndarray:
    """Direct ``|psi~(p)|^2`` on the same ascending lattice as :func:`marginals`."""
    return np.fft.fftshift(momentum_density(psi))


def wigner_expectation(W: WignerGrid, poly: PhaseSpacePolynomial) -> float:
    """``∫∫ Omega_W(x, p) W(x, p) dx dp / (2 pi hbar)^d``."""
    if poly.degree > MAX_POLY_DEGREE:
        raise ValueError(f"phase-space polynomials are limited to degree {MAX_POLY_DEGREE}")
    d = W.dims
    mesh = W.phase_mesh()
    total = 0.0
    for (alpha, beta), c in poly.terms.items():
        if len(alpha) != d or len(beta) != d:
            raise ValueError("exponent tuples must match the dimension")
        sym = 1.0
        for a in range(d):
            if alpha[a]:
                sym = sym * mesh[a] ** alpha[a]
            if beta[a]:
                sym = sym * mesh[d + a] ** beta[a]
        total += c * float(np.sum(sym * W.values))
    return total * W.measure


def _apply_x(amp, grid, a):
    return grid.mesh()[a] * amp


def _apply_p(amp, grid, a, hbar):
    orders = [0] * grid.dims
    orders[a] = 1
    return -1j * hbar * spectral_derivative(amp, grid, orders)


def weyl_ordered_expectation(psi: WaveFunction, alpha, beta) -> complex:
    """``<psi| W[x^alpha p^beta] |psi>`` with the operator Weyl-ordered by explicit symmetrization.

    Validation path for Weyl symbols of monomials: averaging the operator over
    all orderings of its factors must reproduce the phase-space integral of the
    classical monomial against the Wigner function.
    """
    g = psi.grid
    amp = np.array(psi.amplitudes)
    out = amp
    for a in range(g.dims):
        word = "x" * alpha[a] + "p" * beta[a]
        orderings = sorted(set(permutations(word)))
        acc = np.zeros_like(amp)
        for w in orderings:
            phi = out
            for letter in reversed(w):
                phi = _apply_x(phi, g, a) if letter == "x" else _apply_p(phi, g, a, psi.hbar)
            acc = acc + phi
        out = acc / len(orderings)
    return complex(np.vdot(amp, out) * g.cell_volume)


def wigner_multipole_coefficients(psi: WaveFunction, center=None, c_max: int = 2, n_max: int = 0,
                                  ms: MultipoleSet | None = None) -> dict:
    """Phase-space moment table ``{(alpha, axes): value}``.

    ``value = ∫∫ (x - center)^alpha p_{axes[0]}...p_{axes[c-1]} W dx dp / (2 pi hbar)^d``
    assembled from derivative-pair moments; ``axes`` is a sorted tuple of length ``c``.
    """
    if ms is None:
        ms = multipoles(psi, center=center, order=max(n_max, 1), c_max=c_max, n_max=n_max)
    if ms.derivative_pair_moments is None:
        raise ValueError("derivative pair moments are missing")
    d = ms.dims
    out = {}
    for c in range(c_max + 1):
        for axes in _sorted_tuples(d, c):
            for alpha in taylor_terms(d, n_max):
                val = weyl_momentum_moment(ms.derivative_pair_moments, axes, alpha, ms.hbar, d)
                if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
                    raise ArithmeticError(f"phase-space coefficient {axes} {alpha} not real: {val}")
                out[(alpha, axes)] = val.real
    return out


def _sorted_tuples(d, c):
    if c == 0:
        return [()]
    out = set()
    for t in product(range(d), repeat=c):
        out.add(tuple(sorted(t)))
    return sorted(out)


class CommutatorResult(NamedTuple):
    xp: np.ndarray
    px: np.ndarray
    difference: np.ndarray
    xp_direct: np.ndarray
    px_direct: np.ndarray
    symmetrized: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(max(np.abs(self.xp - self.xp_direct).max(), np.abs(self.px - self.px_direct).max()))


def commutator_check(psi: WaveFunction, ms: MultipoleSet) -> CommutatorResult:
    """Mixed expectations ``<x^i p^j>`` and ``<p^j x^i>`` assembled from moments and checked directly.

    With ``D[j, i] = ∫ (x - x_psi)^i j_j``::

        <x^i p^j> = x_psi^i p_psi^j + D[j, i] + (i hbar / 2) delta^{ij}
        <p^j x^i> = conj(<x^i p^j>)
    """
    d = ms.dims
    hbar = ms.hbar
    xc = ms.center
    p = ms.momentum_monopole()
    D = ms.momentum_dipole()
    eye = np.eye(d)
    xp = np.outer(xc, p) + D.T + 0.5j * hbar * eye
    px = np.conj(xp)
    g = psi.grid
    amp = psi.amplitudes
    dv = g.cell_volume
    xp_direct = np.empty((d, d), dtype=complex)
    px_direct = np.empty((d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            xp_direct[i, j] = np.vdot(amp, _apply_x(_apply_p(amp, g, j, hbar), g, i)) * dv
            px_direct[i, j] = np.vdot(amp, _apply_p(_apply_x(amp, g, i), g, j, hbar)) * dv
    return CommutatorResult(xp, px, xp - px, xp_direct, px_direct, 0.5 * (xp + px).real)


def downsample_rows(W: WignerGrid, max_points: int = 128):
    """Rows ``(x, p, W)`` on a strided sub-lattice of a 1-D Wigner grid, for plotting."""
    if W.dims != 1:
        raise GridError("CSV export is for 1-D Wigner grids")
    x = W.grid.axis(0)
    p = W.momenta[0]
    sx = max(1, len(x) // max_points)
    sp = max(1, len(p) // max_points)
    for i in range(0, len(x), sx):
        for k in range(0, len(p), sp):
            yield x[i], p[k], W.values[i, k]
