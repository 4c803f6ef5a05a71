"""Periodic grids, wave-function storage and spectral operators.

Every other module works on :class:`WaveFunction` values sampled on a
:class:`Grid`.  Integrals are plain Riemann sums with the uniform cell volume,
derivatives are taken in Fourier space.  Coordinates are centered: axis ``a``
holds ``x_j = -L_a/2 + j*dx_a`` for ``j = 0..N_a-1``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import _fft
from .errors import (
    BoundaryLeakError,
    BoundaryLeakWarning,
    DegenerateStateError,
    GridError,
    MultiplierError,
)

DEFAULT_MAX_POINTS = 2**24
BOUNDARY_WARN = 1e-6
BOUNDARY_FAIL = 1e-3


@dataclass(frozen=True)
class Grid:
    extents: tuple[float, ...]
    points: tuple[int, ...]

    @property
    def dims(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return math.prod(self.points)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / N for L, N in zip(self.extents, self.points))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def origin(self) -> tuple[float, ...]:
        return tuple(-L / 2 for L in self.extents)

    def axis(self, a: int) -> np.ndarray:
        L, N = self.extents[a], self.points[a]
        return -L / 2 + np.arange(N) * (L / N)

    def axes(self) -> list[np.ndarray]:
        return [self.axis(a) for a in range(self.dims)]

    def mesh(self) -> list[np.ndarray]:
        """Sparse broadcastable coordinate arrays (``indexing='ij'``)."""
        return np.meshgrid(*self.axes(), indexing="ij", sparse=True)

    def wavenumbers(self) -> list[np.ndarray]:
        """Sparse broadcastable wavenumber arrays ``k = 2*pi*n/L`` in FFT order."""
        ks = [2 * np.pi * np.fft.fftfreq(N, d=L / N) for L, N in zip(self.extents, self.points)]
        return np.meshgrid(*ks, indexing="ij", sparse=True)

    def momenta(self, hbar: float = 1.0) -> list[np.ndarray]:
        return [hbar * k for k in self.wavenumbers()]

    def sub(self, axes: Sequence[int]) -> "Grid":
        return Grid(tuple(self.extents[a] for a in axes), tuple(self.points[a] for a in axes))


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def make_grid(dims: int, extents, points, max_points: int = DEFAULT_MAX_POINTS) -> Grid:
    """Validate and build a :class:`Grid`.

    ``extents`` and ``points`` may be scalars (applied to every axis) or
    sequences of length ``dims``.
    """
    if not 1 <= dims <= 6:
        raise GridError(f"dims must be between 1 and 6, got {dims}")
    ext = [float(extents)] * dims if np.isscalar(extents) else [float(e) for e in extents]
    pts = [int(points)] * dims if np.isscalar(points) else [int(p) for p in points]
    if len(ext) != dims or len(pts) != dims:
        raise GridError(f"expected {dims} extents and points, got {len(ext)} and {len(pts)}")
    for e in ext:
        if not (e > 0 and math.isfinite(e)):
            raise GridError(f"extent must be positive and finite, got {e}")
    for p in pts:
        if not _is_power_of_two(p):
            raise GridError(f"points per axis must be a power of two, got {p}")
        if p < 8:
            raise GridError(f"points per axis must be >= 8, got {p}")
    if math.prod(pts) > max_points:
        raise GridError(f"grid has {math.prod(pts)} points, above the cap of {max_points}")
    return Grid(tuple(ext), tuple(pts))


@dataclass(frozen=True)
class Units:
    """Physical constants of a run: ``hbar``, one mass per particle, optional ``c``."""

    hbar: float = 1.0
    masses: tuple[float, ...] = (1.0,)
    c: float | None = None

    def __post_init__(self):
        masses = self.masses
        if np.isscalar(masses):
            masses = (float(masses),)
        masses = tuple(float(m) for m in masses)
        if not masses or any(not m > 0 for m in masses):
            raise ValueError(f"masses must be positive, got {masses}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if self.c is not None and not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        object.__setattr__(self, "masses", masses)

    @property
    def mass(self) -> float:
        return self.masses[0]

    def axis_masses(self, dims: int) -> np.ndarray:
        n = len(self.masses)
        if dims % n:
            raise GridError(f"{dims} axes cannot be split among {n} particles")
        d = dims // n
        return np.repeat(np.asarray(self.masses, dtype=float), d)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: Grid
    amplitudes: np.ndarray
    time: float = 0.0
    units: Units = field(default_factory=Units)

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=np.complex128)
        if amp.shape != self.grid.shape:
            raise GridError(f"amplitude shape {amp.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(amp)):
            raise DegenerateStateError("wave function has non-finite amplitudes")
        if amp is self.amplitudes:
            amp = amp.copy()
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def particles(self) -> int:
        return len(self.units.masses)

    @property
    def particle_dim(self) -> int:
        return self.grid.dims // self.particles

    @property
    def axis_masses(self) -> np.ndarray:
        return self.units.axis_masses(self.grid.dims)

    @property
    def hbar(self) -> float:
        return self.units.hbar

    def with_amplitudes(self, amplitudes, time: float | None = None) -> "WaveFunction":
        return replace(self, amplitudes=amplitudes, time=self.time if time is None else time)

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def norm_squared(psi: WaveFunction) -> float:
    return float(np.sum(np.abs(psi.amplitudes) ** 2) * psi.grid.cell_volume)


def normalize(psi: WaveFunction) -> WaveFunction:
    n2 = norm_squared(psi)
    if not n2 > 0:
        raise DegenerateStateError("cannot normalize a zero wave function")
    return psi.with_amplitudes(psi.amplitudes / math.sqrt(n2))


def check_same_grid(psi: WaveFunction, phi: WaveFunction) -> None:
    if psi.grid != phi.grid:
        raise GridError("wave functions live on different grids")


def inner_product(psi: WaveFunction, phi: WaveFunction) -> complex:
    """``<psi|phi>``, antilinear in the first argument."""
    check_same_grid(psi, phi)
    return complex(np.vdot(psi.amplitudes, phi.amplitudes) * psi.grid.cell_volume)


def spectral_derivative(field: np.ndarray, grid: Grid, orders: Sequence[int]) -> np.ndarray:
    """Mixed spectral derivative ``d^orders field`` (``orders`` = exponent per axis)."""
    if len(orders) != grid.dims:
        raise GridError(f"need {grid.dims} derivative orders, got {len(orders)}")
    if not any(orders):
        return np.asarray(field, dtype=np.complex128).copy()
    symbol = 1.0
    for k, n in zip(grid.wavenumbers(), orders):
        if n:
            symbol = symbol * (1j * k) ** n
    return _fft.ifftn(_fft.fftn(field) * symbol)


def unit_orders(dims: int, axis: int, n: int = 1) -> tuple[int, ...]:
    out = [0] * dims
    out[axis] = n
    return tuple(out)


def spectral_gradient(psi: WaveFunction, axis: int) -> np.ndarray:
    if not 0 <= axis < psi.grid.dims:
        raise GridError(f"axis {axis} out of range for a {psi.grid.dims}-D grid")
    return spectral_derivative(psi.amplitudes, psi.grid, unit_orders(psi.grid.dims, axis))


@dataclass(frozen=True)
class FourierMultiplier:
    """Function of the momentum vector, applied mode by mode in Fourier space.

    ``symbol`` receives one broadcastable momentum array per axis.
    """

    symbol: Callable[..., np.ndarray]

    def on_lattice(self, grid: Grid, hbar: float = 1.0) -> np.ndarray:
        values = np.broadcast_to(self.symbol(*grid.momenta(hbar)), grid.shape)
        if not np.all(np.isfinite(values)):
            raise MultiplierError("Fourier symbol is not finite on the momentum lattice")
        return values


def apply_fourier_multiplier(psi: WaveFunction, m: FourierMultiplier) -> WaveFunction:
    values = m.on_lattice(psi.grid, psi.hbar)
    return psi.with_amplitudes(_fft.ifftn(_fft.fftn(psi.amplitudes) * values))


def momentum_density(psi: WaveFunction) -> np.ndarray:
    """``|psi~(p)|^2`` on the momentum lattice (FFT order), normalized to ``sum * dp = 1``."""
    g = psi.grid
    scale = g.cell_volume**2 / (2 * np.pi * psi.hbar) ** g.dims
    return np.abs(_fft.fftn(psi.amplitudes)) ** 2 * scale


def momentum_cell_volume(grid: Grid, hbar: float = 1.0) -> float:
    return math.prod(2 * np.pi * hbar / L for L in grid.extents)


def boundary_density(psi: WaveFunction) -> float:
    """Largest density on the outermost grid layer along any axis."""
    rho = psi.density()
    worst = 0.0
    for a in range(rho.ndim):
        for idx in (0, -1):
            worst = max(worst, float(np.take(rho, idx, axis=a).max()))
    return worst


def check_boundary(psi: WaveFunction, warn: float = BOUNDARY_WARN, fail: float | None = None) -> float:
    leak = boundary_density(psi)
    if fail is not None and leak > fail:
        raise BoundaryLeakError(
            f"boundary density {leak:.3g} exceeds {fail:.3g}; moments are meaningless on the periodic wrap"
        )
    if leak > warn:
        warnings.warn(f"boundary density {leak:.3g} exceeds {warn:.3g}", BoundaryLeakWarning, stacklevel=2)
    return leak


def fourier_evaluate(field: np.ndarray, grid: Grid, points: np.ndarray, orders: Sequence[int] | None = None,
                     noise_floor: float = 0.0) -> np.ndarray:
    """Evaluate the band-limited interpolant of ``field`` (or a derivative) at arbitrary points.

    Direct Fourier-series summation: cost is ``len(points) * grid.size``, so this is
    meant for a handful of points.  Coefficients smaller than ``noise_floor`` times
    the largest one are dropped, which keeps high derivatives from amplifying the
    roundoff plateau of the spectrum.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != grid.dims:
        raise GridError(f"points must have {grid.dims} coordinates")
    coeffs = _fft.fftn(field) / grid.size
    if noise_floor > 0:
        coeffs = np.where(np.abs(coeffs) < noise_floor * np.abs(coeffs).max(), 0.0, coeffs)
    ks = grid.wavenumbers()
    if orders is not None and any(orders):
        for k, n in zip(ks, orders):
            if n:
                coeffs = coeffs * (1j * k) ** n
    flat_k = [np.broadcast_to(k, grid.shape).ravel() for k in ks]
    c = coeffs.ravel()
    origin = np.asarray(grid.origin)
    out = np.empty(len(pts), dtype=np.complex128)
    for i, x in enumerate(pts):
        phase = sum(k * (xa - oa) for k, xa, oa in zip(flat_k, x, origin))
        out[i] = np.sum(c * np.exp(1j * phase))
    return out
