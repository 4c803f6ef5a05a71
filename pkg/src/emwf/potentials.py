"""Time-independent potentials with derivatives of arbitrary multi-index.

Each potential is callable on broadcastable coordinate arrays and exposes
``derivative(alpha, *coords)``.  Polynomials and Gaussian wells are exact to
any order; tabulated potentials use spectral differentiation and warn past
fourth order.
"""
from __future__ import annotations

import math
import warnings
from itertools import product
from typing import Sequence

import numpy as np
from scipy.special import eval_hermite

from .errors import GridError, MissingDerivativeError
from .grid import Grid, fourier_evaluate, spectral_derivative

TABULATED_ACCURATE_ORDER = 4


class Potential:
    ndim: int = 1
    kind: str = "potential"
    max_derivative_order: float = math.inf

    def __call__(self, *coords) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, alpha: Sequence[int], *coords) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"kind": self.kind, **self.params()}

    # grid helpers
    def values(self, grid: Grid) -> np.ndarray:
        self._check_grid(grid)
        return np.broadcast_to(self(*grid.mesh()), grid.shape).astype(float)

    def derivative_field(self, alpha: Sequence[int], grid: Grid) -> np.ndarray:
        self._check_grid(grid)
        return np.broadcast_to(self.derivative(alpha, *grid.mesh()), grid.shape).astype(float)

    def gradient_field(self, grid: Grid) -> list[np.ndarray]:
        return [self.derivative_field(_unit(self.ndim, a), grid) for a in range(self.ndim)]

    def derivative_at(self, alpha: Sequence[int], point) -> float:
        self._check_order(alpha)
        return float(self.derivative(alpha, *[np.float64(x) for x in np.atleast_1d(point)]))

    def _check_grid(self, grid: Grid) -> None:
        if grid.dims != self.ndim:
            raise GridError(f"{self.kind} potential is {self.ndim}-D but grid is {grid.dims}-D")

    def _check_order(self, alpha) -> None:
        if len(alpha) != self.ndim:
            raise ValueError(f"multi-index {tuple(alpha)} has wrong length for a {self.ndim}-D potential")
        if sum(alpha) > self.max_derivative_order:
            raise MissingDerivativeError(
                f"{self.kind} potential supplies derivatives up to order {self.max_derivative_order}, "
                f"requested {sum(alpha)}"
            )


def _unit(n, a, k=1):
    out = [0] * n
    out[a] = k
    return tuple(out)


class PolynomialPotential(Potential):
    """``V(x) = sum_beta c_beta x^beta`` with exponent tuples ``beta``."""

    kind = "polynomial"

    def __init__(self, terms: dict, ndim: int, kind: str | None = None, params: dict | None = None):
        self.ndim = ndim
        self.terms = {tuple(int(e) for e in beta): float(c) for beta, c in terms.items() if c != 0.0}
        for beta in self.terms:
            if len(beta) != ndim:
                raise ValueError(f"exponent {beta} does not match ndim={ndim}")
        if kind:
            self.kind = kind
        self._params = params or {"terms": {",".join(map(str, b)): c for b, c in self.terms.items()}}

    def params(self):
        return dict(self._params)

    @property
    def degree(self) -> int:
        return max((sum(b) for b in self.terms), default=0)

    def __call__(self, *coords):
        return self.derivative((0,) * self.ndim, *coords)

    def derivative(self, alpha, *coords):
        if len(coords) != self.ndim:
            raise ValueError(f"expected {self.ndim} coordinates")
        out = 0.0
        for beta, c in self.terms.items():
            if any(b < a for a, b in zip(alpha, beta)):
                continue
            coef = c
            term = 1.0
            for a_i, b_i, x in zip(alpha, beta, coords):
                coef *= math.perm(b_i, a_i)
                if b_i - a_i:
                    term = term * x ** (b_i - a_i)
            out = out + coef * term
        return out


def free(ndim: int = 1) -> PolynomialPotential:
    return PolynomialPotential({}, ndim, kind="free", params={})


def harmonic(omega: float, mass: float = 1.0, ndim: int = 1) -> PolynomialPotential:
    k = 0.5 * mass * omega**2
    return PolynomialPotential({_unit(ndim, a, 2): k for a in range(ndim)}, ndim, kind="harmonic",
                               params={"omega": omega, "mass": mass})


def quartic(lam: float, ndim: int = 1) -> PolynomialPotential:
    """``lam * sum_a x_a^4`` (reduces to ``lam x^4`` in 1-D)."""
    return PolynomialPotential({_unit(ndim, a, 4): lam for a in range(ndim)}, ndim, kind="quartic",
                               params={"lambda": lam})


def separation_power(coef: float, power: int) -> PolynomialPotential:
    """``coef * r^power`` for a 1-D separation variable, used as a pair potential."""
    return PolynomialPotential({(power,): coef}, 1, kind="separation_power", params={"coef": coef, "power": power})


class GaussianWell(Potential):
    """``V = -depth * exp(-|x - center|^2 / (2 width^2))``."""

    kind = "gaussian_well"

    def __init__(self, depth: float, width: float, center=None, ndim: int = 1):
        if width <= 0:
            raise ValueError("width must be positive")
        self.ndim = ndim
        self.depth = float(depth)
        self.width = float(width)
        self.center = np.zeros(ndim) if center is None else np.asarray(center, dtype=float).reshape(ndim)

    def params(self):
        return {"depth": self.depth, "width": self.width, "center": self.center.tolist()}

    def __call__(self, *coords):
        return self.derivative((0,) * self.ndim, *coords)

    def derivative(self, alpha, *coords):
        s = self.width * math.sqrt(2.0)
        out = -self.depth
        for n, x, c in zip(alpha, coords, self.center):
            z = (x - c) / s
            out = out * (-1.0 / s) ** n * eval_hermite(n, z) * np.exp(-z * z)
        return out


class TabulatedPotential(Potential):
    """Potential sampled on a grid; derivatives are spectral."""

    kind = "tabulated"
    max_derivative_order = math.inf

    def __init__(self, grid: Grid, samples):
        samples = np.asarray(samples, dtype=float)
        if samples.shape != grid.shape:
            raise GridError("tabulated samples do not match grid shape")
        if not np.all(np.isfinite(samples)):
            raise ValueError("tabulated potential has non-finite samples")
        self.grid = grid
        self.ndim = grid.dims
        self.samples = samples

    def params(self):
        return {"points": list(self.grid.points), "extents": list(self.grid.extents)}

    def _warn(self, alpha):
        if sum(alpha) > TABULATED_ACCURATE_ORDER:
            warnings.warn(
                f"spectral derivative of order {sum(alpha)} of a tabulated potential may be inaccurate",
                RuntimeWarning,
                stacklevel=3,
            )

    def values(self, grid):
        if grid != self.grid:
            raise GridError("tabulated potential evaluated on a different grid")
        return self.samples

    def derivative_field(self, alpha, grid):
        if grid != self.grid:
            raise GridError("tabulated potential evaluated on a different grid")
        self._warn(alpha)
        return spectral_derivative(self.samples, self.grid, alpha).real

    def __call__(self, *coords):
        return self.derivative((0,) * self.ndim, *coords)

    def derivative(self, alpha, *coords):
        self._warn(alpha)
        arrays = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in coords])
        pts = np.stack([a.ravel() for a in arrays], axis=1)
        vals = fourier_evaluate(self.samples, self.grid, pts, alpha).real
        return vals.reshape(arrays[0].shape) if arrays[0].shape else vals[0]


class TwoBodyPotential(Potential):
    """``V(x1, x2) = pair(x1 - x2) + external(x1) + external(x2)`` on a 2d-dimensional configuration space."""

    kind = "two_body"

    def __init__(self, pair: Potential, external: Potential):
        if pair.ndim != external.ndim:
            raise ValueError("pair and external potentials must share the per-particle dimension")
        self.pair = pair
        self.external = external
        self.particle_dim = pair.ndim
        self.ndim = 2 * pair.ndim
        self.max_derivative_order = min(pair.max_derivative_order, external.max_derivative_order)

    def params(self):
        return {"pair": self.pair.describe(), "external": self.external.describe()}

    def _split(self, coords):
        d = self.particle_dim
        return coords[:d], coords[d:]

    def __call__(self, *coords):
        x1, x2 = self._split(coords)
        sep = [a - b for a, b in zip(x1, x2)]
        return self.pair(*sep) + self.external(*x1) + self.external(*x2)

    def derivative(self, alpha, *coords):
        d = self.particle_dim
        a1, a2 = tuple(alpha[:d]), tuple(alpha[d:])
        x1, x2 = self._split(coords)
        sep = [a - b for a, b in zip(x1, x2)]
        total = tuple(i + j for i, j in zip(a1, a2))
        out = (-1.0) ** sum(a2) * self.pair.derivative(total, *sep)
        if not any(a2):
            out = out + self.external.derivative(a1, *x1)
        if not any(a1):
            out = out + self.external.derivative(a2, *x2)
        return out


def taylor_terms(ndim: int, order: int):
    """Exponent tuples with total degree ``0..order`` in canonical order."""
    out = []
    for n in range(order + 1):
        out.extend(multi_indices(ndim, n))
    return out


def multi_indices(ndim: int, n: int) -> list[tuple[int, ...]]:
    """All exponent tuples of total degree ``n``, in reverse-lexicographic order."""
    out = [alpha for alpha in product(range(n + 1), repeat=ndim) if sum(alpha) == n]
    out.sort(reverse=True)
    return out


def alpha_factorial(alpha) -> int:
    return math.prod(math.factorial(a) for a in alpha)


def build_potential(spec: dict, ndim: int, grid: Grid | None = None) -> Potential:
    """Construct a potential from a validated scenario mapping."""
    kind = spec["kind"]
    if kind == "free":
        return free(ndim)
    if kind == "harmonic":
        return harmonic(spec["omega"], spec.get("mass", 1.0), ndim)
    if kind == "quartic":
        return quartic(spec["lambda"], ndim)
    if kind == "gaussian_well":
        return GaussianWell(spec["depth"], spec["width"], spec.get("center"), ndim)
    if kind == "polynomial":
        terms = {tuple(int(t) for t in k.split(",")): v for k, v in spec["terms"].items()}
        return PolynomialPotential(terms, ndim)
    if kind == "tabulated":
        if grid is None:
            raise ValueError("tabulated potential needs a grid")
        return TabulatedPotential(grid, np.loadtxt(spec["file"]).reshape(grid.shape))
    if kind == "two_body":
        if ndim % 2:
            raise ValueError("two-body potential needs an even number of axes")
        d = ndim // 2
        return TwoBodyPotential(build_potential(spec["pair"], d), build_potential(spec["external"], d))
    raise ValueError(f"unknown potential kind {kind!r}")

