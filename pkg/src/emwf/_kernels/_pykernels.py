"""Pure-NumPy reference implementations of the hot kernels."""
from __future__ import annotations

import numpy as np


def lagrange_weights(t: np.ndarray, order: int) -> np.ndarray:
    """Weights of the ``order``-point Lagrange stencil at nodes ``-(order/2-1) .. order/2``.

    ``t`` is the fractional offset in ``[0, 1)`` from the node at 0.
    """
    nodes = np.arange(order) - (order // 2 - 1)
    diff = t[:, None] - nodes[None, :]
    pre = np.ones((len(t), order + 1))
    suf = np.ones((len(t), order + 1))
    for s in range(order):
        pre[:, s + 1] = pre[:, s] * diff[:, s]
    for s in range(order - 1, -1, -1):
        suf[:, s] = suf[:, s + 1] * diff[:, s]
    c = np.array([np.prod([s - r for r in range(order) if r != s]) for s in range(order)], dtype=float)
    return pre[:, :order] * suf[:, 1:] / c


def interp_periodic(values, origin, spacing, points, order=6):
    """Periodic tensor-product Lagrange interpolation.

    values : complex array ``[nf, n0, n1, n2]`` (unused axes have length 1)
    origin, spacing : length-3 sequences
    points : ``[n, 3]`` coordinates
    returns : complex ``[n, nf]``
    """
    values = np.asarray(values, dtype=np.complex128)
    points = np.asarray(points, dtype=np.float64)
    nf = values.shape[0]
    shape = values.shape[1:]
    n = points.shape[0]
    idx_axes = []
    w_axes = []
    for a in range(3):
        na = shape[a]
        if na == 1:
            idx_axes.append(np.zeros((n, 1), dtype=np.intp))
            w_axes.append(np.ones((n, 1)))
            continue
        u = (points[:, a] - origin[a]) / spacing[a]
        i0 = np.floor(u)
        t = u - i0
        nodes = np.arange(order) - (order // 2 - 1)
        idx_axes.append(np.mod(i0.astype(np.intp)[:, None] + nodes[None, :], na))
        w_axes.append(lagrange_weights(t, order))
    out = np.zeros((n, nf), dtype=np.complex128)
    flat = values.reshape(nf, -1)
    s1, s2 = shape[1] * shape[2], shape[2]
    for i in range(idx_axes[0].shape[1]):
        for j in range(idx_axes[1].shape[1]):
            for k in range(idx_axes[2].shape[1]):
                lin = idx_axes[0][:, i] * s1 + idx_axes[1][:, j] * s2 + idx_axes[2][:, k]
                w = w_axes[0][:, i] * w_axes[1][:, j] * w_axes[2][:, k]
                out += (flat[:, lin] * w).T
    return out
