"""Interior sample generation: uniform tensor grids and 1D adaptation.

The adaptive procedure redistributes sorted 1D points so that trapezoid
segment areas under a mixture density become equal: the density blends
the local operator magnitude with its mean, beta weighting the local
term. Endpoints stay pinned.
"""

from __future__ import annotations

import numpy as np


def uniform_grid(box, counts) -> np.ndarray:
    """Equispaced tensor-product points including endpoints, lexicographic.

    box: sequence of (lo, hi) per dimension; counts: points per dimension.
    """
    counts = [int(c) for c in np.atleast_1d(counts)]
    if len(counts) != len(box):
        raise ValueError("counts must match the box dimension")
    if any(c < 2 for c in counts):
        raise ValueError("need at least 2 points per dimension")
    axes = [np.linspace(lo, hi, c) for (lo, hi), c in zip(box, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def mixture_density(op_l1: np.ndarray, beta: float) -> np.ndarray:
    """h_i = beta*|N_i|_1 + (1-beta)*mean(|N|_1)."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    op_l1 = np.asarray(op_l1, dtype=float)
    return beta * op_l1 + (1.0 - beta) * np.mean(op_l1)


def adapt_points(points: np.ndarray, h_data: np.ndarray, beta: float) -> np.ndarray:
    """Move sorted 1D points toward equal-area segments of the mixture.

    points: strictly increasing, endpoints define the interval and stay
    fixed. h_data: |N(x_i)|_1 at the current points. All-zero data (or
    beta handing all weight to a zero mean) degenerates to equispacing.
    """
    x = np.asarray(points, dtype=float).reshape(-1)
    if x.size < 2 or np.any(np.diff(x) <= 0):
        raise ValueError("points must be strictly increasing with at least 2 entries")
    h = mixture_density(h_data, beta)
    if h.shape != x.shape:
        raise ValueError("h_data must match points")
    seg = 0.5 * (h[:-1] + h[1:])  # trapezoid height per segment
    if np.all(seg <= 0.0):
        return np.linspace(x[0], x[-1], x.size)
    dx = np.diff(x)
    area = float(np.sum(dx * seg))
    raw = (area / (x.size - 1)) / seg
    spacing = raw * (x[-1] - x[0]) / np.sum(raw)
    out = np.empty_like(x)
    out[0] = x[0]
    out[1:] = x[0] + np.cumsum(spacing)
    out[-1] = x[-1]  # pin against cumulative-sum roundoff
    return out
