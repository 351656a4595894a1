"""Brute-force reference computations for tests.

Nothing here is used by the verifier. Random sampling uses numpy's
``default_rng`` (the PCG64 bit generator) with an explicit integer seed, and
draws ``lo + (hi - lo) * u`` with ``u`` from ``Generator.random``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .interval import Box
from .model import Network, eval_network
from .verifier import UnsafeRegion

MAX_GRID_POINTS = 10**7
_CHUNK = 1 << 17


@dataclass(frozen=True)
class SampleHull:
    hull: Box
    samples: int


def grid_points(lo: float, hi: float, per_dim: int) -> np.ndarray:
    # t = i / (m - 1) makes grids with m and 2m - 1 points nest exactly
    t = np.arange(per_dim) / (per_dim - 1)
    pts = lo + (hi - lo) * t
    pts[0], pts[-1] = lo, hi
    return pts


def grid_sample_hull(net: Network, b: Box, per_dim: int) -> SampleHull:
    """Componentwise min/max of ``net`` over a full ``per_dim``-point grid on ``b``.

    The grid includes both endpoints of every axis, so all vertices of ``b``
    are evaluated.
    """
    if per_dim < 2:
        raise ValueError("per_dim must be at least 2")
    n = len(b)
    if n != net.input_dim:
        raise ValueError(f"box has {n} dims, network expects {net.input_dim}")
    if per_dim**n > MAX_GRID_POINTS:
        raise ValueError(f"grid of {per_dim}^{n} points exceeds the {MAX_GRID_POINTS} limit")
    axes = [grid_points(a, c, per_dim) for a, c in zip(b.lo, b.hi)]
    total = per_dim**n
    shape = [per_dim] * n
    lo = np.full(net.output_dim, math.inf)
    hi = np.full(net.output_dim, -math.inf)
    for begin in range(0, total, _CHUNK):
        idx = np.unravel_index(np.arange(begin, min(total, begin + _CHUNK)), shape)
        x = np.stack([ax[i] for ax, i in zip(axes, idx)], axis=1)
        y = eval_network(net, x)
        lo = np.minimum(lo, y.min(axis=0))
        hi = np.maximum(hi, y.max(axis=0))
    return SampleHull(Box(lo, hi), total)


def uniform_samples(b: Box, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    u = rng.random((n, len(b)))
    return b.lo + (b.hi - b.lo) * u


def random_sample_unsafe_hits(
    net: Network, b: Box, region: UnsafeRegion, n: int, seed: int
) -> int:
    """Number of ``n`` seeded uniform points of ``b`` whose output lies in ``region``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if region.is_empty:
        return 0
    x = uniform_samples(b, n, seed)
    hits = 0
    for begin in range(0, n, _CHUNK):
        y = eval_network(net, x[begin : begin + _CHUNK])
        hits += int(region.contains_points(y).sum())
    return hits
