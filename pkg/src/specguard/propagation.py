"""Interval extension of a feedforward network.

For one layer with a nondecreasing activation the output enclosure is exact
per coordinate: the pre-activation minimum picks ``w * lo`` for nonnegative
weights and ``w * hi`` for negative ones (and the reverse for the maximum),
then both endpoints go through the activation. Stacking layers gives a sound,
inclusion-monotone enclosure of the whole network.

The batch functions work on ``(B, n)`` arrays of lower and upper bounds and
are what the verifier calls; :func:`layer_interval` and
:func:`network_interval` are the single-box wrappers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interval import Box, DimensionError, width
from .model import Layer, Network


def layer_bounds(layer: Layer, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Propagate a batch of boxes through one layer.

    Sums run over the input index in ascending order with the bias added
    last, matching :func:`specguard.model.affine` term by term.
    """
    w = layer.weights
    nonneg = w >= 0.0
    col_lo, col_hi = lo[:, 0:1], hi[:, 0:1]
    acc_lo = np.where(nonneg[:, 0], col_lo * w[:, 0], col_hi * w[:, 0])
    acc_hi = np.where(nonneg[:, 0], col_hi * w[:, 0], col_lo * w[:, 0])
    for j in range(1, w.shape[1]):
        col_lo, col_hi = lo[:, j : j + 1], hi[:, j : j + 1]
        acc_lo = acc_lo + np.where(nonneg[:, j], col_lo * w[:, j], col_hi * w[:, j])
        acc_hi = acc_hi + np.where(nonneg[:, j], col_hi * w[:, j], col_lo * w[:, j])
    acc_lo = acc_lo + layer.bias
    acc_hi = acc_hi + layer.bias
    act = layer.activation
    return act(acc_lo), act(acc_hi)


def network_bounds(net: Network, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batch version of :func:`network_interval` on ``(B, n0)`` bound arrays."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if lo.ndim != 2 or lo.shape != hi.shape or lo.shape[1] != net.input_dim:
        raise DimensionError(
            f"bound arrays have shapes {lo.shape}/{hi.shape}, network expects (B, {net.input_dim})"
        )
    if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
        raise ValueError("propagated boxes must have finite endpoints")
    for layer in net.layers:
        lo, hi = layer_bounds(layer, lo, hi)
    return lo, hi


def _check_input(in_box: Box, n: int) -> None:
    if len(in_box) != n:
        raise DimensionError(f"box has {len(in_box)} dims, expected {n}")
    if not in_box.is_finite:
        raise ValueError("propagated boxes must have finite endpoints")


def layer_interval(layer: Layer, in_box: Box) -> Box:
    _check_input(in_box, layer.in_dim)
    lo, hi = layer_bounds(layer, in_box.lo[None, :], in_box.hi[None, :])
    return Box(lo[0], hi[0])


def network_interval(net: Network, in_box: Box) -> Box:
    """Sound output enclosure: ``eval_network(net, x)`` lies in it for every x in ``in_box``."""
    _check_input(in_box, net.input_dim)
    lo, hi = network_bounds(net, in_box.lo[None, :], in_box.hi[None, :])
    return Box(lo[0], hi[0])


@dataclass(frozen=True)
class LipschitzBound:
    gamma: float
    per_layer_norms: tuple[float, ...]
    xi: float


def inf_norm(w: np.ndarray) -> float:
    """Induced infinity norm: largest absolute row sum."""
    return float(np.max(np.sum(np.abs(w), axis=1)))


def lipschitz_gamma(net: Network) -> LipschitzBound:
    """``xi**L * prod ||W||_inf`` with ``xi`` the largest activation constant.

    The infinity norm pairs with the max-component box width: each layer's
    output width is at most ``xi * ||W||_inf`` times its input width.
    """
    norms = tuple(inf_norm(layer.weights) for layer in net.layers)
    xi = max(layer.activation.xi for layer in net.layers)
    gamma = xi ** len(norms)
    for n in norms:
        gamma *= n
    return LipschitzBound(gamma=gamma, per_layer_norms=norms, xi=xi)


def excess_width_bound(net: Network, in_box: Box) -> float:
    """Upper bound ``gamma * width(in_box)`` on the enclosure's excess width."""
    _check_input(in_box, net.input_dim)
    return lipschitz_gamma(net).gamma * width(in_box)
