"""Ready-made verification scenarios.

* ``random_benchmark``: a seeded 2-input, five 10-neuron sigmoid hidden
  layers, 2-output network on ``[-5, 5]^2`` with unsafe region ``[1, inf)^2``.
* Two-link planar arm: forward kinematics, training data and the safety
  specification over joint angles ``[pi/3, 2pi/3]^2``.
* Pixel-window perturbations for classifier robustness.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .interval import Box
from .model import Network, random_network
from .verifier import SafetySpec, UnsafeRegion

BENCHMARK_SEED = 49
BENCHMARK_SIZES = (2, 10, 10, 10, 10, 10, 2)
BENCHMARK_INPUT = ((-5.0, 5.0), (-5.0, 5.0))
BENCHMARK_UNSAFE = ((1.0, math.inf), (1.0, math.inf))


def random_benchmark_network(seed: int = BENCHMARK_SEED) -> Network:
    # hidden layers squash, the output layer is affine so [1, inf)^2 is reachable at all
    acts = ["sigmoid"] * (len(BENCHMARK_SIZES) - 2) + ["linear"]
    return random_network(BENCHMARK_SIZES, acts, seed=seed)


def random_benchmark_spec(epsilon: float = 0.01) -> SafetySpec:
    region = UnsafeRegion((Box.from_bounds(BENCHMARK_UNSAFE),))
    return SafetySpec(Box.from_bounds(BENCHMARK_INPUT), region, epsilon)


ARM_INPUT = ((math.pi / 3, 2 * math.pi / 3), (math.pi / 3, 2 * math.pi / 3))
ARM_SAFE_X = (-14.0, 3.0)
ARM_SAFE_Y = (1.0, 17.0)


def arm_forward(theta1, theta2, l1: float = 10.0, l2: float = 10.0):
    """End-effector position of a planar two-link arm."""
    theta1 = np.asarray(theta1, dtype=np.float64)
    theta2 = np.asarray(theta2, dtype=np.float64)
    x = l1 * np.cos(theta1) + l2 * np.cos(theta1 + theta2)
    y = l1 * np.sin(theta1) + l2 * np.sin(theta1 + theta2)
    return x, y


def arm_unsafe_region() -> UnsafeRegion:
    """Complement of the safe rectangle as four closed unbounded boxes."""
    inf = math.inf
    (x_lo, x_hi), (y_lo, y_hi) = ARM_SAFE_X, ARM_SAFE_Y
    boxes = (
        Box.from_bounds([[-inf, x_lo], [-inf, inf]]),
        Box.from_bounds([[x_hi, inf], [-inf, inf]]),
        Box.from_bounds([[-inf, inf], [-inf, y_lo]]),
        Box.from_bounds([[-inf, inf], [y_hi, inf]]),
    )
    return UnsafeRegion(boxes)


def arm_spec(epsilon: float = 0.01) -> SafetySpec:
    return SafetySpec(Box.from_bounds(ARM_INPUT), arm_unsafe_region(), epsilon)


def arm_dataset(n: int, seed: int, l1: float = 10.0, l2: float = 10.0) -> np.ndarray:
    """``n`` rows of ``(theta1, theta2, x, y)`` with angles uniform on ``[0, 2pi]^2``."""
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * math.pi, size=(n, 2))
    x, y = arm_forward(theta[:, 0], theta[:, 1], l1, l2)
    return np.column_stack([theta, x, y])


def window_indices(row: int, col: int, height: int, width: int, image_width: int) -> list[int]:
    """Flat row-major pixel indices of a rectangular window."""
    if min(row, col) < 0 or height < 1 or width < 1 or col + width > image_width:
        raise ValueError("window does not fit the image")
    return [(row + r) * image_width + col + c for r in range(height) for c in range(width)]


def perturbation_box(image: Sequence[float], indices: Sequence[int], delta: float) -> Box:
    """``image`` widened by ``+-delta`` on ``indices`` and degenerate elsewhere."""
    x = np.asarray(image, dtype=np.float64)
    if delta < 0 or not math.isfinite(delta):
        raise ValueError("delta must be a nonnegative finite number")
    idx = np.asarray(list(indices), dtype=int)
    if idx.size == 0:
        raise ValueError("no pixels to perturb")
    if idx.min() < 0 or idx.max() >= x.size:
        raise IndexError(f"pixel index out of range for an image of {x.size} values")
    if np.unique(idx).size != idx.size:
        raise ValueError("duplicate pixel indices")
    lo, hi = x.copy(), x.copy()
    lo[idx] -= delta
    hi[idx] += delta
    return Box(lo, hi)
