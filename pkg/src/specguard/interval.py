"""Closed real intervals and axis-aligned boxes.

Endpoints are plain float64 with round-to-nearest arithmetic. Infinite
endpoints are accepted so that unsafe regions such as ``[1, inf)`` can be
written down, but anything handed to propagation must be finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when two objects disagree on a vector or box dimension."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if lo > hi:
            raise ValueError(f"empty interval: lo={lo} > hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def issubset(self, other: Interval) -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def overlaps(self, other: Interval) -> bool:
        # closed endpoints: touching intervals overlap
        return self.lo <= other.hi and other.lo <= self.hi

    def __iter__(self) -> Iterator[float]:
        yield self.lo
        yield self.hi

    def __repr__(self) -> str:
        return f"[{self.lo!r}, {self.hi!r}]"


class Box:
    """Axis-aligned box ``[lo_1, hi_1] x ... x [lo_n, hi_n]``.

    Stored as two read-only float64 arrays. Use :meth:`from_bounds` or
    :meth:`from_intervals` for the common constructions.
    """

    __slots__ = ("_lo", "_hi")

    def __init__(self, lo, hi):
        lo = np.array(lo, dtype=np.float64).reshape(-1)
        hi = np.array(hi, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionError(f"lower/upper bound lengths differ: {lo.size} vs {hi.size}")
        if lo.size == 0:
            raise ValueError("a box needs at least one dimension")
        if np.isnan(lo).any() or np.isnan(hi).any():
            raise ValueError("box endpoints must not be NaN")
        if (lo > hi).any():
            bad = int(np.argmax(lo > hi))
            raise ValueError(f"empty box: dimension {bad} has lo={lo[bad]} > hi={hi[bad]}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        self._lo = lo
        self._hi = hi

    @classmethod
    def from_intervals(cls, intervals: Iterable[Interval | Sequence[float]]) -> Box:
        pairs = [tuple(iv) for iv in intervals]
        return cls([p[0] for p in pairs], [p[1] for p in pairs])

    @classmethod
    def from_bounds(cls, bounds: Sequence[Sequence[float]]) -> Box:
        """Build from ``[[lo, hi], ...]``."""
        return cls.from_intervals(bounds)

    @classmethod
    def point(cls, x) -> Box:
        x = np.asarray(x, dtype=np.float64)
        return cls(x, x)

    @property
    def lo(self) -> np.ndarray:
        return self._lo

    @property
    def hi(self) -> np.ndarray:
        return self._hi

    @property
    def dims(self) -> list[Interval]:
        return [Interval(a, b) for a, b in zip(self._lo, self._hi)]

    @property
    def widths(self) -> np.ndarray:
        return self._hi - self._lo

    @property
    def width(self) -> float:
        return width(self)

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self._lo + self._hi)

    @property
    def is_finite(self) -> bool:
        return bool(np.isfinite(self._lo).all() and np.isfinite(self._hi).all())

    def __len__(self) -> int:
        return self._lo.size

    def __getitem__(self, i: int) -> Interval:
        return Interval(self._lo[i], self._hi[i])

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.dims)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Box):
            return NotImplemented
        return (
            len(self) == len(other)
            and bool(np.array_equal(self._lo, other._lo))
            and bool(np.array_equal(self._hi, other._hi))
        )

    def __hash__(self) -> int:
        return hash((self._lo.tobytes(), self._hi.tobytes()))

    def __repr__(self) -> str:
        return "Box(" + " x ".join(repr(iv) for iv in self.dims) + ")"

    def contains(self, x, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self._lo.shape:
            raise DimensionError(f"point has shape {x.shape}, box has {len(self)} dims")
        return bool(((self._lo - atol <= x) & (x <= self._hi + atol)).all())

    def issubset(self, other: Box) -> bool:
        _check_same_dim(self, other)
        return bool(((other._lo <= self._lo) & (self._hi <= other._hi)).all())

    def overlaps(self, other: Box) -> bool:
        _check_same_dim(self, other)
        return bool(((self._lo <= other._hi) & (other._lo <= self._hi)).all())

    def to_list(self) -> list[list[float]]:
        return [[float(a), float(b)] for a, b in zip(self._lo, self._hi)]


def _check_same_dim(a: Box, b: Box) -> None:
    if len(a) != len(b):
        raise DimensionError(f"box dimensions differ: {len(a)} vs {len(b)}")


def width(b: Box) -> float:
    """Largest component width of ``b``."""
    return float(np.max(b.hi - b.lo))


def split_dimension(b: Box) -> int:
    """Index of the widest component, lowest index on ties."""
    return int(np.argmax(b.hi - b.lo))


def bisect(b: Box) -> tuple[Box, Box]:
    """Split the widest component of ``b`` at its midpoint."""
    if not b.is_finite:
        raise ValueError("cannot bisect a box with infinite endpoints")
    k = split_dimension(b)
    lo_k, hi_k = b.lo[k], b.hi[k]
    if hi_k - lo_k <= 0.0:
        raise ValueError("cannot bisect a degenerate box")
    m = 0.5 * (lo_k + hi_k)
    left_hi = b.hi.copy()
    left_hi[k] = m
    right_lo = b.lo.copy()
    right_lo[k] = m
    return Box(b.lo, left_hi), Box(right_lo, b.hi)


def hull(boxes: Iterable[Box]) -> Box:
    """Smallest box containing every box in ``boxes``."""
    boxes = list(boxes)
    if not boxes:
        raise ValueError("hull of no boxes")
    lo = np.min([b.lo for b in boxes], axis=0)
    hi = np.max([b.hi for b in boxes], axis=0)
    return Box(lo, hi)
