"""Specification-guided bisection for network safety.

The unsafe region is a finite union of boxes (possibly unbounded) and closed
half-spaces ``{y : a . y >= b}``. :func:`verify` keeps a worklist of input
boxes with their cached output enclosures, drops every box whose enclosure
misses the unsafe region, and bisects the rest until they are no wider than
``epsilon``. Boxes that reach that width while still touching the region are
reported as witnesses and make the verdict ``UNCERTAIN``.
"""

from __future__ import annotations

import enum
import json
import math
import time
from collections.abc import Sequence as SequenceABC
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .interval import Box, DimensionError, bisect, width
from .model import Network
from .propagation import network_bounds, network_interval

MAX_UNIFORM_CELLS = 10**8
_UNIFORM_CHUNK = 1 << 16


class SpecError(ValueError):
    """Malformed safety specification."""


@dataclass(frozen=True, eq=False)
class HalfSpace:
    """Closed half-space ``{y : a . y >= b}``."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64).reshape(-1)
        if a.size == 0 or not np.isfinite(a).all() or not math.isfinite(self.b):
            raise SpecError("half-space needs a non-empty finite normal and a finite offset")
        a.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    def __eq__(self, other):
        if not isinstance(other, HalfSpace):
            return NotImplemented
        return self.b == other.b and np.array_equal(self.a, other.a)

    def __hash__(self):
        return hash((self.a.tobytes(), self.b))


@dataclass(frozen=True)
class UnsafeRegion:
    boxes: tuple[Box, ...] = ()
    halfspaces: tuple[HalfSpace, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        object.__setattr__(self, "halfspaces", tuple(self.halfspaces))
        dims = {len(b) for b in self.boxes} | {h.a.size for h in self.halfspaces}
        if len(dims) > 1:
            raise DimensionError(f"unsafe region members disagree on dimension: {sorted(dims)}")

    @property
    def dim(self) -> int | None:
        for b in self.boxes:
            return len(b)
        for h in self.halfspaces:
            return h.a.size
        return None

    @property
    def is_empty(self) -> bool:
        return not self.boxes and not self.halfspaces

    def check_dim(self, n: int) -> None:
        d = self.dim
        if d is not None and d != n:
            raise DimensionError(f"unsafe region has dimension {d}, network output has {n}")

    def hits_boxes(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Per-row flag: does the box ``[lo_k, hi_k]`` meet the region?"""
        hit = np.zeros(lo.shape[0], dtype=bool)
        for b in self.boxes:
            hit |= ((lo <= b.hi) & (b.lo <= hi)).all(axis=1)
        for h in self.halfspaces:
            # maximum of a . y over the box, attained at a vertex chosen by sign;
            # summed in index order so a point and its enclosure round alike
            corner = np.where(h.a >= 0.0, hi, lo)
            top = corner[:, 0] * h.a[0]
            for i in range(1, h.a.size):
                top = top + corner[:, i] * h.a[i]
            hit |= top >= h.b
        return hit

    def contains_points(self, y: np.ndarray) -> np.ndarray:
        return self.hits_boxes(y, y)

    def to_dict(self) -> dict:
        return {
            "boxes": [[[_enc(v) for v in iv] for iv in b.to_list()] for b in self.boxes],
            "halfspaces": [{"a": h.a.tolist(), "b": h.b} for h in self.halfspaces],
        }


def _enc(v: float):
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return v


def intersects(out_box: Box, region: UnsafeRegion) -> bool:
    """Exact closed-set test ``out_box`` meets ``region``."""
    region.check_dim(len(out_box))
    return bool(region.hits_boxes(out_box.lo[None, :], out_box.hi[None, :])[0])


def robustness_region(logits_dim: int, true_label: int) -> UnsafeRegion:
    """Outputs where some other class scores at least as high as ``true_label``."""
    if logits_dim < 2:
        raise ValueError("need at least two classes")
    if not 0 <= true_label < logits_dim:
        raise ValueError(f"label {true_label} out of range for {logits_dim} classes")
    halfspaces = []
    for k in range(logits_dim):
        if k == true_label:
            continue
        a = np.zeros(logits_dim)
        a[k] = 1.0
        a[true_label] = -1.0
        halfspaces.append(HalfSpace(a, 0.0))
    return UnsafeRegion(halfspaces=tuple(halfspaces))


class Status(enum.Enum):
    SAFE = "safe"
    UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class WorkItem:
    in_box: Box
    out_box: Box
    depth: int = 0


@dataclass
class Stats:
    boxes_processed: int = 0
    boxes_proven_safe: int = 0
    bisections: int = 0
    max_depth: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "boxes_processed": self.boxes_processed,
            "boxes_proven_safe": self.boxes_proven_safe,
            "bisections": self.bisections,
            "max_depth": self.max_depth,
            "wall_time": self.wall_time,
        }


class WitnessSet(SequenceABC):
    """Witness boxes kept as stacked arrays; :class:`WorkItem` views are built on access.

    An uncertain run can end with millions of epsilon-wide boxes, so the
    verifier never materializes them unless asked.
    """

    def __init__(self):
        self._chunks: list[tuple[np.ndarray, ...]] = []
        self._arrays: tuple[np.ndarray, ...] | None = None

    def add(self, lo, hi, olo, ohi, depth, idx) -> None:
        idx = np.asarray(idx, dtype=np.intp)
        if idx.size:
            depths = np.full(idx.size, depth, dtype=np.int64)
            self._chunks.append((lo[idx], hi[idx], olo[idx], ohi[idx], depths))
            self._arrays = None

    def add_item(self, item: WorkItem) -> None:
        one = np.array([0])
        self.add(
            item.in_box.lo[None], item.in_box.hi[None],
            item.out_box.lo[None], item.out_box.hi[None], item.depth, one,
        )

    def arrays(self) -> tuple[np.ndarray, ...]:
        """``(in_lo, in_hi, out_lo, out_hi, depth)`` with one row per witness."""
        if self._arrays is None:
            if self._chunks:
                self._arrays = tuple(np.concatenate(c) for c in zip(*self._chunks))
                self._chunks = [self._arrays]
            else:
                self._arrays = (np.empty((0, 0)),) * 4 + (np.empty(0, dtype=np.int64),)
        return self._arrays

    def __len__(self) -> int:
        return sum(c[4].size for c in self._chunks)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[k] for k in range(*i.indices(len(self)))]
        in_lo, in_hi, out_lo, out_hi, depth = self.arrays()
        return WorkItem(Box(in_lo[i], in_hi[i]), Box(out_lo[i], out_hi[i]), int(depth[i]))


@dataclass
class Verdict:
    status: Status
    witnesses: WitnessSet = field(default_factory=WitnessSet)
    stats: Stats = field(default_factory=Stats)
    # (item, "safe" | "witness" | "unexplored"); filled only when requested
    partition: list[tuple[WorkItem, str]] | None = None

    @property
    def safe(self) -> bool:
        return self.status is Status.SAFE

    @property
    def witness_boxes(self) -> list[tuple[Box, Box]]:
        return [(w.in_box, w.out_box) for w in self.witnesses]


def depth_bound(input_box: Box, epsilon: float) -> int:
    """Most bisections any root-to-leaf path can take."""
    total = 0
    for w in input_box.widths:
        if w > epsilon:
            total += math.ceil(math.log2(w / epsilon))
    return total


def _check_args(net: Network, input_box: Box, region: UnsafeRegion, epsilon: float) -> None:
    if not epsilon > 0 or not math.isfinite(epsilon):
        raise ValueError(f"epsilon must be a positive finite number, got {epsilon}")
    if len(input_box) != net.input_dim:
        raise DimensionError(f"input box has {len(input_box)} dims, network expects {net.input_dim}")
    if not input_box.is_finite:
        raise ValueError("input box must be finite")
    region.check_dim(net.output_dim)


def _bounds_parallel(net: Network, lo: np.ndarray, hi: np.ndarray, jobs: int, pool):
    if pool is None or lo.shape[0] < 2 * jobs:
        return network_bounds(net, lo, hi)
    pieces = np.array_split(np.arange(lo.shape[0]), jobs)
    results = list(pool.map(lambda idx: network_bounds(net, lo[idx], hi[idx]), pieces))
    return np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])


def _bisect_rows(lo: np.ndarray, hi: np.ndarray):
    """Bisect every row's widest component (lowest index on ties)."""
    rows = np.arange(lo.shape[0])
    k = np.argmax(hi - lo, axis=1)
    mid = 0.5 * (lo[rows, k] + hi[rows, k])
    left_hi = hi.copy()
    left_hi[rows, k] = mid
    right_lo = lo.copy()
    right_lo[rows, k] = mid
    # children interleaved so each parent's halves stay adjacent: left, right
    c_lo = np.empty((2 * lo.shape[0], lo.shape[1]))
    c_hi = np.empty_like(c_lo)
    c_lo[0::2], c_hi[0::2] = lo, left_hi
    c_lo[1::2], c_hi[1::2] = right_lo, hi
    return c_lo, c_hi


def verify(
    net: Network,
    input_box: Box,
    region: UnsafeRegion,
    epsilon: float,
    *,
    fail_fast: bool = False,
    jobs: int = 1,
    order: str = "fifo",
    record_partition: bool = False,
) -> Verdict:
    """Prove that no point of ``input_box`` maps into ``region``.

    ``SAFE`` is a proof. ``UNCERTAIN`` means some sub-box of width at most
    ``epsilon`` still has an output enclosure touching the region; those
    boxes are returned as witnesses. By default the whole worklist is drained
    so every witness is collected; ``fail_fast`` stops at the first one.

    ``order="fifo"`` (default) processes the worklist breadth first, one
    depth level per vectorized batch, and ``jobs > 1`` splits each batch over
    worker threads. ``order="lifo"`` is a plain depth-first loop, mainly for
    cross-checking that the verdict does not depend on removal order.
    """
    _check_args(net, input_box, region, epsilon)
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    if order == "fifo":
        run = _verify_fifo
    elif order == "lifo":
        run = _verify_lifo
    else:
        raise ValueError(f"unknown worklist order {order!r}")
    start = time.perf_counter()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            verdict = run(net, input_box, region, epsilon, fail_fast, jobs, pool, record_partition)
    else:
        verdict = run(net, input_box, region, epsilon, fail_fast, jobs, None, record_partition)
    verdict.stats.wall_time = time.perf_counter() - start
    return verdict


def _items(lo, hi, olo, ohi, depth, idx) -> list[WorkItem]:
    return [WorkItem(Box(lo[i], hi[i]), Box(olo[i], ohi[i]), depth) for i in idx]


def _verify_fifo(net, input_box, region, epsilon, fail_fast, jobs, pool, record):
    stats = Stats()
    witnesses = WitnessSet()
    partition: list[tuple[WorkItem, str]] | None = [] if record else None

    lo = input_box.lo[None, :].copy()
    hi = input_box.hi[None, :].copy()
    olo, ohi = _bounds_parallel(net, lo, hi, jobs, pool)
    depth = 0
    while lo.shape[0]:
        n = lo.shape[0]
        hit = region.hits_boxes(olo, ohi)
        wide = np.max(hi - lo, axis=1) > epsilon
        split = hit & wide
        leaf_witness = hit & ~wide

        if fail_fast and leaf_witness.any():
            # sequential FIFO would stop right after this row
            first = int(np.argmax(leaf_witness))
            stats.boxes_processed += first + 1
            stats.boxes_proven_safe += int((~hit[: first + 1]).sum())
            stats.bisections += int(split[:first].sum())
            stats.max_depth = max(stats.max_depth, depth)
            witnesses.add(lo, hi, olo, ohi, depth, [first])
            if record:
                done = np.arange(first + 1)
                for i in done[~hit[: first + 1]]:
                    partition.extend((it, "safe") for it in _items(lo, hi, olo, ohi, depth, [i]))
                partition.append((witnesses[-1], "witness"))
                rest = np.arange(first + 1, n)
                partition.extend(
                    (it, "unexplored") for it in _items(lo, hi, olo, ohi, depth, rest)
                )
                parents = np.flatnonzero(split[:first])
                if parents.size:
                    c_lo, c_hi = _bisect_rows(lo[parents], hi[parents])
                    c_olo, c_ohi = _bounds_parallel(net, c_lo, c_hi, jobs, pool)
                    partition.extend(
                        (it, "unexplored")
                        for it in _items(c_lo, c_hi, c_olo, c_ohi, depth + 1, range(c_lo.shape[0]))
                    )
            return Verdict(Status.UNCERTAIN, witnesses, stats, partition)

        stats.boxes_processed += n
        stats.boxes_proven_safe += int((~hit).sum())
        stats.bisections += int(split.sum())
        stats.max_depth = max(stats.max_depth, depth)
        witnesses.add(lo, hi, olo, ohi, depth, np.flatnonzero(leaf_witness))
        if record:
            for i in range(n):
                if not hit[i]:
                    partition.extend((it, "safe") for it in _items(lo, hi, olo, ohi, depth, [i]))
                elif leaf_witness[i]:
                    partition.extend((it, "witness") for it in _items(lo, hi, olo, ohi, depth, [i]))

        if not split.any():
            break
        lo, hi = _bisect_rows(lo[split], hi[split])
        olo, ohi = _bounds_parallel(net, lo, hi, jobs, pool)
        depth += 1

    status = Status.UNCERTAIN if len(witnesses) else Status.SAFE
    return Verdict(status, witnesses, stats, partition)


def _verify_lifo(net, input_box, region, epsilon, fail_fast, jobs, pool, record):
    stats = Stats()
    witnesses = WitnessSet()
    partition: list[tuple[WorkItem, str]] | None = [] if record else None
    stack = [WorkItem(input_box, network_interval(net, input_box), 0)]
    while stack:
        item = stack.pop()
        stats.boxes_processed += 1
        stats.max_depth = max(stats.max_depth, item.depth)
        if not intersects(item.out_box, region):
            stats.boxes_proven_safe += 1
            if record:
                partition.append((item, "safe"))
            continue
        if width(item.in_box) > epsilon:
            stats.bisections += 1
            left, right = bisect(item.in_box)
            # push right first so the left half is explored first
            for half in (right, left):
                stack.append(WorkItem(half, network_interval(net, half), item.depth + 1))
            continue
        witnesses.add_item(item)
        if record:
            partition.append((item, "witness"))
        if fail_fast:
            if record:
                partition.extend((it, "unexplored") for it in reversed(stack))
            break
    status = Status.UNCERTAIN if len(witnesses) else Status.SAFE
    return Verdict(status, witnesses, stats, partition)


def uniform_counts(input_box: Box, epsilon: float) -> list[int]:
    """Cells per dimension so that every cell is at most ``epsilon`` wide."""
    counts = []
    for w in input_box.widths:
        k = max(1, math.ceil(w / epsilon))
        # ceil of a rounded quotient can overshoot by one, e.g. 10 / 0.01
        while k > 1 and w / (k - 1) <= epsilon:
            k -= 1
        counts.append(k)
    return counts


def _grid_edges(lo: float, hi: float, k: int) -> np.ndarray:
    edges = lo + (hi - lo) * (np.arange(k + 1) / k)
    edges[0], edges[-1] = lo, hi
    return edges


def verify_uniform(
    net: Network,
    input_box: Box,
    region: UnsafeRegion,
    epsilon: float,
    *,
    fail_fast: bool = False,
    jobs: int = 1,
    record_partition: bool = False,
) -> Verdict:
    """Baseline: cover ``input_box`` with a uniform grid and check every cell once."""
    _check_args(net, input_box, region, epsilon)
    counts = uniform_counts(input_box, epsilon)
    total = math.prod(counts)
    if total > MAX_UNIFORM_CELLS:
        raise ValueError(f"uniform grid would have {total} cells (limit {MAX_UNIFORM_CELLS})")
    start = time.perf_counter()
    edges = [_grid_edges(a, b, k) for a, b, k in zip(input_box.lo, input_box.hi, counts)]
    stats = Stats()
    witnesses = WitnessSet()
    partition: list[tuple[WorkItem, str]] | None = [] if record_partition else None
    pool = ThreadPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for begin in range(0, total, _UNIFORM_CHUNK):
            flat = np.arange(begin, min(total, begin + _UNIFORM_CHUNK))
            idx = np.unravel_index(flat, counts)
            lo = np.stack([e[i] for e, i in zip(edges, idx)], axis=1)
            hi = np.stack([e[i + 1] for e, i in zip(edges, idx)], axis=1)
            olo, ohi = _bounds_parallel(net, lo, hi, jobs, pool)
            hit = region.hits_boxes(olo, ohi)
            if fail_fast and hit.any():
                first = int(np.argmax(hit))
                stats.boxes_processed += first + 1
                stats.boxes_proven_safe += first
                witnesses.add(lo, hi, olo, ohi, 0, [first])
                if record_partition:
                    partition.extend(
                        (it, "safe") for it in _items(lo, hi, olo, ohi, 0, range(first))
                    )
                    partition.append((witnesses[-1], "witness"))
                    partition.extend(
                        (it, "unexplored")
                        for it in _items(lo, hi, olo, ohi, 0, range(first + 1, lo.shape[0]))
                    )
                    # remaining chunks are not materialized in fail-fast mode
                break
            stats.boxes_processed += lo.shape[0]
            stats.boxes_proven_safe += int((~hit).sum())
            witnesses.add(lo, hi, olo, ohi, 0, np.flatnonzero(hit))
            if record_partition:
                for i in range(lo.shape[0]):
                    status = "witness" if hit[i] else "safe"
                    partition.extend((it, status) for it in _items(lo, hi, olo, ohi, 0, [i]))
    finally:
        if pool is not None:
            pool.shutdown()
    stats.wall_time = time.perf_counter() - start
    status = Status.UNCERTAIN if len(witnesses) else Status.SAFE
    return Verdict(status, witnesses, stats, partition)


# -- specification files -----------------------------------------------------


@dataclass(frozen=True)
class SafetySpec:
    input_box: Box
    region: UnsafeRegion
    epsilon: float

    def to_dict(self) -> dict:
        return {
            "unsafe": self.region.to_dict(),
            "input": self.input_box.to_list(),
            "epsilon": self.epsilon,
        }


def _reject_constant(name):
    raise SpecError(f"non-finite literal {name} is not allowed; use the strings \"inf\"/\"-inf\"")


def _real(v, what: str, allow_inf: bool = False) -> float:
    if allow_inf and v in ("inf", "-inf"):
        return math.inf if v == "inf" else -math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SpecError(f"{what}: expected a finite number, got {v!r}")
    return float(v)


def _parse_box(raw, what: str, allow_inf: bool) -> Box:
    if not isinstance(raw, list) or not raw:
        raise SpecError(f"{what}: expected a non-empty list of [lo, hi] pairs")
    bounds = []
    for i, pair in enumerate(raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SpecError(f"{what}[{i}]: expected [lo, hi]")
        lo = _real(pair[0], f"{what}[{i}] lo", allow_inf)
        hi = _real(pair[1], f"{what}[{i}] hi", allow_inf)
        if lo > hi:
            raise SpecError(f"{what}[{i}]: lo {lo} exceeds hi {hi}")
        bounds.append((lo, hi))
    return Box.from_bounds(bounds)


def parse_region(raw) -> UnsafeRegion:
    if not isinstance(raw, dict) or set(raw) - {"boxes", "halfspaces"}:
        raise SpecError('"unsafe" must be an object with optional "boxes" and "halfspaces"')
    boxes = [
        _parse_box(b, f"unsafe.boxes[{k}]", allow_inf=True)
        for k, b in enumerate(raw.get("boxes", []))
    ]
    halfspaces = []
    for k, h in enumerate(raw.get("halfspaces", [])):
        if not isinstance(h, dict) or set(h) != {"a", "b"} or not isinstance(h["a"], list):
            raise SpecError(f'unsafe.halfspaces[{k}] must be {{"a": [...], "b": number}}')
        a = [_real(v, f"unsafe.halfspaces[{k}].a") for v in h["a"]]
        halfspaces.append(HalfSpace(np.array(a), _real(h["b"], f"unsafe.halfspaces[{k}].b")))
    try:
        return UnsafeRegion(tuple(boxes), tuple(halfspaces))
    except DimensionError as exc:
        raise SpecError(str(exc)) from None


def parse_spec(text: str) -> SafetySpec:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SpecError(f"malformed specification JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SpecError("specification must be a JSON object")
    missing = {"unsafe", "input", "epsilon"} - set(doc)
    if missing:
        raise SpecError(f"specification is missing keys {sorted(missing)}")
    epsilon = _real(doc["epsilon"], "epsilon")
    if epsilon <= 0:
        raise SpecError("epsilon must be positive")
    return SafetySpec(
        input_box=_parse_box(doc["input"], "input", allow_inf=False),
        region=parse_region(doc["unsafe"]),
        epsilon=epsilon,
    )


def load_spec(path: str | Path) -> SafetySpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise SpecError(f"cannot read specification file {path}: {exc}") from exc
    return parse_spec(text)


def save_spec(spec: SafetySpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2), encoding="utf-8")


def spec_from_bounds(
    input_bounds: Sequence[Sequence[float]],
    unsafe_boxes: Sequence[Sequence[Sequence[float]]] = (),
    epsilon: float = 0.01,
) -> SafetySpec:
    region = UnsafeRegion(tuple(Box.from_bounds(b) for b in unsafe_boxes))
    return SafetySpec(Box.from_bounds(input_bounds), region, epsilon)
