import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specguard.interval import Box, DimensionError, hull
from specguard.model import Layer, Network, eval_network, random_network
from specguard.oracle import random_sample_unsafe_hits
from specguard.scenarios import random_benchmark_network, random_benchmark_spec
from specguard.verifier import (
    HalfSpace,
    SpecError,
    Status,
    UnsafeRegion,
    depth_bound,
    intersects,
    load_spec,
    parse_spec,
    robustness_region,
    uniform_counts,
    verify,
    verify_uniform,
)

from conftest import identity_net

INF = math.inf
QUADRANT = UnsafeRegion((Box.from_bounds([[1, INF], [1, INF]]),))


def test_intersects_examples():
    assert not intersects(Box.from_bounds([[0, 0.5], [0, 0.5]]), QUADRANT)
    assert intersects(Box.from_bounds([[0.5, 1.5], [0.5, 1.5]]), QUADRANT)
    half = UnsafeRegion(halfspaces=(HalfSpace([1.0, -1.0], 0.0),))
    assert not intersects(Box.from_bounds([[0, 1], [2, 3]]), half)


def test_intersects_closed_endpoints():
    assert intersects(Box.from_bounds([[0, 1], [0, 1]]), QUADRANT)
    half = UnsafeRegion(halfspaces=(HalfSpace([1.0, -1.0], 0.0),))
    assert intersects(Box.from_bounds([[0, 2], [2, 3]]), half)


def test_intersects_empty_region_and_dims():
    assert not intersects(Box.from_bounds([[0, 1]]), UnsafeRegion())
    with pytest.raises(DimensionError):
        intersects(Box.from_bounds([[0, 1]]), QUADRANT)
    with pytest.raises(DimensionError):
        UnsafeRegion((Box.from_bounds([[0, 1]]),), (HalfSpace([1.0, 1.0], 0.0),))


@pytest.mark.parametrize("seed", range(30))
def test_intersects_agrees_with_sampling(seed):
    # brute force: sample the out box densely; any sampled hit must be reported
    rng = np.random.default_rng(seed)
    out = Box(*np.sort(rng.normal(size=(2, 3)), axis=0))
    region = UnsafeRegion(
        (Box.from_bounds([[rng.normal(), INF], [-INF, INF], [-INF, rng.normal()]]),),
        (HalfSpace(rng.normal(size=3), rng.normal()),),
    )
    pts = out.lo + (out.hi - out.lo) * rng.random((20_000, 3))
    corners = np.array(np.meshgrid(*zip(out.lo, out.hi))).reshape(3, -1).T
    pts = np.vstack([pts, corners])
    sampled = region.contains_points(pts).any()
    assert intersects(out, region) == sampled


def test_robustness_region_examples():
    r = robustness_region(2, 0)
    assert len(r.halfspaces) == 1
    assert r.halfspaces[0].a.tolist() == [-1.0, 1.0] and r.halfspaces[0].b == 0.0
    assert len(robustness_region(3, 1).halfspaces) == 2
    r = robustness_region(10, 2)
    assert len(r.halfspaces) == 9
    assert all(h.a[2] == -1.0 for h in r.halfspaces)
    with pytest.raises(ValueError):
        robustness_region(3, 3)
    with pytest.raises(ValueError):
        robustness_region(1, 0)


def test_robustness_region_semantics():
    r = robustness_region(3, 1)
    y = np.array([[0.1, 0.9, 0.0], [0.5, 0.4, 0.1], [0.3, 0.3, 0.3]])
    assert r.contains_points(y).tolist() == [False, True, True]


def test_verify_disjoint_root():
    region = UnsafeRegion((Box.from_bounds([[10, INF], [10, INF]]),))
    v = verify(identity_net(2), Box.from_bounds([[-5, 5], [-5, 5]]), region, 0.01)
    assert v.status is Status.SAFE
    assert v.stats.boxes_processed == 1 and len(v.witnesses) == 0


def test_verify_genuinely_unsafe():
    v = verify(identity_net(2), Box.from_bounds([[0, 2], [0, 2]]), QUADRANT, 0.25)
    assert v.status is Status.UNCERTAIN
    assert v.witnesses
    for w in v.witnesses:
        assert w.in_box.width <= 0.25
        assert intersects(w.out_box, QUADRANT)


def test_verify_arguments():
    net = identity_net(2)
    box = Box.from_bounds([[0, 1], [0, 1]])
    for eps in (0.0, -1.0, math.nan):
        with pytest.raises(ValueError):
            verify(net, box, QUADRANT, eps)
    with pytest.raises(DimensionError):
        verify(net, Box.from_bounds([[0, 1]]), QUADRANT, 0.1)
    with pytest.raises(DimensionError):
        verify(net, box, UnsafeRegion((Box.from_bounds([[0, 1]]),)), 0.1)
    with pytest.raises(ValueError):
        verify(net, box, QUADRANT, 0.1, order="random")


def test_verify_benchmark_is_sound():
    net = random_benchmark_network()
    spec = random_benchmark_spec()
    v = verify(net, spec.input_box, spec.region, spec.epsilon)
    assert v.status is Status.SAFE
    assert random_sample_unsafe_hits(net, spec.input_box, spec.region, 100_000, seed=1) == 0


def test_uniform_examples():
    region = UnsafeRegion((Box.from_bounds([[2, INF]]),))
    v = verify_uniform(identity_net(), Box.from_bounds([[0, 1]]), region, 0.5)
    assert v.status is Status.SAFE and v.stats.boxes_processed == 2
    v = verify_uniform(identity_net(), Box.from_bounds([[0, 1]]), region, 5.0)
    assert v.stats.boxes_processed == 1


def test_uniform_counts_rounding():
    assert uniform_counts(Box.from_bounds([[-5, 5], [-5, 5]]), 0.01) == [1000, 1000]
    assert uniform_counts(Box.from_bounds([[0, 1], [0, 0]]), 0.3) == [4, 1]


def test_uniform_cell_guard():
    net = Network((Layer(np.eye(3), np.zeros(3), "linear"),))
    box = Box.from_bounds([[0, 1]] * 3)
    with pytest.raises(ValueError, match="cells"):
        verify_uniform(net, box, UnsafeRegion((Box.from_bounds([[5, INF]] * 3),)), 1e-3)


def test_uniform_matches_guided_on_benchmark():
    net = random_benchmark_network()
    spec = random_benchmark_spec(epsilon=0.05)
    guided = verify(net, spec.input_box, spec.region, spec.epsilon)
    uniform = verify_uniform(net, spec.input_box, spec.region, spec.epsilon)
    assert guided.status is uniform.status
    assert uniform.stats.boxes_processed >= guided.stats.boxes_processed


def _tiles(items, box):
    """Disjoint-interior tiling check for dyadic boxes: volumes add up and all lie inside."""
    total = 0.0
    for it in items:
        assert it.in_box.issubset(box)
        total += float(np.prod(it.in_box.widths))
    return math.isclose(total, float(np.prod(box.widths)), rel_tol=1e-12)


@pytest.mark.parametrize("order", ["fifo", "lifo"])
def test_partition_tiles_input(order):
    net = random_network([2, 6, 2], ["tanh", "linear"], seed=3)
    box = Box.from_bounds([[-2, 2], [-2, 2]])
    region = UnsafeRegion((Box.from_bounds([[0.5, INF], [-INF, INF]]),))
    v = verify(net, box, region, 0.1, order=order, record_partition=True)
    items = [it for it, _ in v.partition]
    assert _tiles(items, box)
    assert hull(it.in_box for it in items) == box
    assert sum(s == "witness" for _, s in v.partition) == len(v.witnesses)


@pytest.mark.parametrize("order", ["fifo", "lifo"])
def test_fail_fast(order):
    box = Box.from_bounds([[0, 2], [0, 2]])
    full = verify(identity_net(2), box, QUADRANT, 0.25, order=order)
    fast = verify(
        identity_net(2), box, QUADRANT, 0.25, order=order, fail_fast=True, record_partition=True
    )
    assert fast.status is Status.UNCERTAIN and len(fast.witnesses) == 1
    assert fast.stats.boxes_processed <= full.stats.boxes_processed
    assert _tiles([it for it, _ in fast.partition], box)


def test_fifo_fail_fast_matches_sequential_count():
    box = Box.from_bounds([[0, 2], [0, 2]])
    fast = verify(identity_net(2), box, QUADRANT, 0.25, fail_fast=True)
    # sequential FIFO replay
    from collections import deque
    from specguard.interval import bisect, width
    from specguard.propagation import network_interval

    queue, processed = deque([box]), 0
    while queue:
        b = queue.popleft()
        processed += 1
        if not intersects(network_interval(identity_net(2), b), QUADRANT):
            continue
        if width(b) > 0.25:
            queue.extend(bisect(b))
            continue
        break
    assert fast.stats.boxes_processed == processed


def test_uniform_fail_fast():
    box = Box.from_bounds([[0, 2], [0, 2]])
    v = verify_uniform(identity_net(2), box, QUADRANT, 0.5, fail_fast=True, record_partition=True)
    assert v.status is Status.UNCERTAIN and len(v.witnesses) == 1
    assert _tiles([it for it, _ in v.partition], box)


def test_depth_bound():
    box = Box.from_bounds([[0, 1], [0, 0.25], [0, 0]])
    assert depth_bound(box, 0.1) == 4 + 2


def _random_instance(seed):
    rng = np.random.default_rng(seed)
    net = random_network([2, 6, 6, 2], ["sigmoid", "tanh", "linear"], seed=seed)
    box = Box.from_bounds([[-1, 1], [-1, 1]])
    y0 = eval_network(net, np.zeros(2))
    shift = rng.uniform(0.2, 1.5)
    region = UnsafeRegion((Box.from_bounds([[y0[0] + shift, INF], [-INF, INF]]),))
    return net, box, region


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 5000))
def test_verdict_order_independent_and_sound(seed):
    net, box, region = _random_instance(seed)
    fifo = verify(net, box, region, 0.05)
    lifo = verify(net, box, region, 0.05, order="lifo")
    threaded = verify(net, box, region, 0.05, jobs=3)
    assert fifo.status is lifo.status is threaded.status
    assert fifo.stats.boxes_processed == lifo.stats.boxes_processed
    assert fifo.stats.boxes_processed == threaded.stats.boxes_processed
    assert fifo.stats.max_depth <= depth_bound(box, 0.05)
    if fifo.safe:
        assert random_sample_unsafe_hits(net, box, region, 5000, seed) == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 5000))
def test_safe_is_monotone_in_epsilon(seed):
    net, box, region = _random_instance(seed)
    coarse = verify(net, box, region, 0.2)
    if coarse.safe:
        for eps in (0.1, 0.03):
            fine = verify(net, box, region, eps)
            assert fine.safe
            assert fine.stats.boxes_processed >= coarse.stats.boxes_processed


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 5000))
def test_guided_never_exceeds_uniform_when_both_safe(seed):
    net, box, region = _random_instance(seed)
    guided = verify(net, box, region, 0.05)
    uniform = verify_uniform(net, box, region, 0.05)
    if guided.safe and uniform.safe:
        assert guided.stats.boxes_processed <= uniform.stats.boxes_processed


@pytest.mark.parametrize("eps", [0.5, 0.1, 0.01])
def test_never_safe_when_unsafe_point_exists(eps):
    net = random_network([2, 5, 2], ["relu", "linear"], seed=8)
    x_star = np.array([0.3, -0.2])
    y_star = eval_network(net, x_star)
    region = UnsafeRegion((Box(y_star - 0.01, y_star + 0.01),))
    v = verify(net, Box.from_bounds([[-1, 1], [-1, 1]]), region, eps)
    assert v.status is Status.UNCERTAIN
    assert any(w.in_box.contains(x_star) for w in v.witnesses)


def test_parse_spec_with_infinities(write_json):
    doc = {
        "unsafe": {
            "boxes": [[[1, "inf"], ["-inf", 2]]],
            "halfspaces": [{"a": [1, -1], "b": 0.5}],
        },
        "input": [[-1, 1], [0, 2]],
        "epsilon": 0.1,
    }
    spec = load_spec(write_json("s.json", doc))
    assert spec.epsilon == 0.1
    assert spec.input_box == Box.from_bounds([[-1, 1], [0, 2]])
    assert spec.region.boxes[0] == Box.from_bounds([[1, INF], [-INF, 2]])
    assert spec.region.halfspaces[0].b == 0.5
    again = parse_spec(__import__("json").dumps(spec.to_dict()))
    assert again == spec


@pytest.mark.parametrize(
    "doc",
    [
        '{"unsafe": {"boxes": []}, "input": [[0, "inf"]], "epsilon": 0.1}',
        '{"unsafe": {"boxes": [[[0, Infinity]]]}, "input": [[0, 1]], "epsilon": 0.1}',
        '{"unsafe": {"boxes": []}, "input": [[0, 1]], "epsilon": 0}',
        '{"unsafe": {"boxes": []}, "input": [[1, 0]], "epsilon": 0.1}',
        '{"unsafe": {"boxes": [], "other": 1}, "input": [[0, 1]], "epsilon": 0.1}',
        '{"unsafe": {"halfspaces": [{"a": [1]}]}, "input": [[0, 1]], "epsilon": 0.1}',
        '{"input": [[0, 1]], "epsilon": 0.1}',
        "{bad json",
    ],
)
def test_parse_spec_errors(doc):
    with pytest.raises(SpecError):
        parse_spec(doc)


def test_witness_set_round_trip():
    from specguard.verifier import WitnessSet

    ws = WitnessSet()
    assert len(ws) == 0 and list(ws) == []
    lo = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    ws.add(lo, lo + 1, lo * 2, lo * 2 + 1, 3, [0, 2])
    ws.add(lo, lo + 1, lo * 2, lo * 2 + 1, 4, [])
    ws.add(lo, lo + 1, lo * 2, lo * 2 + 1, 5, [1])
    assert len(ws) == 3
    assert [w.depth for w in ws] == [3, 3, 5]
    assert ws[-1].in_box == Box([1.0, 1.0], [2.0, 2.0])
    assert ws[1].out_box == Box([4.0, 4.0], [5.0, 5.0])
    assert [w.depth for w in ws[1:]] == [3, 5]
