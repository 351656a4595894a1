import json
import math

import numpy as np
import pytest

from specguard.model import Layer, Network, random_network


def hand_eval(net, x):
    """Second, loop-only implementation of the forward pass used as an oracle."""
    acts = {
        "relu": lambda z: z if z > 0 else 0.0,
        "sigmoid": lambda z: 1.0 / (1.0 + math.exp(-z)),
        "tanh": math.tanh,
        "linear": lambda z: z,
    }
    v = [float(t) for t in x]
    for layer in net.layers:
        w = layer.weights.tolist()
        b = layer.bias.tolist()
        f = acts[layer.activation.label]
        v = [f(sum(w[i][j] * v[j] for j in range(len(v))) + b[i]) for i in range(len(b))]
    return v


def identity_net(n=1):
    return Network((Layer(np.eye(n), np.zeros(n), "linear"),))


def mixed_net(seed, rng=None):
    """Random depth 1-6, width 1-12 network with mixed activations."""
    rng = rng or np.random.default_rng(seed)
    depth = int(rng.integers(1, 7))
    sizes = [int(v) for v in rng.integers(1, 13, size=depth + 1)]
    kinds = ["relu", "sigmoid", "tanh", "linear"]
    acts = [kinds[int(k)] for k in rng.integers(0, 4, size=depth)]
    return random_network(sizes, acts, seed=seed)


def random_box(rng, n, max_half=2.0, center_scale=3.0):
    c = rng.normal(0.0, center_scale, size=n)
    r = rng.uniform(0.0, max_half, size=n)
    return c - r, c + r


@pytest.fixture
def write_json(tmp_path):
    def _write(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc, encoding="utf-8")
        return path

    return _write


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
