"""Feedforward networks with monotone activations.

A network is an ordered list of dense layers ``y = act(W x + b)``. Every
activation in the catalog is nondecreasing and globally Lipschitz, which is
what lets interval propagation map pre-activation endpoints directly.

The model file is UTF-8 JSON::

    {"layers": [{"weights": [[...], ...], "bias": [...], "activation": "relu"}, ...]}
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .interval import DimensionError


class ModelError(ValueError):
    """Base class for model loading failures."""


class ModelParseError(ModelError):
    pass


class UnknownActivationError(ModelError):
    pass


class ModelDimensionError(ModelError, DimensionError):
    pass


def _sigmoid(z):
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _relu(z):
    return np.maximum(np.asarray(z, dtype=np.float64), 0.0)


def _linear(z):
    return np.asarray(z, dtype=np.float64)


class Activation(enum.Enum):
    """Monotone activation catalog; ``xi`` is the global Lipschitz constant."""

    RELU = ("relu", 1.0)
    SIGMOID = ("sigmoid", 0.25)
    TANH = ("tanh", 1.0)
    LINEAR = ("linear", 1.0)

    def __init__(self, label: str, xi: float):
        self.label = label
        self.xi = xi

    @classmethod
    def parse(cls, name) -> Activation:
        if isinstance(name, Activation):
            return name
        for act in cls:
            if act.label == name:
                return act
        raise UnknownActivationError(
            f"unknown activation {name!r}; expected one of {[a.label for a in cls]}"
        )

    def __call__(self, z):
        return _APPLY[self](z)

    def __str__(self) -> str:
        return self.label


_APPLY = {
    Activation.RELU: _relu,
    Activation.SIGMOID: _sigmoid,
    Activation.TANH: np.tanh,
    Activation.LINEAR: _linear,
}


def activation_eval(kind: Activation | str, z: float) -> float:
    """Scalar activation value."""
    return float(Activation.parse(kind)(np.float64(z)))


def affine(weights: np.ndarray, bias: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``x @ W.T + b`` for a batch ``x`` of shape (B, n).

    Products are accumulated left to right over the input index and the bias is
    added last. Interval propagation uses the same order, so a point inside a
    box can never land outside the box's enclosure through a different
    rounding of the sum.
    """
    acc = x[:, 0:1] * weights[:, 0]
    for j in range(1, weights.shape[1]):
        acc = acc + x[:, j : j + 1] * weights[:, j]
    return acc + bias


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] == 0 or w.shape[1] == 0:
            raise ModelDimensionError(f"weights must be a non-empty matrix, got shape {w.shape}")
        if b.ndim != 1:
            raise ModelDimensionError(f"bias must be a vector, got shape {b.shape}")
        if w.shape[0] != b.size:
            raise ModelDimensionError(
                f"weights have {w.shape[0]} rows but bias has {b.size} entries"
            )
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ModelError("layer parameters must be finite")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "activation", Activation.parse(self.activation))

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.activation(affine(self.weights, self.bias, x))


@dataclass(frozen=True)
class Network:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ModelDimensionError("a network needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].in_dim != layers[k - 1].out_dim:
                raise ModelDimensionError(
                    f"layer {k} expects {layers[k].in_dim} inputs but layer {k - 1} "
                    f"produces {layers[k - 1].out_dim}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def depth(self) -> int:
        return len(self.layers)

    def __call__(self, x):
        return eval_network(self, x)

    def to_dict(self) -> dict:
        return {
            "layers": [
                {
                    "weights": layer.weights.tolist(),
                    "bias": layer.bias.tolist(),
                    "activation": layer.activation.label,
                }
                for layer in self.layers
            ]
        }


def eval_network(net: Network, x) -> np.ndarray:
    """Evaluate ``net`` at a point of shape (n,) or a batch of shape (B, n)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x.reshape(1, -1) if single else x
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise DimensionError(f"input has shape {x.shape}, network expects {net.input_dim} inputs")
    for layer in net.layers:
        batch = layer(batch)
    return batch[0] if single else batch


_LAYER_KEYS = {"weights", "bias", "activation"}


def _reject_constant(name):
    raise ModelParseError(f"non-finite literal {name} is not allowed")


def parse_model(text: str) -> Network:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"malformed model JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("layers"), list):
        raise ModelParseError('model must be a JSON object with a "layers" list')
    layers = []
    for k, spec in enumerate(doc["layers"]):
        if not isinstance(spec, dict):
            raise ModelParseError(f"layer {k} is not an object")
        keys = set(spec)
        if keys != _LAYER_KEYS:
            extra, missing = keys - _LAYER_KEYS, _LAYER_KEYS - keys
            raise ModelParseError(
                f"layer {k}: unexpected keys {sorted(extra)}, missing keys {sorted(missing)}"
            )
        weights, bias = spec["weights"], spec["bias"]
        if not _is_matrix(weights):
            raise ModelParseError(f"layer {k}: weights must be a list of equal-length number rows")
        if not _is_vector(bias):
            raise ModelParseError(f"layer {k}: bias must be a list of numbers")
        if not isinstance(spec["activation"], str):
            raise ModelParseError(f"layer {k}: activation must be a string")
        act = Activation.parse(spec["activation"])
        try:
            layers.append(Layer(weights, bias, act))
        except ModelDimensionError as exc:
            raise ModelDimensionError(f"layer {k}: {exc}") from None
    return Network(tuple(layers))


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_vector(v) -> bool:
    return isinstance(v, list) and len(v) > 0 and all(_is_number(e) for e in v)


def _is_matrix(m) -> bool:
    if not isinstance(m, list) or not m or not all(_is_vector(r) for r in m):
        return False
    return len({len(r) for r in m}) == 1


def load_model(path: str | Path) -> Network:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ModelParseError(f"cannot read model file {path}: {exc}") from exc
    return parse_model(text)


def save_model(net: Network, path: str | Path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(net.to_dict()), encoding="utf-8")


def random_network(
    sizes: Sequence[int],
    activations: Sequence[Activation | str] | Activation | str,
    seed: int,
    scale: float = 1.0,
) -> Network:
    """Gaussian-weight network with layer widths ``sizes`` (input first).

    ``activations`` is one kind for every layer or one per layer. Weights and
    biases are drawn from ``N(0, scale^2)`` with numpy's PCG64 generator.
    """
    if len(sizes) < 2:
        raise ValueError("sizes needs at least an input and an output width")
    n_layers = len(sizes) - 1
    if isinstance(activations, (str, Activation)):
        activations = [activations] * n_layers
    if len(activations) != n_layers:
        raise ValueError(f"expected {n_layers} activations, got {len(activations)}")
    rng = np.random.default_rng(seed)
    layers = []
    for n_in, n_out, act in zip(sizes[:-1], sizes[1:], activations):
        w = rng.normal(0.0, scale, size=(n_out, n_in))
        b = rng.normal(0.0, scale, size=n_out)
        layers.append(Layer(w, b, Activation.parse(act)))
    return Network(tuple(layers))
