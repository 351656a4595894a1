"""Sound interval verification of feedforward networks with monotone activations."""

from .interval import Box, DimensionError, Interval, bisect, width
from .model import Activation, Layer, Network, activation_eval, eval_network, load_model, save_model
from .propagation import (
    LipschitzBound,
    excess_width_bound,
    layer_interval,
    lipschitz_gamma,
    network_interval,
)
from .verifier import (
    HalfSpace,
    SafetySpec,
    Status,
    UnsafeRegion,
    Verdict,
    WitnessSet,
    WorkItem,
    intersects,
    load_spec,
    robustness_region,
    verify,
    verify_uniform,
)

__all__ = [
    "Activation",
    "Box",
    "DimensionError",
    "HalfSpace",
    "Interval",
    "Layer",
    "LipschitzBound",
    "Network",
    "SafetySpec",
    "Status",
    "UnsafeRegion",
    "Verdict",
    "WitnessSet",
    "WorkItem",
    "activation_eval",
    "bisect",
    "eval_network",
    "excess_width_bound",
    "intersects",
    "layer_interval",
    "lipschitz_gamma",
    "load_model",
    "load_spec",
    "network_interval",
    "robustness_region",
    "save_model",
    "verify",
    "verify_uniform",
    "width",
]
