"""Dense feedforward detector network: ReLU hidden layers, Sigmoid output,
forward pass with per-layer input caching, binary cross-entropy, and analytic
backpropagation. Plain float64 numpy throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ModulationScheme

RELU = "relu"
SIGMOID = "sigmoid"

# Sigmoid outputs are clipped into the largest representable open (0, 1)
# interval so downstream logs stay finite.
_SIG_LO = np.nextafter(0.0, 1.0)
_SIG_HI = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths (input dim first) and activation tags."""

    layer_dims: tuple[int, ...]
    hidden_activation: str = RELU
    output_activation: str = SIGMOID

    def __post_init__(self):
        if len(self.layer_dims) < 2:
            raise ValueError("need at least an input and an output dimension")
        if any(int(d) <= 0 for d in self.layer_dims):
            raise ValueError("layer dimensions must be positive")
        if self.hidden_activation != RELU or self.output_activation != SIGMOID:
            raise ValueError("supported activations: relu hidden, sigmoid output")

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    def activation(self, k: int) -> str:
        """Activation tag of layer k (0-based)."""
        return self.output_activation if k == self.n_layers - 1 else self.hidden_activation


def detector_spec(n_tx: int, scheme: ModulationScheme) -> NetworkSpec:
    """Standard detector layout: 2M(M+1) inputs, 512/256/128 hidden units,
    one output per information bit."""
    return NetworkSpec(
        layer_dims=(
            2 * n_tx * (n_tx + 1),
            512,
            256,
            128,
            n_tx * scheme.bits_per_symbol,
        )
    )


@dataclass
class LayerParams:
    weight: np.ndarray  # (d_k, d_{k-1})
    bias: np.ndarray    # (d_k,)


@dataclass
class LayerGrads:
    weight: np.ndarray
    bias: np.ndarray


@dataclass
class ForwardTrace:
    """Everything backward and the projection optimizer need from a pass:
    the input seen by each layer, pre-activations, and the output."""

    layer_inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]
    output: np.ndarray


def init_network(spec: NetworkSpec, rng: np.random.Generator) -> list[LayerParams]:
    """Fan-balanced uniform weights, W ~ U(+-sqrt(6/(fan_in+fan_out))),
    zero biases."""
    params = []
    for d_in, d_out in zip(spec.layer_dims[:-1], spec.layer_dims[1:]):
        limit = np.sqrt(6.0 / (d_in + d_out))
        params.append(
            LayerParams(
                weight=rng.uniform(-limit, limit, size=(d_out, d_in)),
                bias=np.zeros(d_out),
            )
        )
    return params


def relu(z):
    return np.maximum(z, 0.0)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return np.clip(out, _SIG_LO, _SIG_HI)


def forward(params, spec: NetworkSpec, c0) -> ForwardTrace:
    """Evaluate the net on one feature vector (d,) or a batch (B, d),
    caching every layer input for backprop and gradient projection."""
    a = np.asarray(c0, dtype=np.float64)
    if a.shape[-1] != spec.layer_dims[0]:
        raise ValueError(
            f"input dim {a.shape[-1]} != spec input dim {spec.layer_dims[0]}"
        )
    if len(params) != spec.n_layers:
        raise ValueError("parameter count does not match spec")
    layer_inputs, pre_activations = [], []
    for k, p in enumerate(params):
        layer_inputs.append(a)
        z = a @ p.weight.T + p.bias
        pre_activations.append(z)
        a = sigmoid(z) if spec.activation(k) == SIGMOID else relu(z)
    return ForwardTrace(layer_inputs, pre_activations, a)


def bce_loss(output, target) -> float:
    """Binary cross-entropy, averaged over every output entry (and over the
    batch when the arrays are 2-D)."""
    output = np.asarray(output, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if output.shape != target.shape:
        raise ValueError(f"shape mismatch: {output.shape} vs {target.shape}")
    if output.size == 0 or np.any(output <= 0.0) or np.any(output >= 1.0):
        raise ValueError("output probabilities must lie strictly inside (0, 1)")
    return float(
        -np.mean(target * np.log(output) + (1.0 - target) * np.log1p(-output))
    )


def backward(params, spec: NetworkSpec, trace: ForwardTrace, target) -> list[LayerGrads]:
    """Exact gradients of bce_loss(trace.output, target) w.r.t. every weight
    and bias. The sigmoid/BCE pair collapses to an output delta of
    (output - target) / output.size.
    """
    target = np.asarray(target, dtype=np.float64)
    output = trace.output
    if target.shape != output.shape:
        raise ValueError(f"target shape {target.shape} != output {output.shape}")
    delta = (output - target) / output.size
    grads: list[LayerGrads | None] = [None] * len(params)
    for k in range(len(params) - 1, -1, -1):
        x = np.atleast_2d(trace.layer_inputs[k])
        d = np.atleast_2d(delta)
        grads[k] = LayerGrads(weight=d.T @ x, bias=d.sum(axis=0))
        if k > 0:
            delta = (delta @ params[k].weight) * (trace.pre_activations[k - 1] > 0)
    return grads


def predict_bits(output) -> np.ndarray:
    """Hard decision on sigmoid outputs: 1 above 0.5, 0 at or below."""
    return (np.asarray(output) > 0.5).astype(np.int8)
