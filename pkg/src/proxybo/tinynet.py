"""Tiny dense networks built from architecture encodings.

The network exists only to host zero-cost proxy formulas at initialisation.
Edge ``i`` of the encoding sets hidden layer ``i``. An operation value ``v``
maps to

    ========  =====================  ==========
    value v   width                  activation
    ========  =====================  ==========
    even      ``2 ** (1 + v // 2)``  identity
    odd       ``2 ** (1 + v // 2)``  relu
    ========  =====================  ==========

so for five operations the table is ``0 -> (2, identity)``,
``1 -> (2, relu)``, ``2 -> (4, identity)``, ``3 -> (4, relu)``,
``4 -> (8, identity)``. Widths are capped at :data:`MAX_WIDTH`. The input layer
has :data:`INPUT_DIM` units and a final linear layer maps to
:data:`OUTPUT_DIM` outputs.

Gradients come from a reverse pass over the fixed layer sequence. The ReLU
derivative at exactly zero is taken as 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import NumericOverflowError, ShapeError
from .space import SearchSpaceSpec

INPUT_DIM = 32
OUTPUT_DIM = 4
MAX_WIDTH = 64
ACTIVATIONS = ("identity", "relu")


def op_layer(value: int) -> tuple[int, str]:
    """Width and activation for one operation value."""
    width = min(2 ** (1 + value // 2), MAX_WIDTH)
    return width, ("relu" if value % 2 else "identity")


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    hidden_layers: tuple[tuple[int, str], ...]
    output_dim: int
    init_seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be positive")
        for width, act in self.hidden_layers:
            if width < 1:
                raise ValueError(f"layer width must be >= 1, got {width}")
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")

    @property
    def dims(self) -> list[int]:
        return [self.input_dim] + [w for w, _ in self.hidden_layers] + [self.output_dim]

    @property
    def activations(self) -> list[str]:
        return [a for _, a in self.hidden_layers] + ["identity"]

    @property
    def n_params(self) -> int:
        d = self.dims
        return sum((d[i] + 1) * d[i + 1] for i in range(len(d) - 1))


@dataclass
class ParamSet:
    """Per-layer weight matrices ``(fan_in, fan_out)`` and bias vectors."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        """Weights and biases interleaved, layer by layer."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def map(self, fn) -> ParamSet:
        return ParamSet([fn(W) for W in self.weights], [fn(b) for b in self.biases])

    def copy(self) -> ParamSet:
        return self.map(np.copy)


def build_netspec(x: Sequence[int], spec: SearchSpaceSpec, init_seed: int = 0) -> NetSpec:
    x = spec.validate(x)
    return NetSpec(INPUT_DIM, tuple(op_layer(v) for v in x), OUTPUT_DIM, int(init_seed))


def init_params(net: NetSpec) -> ParamSet:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
    rng = np.random.default_rng(net.init_seed)
    d = net.dims
    weights, biases = [], []
    for fan_in, fan_out in zip(d[:-1], d[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return ParamSet(weights, biases)


def instantiate(x: Sequence[int], spec: SearchSpaceSpec, init_seed: int = 0) -> tuple[NetSpec, ParamSet]:
    net = build_netspec(x, spec, init_seed)
    return net, init_params(net)


def _check_shapes(net: NetSpec, params: ParamSet, X: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[0] < 1:
        raise ShapeError(0, f"batch must be a non-empty 2-D array, got shape {X.shape}")
    d = net.dims
    if len(params.weights) != len(d) - 1 or len(params.biases) != len(d) - 1:
        raise ShapeError(len(params.weights), f"expected {len(d) - 1} layers of parameters")
    if X.shape[1] != d[0]:
        raise ShapeError(0, f"batch has {X.shape[1]} features, network expects {d[0]}")
    for layer, (W, b) in enumerate(zip(params.weights, params.biases)):
        if W.shape != (d[layer], d[layer + 1]) or b.shape != (d[layer + 1],):
            raise ShapeError(
                layer,
                f"weight {W.shape} / bias {b.shape} do not match ({d[layer]}, {d[layer + 1]})",
            )


def _forward(net: NetSpec, params: ParamSet, X: np.ndarray):
    X = np.asarray(X, dtype=np.float64)
    _check_shapes(net, params, X)
    acts = [X]
    pre = []
    h = X
    for layer, (W, b, act) in enumerate(zip(params.weights, params.biases, net.activations)):
        with np.errstate(over="ignore", invalid="ignore"):
            z = h @ W + b
        if not np.all(np.isfinite(z)):
            raise NumericOverflowError(layer, "forward")
        pre.append(z)
        h = np.maximum(z, 0.0) if act == "relu" else z
        acts.append(h)
    return pre, acts


def _backward(net: NetSpec, params: ParamSet, pre, acts, grad_out: np.ndarray):
    """Return parameter gradients and the gradient w.r.t. the batch."""
    g = grad_out
    gW = [None] * len(params.weights)
    gb = [None] * len(params.biases)
    for layer in range(len(params.weights) - 1, -1, -1):
        if net.activations[layer] == "relu":
            g = g * (pre[layer] > 0.0)
        gW[layer] = acts[layer].T @ g
        gb[layer] = g.sum(axis=0)
        with np.errstate(over="ignore", invalid="ignore"):
            g = g @ params.weights[layer].T
        if not np.all(np.isfinite(g)):
            raise NumericOverflowError(layer, "backward")
    return ParamSet(gW, gb), g


def forward(net: NetSpec, params: ParamSet, X) -> np.ndarray:
    """Affine + activation composition; the last layer is linear."""
    _, acts = _forward(net, params, X)
    return acts[-1]


def loss_value(net: NetSpec, params: ParamSet, X, loss: str = "squared_error", targets=None) -> float:
    out = forward(net, params, X)
    if loss == "squared_error":
        t = _targets(out, targets)
        return float(0.5 * np.sum((out - t) ** 2))
    if loss == "sum_of_outputs":
        return float(np.sum(out))
    raise ValueError(f"unknown loss {loss!r}")


def _targets(out: np.ndarray, targets) -> np.ndarray:
    if targets is None:
        raise ValueError("squared_error loss needs targets")
    t = np.asarray(targets, dtype=np.float64)
    if t.shape != out.shape:
        raise ShapeError(len(out), f"targets shape {t.shape} differs from outputs {out.shape}")
    return t


def grad_params(net: NetSpec, params: ParamSet, X, loss: str = "squared_error", targets=None) -> ParamSet:
    """Exact gradient of a scalar loss w.r.t. every weight and bias.

    ``squared_error`` is ``0.5 * sum((out - targets) ** 2)`` over the batch;
    ``sum_of_outputs`` is ``sum(out)``.
    """
    pre, acts = _forward(net, params, X)
    out = acts[-1]
    if loss == "squared_error":
        grad_out = out - _targets(out, targets)
    elif loss == "sum_of_outputs":
        grad_out = np.ones_like(out)
    else:
        raise ValueError(f"unknown loss {loss!r}")
    grads, _ = _backward(net, params, pre, acts, grad_out)
    return grads


def grad_inputs_per_example(net: NetSpec, params: ParamSet, X) -> np.ndarray:
    """Row ``i`` is the gradient of ``sum(output(X[i]))`` w.r.t. ``X[i]``."""
    pre, acts = _forward(net, params, X)
    _, gX = _backward(net, params, pre, acts, np.ones_like(acts[-1]))
    return gX
