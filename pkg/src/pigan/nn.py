"""Fully connected tanh networks, Xavier initialization and Adam."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Graph, Node, concat, tanh

__all__ = [
    "MlpSpec",
    "MlpParams",
    "NetLeaves",
    "AdamState",
    "NonFiniteGradient",
    "init_mlp",
    "mlp_forward",
    "adam_step",
]


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass(frozen=True)
class MlpSpec:
    input_width: int
    hidden_width: int = 128
    hidden_layers: int = 4
    output_width: int = 1

    def __post_init__(self):
        for name in ("input_width", "hidden_width", "output_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.hidden_layers < 0:
            raise ValueError("hidden_layers must be >= 0")

    @property
    def widths(self) -> list[int]:
        return [self.input_width] + [self.hidden_width] * self.hidden_layers + [self.output_width]

    def to_dict(self) -> dict:
        return {
            "input_width": self.input_width,
            "hidden_width": self.hidden_width,
            "hidden_layers": self.hidden_layers,
            "output_width": self.output_width,
        }


@dataclass
class MlpParams:
    """Weights ``W[l]`` of shape (fan_in, fan_out) and biases ``b[l]`` of shape (fan_out,)."""

    spec: MlpSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def named_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {}
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}.W{l}"] = w
            out[f"{prefix}.b{l}"] = b
        return out

    @classmethod
    def from_named(cls, spec: MlpSpec, prefix: str, arrays: dict) -> "MlpParams":
        n = spec.hidden_layers + 1
        return cls(spec, [arrays[f"{prefix}.W{l}"] for l in range(n)], [arrays[f"{prefix}.b{l}"] for l in range(n)])


def init_mlp(spec: MlpSpec, rng: np.random.Generator) -> MlpParams:
    """Uniform Xavier weights, zero biases."""
    widths = spec.widths
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(spec, weights, biases)


class NetLeaves:
    """The parameter leaves of one network inside a graph."""

    def __init__(self, graph: Graph, spec: MlpSpec, name: str):
        self.graph = graph
        self.spec = spec
        self.weights = [graph.leaf(f"{name}.W{l}") for l in range(spec.hidden_layers + 1)]
        self.biases = [graph.leaf(f"{name}.b{l}") for l in range(spec.hidden_layers + 1)]

    @property
    def nodes(self) -> list[Node]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def bind(self, params: MlpParams) -> dict[Node, np.ndarray]:
        if params.spec != self.spec:
            raise ValueError(f"parameter spec {params.spec} does not match {self.spec}")
        return dict(zip(self.nodes, params.arrays()))

    def __call__(self, inputs) -> Node:
        return mlp_forward(self, inputs)


def mlp_forward(net: NetLeaves, inputs) -> Node:
    """Build the network into ``net.graph``.

    ``inputs`` is a node of shape (rows, input_width) or a list of row blocks
    that are concatenated along the last axis. Hidden layers use tanh, the
    output layer is affine. Input width is checked at evaluation time by the
    matrix product.
    """
    x = concat(list(inputs)) if isinstance(inputs, (list, tuple)) else inputs
    h = x
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        h = z if l == last else tanh(z)
    return h


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.0
    beta2: float = 0.9
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def like(cls, arrays: list[np.ndarray], **hyper) -> "AdamState":
        return cls(m=[np.zeros_like(a) for a in arrays], v=[np.zeros_like(a) for a in arrays], **hyper)

    def m_hat(self) -> list[np.ndarray]:
        return [m / (1.0 - self.beta1**self.t) for m in self.m]

    def v_hat(self) -> list[np.ndarray]:
        return [v / (1.0 - self.beta2**self.t) for v in self.v]


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]):
    """One bias-corrected Adam update, applied to ``params`` in place.

    A step with any non-finite gradient is rejected before anything changes.
    Returns ``(state, params)``.
    """
    if len(grads) != len(params) or len(state.m) != len(params):
        raise ValueError("gradient/parameter/state lists are not congruent")
    for i, (p, g) in enumerate(zip(params, grads)):
        if np.shape(g) != p.shape:
            raise ValueError(f"gradient {i} has shape {np.shape(g)}, expected {p.shape}")
        if not np.isfinite(g).all():
            raise NonFiniteGradient(f"non-finite gradient for parameter array {i}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state, params
