"""Small fully connected networks with hand-written backprop and Adam/SGD.

Parameters live in one flat float64 vector per network (a "pure strategy").
Layer ``k`` occupies ``fan_in * fan_out`` weights stored row-major as a
``(fan_in, fan_out)`` matrix, followed by ``fan_out`` biases.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

ACTIVATIONS = ("relu", "tanh", "sigmoid", "linear")


class NonFiniteError(FloatingPointError):
    """A forward/backward pass or a training loss produced inf or nan."""


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]
    activations: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        object.__setattr__(self, "activations", tuple(self.activations))
        if len(self.layer_sizes) < 2:
            raise ValueError("an MLP needs at least an input and an output layer")
        if any(s < 1 for s in self.layer_sizes):
            raise ValueError(f"layer sizes must be positive: {self.layer_sizes}")
        if len(self.activations) != len(self.layer_sizes) - 1:
            raise ValueError("need exactly one activation per weight layer")
        bad = [a for a in self.activations if a not in ACTIVATIONS]
        if bad:
            raise ValueError(f"unknown activations {bad}; choose from {ACTIVATIONS}")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_params(self) -> int:
        return sum((a + 1) * b for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    def to_dict(self) -> dict:
        return {"layer_sizes": list(self.layer_sizes), "activations": list(self.activations)}

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(tuple(d["layer_sizes"]), tuple(d["activations"]))


def generator_spec(noise_dim: int = 2, hidden: int = 64, data_dim: int = 2) -> MlpSpec:
    return MlpSpec((noise_dim, hidden, hidden, data_dim), ("relu", "relu", "linear"))


def classifier_spec(data_dim: int = 2, hidden: int = 64) -> MlpSpec:
    return MlpSpec((data_dim, hidden, hidden, 1), ("relu", "relu", "sigmoid"))


@dataclass(frozen=True, eq=False)
class NetworkParams:
    values: np.ndarray
    spec: MlpSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] != self.spec.n_params:
            raise ValueError(f"expected {self.spec.n_params} parameters, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteError("network parameters contain non-finite values")
        object.__setattr__(self, "values", v)

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(weight, bias) views into the flat vector."""
        out = []
        offset = 0
        sizes = self.spec.layer_sizes
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            w = self.values[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            b = self.values[offset:offset + fan_out]
            offset += fan_out
            out.append((w, b))
        return out

    def with_values(self, values: np.ndarray) -> "NetworkParams":
        return NetworkParams(values, self.spec)


def _activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "sigmoid":
        # split by sign so exp never overflows
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    return z


def _activation_grad(kind: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return (z > 0).astype(float)
    if kind == "tanh":
        return 1.0 - a * a
    if kind == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


@dataclass
class ForwardCache:
    inputs: np.ndarray
    pre: list[np.ndarray] = field(default_factory=list)
    post: list[np.ndarray] = field(default_factory=list)

    @property
    def outputs(self) -> np.ndarray:
        return self.post[-1]


def _as_batch(params: NetworkParams, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != params.spec.n_inputs:
        raise ValueError(f"input width {x.shape[-1]} does not match network input {params.spec.n_inputs}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("network input contains non-finite values")
    return x


def forward_cache(params: NetworkParams, inputs) -> ForwardCache:
    x = _as_batch(params, inputs)
    cache = ForwardCache(x)
    a = x
    for k, ((w, b), kind) in enumerate(zip(params.layers(), params.spec.activations)):
        with np.errstate(over="ignore", invalid="ignore"):
            z = a @ w + b
            a = _activate(kind, z)
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(f"non-finite activation in layer {k}")
        cache.pre.append(z)
        cache.post.append(a)
    return cache


def forward(params: NetworkParams, inputs) -> np.ndarray:
    return forward_cache(params, inputs).outputs


def backward(params: NetworkParams, cache: ForwardCache, grad_outputs: np.ndarray,
             need_input_grad: bool = False,
             wrt_pre_activation: bool = False) -> tuple[np.ndarray, np.ndarray | None]:
    """Reverse pass. Returns (d/d params as a flat vector, d/d inputs or None).

    With ``wrt_pre_activation`` the incoming gradient is taken to be with
    respect to the last layer's pre-activation (e.g. a sigmoid's logit).
    """
    layers = params.layers()
    grads: list[np.ndarray] = [None] * (2 * len(layers))
    delta = np.asarray(grad_outputs, dtype=float)
    last = len(layers) - 1
    for k in range(last, -1, -1):
        w, _ = layers[k]
        if not (k == last and wrt_pre_activation):
            delta = delta * _activation_grad(params.spec.activations[k], cache.pre[k], cache.post[k])
        a_prev = cache.post[k - 1] if k > 0 else cache.inputs
        grads[2 * k] = (a_prev.T @ delta).ravel()
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0 or need_input_grad:
            delta = delta @ w.T
            if not np.all(np.isfinite(delta)):
                raise NonFiniteError(f"non-finite gradient flowing out of layer {k}")
    flat = np.concatenate(grads)
    return flat, (delta if need_input_grad else None)


LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


def gradient(params: NetworkParams, loss_on_outputs: LossFn, inputs) -> np.ndarray:
    """Gradient of ``loss_on_outputs(forward(params, inputs))`` w.r.t. params.

    ``loss_on_outputs`` returns ``(loss, d loss / d outputs)``.
    """
    cache = forward_cache(params, inputs)
    loss, d_out = loss_on_outputs(cache.outputs)
    if not np.isfinite(loss):
        raise NonFiniteError("loss is not finite")
    grad, _ = backward(params, cache, d_out)
    return grad


def init(spec: MlpSpec, rng: np.random.Generator) -> NetworkParams:
    """Glorot-uniform weights, zero biases."""
    chunks = []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-a, a, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return NetworkParams(np.concatenate(chunks), spec)


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 128
    iterations: int = 1000
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"optimizer kind must be 'sgd' or 'adam', got {self.kind!r}")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1 or self.iterations < 0:
            raise ValueError("batch_size must be >= 1 and iterations >= 0")


class Optimizer:
    """Stateful first-order minimiser over a flat parameter vector."""

    def __init__(self, cfg: OptimizerConfig, n_params: int):
        self.cfg = cfg
        self.t = 0
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)

    def step(self, values: np.ndarray, grad: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        self.t += 1
        if cfg.kind == "sgd":
            return values - cfg.learning_rate * grad
        self.m = cfg.beta1 * self.m + (1 - cfg.beta1) * grad
        self.v = cfg.beta2 * self.v + (1 - cfg.beta2) * grad * grad
        m_hat = self.m / (1 - cfg.beta1 ** self.t)
        v_hat = self.v / (1 - cfg.beta2 ** self.t)
        return values - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)


class TrainingError(RuntimeError):
    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


Objective = Callable[[NetworkParams, np.random.Generator], tuple[float, np.ndarray]]


def train(params: NetworkParams, objective: Objective, opt: OptimizerConfig,
          rng: np.random.Generator) -> NetworkParams:
    """Minimise ``objective`` for exactly ``opt.iterations`` steps.

    ``objective(params, rng)`` draws its own minibatch from ``rng`` and
    returns ``(loss, grad)``.
    """
    optimizer = Optimizer(opt, params.spec.n_params)
    values = params.values.copy()
    for it in range(opt.iterations):
        try:
            loss, grad = objective(NetworkParams(values, params.spec), rng)
        except NonFiniteError as exc:
            raise TrainingError(str(exc), it) from exc
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise TrainingError("loss or gradient became non-finite", it)
        values = optimizer.step(values, grad)
    return NetworkParams(values, params.spec)


def save_params(params: NetworkParams, path) -> None:
    """Text format: a ``# {json spec}`` header line, then one value per line."""
    lines = ["# " + json.dumps(params.spec.to_dict(), sort_keys=True)]
    lines.extend(repr(float(v)) for v in params.values)
    Path(path).write_text("\n".join(lines) + "\n")


def load_params(path) -> NetworkParams:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing spec header")
    spec = MlpSpec.from_dict(json.loads(lines[0][1:]))
    values = np.array([float(v) for v in lines[1:] if v.strip()])
    return NetworkParams(values, spec)
