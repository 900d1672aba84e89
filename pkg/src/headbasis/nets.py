"""Small dense networks with explicit forward/backward, SGD with momentum,
and a central-difference gradient checker.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DomainError, ShapeError

ACTIVATIONS = ("linear", "relu", "tanh")


@dataclass(eq=False)
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "linear"

    def __post_init__(self):
        self.weight = np.array(self.weight, dtype=np.float64)
        self.bias = np.array(self.bias, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"layer weight {self.weight.shape} / bias {self.bias.shape} mismatch")
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise DomainError("non-finite layer parameters")


@dataclass(eq=False)
class NetCache:
    inputs: list  # input to each layer, batched
    pre: list  # pre-activations
    output: np.ndarray
    single: bool
    version: int


@dataclass(eq=False)
class SmallNet:
    layers: list[Layer]
    version: int = field(default=0)

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("a network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if b.weight.shape[1] != a.weight.shape[0]:
                raise ShapeError(
                    f"layer dims do not chain: {a.weight.shape} then {b.weight.shape}"
                )

    @classmethod
    def build(
        cls,
        dims: Sequence[int],
        activations: Sequence[str],
        rng=None,
        zero_last: bool = False,
        input_gain: float = 1.0,
        hidden_bias_std: float = 0.0,
    ) -> "SmallNet":
        """Create a net with layer sizes ``dims`` (input first).

        Layers use He (relu) or Glorot (tanh/linear) scaled Gaussians; the
        first layer is further multiplied by ``input_gain`` (for inputs far
        from unit scale).  Hidden biases are N(0, hidden_bias_std^2), output
        biases zero.  ``zero_last`` zeroes the output layer so the net starts
        at a constant 0.
        """
        if len(activations) != len(dims) - 1:
            raise ShapeError("need one activation per layer")
        rng = np.random.default_rng(rng)
        layers = []
        for i, act in enumerate(activations):
            fan_in, fan_out = dims[i], dims[i + 1]
            if zero_last and i == len(activations) - 1:
                w = np.zeros((fan_out, fan_in))
            else:
                scale = np.sqrt(2.0 / fan_in) if act == "relu" else np.sqrt(1.0 / fan_in)
                w = rng.standard_normal((fan_out, fan_in)) * scale
                if i == 0:
                    w *= input_gain
            last = i == len(activations) - 1
            b = np.zeros(fan_out) if last or hidden_bias_std == 0 \
                else hidden_bias_std * rng.standard_normal(fan_out)
            layers.append(Layer(w, b, act))
        return cls(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"W{i}"] = layer.weight
            out[f"b{i}"] = layer.bias
        return out

    def touch(self) -> None:
        """Mark parameters as changed; invalidates outstanding forward caches."""
        self.version += 1

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, NetCache]:
        return net_forward(self, x)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return net_forward(self, x)[0]

    def backward(self, cache: NetCache, grad_out: np.ndarray):
        return net_backward(self, cache, grad_out)


def _activate(z: np.ndarray, act: str) -> np.ndarray:
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(z: np.ndarray, act: str) -> np.ndarray:
    if act == "relu":
        return (z > 0).astype(np.float64)
    if act == "tanh":
        return 1.0 - np.tanh(z) ** 2
    return np.ones_like(z)


def net_forward(net: SmallNet, x: np.ndarray) -> tuple[np.ndarray, NetCache]:
    h = np.asarray(x, dtype=np.float64)
    single = h.ndim == 1
    if single:
        h = h[None, :]
    if h.ndim != 2 or h.shape[1] != net.input_dim:
        raise ShapeError(f"net expects input dim {net.input_dim}, got shape {np.shape(x)}")
    inputs, pre = [], []
    for layer in net.layers:
        inputs.append(h)
        z = h @ layer.weight.T + layer.bias
        pre.append(z)
        h = _activate(z, layer.activation)
    out = h[0] if single else h
    return out, NetCache(inputs, pre, out, single, net.version)


def net_backward(net: SmallNet, cache: NetCache, grad_out: np.ndarray):
    """Reverse-mode pass.  Returns ``(param_grads, grad_input)``.

    Parameter gradients are summed over the batch and keyed like
    :meth:`SmallNet.params`.
    """
    if cache.version != net.version or len(cache.inputs) != len(net.layers):
        raise ContractError("network parameters changed since this forward pass")
    g = np.asarray(grad_out, dtype=np.float64)
    if cache.single:
        g = g[None, :]
    if g.shape != cache.pre[-1].shape:
        raise ShapeError(f"upstream gradient shape {g.shape} != output {cache.pre[-1].shape}")
    grads = {}
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        gz = g * _activation_grad(cache.pre[i], layer.activation)
        grads[f"W{i}"] = gz.T @ cache.inputs[i]
        grads[f"b{i}"] = gz.sum(axis=0)
        g = gz @ layer.weight
    return grads, (g[0] if cache.single else g)


class SGDMomentum:
    """Heavy-ball SGD over named parameter arrays, updated in place."""

    def __init__(self, momentum: float = 0.9):
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float,
             prefix: str = "") -> None:
        for name, p in params.items():
            key = prefix + name
            v = self.velocity.get(key)
            if v is None:
                v = np.zeros_like(p)
                self.velocity[key] = v
            v *= self.momentum
            v += grads[name]
            p -= lr * v


@dataclass
class GradCheckReport:
    errors: dict[str, float]
    tolerance: float
    worst_index: dict[str, tuple] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def failures(self) -> list[str]:
        return [k for k, v in self.errors.items() if v > self.tolerance]

    def __str__(self) -> str:
        lines = [f"{k}: max rel err {v:.3e}" for k, v in self.errors.items()]
        lines.append(f"{'PASS' if self.passed else 'FAIL'} at tol {self.tolerance:g}")
        return "\n".join(lines)


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(
    params: dict[str, np.ndarray],
    loss_and_grads: Callable[[], tuple[float, dict[str, np.ndarray]]],
    tolerance: float = 1e-4,
    h: float = 1e-5,
    skip: Callable[[], bool] | None = None,
    floor: float = 1e-6,
    max_entries: int | None = None,
    rng=None,
) -> GradCheckReport:
    """Compare analytic gradients to central differences, entry by entry.

    ``loss_and_grads`` must be pure: it reads the current values of ``params``
    (perturbed in place here) and returns the loss and analytic gradients.
    ``skip`` is called after each perturbation; returning True excludes that
    entry (used to avoid relu/L1 kinks).  Relative errors use
    ``max(|analytic|, |numeric|, floor)`` as denominator so that entries whose
    true gradient is zero are judged on an absolute scale.

    With ``max_entries`` set, larger parameters are checked on a random
    subset of that many entries drawn from ``rng``.
    """
    rng = np.random.default_rng(rng)
    _, analytic = loss_and_grads()
    analytic = {k: np.array(v, copy=True) for k, v in analytic.items()}
    errors, worst = {}, {}
    for name, p in params.items():
        worst_err, worst_idx = 0.0, None
        if max_entries is not None and p.size > max_entries:
            flat = np.sort(rng.choice(p.size, size=max_entries, replace=False))
            indices = [np.unravel_index(i, p.shape) for i in flat]
        else:
            indices = list(np.ndindex(p.shape))
        for idx in indices:
            orig = p[idx]
            p[idx] = orig + h
            lp, _ = loss_and_grads()
            skipped = skip is not None and skip()
            p[idx] = orig - h
            lm, _ = loss_and_grads()
            skipped = skipped or (skip is not None and skip())
            p[idx] = orig
            if skipped:
                continue
            err = relative_error(float(analytic[name][idx]), (lp - lm) / (2 * h), floor)
            if err > worst_err:
                worst_err, worst_idx = err, idx
        errors[name] = worst_err
        if worst_idx is not None:
            worst[name] = worst_idx
    return GradCheckReport(errors, tolerance, worst)


def relu_near_kink(net: SmallNet, x: np.ndarray, margin: float = 1e-6) -> bool:
    """True if any relu pre-activation for input ``x`` lies within ``margin`` of 0."""
    _, cache = net_forward(net, x)
    return any(
        layer.activation == "relu" and np.any(np.abs(z) < margin)
        for layer, z in zip(net.layers, cache.pre)
    )
