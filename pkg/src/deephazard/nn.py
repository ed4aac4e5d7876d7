"""Dense feed-forward networks with hand-written backpropagation.

Every hidden layer is ``dropout(activation(W @ x + b))``; the output is a plain
affine map of the last hidden layer.  All arrays are float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SELU_SCALE = 1.0507
SELU_ALPHA = 1.67326
LEAKY_SLOPE = 0.01

ACTIVATIONS = ("atan", "elu", "leakyrelu", "loglog", "relu", "selu", "tanh")


@dataclass(frozen=True)
class Activation:
    kind: str
    alpha: float = 1.0  # only used by elu

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.kind!r}; choose from {ACTIVATIONS}")
        object.__setattr__(self, "kind", kind)
        if kind == "elu" and not self.alpha > 0:
            raise ValueError("elu alpha must be positive")

    @classmethod
    def parse(cls, spec) -> "Activation":
        """Accept ``"relu"``, ``"elu(0.1)"``, a dict or an :class:`Activation`."""
        if isinstance(spec, Activation):
            return spec
        if isinstance(spec, dict):
            return cls(spec["kind"], float(spec.get("alpha", 1.0)))
        s = str(spec).strip().lower()
        if s.endswith(")") and "(" in s:
            name, arg = s[:-1].split("(", 1)
            return cls(name.strip(), float(arg))
        return cls(s)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "elu":
            d["alpha"] = self.alpha
        return d

    def __str__(self):
        return f"elu({self.alpha:g})" if self.kind == "elu" else self.kind


def activate(act: Activation, x):
    x = np.asarray(x, dtype=float)
    k = act.kind
    if k == "atan":
        return np.arctan(x)
    if k == "elu":
        return np.where(x > 0, x, act.alpha * np.expm1(np.minimum(x, 0.0)))
    if k == "leakyrelu":
        return np.where(x > 0, x, LEAKY_SLOPE * x)
    if k == "loglog":
        return -np.expm1(-np.exp(x))
    if k == "relu":
        return np.where(x > 0, x, 0.0)
    if k == "selu":
        return SELU_SCALE * np.where(x > 0, x, SELU_ALPHA * np.expm1(np.minimum(x, 0.0)))
    return np.tanh(x)


def activate_grad(act: Activation, x):
    """Derivative of :func:`activate`; zero at the kink for relu and leaky relu."""
    x = np.asarray(x, dtype=float)
    k = act.kind
    if k == "atan":
        return 1.0 / (1.0 + x * x)
    if k == "elu":
        return np.where(x > 0, 1.0, act.alpha * np.exp(np.minimum(x, 0.0)))
    if k == "leakyrelu":
        return np.where(x > 0, 1.0, np.where(x < 0, LEAKY_SLOPE, 0.0))
    if k == "loglog":
        return np.exp(x - np.exp(x))
    if k == "relu":
        return np.where(x > 0, 1.0, 0.0)
    if k == "selu":
        return SELU_SCALE * np.where(x > 0, 1.0, SELU_ALPHA * np.exp(np.minimum(x, 0.0)))
    return 1.0 - np.tanh(x) ** 2


@dataclass
class DenseLayer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: Activation
    dropout: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.dropout}")


@dataclass
class IntervalNetwork:
    layers: list[DenseLayer]
    out_weight: np.ndarray  # (last_width,)
    out_bias: np.ndarray  # shape (1,) so the optimizer can update it in place

    def __post_init__(self):
        width = self.input_dim
        for k, layer in enumerate(self.layers):
            if layer.weight.shape != (layer.bias.shape[0], width):
                raise ValueError(f"layer {k}: weight {layer.weight.shape} does not chain from width {width}")
            width = layer.weight.shape[0]
        if self.out_weight.shape != (width,):
            raise ValueError(f"output weight {self.out_weight.shape} does not match width {width}")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[1] if self.layers else self.out_weight.shape[0]

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order: (W, b) per layer, then output (w, b)."""
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out + [self.out_weight, self.out_bias]

    def weight_mask(self) -> list[bool]:
        """Which entries of :meth:`params` are weights (penalised) rather than biases."""
        return [k % 2 == 0 for k in range(len(self.params()))]

    def copy(self) -> "IntervalNetwork":
        return IntervalNetwork(
            [DenseLayer(l.weight.copy(), l.bias.copy(), l.activation, l.dropout) for l in self.layers],
            self.out_weight.copy(),
            self.out_bias.copy(),
        )

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "layers": [
                {
                    "shape": list(l.weight.shape),
                    "activation": l.activation.to_dict(),
                    "dropout": l.dropout,
                    "weight": l.weight.ravel().tolist(),
                    "bias": l.bias.tolist(),
                }
                for l in self.layers
            ],
            "output": {"weight": self.out_weight.tolist(), "bias": float(self.out_bias[0])},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IntervalNetwork":
        layers = []
        for l in d["layers"]:
            shape = tuple(l["shape"])
            layers.append(
                DenseLayer(
                    np.array(l["weight"], dtype=float).reshape(shape),
                    np.array(l["bias"], dtype=float),
                    Activation.parse(l["activation"]),
                    float(l["dropout"]),
                )
            )
        net = cls(layers, np.array(d["output"]["weight"], dtype=float), np.array([d["output"]["bias"]], dtype=float))
        if net.input_dim != d["input_dim"]:
            raise ValueError("serialized input_dim disagrees with layer shapes")
        return net


def init_he_normal(shape, rng: np.random.Generator) -> np.ndarray:
    """Weights ~ N(0, 2 / fan_in) for a ``(fan_out, fan_in)`` matrix or a ``(fan_in,)`` vector."""
    shape = tuple(shape)
    fan_in = shape[-1]
    if fan_in < 1:
        raise ValueError("fan_in must be >= 1")
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def build_network(input_dim, widths, activations, dropouts, rng) -> IntervalNetwork:
    """He-normal weights, zero biases."""
    widths = list(widths)
    acts = _per_layer(activations, len(widths), "activations")
    drops = _per_layer(dropouts, len(widths), "dropouts")
    layers = []
    fan_in = input_dim
    for width, act, rate in zip(widths, acts, drops):
        layers.append(DenseLayer(init_he_normal((width, fan_in), rng), np.zeros(width), Activation.parse(act), float(rate)))
        fan_in = width
    return IntervalNetwork(layers, init_he_normal((fan_in,), rng), np.zeros(1))


def _per_layer(value, n, name):
    if isinstance(value, (list, tuple)):
        if len(value) == 1:
            return list(value) * n
        if len(value) != n:
            raise ValueError(f"{name}: expected 1 or {n} entries, got {len(value)}")
        return list(value)
    return [value] * n


@dataclass
class Tape:
    """Intermediates of one forward pass, enough to replay the chain rule."""

    net_id: int
    inputs: list[np.ndarray] = field(default_factory=list)  # input to each layer
    preacts: list[np.ndarray] = field(default_factory=list)
    masks: list[np.ndarray | None] = field(default_factory=list)
    last: np.ndarray | None = None  # input to the output layer


def forward(net: IntervalNetwork, z, train: bool = False, rng: np.random.Generator | None = None):
    """Risk for each row of ``z`` (``(n, d)`` or a single ``(d,)`` vector).

    In training mode hidden units are dropped with inverted scaling, so eval
    mode needs no correction.  Returns ``(risk, tape)``.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    a = z[None, :] if single else z
    if a.shape[1] != net.input_dim:
        raise ValueError(f"input has {a.shape[1]} features, network expects {net.input_dim}")
    tape = Tape(net_id=id(net))
    for layer in net.layers:
        tape.inputs.append(a)
        pre = a @ layer.weight.T + layer.bias
        tape.preacts.append(pre)
        a = activate(layer.activation, pre)
        mask = None
        if train and layer.dropout > 0:
            if rng is None:
                raise ValueError("training-mode dropout needs a random generator")
            keep = 1.0 - layer.dropout
            mask = (rng.random(a.shape) < keep) / keep
            a = a * mask
        tape.masks.append(mask)
    tape.last = a
    risk = a @ net.out_weight + net.out_bias[0]
    return (risk[0] if single else risk), tape


def backward(net: IntervalNetwork, tape: Tape, upstream) -> list[np.ndarray]:
    """Gradient of ``sum(upstream * risk)`` with respect to :meth:`IntervalNetwork.params`."""
    if tape.net_id != id(net) or len(tape.preacts) != len(net.layers):
        raise ValueError("tape was not produced by this network")
    g = np.atleast_1d(np.asarray(upstream, dtype=float))
    if g.shape[0] != tape.last.shape[0]:
        raise ValueError(f"upstream has {g.shape[0]} entries, tape holds {tape.last.shape[0]} rows")
    grads = [g @ tape.last, np.array([g.sum()])]
    da = np.outer(g, net.out_weight)
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        if tape.masks[k] is not None:
            da = da * tape.masks[k]
        dpre = da * activate_grad(layer.activation, tape.preacts[k])
        grads = [dpre.T @ tape.inputs[k], dpre.sum(axis=0)] + grads
        da = dpre @ layer.weight
    return grads


@dataclass(frozen=True)
class Penalty:
    lam: float = 0.0
    p: int = 2

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("penalty weight must be >= 0")
        if self.p not in (1, 2):
            raise ValueError("penalty norm must be 1 (lasso) or 2 (ridge)")


def penalty_value_and_grad(spec: Penalty, params):
    """``lam * sum|theta|`` (p=1) or ``lam * sum theta^2`` (p=2) over the given arrays."""
    value = 0.0
    grads = []
    for theta in params:
        theta = np.asarray(theta, dtype=float)
        if spec.p == 1:
            value += spec.lam * np.abs(theta).sum()
            grads.append(spec.lam * np.sign(theta))
        else:
            value += spec.lam * np.square(theta).sum()
            grads.append(2.0 * spec.lam * theta)
    return float(value), grads


class Optimizer:
    """Plain SGD or bias-corrected Adam, updating parameter arrays in place."""

    def __init__(self, kind: str = "adam", lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        kind = kind.lower()
        if kind not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {kind!r}")
        if not lr > 0:
            raise ValueError("learning rate must be positive")
        self.kind, self.lr = kind, lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
            raise ValueError("parameter and gradient shapes differ")
        if not all(np.all(np.isfinite(g)) for g in grads):
            raise FloatingPointError("non-finite gradient: training diverged")
        self.step_count += 1
        if self.kind == "sgd":
            for p, g in zip(params, grads):
                p -= self.lr * g
            return
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.step_count
        c2 = 1.0 - b2**self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
