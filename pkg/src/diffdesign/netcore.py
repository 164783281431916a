"""Dense/residual feed-forward networks with hand-rolled reverse-mode gradients.

The nets here are small MLPs and residual stacks evaluated on vectors or
row-batches. Besides parameter gradients for training, `backward` also
returns the gradient with respect to the input, which the samplers use for
the classifier and performance guidance terms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError, NumericError, ShapeError, TraceError

ACTIVATIONS = ("silu", "sigmoid", "identity")

CHECKPOINT_FORMAT_VERSION = 1


def silu(z):
    return z * expit(z)


def silu_deriv(z):
    s = expit(z)
    return s * (1.0 + z * (1.0 - s))


def sigmoid_deriv(z):
    s = expit(z)
    return s * (1.0 - s)


_ACT = {"silu": silu, "sigmoid": expit, "identity": lambda z: z}
_ACT_DERIV = {"silu": silu_deriv, "sigmoid": sigmoid_deriv, "identity": np.ones_like}


@dataclass(frozen=True)
class LayerSpec:
    """One network stage: a plain dense layer, or a two-matrix residual block.

    A residual block computes x + W2 @ act(W1 @ x + b1) + b2 and requires
    in_dim == out_dim.
    """

    in_dim: int
    out_dim: int
    activation: str = "silu"
    residual: bool = False

    def n_sublayers(self):
        return 2 if self.residual else 1


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("network needs at least one layer")
        for k, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise ConfigError(f"layer {k}: unknown activation {layer.activation!r}")
            if layer.in_dim < 1 or layer.out_dim < 1:
                raise ConfigError(f"layer {k}: dims must be positive")
            if layer.residual and layer.in_dim != layer.out_dim:
                raise ConfigError(
                    f"layer {k}: residual block needs in_dim == out_dim, "
                    f"got {layer.in_dim} != {layer.out_dim}"
                )
            if k > 0 and layer.in_dim != self.layers[k - 1].out_dim:
                raise ConfigError(
                    f"layer {k}: in_dim {layer.in_dim} does not chain with "
                    f"previous out_dim {self.layers[k - 1].out_dim}"
                )

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim


def mlp_spec(dims, activation="silu", out_activation="identity"):
    """Plain MLP: hidden layers use `activation`, the last layer `out_activation`."""
    layers = []
    for k in range(len(dims) - 1):
        act = out_activation if k == len(dims) - 2 else activation
        layers.append(LayerSpec(dims[k], dims[k + 1], act))
    return NetworkSpec(tuple(layers))


def resnet_spec(input_dim, width, output_dim, blocks=2, out_activation="identity"):
    """Residual stack: dense in, `blocks` residual blocks, dense out.

    With blocks=2 this is six weight matrices and five latent activations of
    size `width`, the layout used for the noise predictor and the
    performance predictor.
    """
    layers = [LayerSpec(input_dim, width, "silu")]
    layers += [LayerSpec(width, width, "silu", residual=True)] * blocks
    layers.append(LayerSpec(width, output_dim, out_activation))
    return NetworkSpec(tuple(layers))


class ParameterSet:
    """Weights for a NetworkSpec.

    `layers[k]` is a list of (W, b) pairs: one pair for a dense layer, two
    for a residual block. W has shape (out, in), b has shape (out,).
    """

    def __init__(self, layers):
        self.layers = layers

    def copy(self):
        return ParameterSet([[(W.copy(), b.copy()) for W, b in lp] for lp in self.layers])

    def arrays(self):
        for lp in self.layers:
            for W, b in lp:
                yield W
                yield b

    def check_matches(self, spec: NetworkSpec):
        if len(self.layers) != len(spec.layers):
            raise ShapeError(
                f"parameter set has {len(self.layers)} layers, spec has {len(spec.layers)}"
            )
        for k, (layer, lp) in enumerate(zip(spec.layers, self.layers)):
            if len(lp) != layer.n_sublayers():
                raise ShapeError(f"layer {k}: wrong sublayer count")
            shapes = _sublayer_shapes(layer)
            for (W, b), (w_shape, b_shape) in zip(lp, shapes):
                if W.shape != w_shape or b.shape != b_shape:
                    raise ShapeError(
                        f"layer {k}: got W{W.shape}/b{b.shape}, want W{w_shape}/b{b_shape}"
                    )

    def check_finite(self):
        for k, lp in enumerate(self.layers):
            for W, b in lp:
                if not (np.isfinite(W).all() and np.isfinite(b).all()):
                    raise NumericError(f"non-finite parameters in layer {k}")


def _sublayer_shapes(layer: LayerSpec):
    if layer.residual:
        d = layer.out_dim
        return [((d, layer.in_dim), (d,)), ((d, d), (d,))]
    return [((layer.out_dim, layer.in_dim), (layer.out_dim,))]


def init_params(spec: NetworkSpec, rng) -> ParameterSet:
    """Uniform +-sqrt(6/(in+out)) weights, zero biases."""
    layers = []
    for layer in spec.layers:
        lp = []
        for (out_d, in_d), (b_d,) in _sublayer_shapes(layer):
            bound = math.sqrt(6.0 / (in_d + out_d))
            W = rng.uniform(-bound, bound, size=(out_d, in_d))
            lp.append((W, np.zeros(b_d)))
        layers.append(lp)
    return ParameterSet(layers)


def zeros_like_params(spec: NetworkSpec) -> ParameterSet:
    layers = []
    for layer in spec.layers:
        lp = [(np.zeros(w_shape), np.zeros(b_shape)) for w_shape, b_shape in _sublayer_shapes(layer)]
        layers.append(lp)
    return ParameterSet(layers)


@dataclass
class ForwardTrace:
    """Cached per-layer inputs and pre-activations from one forward pass."""

    caches: list
    single: bool
    n_rows: int
    input_dim: int


def _as_batch(x, dim, what="input"):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise ShapeError(f"{what} has length {x.shape[0]}, expected {dim}")
        return x[None, :], True
    if x.ndim == 2:
        if x.shape[1] != dim:
            raise ShapeError(f"{what} has width {x.shape[1]}, expected {dim}")
        return x, False
    raise ShapeError(f"{what} must be 1-d or 2-d, got ndim={x.ndim}")


def forward(spec: NetworkSpec, params: ParameterSet, x):
    """Evaluate the network. Accepts a vector or an (n, input_dim) batch.

    Returns (output, trace); the trace feeds `backward`.
    """
    params.check_matches(spec)
    h, single = _as_batch(x, spec.input_dim)
    caches = []
    for layer, lp in zip(spec.layers, params.layers):
        if layer.residual:
            (W1, b1), (W2, b2) = lp
            z1 = h @ W1.T + b1
            a1 = _ACT[layer.activation](z1)
            caches.append((h, z1, a1))
            h = h + a1 @ W2.T + b2
        else:
            (W, b) = lp[0]
            z = h @ W.T + b
            caches.append((h, z))
            h = _ACT[layer.activation](z)
    trace = ForwardTrace(caches, single, h.shape[0], spec.input_dim)
    return (h[0] if single else h), trace


def backward(spec: NetworkSpec, params: ParameterSet, trace: ForwardTrace, grad_output):
    """Exact reverse-mode derivatives of output . grad_output.

    Returns (grad_params, grad_input). For batch traces, grad_params is the
    sum over rows and grad_input is per-row.
    """
    params.check_matches(spec)
    if len(trace.caches) != len(spec.layers) or trace.input_dim != spec.input_dim:
        raise TraceError("trace does not match the network spec")
    g, single = _as_batch(grad_output, spec.output_dim, what="grad_output")
    if single != trace.single or g.shape[0] != trace.n_rows:
        raise TraceError("grad_output shape does not match the traced forward pass")

    grad_layers = [None] * len(spec.layers)
    for k in range(len(spec.layers) - 1, -1, -1):
        layer, lp, cache = spec.layers[k], params.layers[k], trace.caches[k]
        if layer.residual:
            x_in, z1, a1 = cache
            if x_in.shape != (trace.n_rows, layer.in_dim):
                raise TraceError(f"layer {k}: cached input shape mismatch")
            (W1, b1), (W2, b2) = lp
            dW2 = g.T @ a1
            db2 = g.sum(axis=0)
            dz1 = (g @ W2) * _ACT_DERIV[layer.activation](z1)
            dW1 = dz1.T @ x_in
            db1 = dz1.sum(axis=0)
            grad_layers[k] = [(dW1, db1), (dW2, db2)]
            g = g + dz1 @ W1
        else:
            x_in, z = cache
            if x_in.shape != (trace.n_rows, layer.in_dim):
                raise TraceError(f"layer {k}: cached input shape mismatch")
            (W, b) = lp[0]
            dz = g * _ACT_DERIV[layer.activation](z)
            grad_layers[k] = [(dz.T @ x_in, dz.sum(axis=0))]
            g = dz @ W
    grad_input = g[0] if trace.single else g
    return ParameterSet(grad_layers), grad_input


@dataclass
class OptimizerState:
    """SGD or Adam state. Moment accumulators are allocated lazily for Adam."""

    algorithm: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: ParameterSet | None = None
    v: ParameterSet | None = None

    def __post_init__(self):
        if self.algorithm not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.algorithm!r}")


def optimizer_step(params: ParameterSet, grads: ParameterSet, state: OptimizerState):
    """One in-place update of `params`; returns (params, state)."""
    for k, lg in enumerate(grads.layers):
        for W, b in lg:
            if not (np.isfinite(W).all() and np.isfinite(b).all()):
                raise NumericError(f"non-finite gradient in layer {k}")
    state.step += 1
    if state.algorithm == "sgd":
        for p, g in zip(params.arrays(), grads.arrays()):
            p -= state.lr * g
        return params, state
    if state.m is None:
        state.m = ParameterSet([[(np.zeros_like(W), np.zeros_like(b)) for W, b in lp] for lp in params.layers])
        state.v = state.m.copy()
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def time_embed(t, dim, max_period=10000.0):
    """Interleaved sin/cos of t at geometrically spaced frequencies.

    Pair j uses frequency max_period**(-j/(dim/2 - 1)), so pair 0 runs at
    unit frequency: t=1, dim=2 gives [sin 1, cos 1].
    """
    if dim % 2 != 0 or dim < 2:
        raise ConfigError(f"embedding dim must be even and >= 2, got {dim}")
    if t < 0:
        raise ConfigError(f"timestep must be >= 0, got {t}")
    half = dim // 2
    if half == 1:
        freqs = np.ones(1)
    else:
        freqs = np.exp(-math.log(max_period) * np.arange(half) / (half - 1))
    ang = float(t) * freqs
    out = np.empty(dim)
    out[0::2] = np.sin(ang)
    out[1::2] = np.cos(ang)
    return out


def time_embed_table(t_max, dim, max_period=10000.0):
    """Rows 0..t_max of time_embed, precomputed for samplers."""
    return np.stack([time_embed(t, dim, max_period) for t in range(t_max + 1)])


# --- checkpoint container -------------------------------------------------
#
# Networks are stored as JSON: layer specs, flat row-major weight arrays in
# layer order, a format version, and optional per-column normalization
# statistics. Python's float repr round-trips IEEE doubles, so a save/load
# cycle is bit-exact.


def encode_network(spec: NetworkSpec, params: ParameterSet):
    params.check_matches(spec)
    return {
        "layers": [
            {
                "in_dim": l.in_dim,
                "out_dim": l.out_dim,
                "activation": l.activation,
                "residual": l.residual,
            }
            for l in spec.layers
        ],
        "weights": [
            [{"w": W.ravel().tolist(), "b": b.tolist()} for W, b in lp]
            for lp in params.layers
        ],
    }


def decode_network(obj):
    spec = NetworkSpec(
        tuple(
            LayerSpec(l["in_dim"], l["out_dim"], l["activation"], l["residual"])
            for l in obj["layers"]
        )
    )
    layers = []
    for layer, lp in zip(spec.layers, obj["weights"]):
        pairs = []
        for (w_shape, b_shape), sub in zip(_sublayer_shapes(layer), lp):
            W = np.asarray(sub["w"], dtype=float).reshape(w_shape)
            b = np.asarray(sub["b"], dtype=float)
            if b.shape != b_shape:
                raise ShapeError("checkpoint bias length does not match spec")
            pairs.append((W, b))
        layers.append(pairs)
    params = ParameterSet(layers)
    params.check_matches(spec)
    return spec, params


def save_network(path, spec, params, normalization=None, extra=None):
    doc = {"format_version": CHECKPOINT_FORMAT_VERSION}
    doc.update(encode_network(spec, params))
    doc["normalization"] = (
        None
        if normalization is None
        else {"mean": np.asarray(normalization[0]).tolist(), "std": np.asarray(normalization[1]).tolist()}
    )
    if extra is not None:
        doc["extra"] = extra
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_network(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ConfigError(f"unsupported checkpoint format: {doc.get('format_version')}")
    spec, params = decode_network(doc)
    norm = doc.get("normalization")
    if norm is not None:
        norm = (np.asarray(norm["mean"], dtype=float), np.asarray(norm["std"], dtype=float))
    return spec, params, norm, doc.get("extra")
