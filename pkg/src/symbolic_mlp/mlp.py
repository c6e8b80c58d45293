"""Feed-forward multilayer perceptron with analytic gradients.

The network is a stack of fully connected layers. Hidden layers share one
elementwise activation (tanh by default); the output layer is divided into
blocks, each applying the activation its target type requires (identity,
exponential for positive interval lengths, logistic, or softmax over the
block).

Weights live in one flat ``float64`` vector. For a layer with ``fan_in``
inputs and ``fan_out`` neurons the layout is the ``fan_out x fan_in``
weight matrix in row-major order followed by the ``fan_out`` biases, so a
layer holds ``(fan_in + 1) * fan_out`` parameters.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .recoding import BlockKind, OutputBlockSpec
from .symbolic import SchemaError

#: Pre-activations above this value are clamped before exponentiation.
EXPONENTIAL_CAP = 30.0


class Activation(str, Enum):
    IDENTITY = "identity"
    TANH = "tanh"
    LOGISTIC = "logistic"
    EXPONENTIAL = "exponential"
    SOFTMAX = "softmax"


def activation_apply(kind: Activation | str, u: np.ndarray) -> np.ndarray:
    """Apply an activation; elementwise except softmax, which normalizes
    the whole vector (last axis) after max-subtraction for overflow safety."""
    kind = Activation(kind)
    u = np.asarray(u, dtype=float)
    if kind is Activation.IDENTITY:
        return u.copy()
    if kind is Activation.TANH:
        return np.tanh(u)
    if kind is Activation.LOGISTIC:
        return 1.0 / (1.0 + np.exp(-u))
    if kind is Activation.EXPONENTIAL:
        if np.any(u > EXPONENTIAL_CAP):
            warnings.warn(
                "exponential activation capped at exp(%g)" % EXPONENTIAL_CAP,
                RuntimeWarning,
                stacklevel=2,
            )
        return np.exp(np.minimum(u, EXPONENTIAL_CAP))
    if kind is Activation.SOFTMAX:
        shifted = u - u.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)
    raise ValueError(f"unknown activation {kind!r}")


def _elementwise_derivative(kind: Activation, u: np.ndarray, z: np.ndarray) -> np.ndarray:
    if kind is Activation.IDENTITY:
        return np.ones_like(z)
    if kind is Activation.TANH:
        return 1.0 - z * z
    if kind is Activation.LOGISTIC:
        return z * (1.0 - z)
    if kind is Activation.EXPONENTIAL:
        return np.where(u < EXPONENTIAL_CAP, z, 0.0)
    raise ValueError(f"{kind.value} has no elementwise derivative")


#: Output-block activation; softmax blocks are handled jointly over the slice.
_BLOCK_ACTIVATION: dict[BlockKind, Activation] = {
    BlockKind.LINEAR_QUADRATIC: Activation.IDENTITY,
    BlockKind.INTERVAL_MEAN_LOG_LENGTH: Activation.IDENTITY,
    BlockKind.LOGISTIC_INDEPENDENT: Activation.LOGISTIC,
    BlockKind.SOFTMAX_CROSS_ENTROPY: Activation.SOFTMAX,
    BlockKind.MODAL_SOFTMAX: Activation.SOFTMAX,
}


@dataclass(frozen=True)
class MlpArchitecture:
    """Layer sizes, hidden activation, and the output block layout."""

    input_dim: int
    hidden: tuple[tuple[int, Activation], ...]
    output_blocks: tuple[OutputBlockSpec, ...]

    def __post_init__(self) -> None:
        if self.input_dim < 1:
            raise SchemaError("input dimension must be >= 1")
        hidden = tuple((int(q), Activation(a)) for q, a in self.hidden)
        object.__setattr__(self, "hidden", hidden)
        object.__setattr__(self, "output_blocks", tuple(self.output_blocks))
        for q, a in hidden:
            if q < 1:
                raise SchemaError("hidden layer sizes must be >= 1")
            if a is Activation.SOFTMAX:
                raise SchemaError("softmax is an output-block activation")
        if not self.output_blocks:
            raise SchemaError("at least one output block is required")
        covered = 0
        for block in self.output_blocks:
            if block.start != covered:
                raise SchemaError("output blocks must tile the output layer in order")
            covered = block.stop

    @property
    def output_dim(self) -> int:
        return self.output_blocks[-1].stop

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *(q for q, _ in self.hidden), self.output_dim)

    @property
    def n_layers(self) -> int:
        return len(self.hidden) + 1

    def layer_shapes(self) -> tuple[tuple[int, int], ...]:
        sizes = self.layer_sizes
        return tuple((sizes[k + 1], sizes[k]) for k in range(self.n_layers))

    def layer_offsets(self) -> tuple[int, ...]:
        offsets = [0]
        for fan_out, fan_in in self.layer_shapes():
            offsets.append(offsets[-1] + (fan_in + 1) * fan_out)
        return tuple(offsets)

    @property
    def n_weights(self) -> int:
        return self.layer_offsets()[-1]

    def flat_index(self, layer: int, neuron: int, input_index: int | None = None) -> int:
        """Flat position of one parameter; ``input_index=None`` addresses the bias."""
        fan_out, fan_in = self.layer_shapes()[layer]
        if not 0 <= neuron < fan_out:
            raise IndexError(f"neuron {neuron} out of range for layer {layer}")
        offset = self.layer_offsets()[layer]
        if input_index is None:
            return offset + fan_out * fan_in + neuron
        if not 0 <= input_index < fan_in:
            raise IndexError(f"input {input_index} out of range for layer {layer}")
        return offset + neuron * fan_in + input_index

    def unpack(self, w: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Views of ``w`` as per-layer ``(weights, biases)`` pairs."""
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n_weights,):
            raise SchemaError(f"expected {self.n_weights} weights, got {w.shape}")
        out = []
        offsets = self.layer_offsets()
        for k, (fan_out, fan_in) in enumerate(self.layer_shapes()):
            base = offsets[k]
            matrix = w[base : base + fan_out * fan_in].reshape(fan_out, fan_in)
            bias = w[base + fan_out * fan_in : offsets[k + 1]]
            out.append((matrix, bias))
        return out

    def bias_mask(self) -> np.ndarray:
        """Boolean mask over the flat vector, True at bias positions."""
        mask = np.zeros(self.n_weights, dtype=bool)
        offsets = self.layer_offsets()
        for k, (fan_out, fan_in) in enumerate(self.layer_shapes()):
            mask[offsets[k] + fan_out * fan_in : offsets[k + 1]] = True
        return mask

    def layer_of_weight(self) -> np.ndarray:
        """Layer index of every flat parameter."""
        out = np.empty(self.n_weights, dtype=int)
        offsets = self.layer_offsets()
        for k in range(self.n_layers):
            out[offsets[k] : offsets[k + 1]] = k
        return out

    def init_weights(self, rng: np.random.Generator) -> np.ndarray:
        """Small uniform start in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` per layer."""
        w = np.empty(self.n_weights)
        offsets = self.layer_offsets()
        for k, (fan_out, fan_in) in enumerate(self.layer_shapes()):
            r = 1.0 / np.sqrt(fan_in)
            w[offsets[k] : offsets[k + 1]] = rng.uniform(
                -r, r, size=(fan_in + 1) * fan_out
            )
        return w


def single_hidden(
    input_dim: int,
    hidden_size: int,
    output_blocks: Sequence[OutputBlockSpec],
    hidden_activation: Activation | str = Activation.TANH,
) -> MlpArchitecture:
    return MlpArchitecture(
        input_dim=input_dim,
        hidden=((hidden_size, Activation(hidden_activation)),),
        output_blocks=tuple(output_blocks),
    )


def count_weights(arch: MlpArchitecture) -> int:
    """Exact parameter count: sum of ``(fan_in + 1) * fan_out`` over layers."""
    return arch.n_weights


@dataclass
class ActivationTrace:
    """Pre/post activations recorded by one forward pass.

    Arrays are 1-D for a single input and ``(n, units)`` for a batch;
    ``post[-1]`` is the network output.
    """

    inputs: np.ndarray
    pre: list[np.ndarray]
    post: list[np.ndarray]

    @property
    def outputs(self) -> np.ndarray:
        return self.post[-1]


def _apply_output_blocks(arch: MlpArchitecture, u: np.ndarray) -> np.ndarray:
    z = np.empty_like(u)
    for block in arch.output_blocks:
        slice_u = u[..., block.start : block.stop]
        if block.kind is BlockKind.INTERVAL_MEAN_LENGTH:
            z[..., block.start] = slice_u[..., 0]
            z[..., block.start + 1] = activation_apply(
                Activation.EXPONENTIAL, slice_u[..., 1]
            )
        else:
            z[..., block.start : block.stop] = activation_apply(
                _BLOCK_ACTIVATION[block.kind], slice_u
            )
    return z


def forward(arch: MlpArchitecture, w: np.ndarray, x: np.ndarray) -> ActivationTrace:
    """Evaluate the network, recording every layer's pre/post activations.

    Accepts a single input vector or an ``(n, input_dim)`` batch; the trace
    mirrors the input's dimensionality. Pure and deterministic.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != arch.input_dim:
        raise SchemaError(f"expected {arch.input_dim} inputs, got {X.shape[1]}")
    layers = arch.unpack(w)
    pre: list[np.ndarray] = []
    post: list[np.ndarray] = []
    z = X
    for k, (matrix, bias) in enumerate(layers):
        u = z @ matrix.T + bias
        if k < len(layers) - 1:
            z = activation_apply(arch.hidden[k][1], u)
        else:
            z = _apply_output_blocks(arch, u)
        pre.append(u)
        post.append(z)
    if single:
        pre = [a[0] for a in pre]
        post = [a[0] for a in post]
        return ActivationTrace(inputs=x, pre=pre, post=post)
    return ActivationTrace(inputs=X, pre=pre, post=post)


def outputs(arch: MlpArchitecture, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    return forward(arch, w, x).outputs


def _output_gradient_to_pre(
    arch: MlpArchitecture, u: np.ndarray, z: np.ndarray, g: np.ndarray
) -> np.ndarray:
    """Pull a gradient w.r.t. block outputs back through the block activations."""
    du = np.empty_like(g)
    for block in arch.output_blocks:
        sl = slice(block.start, block.stop)
        kind = block.kind
        if kind is BlockKind.INTERVAL_MEAN_LENGTH:
            du[:, block.start] = g[:, block.start]
            length = z[:, block.start + 1]
            capped = u[:, block.start + 1] >= EXPONENTIAL_CAP
            du[:, block.start + 1] = g[:, block.start + 1] * np.where(capped, 0.0, length)
            continue
        activation = _BLOCK_ACTIVATION[kind]
        if activation is Activation.SOFTMAX:
            # d u_i = t_i * (g_i - sum_j g_j t_j)
            t = z[:, sl]
            inner = (g[:, sl] * t).sum(axis=1, keepdims=True)
            du[:, sl] = t * (g[:, sl] - inner)
        else:
            du[:, sl] = g[:, sl] * _elementwise_derivative(activation, u[:, sl], z[:, sl])
    return du


def backward(
    arch: MlpArchitecture,
    w: np.ndarray,
    trace: ActivationTrace,
    output_gradient: np.ndarray,
) -> np.ndarray:
    """Gradient of a scalar loss w.r.t. the flat weights by reverse accumulation.

    ``output_gradient`` is the loss gradient w.r.t. the network outputs
    (``trace.post[-1]``); batch traces take a matching matrix and the
    returned gradient is summed over the batch in fixed row order.
    """
    g = np.asarray(output_gradient, dtype=float)
    G = np.atleast_2d(g)
    X = np.atleast_2d(trace.inputs)
    pre = [np.atleast_2d(a) for a in trace.pre]
    post = [np.atleast_2d(a) for a in trace.post]
    if G.shape != post[-1].shape:
        raise SchemaError(
            f"output gradient shape {G.shape} does not match outputs {post[-1].shape}"
        )

    layers = arch.unpack(np.asarray(w, dtype=float))
    grad = np.zeros(arch.n_weights)
    offsets = arch.layer_offsets()
    shapes = arch.layer_shapes()

    du = _output_gradient_to_pre(arch, pre[-1], post[-1], G)
    for k in range(arch.n_layers - 1, -1, -1):
        fan_out, fan_in = shapes[k]
        z_prev = X if k == 0 else post[k - 1]
        base = offsets[k]
        grad[base : base + fan_out * fan_in] = (du.T @ z_prev).ravel()
        grad[base + fan_out * fan_in : offsets[k + 1]] = du.sum(axis=0)
        if k > 0:
            dz = du @ layers[k][0]
            du = dz * _elementwise_derivative(arch.hidden[k - 1][1], pre[k - 1], post[k - 1])
    return grad


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def architecture_to_dict(arch: MlpArchitecture) -> dict[str, Any]:
    return {
        "input_dim": arch.input_dim,
        "hidden": [{"size": q, "activation": a.value} for q, a in arch.hidden],
        "output_blocks": [
            {
                "source_variable": b.source_variable,
                "start": b.start,
                "stop": b.stop,
                "kind": b.kind.value,
                "micro_weighted": b.micro_weighted,
            }
            for b in arch.output_blocks
        ],
    }


def architecture_from_dict(data: Mapping[str, Any]) -> MlpArchitecture:
    return MlpArchitecture(
        input_dim=int(data["input_dim"]),
        hidden=tuple(
            (int(h["size"]), Activation(h["activation"])) for h in data["hidden"]
        ),
        output_blocks=tuple(
            OutputBlockSpec(
                source_variable=str(b["source_variable"]),
                start=int(b["start"]),
                stop=int(b["stop"]),
                kind=BlockKind(b["kind"]),
                micro_weighted=bool(b.get("micro_weighted", False)),
            )
            for b in data["output_blocks"]
        ),
    )


def model_to_dict(arch: MlpArchitecture, w: np.ndarray) -> dict[str, Any]:
    """JSON-safe model snapshot; float weights survive bit-exactly because
    ``json`` emits shortest round-trip decimal representations."""
    w = np.asarray(w, dtype=float)
    if w.shape != (arch.n_weights,):
        raise SchemaError(f"expected {arch.n_weights} weights, got {w.shape}")
    return {"architecture": architecture_to_dict(arch), "weights": [float(v) for v in w]}


def model_from_dict(data: Mapping[str, Any]) -> tuple[MlpArchitecture, np.ndarray]:
    arch = architecture_from_dict(data["architecture"])
    w = np.array([float(v) for v in data["weights"]], dtype=float)
    if w.shape != (arch.n_weights,):
        raise SchemaError("weight count does not match the architecture")
    return arch, w


def save_model(path: str | Path, arch: MlpArchitecture, w: np.ndarray) -> None:
    Path(path).write_text(json.dumps(model_to_dict(arch, w), indent=2, sort_keys=True))


def load_model(path: str | Path) -> tuple[MlpArchitecture, np.ndarray]:
    return model_from_dict(json.loads(Path(path).read_text()))
