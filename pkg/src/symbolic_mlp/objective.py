"""Loss functions, composite multi-block losses, and the regularized
empirical error minimized during training.

Each output block contributes the loss matching its target type: squared
error for numeric and interval blocks, cross-entropy for a single
category, independent cross-entropy for a category subset, and a
micro-observation-weighted multinomial cross-entropy for modal targets.
The regularizer is a quadratic weight-decay penalty whose coefficient is
divided by the category count of the input group each first-layer weight
feeds from, so wide one-hot blocks are not over-penalized; biases are not
penalized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .mlp import MlpArchitecture, backward, forward
from .recoding import BlockKind, ColumnGroup, OutputBlockSpec
from .symbolic import SchemaError

#: Probabilities are clamped to [PROB_FLOOR, 1] inside logarithms.
PROB_FLOOR = 1e-12


def quadratic_loss(y: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum of squared differences and its gradient ``2 (t - y)`` w.r.t. ``t``."""
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    if y.shape != t.shape:
        raise SchemaError(f"length mismatch: target {y.shape} vs output {t.shape}")
    d = t - y
    return float(np.sum(d * d)), 2.0 * d


def cross_entropy_loss(y: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    """``-sum(y_i ln t_i)`` with ``t`` clamped below at ``PROB_FLOOR``."""
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    if y.shape != t.shape:
        raise SchemaError(f"length mismatch: target {y.shape} vs output {t.shape}")
    tc = np.clip(t, PROB_FLOOR, 1.0)
    return float(-np.sum(y * np.log(tc))), -y / tc


def independent_cross_entropy_loss(y: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    """Cross-entropy under conditionally independent categories.

    Only present categories contribute: the likelihood is the product of
    ``t_i`` over ``y_i = 1``, so absent categories add no term.
    """
    return cross_entropy_loss(y, t)


def weighted_multinomial_loss(
    p: np.ndarray, t: np.ndarray, l: float = 1.0
) -> tuple[float, np.ndarray]:
    """``-l * sum(p_i ln t_i)``; with ``l = 1`` this is plain cross-entropy.

    ``l`` is the number of micro-observations behind the probability
    vector ``p``; keeping it weights rows by how much evidence they carry.
    """
    if l < 1.0:
        raise SchemaError(f"micro-observation weight must be >= 1, got {l}")
    value, grad = cross_entropy_loss(p, t)
    return l * value, l * grad


_QUADRATIC_KINDS = frozenset(
    {
        BlockKind.LINEAR_QUADRATIC,
        BlockKind.INTERVAL_MEAN_LENGTH,
        BlockKind.INTERVAL_MEAN_LOG_LENGTH,
    }
)


def block_loss(
    block: OutputBlockSpec, y: np.ndarray, t: np.ndarray, micro_count: float | None = None
) -> tuple[float, np.ndarray]:
    """Dispatch one block's loss; ``micro_count`` applies to modal blocks only."""
    if block.kind in _QUADRATIC_KINDS:
        return quadratic_loss(y, t)
    if block.kind is BlockKind.SOFTMAX_CROSS_ENTROPY:
        return cross_entropy_loss(y, t)
    if block.kind is BlockKind.LOGISTIC_INDEPENDENT:
        return independent_cross_entropy_loss(y, t)
    if block.kind is BlockKind.MODAL_SOFTMAX:
        return weighted_multinomial_loss(y, t, 1.0 if micro_count is None else micro_count)
    raise SchemaError(f"unknown block kind {block.kind!r}")


@dataclass(frozen=True)
class BlockLossReport:
    """Per-block (weighted) losses and output gradients; ``total`` is their
    sum plus any decay penalty."""

    block_losses: tuple[float, ...]
    block_gradients: tuple[np.ndarray, ...]
    penalty: float
    total: float


def composite_loss(
    items: Sequence[tuple[OutputBlockSpec, np.ndarray, np.ndarray]],
    block_weights: Sequence[float] | None = None,
    micro_counts: Sequence[float | None] | None = None,
) -> BlockLossReport:
    """Weighted sum of per-block losses for one example.

    ``block_weights`` default to 1 and expose the scale/variance correction
    needed when mixing squared-error and cross-entropy blocks.
    """
    if block_weights is None:
        block_weights = [1.0] * len(items)
    if len(block_weights) != len(items):
        raise SchemaError("one block weight per block is required")
    if any(bw < 0 for bw in block_weights):
        raise SchemaError("block weights must be non-negative")
    if micro_counts is None:
        micro_counts = [None] * len(items)
    losses: list[float] = []
    gradients: list[np.ndarray] = []
    for (block, y, t), bw, l in zip(items, block_weights, micro_counts):
        value, grad = block_loss(block, y, t, l)
        losses.append(bw * value)
        gradients.append(bw * grad)
    total = float(np.sum(losses)) if losses else 0.0
    return BlockLossReport(
        block_losses=tuple(losses),
        block_gradients=tuple(gradients),
        penalty=0.0,
        total=total,
    )


# ---------------------------------------------------------------------------
# Weight decay
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayPolicy:
    """Per-layer decay coefficients; a single value applies to every layer.

    First-layer weights are additionally divided by the decay divisor of
    the input column group they read from (the category count for one-hot
    style groups), so recoding a variable into many columns does not make
    it proportionally more penalized.
    """

    lambda_per_layer: tuple[float, ...]

    def __post_init__(self) -> None:
        lams = tuple(float(v) for v in self.lambda_per_layer)
        object.__setattr__(self, "lambda_per_layer", lams)
        if any(v < 0 for v in lams):
            raise SchemaError("decay coefficients must be non-negative")

    @classmethod
    def uniform(cls, lam: float) -> "DecayPolicy":
        return cls(lambda_per_layer=(float(lam),))

    def lambda_for_layer(self, layer: int, n_layers: int) -> float:
        if len(self.lambda_per_layer) == 1:
            return self.lambda_per_layer[0]
        if len(self.lambda_per_layer) != n_layers:
            raise SchemaError(
                f"{len(self.lambda_per_layer)} decay coefficients for {n_layers} layers"
            )
        return self.lambda_per_layer[layer]


def decay_coefficients(
    arch: MlpArchitecture,
    policy: DecayPolicy | None,
    input_groups: Sequence[ColumnGroup] | None = None,
) -> np.ndarray:
    """Effective per-parameter coefficient ``lambda_layer / divisor``.

    Zero at bias positions. ``input_groups`` must tile the input columns;
    omitted groups mean divisor 1 everywhere.
    """
    coeffs = np.zeros(arch.n_weights)
    if policy is None:
        return coeffs
    divisor_by_column = np.ones(arch.input_dim)
    if input_groups is not None:
        for group in input_groups:
            divisor_by_column[group.start : group.stop] = group.decay_divisor
    offsets = arch.layer_offsets()
    for k, (fan_out, fan_in) in enumerate(arch.layer_shapes()):
        lam = policy.lambda_for_layer(k, arch.n_layers)
        base = offsets[k]
        block = np.full((fan_out, fan_in), lam)
        if k == 0:
            block = block / divisor_by_column
        coeffs[base : base + fan_out * fan_in] = block.ravel()
        # biases stay at zero
    return coeffs


def decay_penalty(w: np.ndarray, coefficients: np.ndarray) -> tuple[float, np.ndarray]:
    """``sum_j coeff_j w_j`` squared penalty and its gradient ``2 coeff_j w_j``."""
    w = np.asarray(w, dtype=float)
    return float(np.sum(coefficients * w * w)), 2.0 * coefficients * w


# ---------------------------------------------------------------------------
# Dataset container and the full training objective
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EncodedDataset:
    """Numeric inputs plus per-block target matrices, ready for training."""

    inputs: np.ndarray
    blocks: tuple[OutputBlockSpec, ...]
    targets: tuple[np.ndarray, ...]
    micro_counts: tuple[np.ndarray | None, ...] | None = None

    def __post_init__(self) -> None:
        inputs = np.asarray(self.inputs, dtype=float)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "blocks", tuple(self.blocks))
        targets = tuple(np.asarray(t, dtype=float) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        if inputs.ndim != 2:
            raise SchemaError("inputs must be a 2-D matrix")
        if len(targets) != len(self.blocks):
            raise SchemaError("one target matrix per block is required")
        for block, t in zip(self.blocks, targets):
            if t.shape != (inputs.shape[0], block.width):
                raise SchemaError(
                    f"block {block.source_variable!r}: target shape {t.shape} does not "
                    f"match ({inputs.shape[0]}, {block.width})"
                )
        if self.micro_counts is not None:
            counts = tuple(
                None if c is None else np.asarray(c, dtype=float) for c in self.micro_counts
            )
            object.__setattr__(self, "micro_counts", counts)
            if len(counts) != len(self.blocks):
                raise SchemaError("one micro-count vector (or None) per block is required")
            for c in counts:
                if c is not None and c.shape != (inputs.shape[0],):
                    raise SchemaError("micro-count vectors must have one entry per row")

    @property
    def n_rows(self) -> int:
        return int(self.inputs.shape[0])

    def subset(self, indices: np.ndarray) -> "EncodedDataset":
        indices = np.asarray(indices)
        return EncodedDataset(
            inputs=self.inputs[indices],
            blocks=self.blocks,
            targets=tuple(t[indices] for t in self.targets),
            micro_counts=None
            if self.micro_counts is None
            else tuple(None if c is None else c[indices] for c in self.micro_counts),
        )


def _batch_block_loss(
    block: OutputBlockSpec,
    Y: np.ndarray,
    T: np.ndarray,
    counts: np.ndarray | None,
) -> tuple[float, np.ndarray]:
    """Summed loss over a batch and the gradient matrix w.r.t. ``T``."""
    if block.kind in _QUADRATIC_KINDS:
        d = T - Y
        return float(np.sum(d * d)), 2.0 * d
    tc = np.clip(T, PROB_FLOOR, 1.0)
    per_entry = -Y * np.log(tc)
    grad = -Y / tc
    if block.kind is BlockKind.MODAL_SOFTMAX and counts is not None:
        per_entry = per_entry * counts[:, None]
        grad = grad * counts[:, None]
    return float(np.sum(per_entry)), grad


def regularized_empirical_error(
    arch: MlpArchitecture,
    w: np.ndarray,
    dataset: EncodedDataset,
    decay: DecayPolicy | None = None,
    input_groups: Sequence[ColumnGroup] | None = None,
    block_weights: Sequence[float] | None = None,
) -> tuple[float, np.ndarray]:
    """Mean composite loss over the dataset plus the weight-decay penalty,
    with the exact gradient w.r.t. the flat weight vector."""
    if dataset.n_rows == 0:
        raise SchemaError("dataset is empty")
    if block_weights is None:
        block_weights = [1.0] * len(dataset.blocks)
    if len(block_weights) != len(dataset.blocks):
        raise SchemaError("one block weight per block is required")

    n = dataset.n_rows
    trace = forward(arch, w, dataset.inputs)
    T = trace.outputs
    output_grad = np.zeros_like(T)
    total = 0.0
    for i, block in enumerate(dataset.blocks):
        counts = None if dataset.micro_counts is None else dataset.micro_counts[i]
        value, grad = _batch_block_loss(
            block, dataset.targets[i], T[:, block.start : block.stop], counts
        )
        total += block_weights[i] * value
        output_grad[:, block.start : block.stop] = block_weights[i] * grad
    value = total / n
    grad_w = backward(arch, w, trace, output_grad / n)

    coeffs = decay_coefficients(arch, decay, input_groups)
    penalty, penalty_grad = decay_penalty(w, coeffs)
    return value + penalty, grad_w + penalty_grad


def mean_composite_loss(
    arch: MlpArchitecture,
    w: np.ndarray,
    dataset: EncodedDataset,
    block_weights: Sequence[float] | None = None,
) -> float:
    """Decay-free mean composite loss, used as the validation criterion."""
    if dataset.n_rows == 0:
        raise SchemaError("dataset is empty")
    if block_weights is None:
        block_weights = [1.0] * len(dataset.blocks)
    T = forward(arch, w, dataset.inputs).outputs
    total = 0.0
    for i, block in enumerate(dataset.blocks):
        counts = None if dataset.micro_counts is None else dataset.micro_counts[i]
        value, _ = _batch_block_loss(
            block, dataset.targets[i], T[:, block.start : block.stop], counts
        )
        total += block_weights[i] * value
    return total / dataset.n_rows


Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


def make_objective(
    arch: MlpArchitecture,
    dataset: EncodedDataset,
    decay: DecayPolicy | None = None,
    input_groups: Sequence[ColumnGroup] | None = None,
    block_weights: Sequence[float] | None = None,
) -> Objective:
    """Bind the regularized empirical error to one dataset as ``w -> (value, grad)``."""

    def objective(w: np.ndarray) -> tuple[float, np.ndarray]:
        return regularized_empirical_error(
            arch, w, dataset, decay=decay, input_groups=input_groups, block_weights=block_weights
        )

    return objective
