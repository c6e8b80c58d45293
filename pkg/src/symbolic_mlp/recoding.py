"""Numeric recoding of symbolic variables.

Every symbolic variable maps to a short block of real columns:

* quantitative values pass through unchanged;
* a single category becomes a one-hot (disjunctive) vector, or its rank
  when the categories are ordered;
* an interval ``[a, b]`` becomes ``(mean, length)``, ``(mean, log length)``
  or ``(a, b)``;
* a category subset becomes a 0/1 membership vector;
* a modal value contributes its probability weights directly;
* with a taxonomy, an internal node becomes the 0/1 vector of its
  descendant leaves.

Each produced column block carries a ``decay_divisor`` so that weight
decay can be normalized by the category count of the source variable,
and per-column centering/scaling statistics fitted on training data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .symbolic import (
    Category,
    CategorySet,
    Distribution,
    Interval,
    Missing,
    Number,
    Role,
    SchemaError,
    SymbolicTable,
    SymbolicValue,
    VariableKind,
    VariableSpec,
    require_valid,
)


class EncodingError(ValueError):
    """A value cannot be recoded with the requested coding."""


class MissingValueError(EncodingError):
    """A missing cell reached the encoder; impute first (see ``imputation``)."""


class CodingTag(str, Enum):
    IDENTITY = "identity"
    DISJUNCTIVE = "disjunctive"
    RANK = "rank"
    MEAN_LENGTH = "mean_length"
    MEAN_LOG_LENGTH = "mean_log_length"
    BOUNDS = "bounds"
    MULTI01 = "multi01"
    MODAL_PROBS = "modal_probs"
    TAXONOMY = "taxonomy"


#: Codings whose weight-decay divisor is the category count.
_CATEGORY_LIKE_TAGS = frozenset(
    {CodingTag.DISJUNCTIVE, CodingTag.MULTI01, CodingTag.MODAL_PROBS, CodingTag.TAXONOMY}
)

_ALLOWED_TAGS: dict[VariableKind, frozenset[CodingTag]] = {
    VariableKind.QUANTITATIVE: frozenset({CodingTag.IDENTITY}),
    VariableKind.CATEGORICAL_SINGLE: frozenset(
        {CodingTag.DISJUNCTIVE, CodingTag.RANK, CodingTag.TAXONOMY}
    ),
    VariableKind.INTERVAL: frozenset(
        {CodingTag.MEAN_LENGTH, CodingTag.MEAN_LOG_LENGTH, CodingTag.BOUNDS}
    ),
    VariableKind.CATEGORICAL_MULTI: frozenset({CodingTag.MULTI01}),
    VariableKind.MODAL: frozenset({CodingTag.MODAL_PROBS}),
}


def default_coding(spec: VariableSpec) -> CodingTag:
    if spec.kind is VariableKind.QUANTITATIVE:
        return CodingTag.IDENTITY
    if spec.kind is VariableKind.CATEGORICAL_SINGLE:
        return CodingTag.RANK if spec.ordered else CodingTag.DISJUNCTIVE
    if spec.kind is VariableKind.INTERVAL:
        return CodingTag.MEAN_LENGTH
    if spec.kind is VariableKind.CATEGORICAL_MULTI:
        return CodingTag.MULTI01
    return CodingTag.MODAL_PROBS


def coding_width(spec: VariableSpec, tag: CodingTag) -> int:
    if tag in (CodingTag.IDENTITY, CodingTag.RANK):
        return 1
    if tag in (CodingTag.MEAN_LENGTH, CodingTag.MEAN_LOG_LENGTH, CodingTag.BOUNDS):
        return 2
    return spec.n_categories


def _check_tag(spec: VariableSpec, tag: CodingTag) -> None:
    if tag not in _ALLOWED_TAGS[spec.kind]:
        raise EncodingError(
            f"coding {tag.value!r} does not apply to {spec.kind.value} variable {spec.name!r}"
        )
    if tag is CodingTag.RANK and not spec.ordered:
        raise EncodingError(f"rank coding requires an ordered variable, {spec.name!r} is not")
    if tag is CodingTag.TAXONOMY and spec.taxonomy is None:
        raise EncodingError(f"variable {spec.name!r} has no taxonomy")


# ---------------------------------------------------------------------------
# Per-value encoders
# ---------------------------------------------------------------------------


def encode_quantitative(x: float) -> np.ndarray:
    x = float(x)
    if not np.isfinite(x):
        raise EncodingError(f"non-finite quantitative value {x!r}")
    return np.array([x])


def encode_categorical_single(spec: VariableSpec, value: Category) -> np.ndarray:
    """One-hot vector, or the 1-based rank when the categories are ordered."""
    if not 0 <= value.index < spec.n_categories:
        raise EncodingError(
            f"category index {value.index} out of range for {spec.name!r}"
        )
    if spec.ordered:
        return np.array([float(value.index + 1)])
    out = np.zeros(spec.n_categories)
    out[value.index] = 1.0
    return out


def encode_interval(value: Interval, mode: CodingTag | str = CodingTag.MEAN_LENGTH) -> np.ndarray:
    mode = CodingTag(mode)
    a, b = value.lower, value.upper
    if a > b:
        raise EncodingError(f"interval bounds out of order: {a} > {b}")
    if mode is CodingTag.MEAN_LENGTH:
        return np.array([0.5 * (a + b), b - a])
    if mode is CodingTag.BOUNDS:
        return np.array([a, b])
    if mode is CodingTag.MEAN_LOG_LENGTH:
        if b <= a:
            raise EncodingError("degenerate interval; use mean_length")
        return np.array([0.5 * (a + b), np.log(b - a)])
    raise EncodingError(f"{mode.value!r} is not an interval coding")


def encode_categorical_multi(spec: VariableSpec, value: CategorySet) -> np.ndarray:
    if not value.indices:
        raise EncodingError("empty category set")
    out = np.zeros(spec.n_categories)
    for i in value.indices:
        if not 0 <= i < spec.n_categories:
            raise EncodingError(f"category index {i} out of range for {spec.name!r}")
        out[i] = 1.0
    return out


def encode_modal(spec: VariableSpec, value: Distribution) -> np.ndarray:
    require_valid(spec, value)
    return np.array(value.probabilities)


def encode_taxonomy(
    spec: VariableSpec, value: Category | CategorySet | str
) -> np.ndarray:
    """0/1 vector over descendant leaves; a leaf gives its one-hot vector."""
    if spec.taxonomy is None:
        raise EncodingError(f"variable {spec.name!r} has no taxonomy")
    if isinstance(value, Category):
        if not 0 <= value.index < spec.n_categories:
            raise EncodingError(f"category index {value.index} out of range")
        members = {value.index}
    elif isinstance(value, CategorySet):
        members = set(value.indices)
    elif isinstance(value, str):
        if value not in spec.taxonomy.node_names():
            raise EncodingError(f"unknown taxonomy node {value!r}")
        leaves = spec.taxonomy.descendant_leaves(value)
        members = {spec.category_index(l) for l in leaves}
    else:
        raise EncodingError(f"cannot taxonomy-encode {type(value).__name__}")
    out = np.zeros(spec.n_categories)
    for i in members:
        out[i] = 1.0
    return out


def encode_value(spec: VariableSpec, value: SymbolicValue, tag: CodingTag) -> np.ndarray:
    if isinstance(value, Missing):
        raise MissingValueError(
            f"variable {spec.name!r}: missing cell; impute before encoding"
        )
    if tag is CodingTag.IDENTITY:
        if not isinstance(value, Number):
            raise EncodingError(f"identity coding expects a number, got {type(value).__name__}")
        return encode_quantitative(value.value)
    if tag in (CodingTag.DISJUNCTIVE, CodingTag.RANK):
        if not isinstance(value, Category):
            raise EncodingError(f"category coding expects a category, got {type(value).__name__}")
        return encode_categorical_single(spec, value)
    if tag in (CodingTag.MEAN_LENGTH, CodingTag.MEAN_LOG_LENGTH, CodingTag.BOUNDS):
        if not isinstance(value, Interval):
            raise EncodingError(f"interval coding expects an interval, got {type(value).__name__}")
        return encode_interval(value, tag)
    if tag is CodingTag.MULTI01:
        if not isinstance(value, CategorySet):
            raise EncodingError(f"0/1 coding expects a category set, got {type(value).__name__}")
        return encode_categorical_multi(spec, value)
    if tag is CodingTag.MODAL_PROBS:
        if not isinstance(value, Distribution):
            raise EncodingError(f"modal coding expects a distribution, got {type(value).__name__}")
        return encode_modal(spec, value)
    if tag is CodingTag.TAXONOMY:
        if not isinstance(value, (Category, CategorySet)):
            raise EncodingError(
                f"taxonomy coding expects a category or category set, got {type(value).__name__}"
            )
        return encode_taxonomy(spec, value)
    raise EncodingError(f"unknown coding {tag!r}")


# ---------------------------------------------------------------------------
# Table encoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColumnGroup:
    """Contiguous column block produced by recoding one variable."""

    source_variable: str
    start: int
    stop: int
    decay_divisor: float
    coding_tag: CodingTag
    mean: tuple[float, ...]
    scale: tuple[float, ...]

    def __post_init__(self) -> None:
        width = self.stop - self.start
        if width <= 0:
            raise SchemaError(f"group {self.source_variable!r}: empty column range")
        if len(self.mean) != width or len(self.scale) != width:
            raise SchemaError(f"group {self.source_variable!r}: stats do not match width")
        if self.decay_divisor <= 0:
            raise SchemaError(f"group {self.source_variable!r}: divisor must be positive")

    @property
    def width(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class EncodedMatrix:
    """Numeric design matrix plus per-column-group metadata."""

    values: np.ndarray
    groups: tuple[ColumnGroup, ...]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "groups", tuple(self.groups))
        if values.ndim != 2:
            raise SchemaError("encoded matrix must be 2-D")
        covered = 0
        for group in self.groups:
            if group.start != covered:
                raise SchemaError("column groups must tile the matrix in order")
            covered = group.stop
        if covered != values.shape[1]:
            raise SchemaError(
                f"groups cover {covered} columns, matrix has {values.shape[1]}"
            )

    @property
    def n_rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_columns(self) -> int:
        return int(self.values.shape[1])

    def group_for(self, name: str) -> ColumnGroup:
        for group in self.groups:
            if group.source_variable == name:
                return group
        raise SchemaError(f"no column group for variable {name!r}")


def resolve_codings(
    table: SymbolicTable,
    modes: Mapping[str, CodingTag | str] | None = None,
    role: Role = Role.INPUT,
) -> tuple[tuple[VariableSpec, CodingTag], ...]:
    modes = dict(modes or {})
    chosen = []
    for _, spec in table.variables_with_role(role):
        tag = CodingTag(modes.pop(spec.name)) if spec.name in modes else default_coding(spec)
        _check_tag(spec, tag)
        chosen.append((spec, tag))
    role_names = {spec.name for spec, _ in chosen}
    leftovers = [n for n in modes if n not in role_names]
    if leftovers:
        all_names = {v.name for v in table.variables}
        unknown = sorted(set(leftovers) - all_names)
        if unknown:
            raise SchemaError(f"coding modes for unknown variables: {unknown}")
    return tuple(chosen)


def encode_table(
    table: SymbolicTable,
    modes: Mapping[str, CodingTag | str] | None = None,
    role: Role = Role.INPUT,
) -> EncodedMatrix:
    """Recode every ``role`` variable of ``table`` into one numeric matrix.

    Column blocks appear in variable order. Groups carry the decay divisor
    (category count for category-like codings, 1 otherwise) and identity
    centering statistics; fit a standardizer afterwards for real ones.
    Missing cells raise :class:`MissingValueError`.
    """
    chosen = resolve_codings(table, modes, role)
    if not chosen:
        raise SchemaError(f"table has no {role.value} variables")
    groups: list[ColumnGroup] = []
    start = 0
    for spec, tag in chosen:
        width = coding_width(spec, tag)
        divisor = float(spec.n_categories) if tag in _CATEGORY_LIKE_TAGS else 1.0
        groups.append(
            ColumnGroup(
                source_variable=spec.name,
                start=start,
                stop=start + width,
                decay_divisor=divisor,
                coding_tag=tag,
                mean=(0.0,) * width,
                scale=(1.0,) * width,
            )
        )
        start += width

    values = np.empty((table.n_rows, start))
    for r, row in enumerate(table.rows):
        for (spec, tag), group in zip(chosen, groups):
            cell = row[table.variable_index(spec.name)]
            try:
                values[r, group.start : group.stop] = encode_value(spec, cell, tag)
            except MissingValueError:
                raise MissingValueError(
                    f"row {r}, variable {spec.name!r}: missing cell; "
                    "impute before encoding (see the imputation module)"
                ) from None
    return EncodedMatrix(values=values, groups=tuple(groups))


# ---------------------------------------------------------------------------
# Centering and scaling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Standardizer:
    """Per-column centering/scaling fitted on a training matrix."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=float))
        if np.any(self.scale <= 0):
            raise SchemaError("standardizer scales must be positive")

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.mean) / self.scale

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.scale + self.mean

    def apply(self, matrix: EncodedMatrix) -> EncodedMatrix:
        """Transformed copy of ``matrix`` with the fitted stats recorded per group."""
        groups = tuple(
            replace(
                g,
                mean=tuple(self.mean[g.start : g.stop]),
                scale=tuple(self.scale[g.start : g.stop]),
            )
            for g in matrix.groups
        )
        return EncodedMatrix(values=self.transform(matrix.values), groups=groups)


def fit_standardizer(matrix: EncodedMatrix | np.ndarray) -> Standardizer:
    """Column means and sample standard deviations (ddof=1).

    Constant columns get scale 1 so that transforming them yields zeros
    instead of dividing by zero. Requires at least two rows.
    """
    values = matrix.values if isinstance(matrix, EncodedMatrix) else np.asarray(matrix, float)
    if values.shape[0] < 2:
        raise EncodingError("standardizer needs at least 2 rows")
    mean = values.mean(axis=0)
    sd = values.std(axis=0, ddof=1)
    scale = np.where(sd > 0.0, sd, 1.0)
    return Standardizer(mean=mean, scale=scale)


# ---------------------------------------------------------------------------
# Output blocks and decoding
# ---------------------------------------------------------------------------


class BlockKind(str, Enum):
    LINEAR_QUADRATIC = "linear_quadratic"
    INTERVAL_MEAN_LENGTH = "interval_mean_length"
    INTERVAL_MEAN_LOG_LENGTH = "interval_mean_log_length"
    SOFTMAX_CROSS_ENTROPY = "softmax_cross_entropy"
    LOGISTIC_INDEPENDENT = "logistic_independent"
    MODAL_SOFTMAX = "modal_softmax"


_BLOCK_KINDS_BY_VARIABLE: dict[VariableKind, frozenset[BlockKind]] = {
    VariableKind.QUANTITATIVE: frozenset({BlockKind.LINEAR_QUADRATIC}),
    VariableKind.CATEGORICAL_SINGLE: frozenset(
        {BlockKind.SOFTMAX_CROSS_ENTROPY, BlockKind.LINEAR_QUADRATIC}
    ),
    VariableKind.INTERVAL: frozenset(
        {BlockKind.INTERVAL_MEAN_LENGTH, BlockKind.INTERVAL_MEAN_LOG_LENGTH}
    ),
    VariableKind.CATEGORICAL_MULTI: frozenset({BlockKind.LOGISTIC_INDEPENDENT}),
    VariableKind.MODAL: frozenset({BlockKind.MODAL_SOFTMAX}),
}


@dataclass(frozen=True)
class OutputBlockSpec:
    """How a slice of output neurons maps to one symbolic target."""

    source_variable: str
    start: int
    stop: int
    kind: BlockKind
    micro_weighted: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", BlockKind(self.kind))
        if self.stop <= self.start:
            raise SchemaError(f"block {self.source_variable!r}: empty range")

    @property
    def width(self) -> int:
        return self.stop - self.start


def choose_interval_block_kind(values: Iterable[Interval]) -> BlockKind:
    """Log-length coding when every training interval has positive length,
    else plain length with a positivity-enforcing output activation."""
    any_seen = False
    for v in values:
        if isinstance(v, Missing):
            continue
        any_seen = True
        if v.length <= 0.0:
            return BlockKind.INTERVAL_MEAN_LENGTH
    if not any_seen:
        return BlockKind.INTERVAL_MEAN_LENGTH
    return BlockKind.INTERVAL_MEAN_LOG_LENGTH


def build_output_blocks(
    table: SymbolicTable,
    kinds: Mapping[str, BlockKind | str] | None = None,
) -> tuple[OutputBlockSpec, ...]:
    """Lay out one output block per target variable, in variable order."""
    kinds = {k: BlockKind(v) for k, v in (kinds or {}).items()}
    blocks: list[OutputBlockSpec] = []
    start = 0
    for idx, spec in table.variables_with_role(Role.TARGET):
        if spec.name in kinds:
            kind = kinds[spec.name]
        elif spec.kind is VariableKind.INTERVAL:
            kind = choose_interval_block_kind(
                v for v in table.column(spec.name) if isinstance(v, Interval)
            )
        elif spec.kind is VariableKind.CATEGORICAL_SINGLE:
            kind = (
                BlockKind.LINEAR_QUADRATIC if spec.ordered else BlockKind.SOFTMAX_CROSS_ENTROPY
            )
        elif spec.kind is VariableKind.CATEGORICAL_MULTI:
            kind = BlockKind.LOGISTIC_INDEPENDENT
        elif spec.kind is VariableKind.MODAL:
            kind = BlockKind.MODAL_SOFTMAX
        else:
            kind = BlockKind.LINEAR_QUADRATIC
        if kind not in _BLOCK_KINDS_BY_VARIABLE[spec.kind]:
            raise SchemaError(
                f"block kind {kind.value!r} incompatible with {spec.kind.value} "
                f"variable {spec.name!r}"
            )
        if spec.kind is VariableKind.QUANTITATIVE or (
            spec.kind is VariableKind.CATEGORICAL_SINGLE and kind is BlockKind.LINEAR_QUADRATIC
        ):
            width = 1
        elif spec.kind is VariableKind.INTERVAL:
            width = 2
        else:
            width = spec.n_categories
        micro = spec.kind is VariableKind.MODAL and any(
            isinstance(v, Distribution) and v.micro_count is not None
            for v in table.column(spec.name)
        )
        blocks.append(
            OutputBlockSpec(
                source_variable=spec.name,
                start=start,
                stop=start + width,
                kind=kind,
                micro_weighted=micro,
            )
        )
        start += width
    if not blocks:
        raise SchemaError("table has no target variables")
    return tuple(blocks)


def encode_target_value(
    spec: VariableSpec, block: OutputBlockSpec, value: SymbolicValue
) -> np.ndarray:
    """Training target vector for one cell under the block's coding."""
    if isinstance(value, Missing):
        raise MissingValueError(
            f"variable {spec.name!r}: missing target cell; impute before encoding"
        )
    kind = block.kind
    if kind is BlockKind.LINEAR_QUADRATIC:
        if isinstance(value, Number):
            return np.array([value.value])
        if isinstance(value, Category) and spec.ordered:
            return np.array([float(value.index + 1)])
        raise EncodingError(f"cannot use {type(value).__name__} as a quadratic target")
    if kind is BlockKind.INTERVAL_MEAN_LENGTH:
        return encode_interval(value, CodingTag.MEAN_LENGTH)
    if kind is BlockKind.INTERVAL_MEAN_LOG_LENGTH:
        return encode_interval(value, CodingTag.MEAN_LOG_LENGTH)
    if kind is BlockKind.SOFTMAX_CROSS_ENTROPY:
        return encode_categorical_single(replace(spec, ordered=False), value)
    if kind is BlockKind.LOGISTIC_INDEPENDENT:
        return encode_categorical_multi(spec, value)
    if kind is BlockKind.MODAL_SOFTMAX:
        return encode_modal(spec, value)
    raise EncodingError(f"unknown block kind {kind!r}")


def encode_targets(
    table: SymbolicTable, blocks: Sequence[OutputBlockSpec]
) -> tuple[tuple[np.ndarray, ...], tuple[np.ndarray | None, ...]]:
    """Per-block target matrices plus per-block micro-observation weights.

    The weight entry is ``None`` for blocks that are not micro-weighted;
    rows without a recorded count fall back to weight 1.
    """
    targets: list[np.ndarray] = []
    weights: list[np.ndarray | None] = []
    for block in blocks:
        spec = table.variables[table.variable_index(block.source_variable)]
        column = table.column(spec.name)
        rows = [encode_target_value(spec, block, v) for v in column]
        targets.append(np.vstack(rows) if rows else np.empty((0, block.width)))
        if block.micro_weighted:
            weights.append(
                np.array(
                    [
                        float(v.micro_count)
                        if isinstance(v, Distribution) and v.micro_count is not None
                        else 1.0
                        for v in column
                    ]
                )
            )
        else:
            weights.append(None)
    return tuple(targets), tuple(weights)


def decode_output_block(block: OutputBlockSpec, t: np.ndarray) -> SymbolicValue:
    """Translate one block of network outputs back into a symbolic value.

    Softmax blocks map to the most likely category (ties to the lowest
    index); logistic blocks keep every category with output above 0.5,
    coercing an empty result to the argmax singleton; interval blocks
    rebuild ``[mean - length/2, mean + length/2]`` with negative predicted
    lengths clamped to zero.
    """
    t = np.asarray(t, dtype=float)
    if t.shape != (block.width,):
        raise EncodingError(
            f"block {block.source_variable!r}: expected {block.width} outputs, got {t.shape}"
        )
    kind = block.kind
    if kind is BlockKind.LINEAR_QUADRATIC:
        return Number(float(t[0]))
    if kind is BlockKind.INTERVAL_MEAN_LENGTH:
        mean, length = float(t[0]), max(float(t[1]), 0.0)
        return Interval(mean - 0.5 * length, mean + 0.5 * length)
    if kind is BlockKind.INTERVAL_MEAN_LOG_LENGTH:
        mean, length = float(t[0]), float(np.exp(t[1]))
        return Interval(mean - 0.5 * length, mean + 0.5 * length)
    if kind in (BlockKind.SOFTMAX_CROSS_ENTROPY, BlockKind.MODAL_SOFTMAX):
        if abs(float(t.sum()) - 1.0) > 1e-6:
            raise EncodingError(
                f"block {block.source_variable!r}: softmax outputs sum to {t.sum()!r}"
            )
        if kind is BlockKind.MODAL_SOFTMAX:
            return Distribution(tuple(float(v) for v in t))
        return Category(int(np.argmax(t)))
    if kind is BlockKind.LOGISTIC_INDEPENDENT:
        chosen = frozenset(int(i) for i in np.flatnonzero(t > 0.5))
        if not chosen:
            warnings.warn(
                f"block {block.source_variable!r}: no output above 0.5; "
                "coercing to the argmax singleton",
                RuntimeWarning,
                stacklevel=2,
            )
            chosen = frozenset({int(np.argmax(t))})
        return CategorySet(chosen)
    raise EncodingError(f"unknown block kind {kind!r}")


def decode_outputs(
    blocks: Sequence[OutputBlockSpec], outputs: np.ndarray
) -> tuple[SymbolicValue, ...]:
    outputs = np.asarray(outputs, dtype=float)
    return tuple(decode_output_block(b, outputs[b.start : b.stop]) for b in blocks)
