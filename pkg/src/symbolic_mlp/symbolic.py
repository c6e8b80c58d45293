"""Symbolic variables, values, and tables.

A symbolic table is a rectangular dataset whose cells may hold richer
descriptions than single numbers: real intervals, single categories,
category subsets, or probability distributions over a fixed support.
This module defines the schema (:class:`VariableSpec`), the tagged value
types, and the validated container (:class:`SymbolicTable`) that the rest
of the package consumes.

Values and tables are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence, Union

#: Tolerance on |sum(p) - 1| for a probability vector to be accepted.
DISTRIBUTION_SUM_TOL = 1e-9

#: Tolerance on |l * p_i - round(l * p_i)| when a micro-observation count is given.
MICRO_COUNT_INTEGRALITY_TOL = 1e-6


class SchemaError(ValueError):
    """A variable specification or document structure is malformed."""


class ValidationError(ValueError):
    """A value violates the invariants of its variable."""


class VariableKind(str, Enum):
    QUANTITATIVE = "quantitative"
    CATEGORICAL_SINGLE = "categorical_single"
    INTERVAL = "interval"
    CATEGORICAL_MULTI = "categorical_multi"
    MODAL = "modal"


#: Kinds whose values are defined over a finite list of category labels.
CATEGORY_KINDS = frozenset(
    {
        VariableKind.CATEGORICAL_SINGLE,
        VariableKind.CATEGORICAL_MULTI,
        VariableKind.MODAL,
    }
)


class Role(str, Enum):
    INPUT = "input"
    TARGET = "target"


@dataclass(frozen=True)
class Taxonomy:
    """Tree over category labels; every category is exactly one leaf.

    ``children`` maps an internal node name to its ordered children.
    Leaves are names that never appear as keys (or map to an empty tuple).
    """

    root: str
    children: Mapping[str, tuple[str, ...]]

    def node_names(self) -> tuple[str, ...]:
        names = [self.root]
        seen = {self.root}
        stack = [self.root]
        while stack:
            node = stack.pop()
            for child in self.children.get(node, ()):
                if child not in seen:
                    names.append(child)
                    seen.add(child)
                    stack.append(child)
        return tuple(names)

    def is_leaf(self, node: str) -> bool:
        return not self.children.get(node)

    def descendant_leaves(self, node: str) -> tuple[str, ...]:
        """Leaf labels under ``node`` (the node itself if it is a leaf)."""
        if node not in self.node_names():
            raise SchemaError(f"unknown taxonomy node {node!r}")
        leaves: list[str] = []
        stack = [node]
        while stack:
            current = stack.pop(0)
            kids = self.children.get(current, ())
            if kids:
                stack = list(kids) + stack
            else:
                leaves.append(current)
        return tuple(leaves)

    def validate(self, categories: Sequence[str]) -> None:
        parent_count: dict[str, int] = {}
        for node, kids in self.children.items():
            for child in kids:
                parent_count[child] = parent_count.get(child, 0) + 1
        multi = sorted(name for name, count in parent_count.items() if count > 1)
        if multi:
            raise SchemaError(f"taxonomy nodes with several parents: {multi}")
        if self.root in parent_count:
            raise SchemaError(f"taxonomy root {self.root!r} has a parent")
        reachable = set(self.node_names())
        dangling = sorted(set(self.children) - reachable)
        if dangling:
            raise SchemaError(f"taxonomy nodes unreachable from root: {dangling}")
        leaves = self.descendant_leaves(self.root)
        if len(set(leaves)) != len(leaves):
            raise SchemaError("taxonomy has duplicated leaves")
        if set(leaves) != set(categories):
            raise SchemaError(
                "taxonomy leaves must be exactly the categories; "
                f"got leaves {sorted(leaves)} for categories {sorted(categories)}"
            )


@dataclass(frozen=True)
class VariableSpec:
    """Schema for one column of a symbolic table."""

    name: str
    kind: VariableKind
    categories: tuple[str, ...] = ()
    ordered: bool = False
    taxonomy: Taxonomy | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise SchemaError("variable name must be non-empty")
        object.__setattr__(self, "kind", VariableKind(self.kind))
        object.__setattr__(self, "categories", tuple(self.categories))
        if self.kind in CATEGORY_KINDS:
            if not self.categories:
                raise SchemaError(f"variable {self.name!r}: {self.kind.value} needs categories")
            if any(not c for c in self.categories):
                raise SchemaError(f"variable {self.name!r}: empty category label")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"variable {self.name!r}: duplicate category labels")
        elif self.categories:
            raise SchemaError(f"variable {self.name!r}: {self.kind.value} takes no categories")
        if self.ordered and self.kind is not VariableKind.CATEGORICAL_SINGLE:
            raise SchemaError(f"variable {self.name!r}: only single-valued categorical variables can be ordered")
        if self.taxonomy is not None:
            if self.kind not in CATEGORY_KINDS:
                raise SchemaError(f"variable {self.name!r}: taxonomy requires a categorical kind")
            self.taxonomy.validate(self.categories)

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def category_index(self, label: str) -> int:
        try:
            return self.categories.index(label)
        except ValueError:
            raise SchemaError(f"variable {self.name!r}: unknown category {label!r}") from None


# ---------------------------------------------------------------------------
# Tagged values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Number:
    value: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class Category:
    """Single category, referenced by 0-based index into the spec's labels."""

    index: int


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))

    @property
    def mean(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def length(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class CategorySet:
    """Subset of categories, as a frozenset of 0-based indices."""

    indices: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "indices", frozenset(int(i) for i in self.indices))


@dataclass(frozen=True)
class Distribution:
    """Probability weights over the variable's categories.

    ``micro_count`` optionally records how many underlying observations the
    weights summarize; when present, every ``micro_count * p_i`` must be an
    integer (within :data:`MICRO_COUNT_INTEGRALITY_TOL`).
    """

    probabilities: tuple[float, ...]
    micro_count: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))
        if self.micro_count is not None:
            object.__setattr__(self, "micro_count", int(self.micro_count))


class Missing:
    """Explicit missing-cell marker; a first-class value, not a sentinel number."""

    _instance: "Missing | None" = None

    def __new__(cls) -> "Missing":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Missing()"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Missing)

    def __hash__(self) -> int:
        return hash(Missing)


MISSING = Missing()

SymbolicValue = Union[Number, Category, Interval, CategorySet, Distribution, Missing]

_KIND_VALUE_TYPES: dict[VariableKind, type] = {
    VariableKind.QUANTITATIVE: Number,
    VariableKind.CATEGORICAL_SINGLE: Category,
    VariableKind.INTERVAL: Interval,
    VariableKind.CATEGORICAL_MULTI: CategorySet,
    VariableKind.MODAL: Distribution,
}


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    reasons: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def _invalid(*reasons: str) -> ValidationResult:
    return ValidationResult(False, tuple(reasons))


def validate_value(spec: VariableSpec, value: SymbolicValue) -> ValidationResult:
    """Check ``value`` against ``spec``; returns structured reasons, never raises.

    Missing is accepted for every kind. A category subset is additionally
    accepted for a single-valued categorical variable that carries a
    taxonomy, so that internal taxonomy nodes (sets of descendant leaves)
    can appear as cell values.
    """
    if isinstance(value, Missing):
        return ValidationResult(True)

    expected = _KIND_VALUE_TYPES[spec.kind]
    if not isinstance(value, expected):
        if (
            isinstance(value, CategorySet)
            and spec.kind is VariableKind.CATEGORICAL_SINGLE
            and spec.taxonomy is not None
        ):
            pass  # hierarchical value: validated below like a plain subset
        else:
            return _invalid(
                f"kind mismatch: {type(value).__name__} value for {spec.kind.value} variable"
            )

    if isinstance(value, Number):
        if not math.isfinite(value.value):
            return _invalid(f"non-finite numeric value {value.value!r}")
    elif isinstance(value, Category):
        if not 0 <= value.index < spec.n_categories:
            return _invalid(
                f"category index {value.index} out of range for {spec.n_categories} categories"
            )
    elif isinstance(value, Interval):
        if not (math.isfinite(value.lower) and math.isfinite(value.upper)):
            return _invalid("non-finite interval bound")
        if value.lower > value.upper:
            return _invalid(f"interval bounds out of order: {value.lower} > {value.upper}")
    elif isinstance(value, CategorySet):
        reasons = []
        if not value.indices:
            reasons.append("empty category set")
        out = sorted(i for i in value.indices if not 0 <= i < spec.n_categories)
        if out:
            reasons.append(f"category indices {out} out of range for {spec.n_categories} categories")
        if reasons:
            return _invalid(*reasons)
    elif isinstance(value, Distribution):
        reasons = []
        p = value.probabilities
        if len(p) != spec.n_categories:
            reasons.append(f"distribution has {len(p)} weights for {spec.n_categories} categories")
        if any(not math.isfinite(v) for v in p):
            reasons.append("non-finite probability")
        elif any(v < 0.0 or v > 1.0 for v in p):
            reasons.append("probability outside [0, 1]")
        else:
            total = math.fsum(p)
            if abs(total - 1.0) > DISTRIBUTION_SUM_TOL:
                reasons.append(f"sum != 1 (got {total!r})")
        l = value.micro_count
        if l is not None:
            if l < 1:
                reasons.append(f"micro-observation count must be positive, got {l}")
            else:
                bad = [
                    i
                    for i, v in enumerate(p)
                    if abs(l * v - round(l * v)) > MICRO_COUNT_INTEGRALITY_TOL
                ]
                if bad:
                    reasons.append(f"micro counts l*p_i not integral at positions {bad}")
        if reasons:
            return _invalid(*reasons)
    return ValidationResult(True)


def require_valid(spec: VariableSpec, value: SymbolicValue) -> None:
    result = validate_value(spec, value)
    if not result.ok:
        raise ValidationError(f"variable {spec.name!r}: " + "; ".join(result.reasons))


@dataclass(frozen=True)
class SymbolicTable:
    """Validated collection of rows over a fixed sequence of variables."""

    variables: tuple[VariableSpec, ...]
    roles: tuple[Role, ...]
    rows: tuple[tuple[SymbolicValue, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "roles", tuple(Role(r) for r in self.roles))
        object.__setattr__(self, "rows", tuple(tuple(row) for row in self.rows))
        if len(self.roles) != len(self.variables):
            raise SchemaError(
                f"{len(self.roles)} roles for {len(self.variables)} variables"
            )
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate variable names")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.variables):
                raise ValidationError(
                    f"row {i}: expected {len(self.variables)} cells, got {len(row)}"
                )
            for spec, cell in zip(self.variables, row):
                result = validate_value(spec, cell)
                if not result.ok:
                    raise ValidationError(
                        f"row {i}, column {spec.name!r}: " + "; ".join(result.reasons)
                    )

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def variable_index(self, name: str) -> int:
        for i, spec in enumerate(self.variables):
            if spec.name == name:
                return i
        raise SchemaError(f"unknown variable {name!r}")

    def variables_with_role(self, role: Role) -> tuple[tuple[int, VariableSpec], ...]:
        return tuple(
            (i, spec)
            for i, (spec, r) in enumerate(zip(self.variables, self.roles))
            if r is role
        )

    def column(self, name: str) -> tuple[SymbolicValue, ...]:
        i = self.variable_index(name)
        return tuple(row[i] for row in self.rows)

    def subset(self, row_indices: Iterable[int]) -> "SymbolicTable":
        return SymbolicTable(
            variables=self.variables,
            roles=self.roles,
            rows=tuple(self.rows[i] for i in row_indices),
        )

    def has_missing(self) -> bool:
        return any(isinstance(cell, Missing) for row in self.rows for cell in row)
