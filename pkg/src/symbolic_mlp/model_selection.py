"""Dataset splitting, hidden-size sweeps, and k-fold cross-validation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .mlp import MlpArchitecture
from .objective import EncodedDataset, mean_composite_loss
from .recoding import ColumnGroup
from .symbolic import SchemaError, SymbolicTable
from .training import FitReport, TrainConfig, train

#: Hidden-layer sizes tried by default during model selection.
DEFAULT_HIDDEN_SIZES = (3, 5, 7, 10, 15, 20, 30, 40)


class SelectionError(RuntimeError):
    """Every candidate in a sweep failed to train."""


@dataclass(frozen=True)
class SelectionPlan:
    """Candidate hidden sizes plus the train/validation/test split.

    ``split`` holds either integer counts summing to the dataset size or
    ratios summing to 1 (resolved by floor-then-distribute rounding).
    """

    hidden_sizes: tuple[int, ...] = DEFAULT_HIDDEN_SIZES
    split: tuple[float, float, float] = (140, 60, 60)
    cv_folds: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        object.__setattr__(self, "split", tuple(self.split))
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise SchemaError("hidden sizes must be positive")
        if len(self.split) != 3:
            raise SchemaError("split must have train/validation/test parts")
        if self.cv_folds is not None and self.cv_folds < 2:
            raise SchemaError("cross-validation needs k >= 2")


def split_counts(n: int, split: Sequence[float]) -> tuple[int, int, int]:
    """Resolve counts or ratios into exact part sizes.

    Ratios are floored to integers and the remainder is handed out in
    order of largest fractional part (ties to the earlier part).
    """
    parts = list(split)
    if all(float(p).is_integer() for p in parts) and sum(parts) == n:
        return tuple(int(p) for p in parts)  # type: ignore[return-value]
    if any(p < 0 for p in parts) or abs(sum(parts) - 1.0) > 1e-9:
        raise SchemaError(
            f"split {tuple(parts)} is neither counts summing to {n} nor ratios summing to 1"
        )
    raw = [p * n for p in parts]
    counts = [int(np.floor(r)) for r in raw]
    remainder = n - sum(counts)
    order = sorted(range(3), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in range(remainder):
        counts[order[i % 3]] += 1
    return tuple(counts)  # type: ignore[return-value]


def split_indices(
    n: int, split: Sequence[float], seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Disjoint, exhaustive row indices from one seeded uniform shuffle."""
    a, b, c = split_counts(n, split)
    order = np.random.default_rng(seed).permutation(n)
    return order[:a], order[a : a + b], order[a + b :]


def split_dataset(
    table: SymbolicTable, plan: SelectionPlan, seed: int
) -> tuple[SymbolicTable, SymbolicTable, SymbolicTable]:
    """Split a symbolic table into train/validation/test sub-tables."""
    idx_train, idx_val, idx_test = split_indices(table.n_rows, plan.split, seed)
    return table.subset(idx_train), table.subset(idx_val), table.subset(idx_test)


@dataclass(frozen=True)
class SweepEntry:
    hidden_size: int
    validation_error: float
    failure: str | None = None


@dataclass
class SelectionReport:
    """Per-size validation errors with the winning architecture's fit."""

    entries: tuple[SweepEntry, ...]
    winner_size: int
    winner_fit: FitReport
    test_metric: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "entries": [
                {
                    "hidden_size": e.hidden_size,
                    "validation_error": None
                    if e.failure is not None
                    else float(e.validation_error),
                    "failure": e.failure,
                    "winner": e.hidden_size == self.winner_size and e.failure is None,
                }
                for e in self.entries
            ],
            "winner_size": self.winner_size,
            "winner_validation_error": float(self.winner_fit.best_validation_error),
            "test_metric": None if self.test_metric is None else float(self.test_metric),
        }


ArchBuilder = Callable[[int], MlpArchitecture]
TestMetric = Callable[[MlpArchitecture, np.ndarray], float]


def sweep(
    build_arch: ArchBuilder,
    train_set: EncodedDataset,
    validation_set: EncodedDataset,
    plan: SelectionPlan,
    config: TrainConfig,
    input_groups: Sequence[ColumnGroup] | None = None,
    test_metric: TestMetric | None = None,
) -> SelectionReport:
    """Train one model per candidate hidden size and keep the best.

    The winner minimizes validation error, with ties broken toward the
    smallest size. Training failures are recorded per size and the sweep
    continues. The test metric, if given, is evaluated once, for the
    winner only, so the test set never influences selection.
    """
    entries: list[SweepEntry] = []
    fits: dict[int, FitReport] = {}
    for size in plan.hidden_sizes:
        try:
            fit = train(build_arch(size), train_set, validation_set, config, input_groups)
        except Exception as exc:  # record and move on; one bad size must not kill the sweep
            entries.append(SweepEntry(size, float("nan"), failure=str(exc)))
            continue
        entries.append(SweepEntry(size, fit.best_validation_error))
        fits[size] = fit
    if not fits:
        raise SelectionError(
            "every candidate failed: "
            + "; ".join(f"{e.hidden_size}: {e.failure}" for e in entries)
        )
    winner_size = min(fits, key=lambda s: (fits[s].best_validation_error, s))
    winner_fit = fits[winner_size]
    metric = None
    if test_metric is not None:
        metric = float(test_metric(build_arch(winner_size), winner_fit.best_weights))
    return SelectionReport(
        entries=tuple(entries),
        winner_size=winner_size,
        winner_fit=winner_fit,
        test_metric=metric,
    )


def k_fold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded partition into k disjoint folds whose sizes differ by at most 1."""
    if k < 2:
        raise SchemaError("k-fold cross-validation needs k >= 2")
    if k > n:
        raise SchemaError(f"cannot make {k} folds from {n} rows")
    order = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(order, k)]


@dataclass
class CvReport:
    mean_error: float
    fold_errors: tuple[float, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "mean_error": float(self.mean_error),
            "fold_errors": [float(v) for v in self.fold_errors],
        }


def k_fold_cv(
    arch: MlpArchitecture,
    dataset: EncodedDataset,
    k: int,
    config: TrainConfig,
    input_groups: Sequence[ColumnGroup] | None = None,
) -> CvReport:
    """Average held-out composite loss over a seeded k-fold partition.

    Each fold's model trains on the remaining folds and monitors its own
    training data for early stopping, so the held-out fold never leaks
    into fitting.
    """
    folds = k_fold_indices(dataset.n_rows, k, config.seed)
    errors: list[float] = []
    for held_out in folds:
        mask = np.ones(dataset.n_rows, dtype=bool)
        mask[held_out] = False
        fit_part = dataset.subset(np.flatnonzero(mask))
        fit = train(arch, fit_part, fit_part, config, input_groups)
        errors.append(
            mean_composite_loss(
                arch, fit.best_weights, dataset.subset(held_out), config.block_weights
            )
        )
    return CvReport(mean_error=float(np.mean(errors)), fold_errors=tuple(errors))
