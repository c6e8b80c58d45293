"""Filling missing entries in recoded (numeric) data.

Missing entries are NaN. Three strategies are provided: column means,
k-nearest-neighbor averages over partially observed rows, and the
periodic linear interpolation used to rebuild regularly thinned monthly
vectors (a 12-slot cycle where the final gap wraps December onto January).
"""

from __future__ import annotations

import warnings

import numpy as np

from .symbolic import SchemaError


class ImputationError(ValueError):
    """The requested imputation is impossible on this data."""


#: Missing 0-based slots of a 12-vector for each regular degradation level.
DEGRADATION_MISSING_SLOTS: dict[str, tuple[int, ...]] = {
    "half": (1, 3, 5, 7, 9, 11),
    "two_thirds": (1, 2, 4, 5, 7, 8, 10, 11),
    "three_quarters": (1, 2, 3, 5, 6, 7, 9, 10, 11),
}

#: Spacing between surviving slots at each level.
DEGRADATION_STRIDE: dict[str, int] = {"half": 2, "two_thirds": 3, "three_quarters": 4}

DEGRADATION_LEVELS = tuple(DEGRADATION_MISSING_SLOTS)


def impute_mean(matrix: np.ndarray) -> np.ndarray:
    """Replace every NaN with the mean of its column's observed entries."""
    values = np.array(matrix, dtype=float)
    if values.ndim != 2:
        raise SchemaError("expected a 2-D matrix")
    observed = ~np.isnan(values)
    empty = np.flatnonzero(~observed.any(axis=0))
    if empty.size:
        raise ImputationError(f"columns {empty.tolist()} have no observed entries")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        means = np.nanmean(values, axis=0)
    rows, cols = np.nonzero(~observed)
    values[rows, cols] = means[cols]
    return values


def _masked_distances(query: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Mean squared difference over coordinates observed in both rows.

    Rows sharing no observed coordinate get an infinite distance.
    """
    shared = ~np.isnan(query) & ~np.isnan(candidates)
    counts = shared.sum(axis=1)
    diff = np.where(shared, candidates - query, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        distances = np.where(counts > 0, (diff * diff).sum(axis=1) / counts, np.inf)
    return distances


def impute_knn(matrix: np.ndarray, k: int = 3) -> np.ndarray:
    """Replace each NaN with the average of that coordinate over the k
    nearest rows that observe it.

    Distance between partially observed rows is the squared-difference
    mean over their shared observed coordinates, so rows with different
    missingness patterns stay comparable. Distance ties break toward the
    lower row index. Cells with fewer than ``k`` usable donors fall back
    to the column mean, with a warning.
    """
    if k < 1:
        raise SchemaError("k must be >= 1")
    values = np.array(matrix, dtype=float)
    if values.ndim != 2:
        raise SchemaError("expected a 2-D matrix")
    observed = ~np.isnan(values)
    empty = np.flatnonzero(~observed.any(axis=0))
    if empty.size:
        raise ImputationError(f"columns {empty.tolist()} have no observed entries")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        column_means = np.nanmean(values, axis=0)

    result = values.copy()
    for r in np.flatnonzero(~observed.all(axis=1)):
        distances = _masked_distances(values[r], values)
        distances[r] = np.inf
        for c in np.flatnonzero(~observed[r]):
            usable = observed[:, c] & np.isfinite(distances)
            donors = np.flatnonzero(usable)
            if donors.size < k:
                warnings.warn(
                    f"row {r}, column {c}: only {donors.size} donors for k={k}; "
                    "falling back to the column mean",
                    RuntimeWarning,
                    stacklevel=2,
                )
                result[r, c] = column_means[c]
                continue
            order = donors[np.lexsort((donors, distances[donors]))]
            result[r, c] = values[order[:k], c].mean()
    return result


def interpolate_periodic(vector: np.ndarray, level: str) -> np.ndarray:
    """Rebuild a regularly thinned 12-vector by linear interpolation.

    Given the surviving anchors at stride ``s`` (slots 1, 1+s, ... in
    1-based terms), each gap slot is the linear blend of its two anchors;
    the final gap wraps around to the first slot, using the cyclical
    structure of the 12 months. The vector's NaN pattern must match the
    level exactly.
    """
    if level not in DEGRADATION_MISSING_SLOTS:
        raise SchemaError(
            f"unknown degradation level {level!r}; expected one of {DEGRADATION_LEVELS}"
        )
    values = np.array(vector, dtype=float)
    if values.shape != (12,):
        raise SchemaError("expected a 12-slot vector")
    missing = DEGRADATION_MISSING_SLOTS[level]
    actual = tuple(int(i) for i in np.flatnonzero(np.isnan(values)))
    if actual != missing:
        raise ImputationError(
            f"missing slots {actual} do not match the {level!r} pattern {missing}"
        )
    stride = DEGRADATION_STRIDE[level]
    anchors = list(range(0, 12, stride))
    for j, left in enumerate(anchors):
        right = anchors[j + 1] if j + 1 < len(anchors) else 12  # wrap to slot 0
        right_value = values[right % 12]
        for step in range(1, stride):
            slot = left + step
            if slot >= 12:
                break
            values[slot] = ((stride - step) * values[left] + step * right_value) / stride
    return values
