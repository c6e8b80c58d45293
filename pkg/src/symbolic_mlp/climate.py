"""Station-location experiments on climate-like data.

A station is described by 12 monthly temperatures and 12 monthly
precipitations; the task is to infer its longitude and latitude from one
of four input codings:

* ``full24``  - the raw 24 monthly values;
* ``mean2``   - yearly means only, ``(temp_mean, precip_mean)``;
* ``mean_sd4``- mean and sample standard deviation per variable;
* ``min_max4``- the extreme values per variable (interval bounds).

Because the original observation network is not redistributable, a
synthetic generator produces stations over a comparable
longitude/latitude rectangle. Its structure makes yearly means alone
ambiguous while (mean, seasonal amplitude) pairs pin the location down:
temperature mean falls with latitude and dips over a south-west cold
plateau, precipitation mean grows along the NW-SE axis, and seasonal
amplitude (continentality) grows with distance from the east coast. A
CSV loader accepts real station data in the same shape.

The degradation study removes monthly values in regular patterns and
feeds the surviving months back to models trained on complete data: the
raw-24 coding needs interpolation to rebuild its inputs, while the
summary codings simply recompute their statistics from what remains.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .imputation import DEGRADATION_MISSING_SLOTS, interpolate_periodic
from .mlp import MlpArchitecture, count_weights, outputs, single_hidden
from .model_selection import SelectionPlan, SelectionReport, split_indices, sweep
from .objective import EncodedDataset
from .recoding import BlockKind, OutputBlockSpec, Standardizer, fit_standardizer
from .symbolic import SchemaError
from .training import TrainConfig

CODING_METHODS = ("full24", "mean2", "mean_sd4", "min_max4")
CODING_DIMS = {"full24": 24, "mean2": 2, "mean_sd4": 4, "min_max4": 4}

LON_MIN, LON_MAX = 75.0, 131.0
LAT_MIN, LAT_MAX = 18.0, 53.5

#: Yearly cycle peaking in July (slot 6) and bottoming in January (slot 0).
MONTH_PHASE = np.cos(2.0 * np.pi * (np.arange(12) - 6.0) / 12.0)

#: Transition-season anomalies (warm April, cold October), zero elsewhere.
#: Placed on zero-phase months so yearly extremes stay in January/July.
MONTH_RIPPLE = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0])

#: Ripple-to-seasonal ratio sqrt(0.3): with two ripple months the full-year
#: sample variance is amp^2 * (6 + 2 * 0.3) / 11 = 0.6 * amp^2, equal to the
#: expected variance of the six odd months alone (amp^2 * 3/5), so thinning
#: to every other month leaves the recomputed standard deviation unbiased.
RIPPLE_FRACTION = np.sqrt(0.3)


@dataclass(frozen=True)
class Station:
    longitude: float
    latitude: float
    temperatures: np.ndarray
    precipitations: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.temperatures, dtype=float)
        p = np.asarray(self.precipitations, dtype=float)
        object.__setattr__(self, "temperatures", t)
        object.__setattr__(self, "precipitations", p)
        if t.shape != (12,) or p.shape != (12,):
            raise SchemaError("stations carry 12 monthly temperatures and precipitations")


def generate_synthetic_stations(
    n: int, seed: int, noise_level: float = 1.0
) -> list[Station]:
    """Seeded synthetic stations over the model rectangle.

    Temperature mean decreases with latitude and dips over the south-west
    plateau; precipitation mean increases toward the south-east; seasonal
    amplitude increases away from the east coast (with a mild increase
    northwards), so stations with matching yearly means can still differ
    strongly in amplitude. A sub-seasonal ripple proportional to the
    amplitude rides on top of the yearly cycle, and Gaussian noise is
    added per monthly value.
    """
    if n < 10:
        raise SchemaError("need at least 10 stations")
    rng = np.random.default_rng(seed)
    lon = rng.uniform(LON_MIN, LON_MAX, n)
    lat = rng.uniform(LAT_MIN, LAT_MAX, n)

    plateau = 14.0 * np.exp(
        -(((lon - 85.0) ** 2) / (2.0 * 7.0**2) + ((lat - 33.0) ** 2) / (2.0 * 6.0**2))
    )
    temp_mean = 28.0 - 0.55 * (lat - LAT_MIN) - plateau
    temp_amp = 6.0 + 0.22 * (LON_MAX - lon) + 0.06 * (lat - LAT_MIN)
    axis = 0.5 * ((lon - LON_MIN) / (LON_MAX - LON_MIN) + (LAT_MAX - lat) / (LAT_MAX - LAT_MIN))
    precip_mean = 5.0 + 175.0 * axis * axis

    shape = (MONTH_PHASE + RIPPLE_FRACTION * MONTH_RIPPLE)[None, :]
    temps = temp_mean[:, None] + temp_amp[:, None] * shape
    temps = temps + rng.normal(0.0, noise_level, size=(n, 12))
    precip = precip_mean[:, None] * (1.0 + 0.85 * shape)
    precip = precip + rng.normal(0.0, noise_level, size=(n, 12)) * (
        2.0 + 0.08 * precip_mean[:, None]
    )
    precip = np.maximum(precip, 0.0)

    return [
        Station(float(lon[i]), float(lat[i]), temps[i], precip[i]) for i in range(n)
    ]


def apply_coding(station: Station, method: str) -> np.ndarray:
    """Input vector for one station; summary codings skip missing months."""
    if method not in CODING_METHODS:
        raise SchemaError(f"unknown coding method {method!r}")
    t, p = station.temperatures, station.precipitations
    if method == "full24":
        if np.isnan(t).any() or np.isnan(p).any():
            raise SchemaError("full24 needs complete months; interpolate first")
        return np.concatenate([t, p])
    t_obs, p_obs = t[~np.isnan(t)], p[~np.isnan(p)]
    if t_obs.size == 0 or p_obs.size == 0:
        raise SchemaError("a station with no observed months cannot be coded")
    if method == "mean2":
        return np.array([t_obs.mean(), p_obs.mean()])
    if method == "mean_sd4":
        return np.array(
            [t_obs.mean(), t_obs.std(ddof=1), p_obs.mean(), p_obs.std(ddof=1)]
        )
    return np.array([t_obs.min(), t_obs.max(), p_obs.min(), p_obs.max()])


def degrade(station: Station, level: str) -> Station:
    """Blank the level's monthly slots (both vectors) with NaN."""
    if level == "none":
        return station
    if level not in DEGRADATION_MISSING_SLOTS:
        raise SchemaError(f"unknown degradation level {level!r}")
    slots = list(DEGRADATION_MISSING_SLOTS[level])
    t = station.temperatures.copy()
    p = station.precipitations.copy()
    t[slots] = np.nan
    p[slots] = np.nan
    return Station(station.longitude, station.latitude, t, p)


# ---------------------------------------------------------------------------
# Station CSV
# ---------------------------------------------------------------------------

_CSV_HEADER = ["lon", "lat"] + [f"t{i}" for i in range(1, 13)] + [
    f"p{i}" for i in range(1, 13)
]


def stations_to_csv(stations: Sequence[Station]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(_CSV_HEADER)
    for s in stations:
        writer.writerow(
            [repr(float(s.longitude)), repr(float(s.latitude))]
            + [repr(float(v)) for v in s.temperatures]
            + [repr(float(v)) for v in s.precipitations]
        )
    return buffer.getvalue()


def save_stations(stations: Sequence[Station], path: str | Path) -> None:
    Path(path).write_text(stations_to_csv(stations))


def load_stations(path: str | Path) -> list[Station]:
    reader = csv.reader(io.StringIO(Path(path).read_text()))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != _CSV_HEADER:
        raise SchemaError(f"station CSV must start with header {','.join(_CSV_HEADER)}")
    stations = []
    for row in reader:
        if not row:
            continue
        values = [float(v) for v in row]
        stations.append(Station(values[0], values[1], values[2:14], values[14:26]))
    return stations


# ---------------------------------------------------------------------------
# Location experiment
# ---------------------------------------------------------------------------

COORDINATES = ("longitude", "latitude")


@dataclass
class CoordinateModel:
    """One trained single-output net plus its target de-standardization."""

    arch: MlpArchitecture
    weights: np.ndarray
    hidden_size: int
    validation_error: float
    target_mean: float
    target_scale: float
    sweep_report: SelectionReport

    def predict(self, standardized_inputs: np.ndarray) -> np.ndarray:
        raw = outputs(self.arch, self.weights, standardized_inputs)[..., 0]
        return raw * self.target_scale + self.target_mean


@dataclass
class LocationModel:
    """Both coordinate nets for one coding method, with the input standardizer."""

    method: str
    input_standardizer: Standardizer
    coordinates: dict[str, CoordinateModel]

    def predict(self, raw_inputs: np.ndarray) -> dict[str, np.ndarray]:
        standardized = self.input_standardizer.transform(raw_inputs)
        return {
            name: model.predict(standardized)
            for name, model in self.coordinates.items()
        }


@dataclass
class LocationExperimentReport:
    method: str
    mae: dict[str, float]
    hidden_sizes: dict[str, int]
    n_weights: int
    model: LocationModel
    test_indices: np.ndarray

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "mae_longitude": float(self.mae["longitude"]),
            "mae_latitude": float(self.mae["latitude"]),
            "hidden_longitude": int(self.hidden_sizes["longitude"]),
            "hidden_latitude": int(self.hidden_sizes["latitude"]),
            "n_weights": int(self.n_weights),
            "sweeps": {
                name: self.model.coordinates[name].sweep_report.to_dict()
                for name in COORDINATES
            },
        }


def _coded_inputs(stations: Sequence[Station], method: str) -> np.ndarray:
    return np.vstack([apply_coding(s, method) for s in stations])


def _single_output_dataset(
    inputs: np.ndarray, target: np.ndarray, name: str
) -> EncodedDataset:
    block = OutputBlockSpec(
        source_variable=name, start=0, stop=1, kind=BlockKind.LINEAR_QUADRATIC
    )
    return EncodedDataset(inputs=inputs, blocks=(block,), targets=(target[:, None],))


def run_location_experiment(
    stations: Sequence[Station],
    method: str,
    plan: SelectionPlan,
    config: TrainConfig,
) -> LocationExperimentReport:
    """Sweep hidden sizes for two independent nets (longitude, latitude).

    Inputs and targets are standardized on the training split; the test
    mean absolute error is reported in degrees after de-standardizing, for
    the winning size only.
    """
    raw = _coded_inputs(stations, method)
    coords = {
        "longitude": np.array([s.longitude for s in stations]),
        "latitude": np.array([s.latitude for s in stations]),
    }
    idx_train, idx_val, idx_test = split_indices(len(stations), plan.split, config.seed)

    standardizer = fit_standardizer(raw[idx_train])
    x_train = standardizer.transform(raw[idx_train])
    x_val = standardizer.transform(raw[idx_val])
    x_test = standardizer.transform(raw[idx_test])

    models: dict[str, CoordinateModel] = {}
    mae: dict[str, float] = {}
    for name in COORDINATES:
        y = coords[name]
        t_mean = float(y[idx_train].mean())
        t_scale = float(y[idx_train].std(ddof=1))
        if t_scale <= 0.0:
            t_scale = 1.0
        y_std = (y - t_mean) / t_scale

        train_set = _single_output_dataset(x_train, y_std[idx_train], name)
        val_set = _single_output_dataset(x_val, y_std[idx_val], name)

        def build(size: int) -> MlpArchitecture:
            return single_hidden(raw.shape[1], size, train_set.blocks)

        report = sweep(build, train_set, val_set, plan, config)
        arch = build(report.winner_size)
        model = CoordinateModel(
            arch=arch,
            weights=report.winner_fit.best_weights,
            hidden_size=report.winner_size,
            validation_error=report.winner_fit.best_validation_error,
            target_mean=t_mean,
            target_scale=t_scale,
            sweep_report=report,
        )
        models[name] = model
        mae[name] = float(np.abs(model.predict(x_test) - y[idx_test]).mean())

    location_model = LocationModel(
        method=method, input_standardizer=standardizer, coordinates=models
    )
    total_weights = sum(count_weights(models[name].arch) for name in COORDINATES)
    return LocationExperimentReport(
        method=method,
        mae=mae,
        hidden_sizes={name: models[name].hidden_size for name in COORDINATES},
        n_weights=total_weights,
        model=location_model,
        test_indices=idx_test,
    )


@dataclass
class ExperimentReport:
    """One row per coding method, mirroring a results table."""

    rows: tuple[LocationExperimentReport, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"methods": [r.to_dict() for r in self.rows]}

    def to_text_table(self) -> str:
        lines = [
            f"{'Inputs':<10} {'Longitude':>14} {'Latitude':>14} {'Number of weights':>18}"
        ]
        for r in self.rows:
            lon = f"{r.mae['longitude']:.2f} ({r.hidden_sizes['longitude']})"
            lat = f"{r.mae['latitude']:.2f} ({r.hidden_sizes['latitude']})"
            lines.append(f"{r.method:<10} {lon:>14} {lat:>14} {r.n_weights:>18}")
        return "\n".join(lines) + "\n"


def run_full_experiment(
    stations: Sequence[Station],
    methods: Sequence[str],
    plan: SelectionPlan,
    config: TrainConfig,
    jobs: int = 1,
) -> ExperimentReport:
    """Run the location experiment for several codings; methods are
    independent, so they may run on parallel worker threads."""
    methods = list(methods)
    for m in methods:
        if m not in CODING_METHODS:
            raise SchemaError(f"unknown coding method {m!r}")
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(
                pool.map(
                    lambda m: run_location_experiment(stations, m, plan, config), methods
                )
            )
    else:
        rows = [run_location_experiment(stations, m, plan, config) for m in methods]
    return ExperimentReport(rows=tuple(rows))


# ---------------------------------------------------------------------------
# Degradation study
# ---------------------------------------------------------------------------


def degraded_inputs(
    stations: Sequence[Station], method: str, level: str
) -> np.ndarray:
    """Model inputs after degrading the months to ``level``.

    The raw-24 coding rebuilds the missing months by periodic linear
    interpolation; the summary codings recompute their statistics from
    the surviving months.
    """
    if level == "none":
        return _coded_inputs(stations, method)
    rows = []
    for s in stations:
        d = degrade(s, level)
        if method == "full24":
            d = Station(
                d.longitude,
                d.latitude,
                interpolate_periodic(d.temperatures, level),
                interpolate_periodic(d.precipitations, level),
            )
        rows.append(apply_coding(d, method))
    return np.vstack(rows)


@dataclass
class DegradationRow:
    method: str
    level: str
    mae: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "level": self.level,
            "mae_longitude": float(self.mae["longitude"]),
            "mae_latitude": float(self.mae["latitude"]),
        }


@dataclass
class DegradationStudyReport:
    rows: tuple[DegradationRow, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"degradation": [r.to_dict() for r in self.rows]}

    def mae_table(self, coordinate: str) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {}
        for row in self.rows:
            out.setdefault(row.method, {})[row.level] = row.mae[coordinate]
        return out

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["method", "level", "mae_longitude", "mae_latitude"])
        for row in self.rows:
            writer.writerow(
                [
                    row.method,
                    row.level,
                    repr(row.mae["longitude"]),
                    repr(row.mae["latitude"]),
                ]
            )
        return buffer.getvalue()


def run_degradation_study(
    reports: Mapping[str, LocationExperimentReport] | Iterable[LocationExperimentReport],
    test_stations: Sequence[Station],
    levels: Sequence[str] = ("none",) + tuple(DEGRADATION_MISSING_SLOTS),
) -> DegradationStudyReport:
    """Evaluate models trained on complete data against degraded test months."""
    if not isinstance(reports, Mapping):
        reports = {r.method: r for r in reports}
    truth = {
        "longitude": np.array([s.longitude for s in test_stations]),
        "latitude": np.array([s.latitude for s in test_stations]),
    }
    rows = []
    for method, report in reports.items():
        for level in levels:
            inputs = degraded_inputs(test_stations, method, level)
            predictions = report.model.predict(inputs)
            mae = {
                name: float(np.abs(predictions[name] - truth[name]).mean())
                for name in COORDINATES
            }
            rows.append(DegradationRow(method=method, level=level, mae=mae))
    return DegradationStudyReport(rows=tuple(rows))


def predictions_to_csv(
    report: LocationExperimentReport, stations: Sequence[Station]
) -> str:
    """(true, predicted) coordinate pairs for the test stations, for plotting."""
    test = [stations[i] for i in report.test_indices]
    inputs = _coded_inputs(test, report.method)
    predicted = report.model.predict(inputs)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["true_lon", "true_lat", "pred_lon", "pred_lat"])
    for i, s in enumerate(test):
        writer.writerow(
            [
                repr(float(s.longitude)),
                repr(float(s.latitude)),
                repr(float(predicted["longitude"][i])),
                repr(float(predicted["latitude"][i])),
            ]
        )
    return buffer.getvalue()
