import math

import numpy as np
import pytest

from symbolic_mlp.climate import (
    CODING_DIMS,
    CODING_METHODS,
    Station,
    apply_coding,
    degrade,
    degraded_inputs,
    generate_synthetic_stations,
    load_stations,
    run_degradation_study,
    run_full_experiment,
    run_location_experiment,
    save_stations,
    stations_to_csv,
)
from symbolic_mlp.imputation import interpolate_periodic
from symbolic_mlp.model_selection import SelectionPlan
from symbolic_mlp.symbolic import SchemaError
from symbolic_mlp.training import EarlyStopping, TrainConfig

SMALL_PLAN = SelectionPlan(hidden_sizes=(4,), split=(70, 25, 25))
SMALL_CONFIG = TrainConfig(
    max_iterations=120, restarts=2, seed=5, early_stopping=EarlyStopping(patience=40)
)


def small_stations(seed=7):
    return generate_synthetic_stations(120, seed=seed, noise_level=1.0)


class TestGenerator:
    def test_count_and_shapes(self):
        stations = generate_synthetic_stations(260, seed=1)
        assert len(stations) == 260
        assert stations[0].temperatures.shape == (12,)

    def test_deterministic(self):
        a = generate_synthetic_stations(50, seed=9, noise_level=0.0)
        b = generate_synthetic_stations(50, seed=9, noise_level=0.0)
        for s, t in zip(a, b):
            assert s.longitude == t.longitude
            np.testing.assert_array_equal(s.temperatures, t.temperatures)

    def test_minimum_count(self):
        with pytest.raises(SchemaError):
            generate_synthetic_stations(5, seed=0)

    def test_equal_latitude_contrast(self):
        # same latitude, different distance from the east coast: yearly means
        # agree far better than yearly ranges do (the continentality contrast)
        west = _noiseless_station(longitude=80.0, latitude=45.0)
        east = _noiseless_station(longitude=127.0, latitude=45.0)
        mean_gap = abs(west.temperatures.mean() - east.temperatures.mean())
        range_gap = abs(np.ptp(west.temperatures) - np.ptp(east.temperatures))
        assert range_gap > 4.0 * mean_gap

    def test_precipitation_non_negative(self):
        stations = generate_synthetic_stations(300, seed=3, noise_level=2.0)
        assert min(s.precipitations.min() for s in stations) >= 0.0


def _noiseless_station(longitude, latitude):
    """Generator formulas evaluated at one chosen location, noise-free."""
    from symbolic_mlp.climate import (
        LAT_MAX,
        LAT_MIN,
        LON_MAX,
        LON_MIN,
        MONTH_PHASE,
        MONTH_RIPPLE,
        RIPPLE_FRACTION,
    )

    plateau = 14.0 * math.exp(
        -(((longitude - 85.0) ** 2) / 98.0 + ((latitude - 33.0) ** 2) / 72.0)
    )
    t_mean = 28.0 - 0.55 * (latitude - LAT_MIN) - plateau
    t_amp = 6.0 + 0.22 * (LON_MAX - longitude) + 0.06 * (latitude - LAT_MIN)
    axis = 0.5 * (
        (longitude - LON_MIN) / (LON_MAX - LON_MIN) + (LAT_MAX - latitude) / (LAT_MAX - LAT_MIN)
    )
    p_mean = 5.0 + 175.0 * axis * axis
    shape = MONTH_PHASE + RIPPLE_FRACTION * MONTH_RIPPLE
    return Station(
        longitude,
        latitude,
        t_mean + t_amp * shape,
        np.maximum(p_mean * (1.0 + 0.85 * shape), 0.0),
    )


class TestCodings:
    def test_dimensions(self):
        station = small_stations()[0]
        for method in CODING_METHODS:
            assert apply_coding(station, method).shape == (CODING_DIMS[method],)

    def test_constant_months(self):
        station = Station(100.0, 30.0, np.full(12, 7.0), np.full(12, 3.0))
        np.testing.assert_array_equal(apply_coding(station, "mean_sd4"), [7, 0, 3, 0])
        np.testing.assert_array_equal(apply_coding(station, "min_max4"), [7, 7, 3, 3])
        np.testing.assert_array_equal(apply_coding(station, "mean2"), [7, 3])

    def test_one_through_twelve(self):
        months = np.arange(1.0, 13.0)
        station = Station(100.0, 30.0, months, np.ones(12))
        coded = apply_coding(station, "min_max4")
        assert (coded[0], coded[1]) == (1.0, 12.0)
        coded = apply_coding(station, "mean_sd4")
        assert coded[0] == 6.5
        assert coded[1] == pytest.approx(math.sqrt(13.0), abs=1e-12)  # ddof=1

    def test_full24_concatenates(self):
        station = small_stations()[3]
        coded = apply_coding(station, "full24")
        np.testing.assert_array_equal(coded[:12], station.temperatures)
        np.testing.assert_array_equal(coded[12:], station.precipitations)


class TestDegrade:
    def test_surviving_slots(self):
        station = small_stations()[0]
        survivors = {
            "half": {0, 2, 4, 6, 8, 10},
            "two_thirds": {0, 3, 6, 9},
            "three_quarters": {0, 4, 8},
        }
        for level, kept in survivors.items():
            d = degrade(station, level)
            observed = set(np.flatnonzero(~np.isnan(d.temperatures)))
            assert observed == kept
            observed_p = set(np.flatnonzero(~np.isnan(d.precipitations)))
            assert observed_p == kept

    def test_none_level_is_identity(self):
        station = small_stations()[0]
        assert degrade(station, "none") is station

    def test_recomputed_mean_of_constant_vector(self):
        station = Station(100.0, 30.0, np.full(12, 5.0), np.full(12, 2.0))
        for level in ("half", "two_thirds", "three_quarters"):
            coded = apply_coding(degrade(station, level), "mean2")
            np.testing.assert_array_equal(coded, [5.0, 2.0])

    def test_degrade_then_interpolate_recovers_affine_non_wrap(self):
        months = 3.0 + 0.5 * np.arange(12)
        station = Station(90.0, 40.0, months, months * 2.0)
        d = degrade(station, "half")
        rebuilt = interpolate_periodic(d.temperatures, "half")
        np.testing.assert_allclose(rebuilt[:11], months[:11], atol=1e-12)

    def test_full24_on_degraded_station_rejected(self):
        station = degrade(small_stations()[0], "half")
        with pytest.raises(SchemaError, match="interpolate"):
            apply_coding(station, "full24")


class TestStationCsv:
    def test_roundtrip(self, tmp_path):
        stations = small_stations()[:7]
        path = tmp_path / "stations.csv"
        save_stations(stations, path)
        back = load_stations(path)
        assert len(back) == 7
        for s, t in zip(stations, back):
            assert s.longitude == t.longitude and s.latitude == t.latitude
            np.testing.assert_array_equal(s.temperatures, t.temperatures)
            np.testing.assert_array_equal(s.precipitations, t.precipitations)

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("lon,lat\n1,2\n")
        with pytest.raises(SchemaError, match="header"):
            load_stations(path)

    def test_serialization_deterministic(self):
        stations = small_stations()[:5]
        assert stations_to_csv(stations) == stations_to_csv(stations)


@pytest.fixture(scope="module")
def trained_small():
    stations = small_stations()
    report = run_full_experiment(
        stations, ("mean_sd4", "min_max4"), SMALL_PLAN, SMALL_CONFIG
    )
    return stations, {r.method: r for r in report.rows}


class TestExperimentHarness:
    def test_report_schema(self, trained_small):
        _, rows = trained_small
        row = rows["mean_sd4"].to_dict()
        assert set(row) >= {
            "method",
            "mae_longitude",
            "mae_latitude",
            "hidden_longitude",
            "hidden_latitude",
            "n_weights",
        }

    def test_weight_count_sums_two_nets(self, trained_small):
        _, rows = trained_small
        row = rows["mean_sd4"]
        n = CODING_DIMS["mean_sd4"]
        expected = sum(
            (n + 1) * h + (h + 1) * 1
            for h in (row.hidden_sizes["longitude"], row.hidden_sizes["latitude"])
        )
        assert row.n_weights == expected

    def test_none_level_matches_experiment_mae(self, trained_small):
        stations, rows = trained_small
        test = [stations[i] for i in rows["mean_sd4"].test_indices]
        study = run_degradation_study(rows, test, levels=("none",))
        for row in study.rows:
            for coordinate in ("longitude", "latitude"):
                assert row.mae[coordinate] == pytest.approx(
                    rows[row.method].mae[coordinate], rel=1e-12
                )

    def test_outlier_month_hurts_min_max_more(self, trained_small, rng):
        stations, rows = trained_small
        test = [stations[i] for i in rows["mean_sd4"].test_indices]
        spiked = []
        for s in test:
            t = s.temperatures.copy()
            t[int(rng.integers(12))] += 12.0
            spiked.append(Station(s.longitude, s.latitude, t, s.precipitations))
        increases = {}
        for method in ("mean_sd4", "min_max4"):
            model = rows[method].model
            truth = np.array([s.longitude for s in test])
            base = model.predict(np.vstack([apply_coding(s, method) for s in test]))
            pert = model.predict(np.vstack([apply_coding(s, method) for s in spiked]))
            increases[method] = float(
                np.abs(pert["longitude"] - truth).mean()
                - np.abs(base["longitude"] - truth).mean()
            )
        assert increases["min_max4"] > increases["mean_sd4"]

    def test_degraded_inputs_shapes(self, trained_small):
        stations, _ = trained_small
        subset = stations[:9]
        for method in ("mean_sd4", "min_max4", "mean2"):
            for level in ("none", "half", "three_quarters"):
                assert degraded_inputs(subset, method, level).shape == (
                    9,
                    CODING_DIMS[method],
                )
        assert degraded_inputs(subset, "full24", "half").shape == (9, 24)

    def test_experiment_deterministic(self):
        stations = small_stations(seed=21)
        plan = SelectionPlan(hidden_sizes=(3,), split=(70, 25, 25))
        config = TrainConfig(max_iterations=60, restarts=1, seed=8)
        first = run_location_experiment(stations, "mean2", plan, config)
        second = run_location_experiment(stations, "mean2", plan, config)
        assert first.mae == second.mae
        assert np.array_equal(
            first.model.coordinates["longitude"].weights,
            second.model.coordinates["longitude"].weights,
        )
