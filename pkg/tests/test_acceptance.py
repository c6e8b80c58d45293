"""Acceptance suite: one test per release criterion.

Each test enforces its stated tolerance and time budget and prints one
pass line (visible with ``pytest -s``). Run with::

    pytest tests/test_acceptance.py -s
"""

import math
import time

import numpy as np

from conftest import central_difference, relative_gradient_error
from symbolic_mlp.climate import (
    generate_synthetic_stations,
    run_degradation_study,
    run_full_experiment,
)
from symbolic_mlp.cli import main as cli_main
from symbolic_mlp.imputation import DEGRADATION_MISSING_SLOTS, interpolate_periodic
from symbolic_mlp.mlp import (
    Activation,
    MlpArchitecture,
    backward,
    count_weights,
    forward,
    single_hidden,
)
from symbolic_mlp.model_selection import SelectionPlan
from symbolic_mlp.objective import (
    DecayPolicy,
    EncodedDataset,
    cross_entropy_loss,
    decay_coefficients,
    decay_penalty,
    independent_cross_entropy_loss,
    make_objective,
    weighted_multinomial_loss,
)
from symbolic_mlp.recoding import (
    BlockKind,
    CodingTag,
    ColumnGroup,
    OutputBlockSpec,
    decode_output_block,
    encode_categorical_multi,
    encode_categorical_single,
    encode_interval,
    encode_modal,
    encode_quantitative,
)
from symbolic_mlp.symbolic import (
    Category,
    CategorySet,
    Distribution,
    Interval,
    VariableKind,
    VariableSpec,
)
from symbolic_mlp.training import EarlyStopping, TrainConfig, minimize

LINEAR = OutputBlockSpec("y", 0, 1, BlockKind.LINEAR_QUADRATIC)


def report(number, label):
    print(f"[acceptance] criterion {number} ({label}): PASS")


def test_criterion_1_weight_count_reproduction():
    started = time.perf_counter()
    pairs = {
        (24, (3, 30)): 860,
        (2, (30, 17)): 190,
        (4, (20, 25)): 272,
        (4, (25, 40)): 392,
    }
    for (n, sizes), expected in pairs.items():
        total = sum(count_weights(single_hidden(n, h, (LINEAR,))) for h in sizes)
        assert total == expected, (n, sizes, total)
    assert time.perf_counter() - started < 1.0
    report(1, "weight-count reproduction")


def _random_net_case(rng):
    """Random architecture covering all block kinds, plus matching data."""
    kinds = [
        BlockKind.LINEAR_QUADRATIC,
        BlockKind.INTERVAL_MEAN_LENGTH,
        BlockKind.INTERVAL_MEAN_LOG_LENGTH,
        BlockKind.SOFTMAX_CROSS_ENTROPY,
        BlockKind.LOGISTIC_INDEPENDENT,
        BlockKind.MODAL_SOFTMAX,
    ]
    rng.shuffle(kinds)
    blocks = []
    start = 0
    for i, kind in enumerate(kinds):
        if kind in (BlockKind.INTERVAL_MEAN_LENGTH, BlockKind.INTERVAL_MEAN_LOG_LENGTH):
            width = 2
        elif kind is BlockKind.LINEAR_QUADRATIC:
            width = 1
        else:
            width = int(rng.integers(2, 4))
        blocks.append(
            OutputBlockSpec(
                f"b{i}", start, start + width, kind,
                micro_weighted=kind is BlockKind.MODAL_SOFTMAX,
            )
        )
        start += width

    n_in = int(rng.integers(3, 6))
    hidden = tuple(
        (int(rng.integers(2, 5)), (Activation.TANH, Activation.LOGISTIC)[rng.integers(2)])
        for _ in range(int(rng.integers(1, 3)))
    )
    arch = MlpArchitecture(n_in, hidden, tuple(blocks))

    n = 4
    targets, micro = [], []
    for block in arch.output_blocks:
        if block.kind is BlockKind.INTERVAL_MEAN_LENGTH:
            targets.append(np.abs(rng.normal(size=(n, block.width))) + 0.1)
            micro.append(None)
        elif block.kind in (BlockKind.LINEAR_QUADRATIC, BlockKind.INTERVAL_MEAN_LOG_LENGTH):
            targets.append(rng.normal(size=(n, block.width)))
            micro.append(None)
        elif block.kind is BlockKind.SOFTMAX_CROSS_ENTROPY:
            targets.append(np.eye(block.width)[rng.integers(0, block.width, n)])
            micro.append(None)
        elif block.kind is BlockKind.LOGISTIC_INDEPENDENT:
            targets.append((rng.random((n, block.width)) > 0.5).astype(float))
            micro.append(None)
        else:
            targets.append(rng.dirichlet(np.ones(block.width), size=n))
            micro.append(rng.integers(1, 5, n).astype(float))
    dataset = EncodedDataset(
        inputs=rng.normal(size=(n, n_in)),
        blocks=arch.output_blocks,
        targets=tuple(targets),
        micro_counts=tuple(micro),
    )

    # mixed decay divisors over the input columns
    groups = []
    col = 0
    while col < n_in:
        width = min(int(rng.integers(1, 3)), n_in - col)
        tag = CodingTag.DISJUNCTIVE if width > 1 else CodingTag.IDENTITY
        groups.append(
            ColumnGroup(
                f"g{col}", col, col + width, float(width), tag,
                (0.0,) * width, (1.0,) * width,
            )
        )
        col += width
    return arch, dataset, tuple(groups)


def test_criterion_2_gradient_correctness():
    started = time.perf_counter()
    rng = np.random.default_rng(20250811)
    worst = 0.0
    for _ in range(100):
        arch, dataset, groups = _random_net_case(rng)
        objective = make_objective(
            arch, dataset, DecayPolicy.uniform(float(rng.uniform(0.0, 0.1))), groups
        )
        w = arch.init_weights(rng)
        _, analytic = objective(w)
        numeric = central_difference(objective, w, step=1e-6)
        worst = max(worst, relative_gradient_error(analytic, numeric))
    assert worst < 1e-5, worst
    assert time.perf_counter() - started < 30.0
    report(2, f"gradient correctness, worst relative error {worst:.2e}")


def test_criterion_3_loss_formula_suite():
    cases = [
        (cross_entropy_loss(np.array([1.0, 0.0]), np.array([0.5, 0.5]))[0], math.log(2)),
        (
            independent_cross_entropy_loss(np.array([1.0, 1.0]), np.array([0.5, 0.5]))[0],
            2 * math.log(2),
        ),
        (
            weighted_multinomial_loss(np.array([0.5, 0.5]), np.array([0.5, 0.5]), 4)[0],
            4 * math.log(2),
        ),
        (
            weighted_multinomial_loss(np.array([1.0, 0.0]), np.array([0.8, 0.2]), 5)[0],
            -5 * math.log(0.8),
        ),
    ]
    for got, expected in cases:
        assert abs(got - expected) <= 1e-12, (got, expected)
    report(3, "loss formula suite")


def test_criterion_4_encode_decode_round_trips():
    started = time.perf_counter()
    rng = np.random.default_rng(99)
    n_each = 1000

    for _ in range(n_each):  # quantitative
        x = float(rng.normal() * 100.0)
        block = OutputBlockSpec("q", 0, 1, BlockKind.LINEAR_QUADRATIC)
        assert decode_output_block(block, encode_quantitative(x)).value == x

    spec5 = VariableSpec(
        name="c", kind=VariableKind.CATEGORICAL_SINGLE,
        categories=tuple(f"A{i}" for i in range(7)),
    )
    block_c = OutputBlockSpec("c", 0, 7, BlockKind.SOFTMAX_CROSS_ENTROPY)
    for _ in range(n_each):  # single category via argmax of its own code
        v = Category(int(rng.integers(7)))
        assert decode_output_block(block_c, encode_categorical_single(spec5, v)) == v

    block_ml = OutputBlockSpec("iv", 0, 2, BlockKind.INTERVAL_MEAN_LENGTH)
    block_ll = OutputBlockSpec("iv", 0, 2, BlockKind.INTERVAL_MEAN_LOG_LENGTH)
    for _ in range(n_each):  # intervals; dyadic grid keeps the algebra exact
        a, b = np.sort(rng.integers(-10000, 10000, size=2) / 256.0)
        v = Interval(float(a), float(b))
        assert decode_output_block(block_ml, encode_interval(v, CodingTag.MEAN_LENGTH)) == v
        if b > a:
            out = decode_output_block(
                block_ll, encode_interval(v, CodingTag.MEAN_LOG_LENGTH)
            )
            np.testing.assert_allclose(
                [out.lower, out.upper], [a, b], rtol=1e-12, atol=1e-12
            )

    spec_s = VariableSpec(
        name="s", kind=VariableKind.CATEGORICAL_MULTI,
        categories=tuple(f"B{i}" for i in range(6)),
    )
    block_s = OutputBlockSpec("s", 0, 6, BlockKind.LOGISTIC_INDEPENDENT)
    for _ in range(n_each):  # subsets via the 0.5 threshold on their own code
        members = frozenset(
            int(i) for i in rng.choice(6, size=int(rng.integers(1, 7)), replace=False)
        )
        v = CategorySet(members)
        assert decode_output_block(block_s, encode_categorical_multi(spec_s, v)) == v

    spec_m = VariableSpec(
        name="m", kind=VariableKind.MODAL, categories=("C0", "C1", "C2")
    )
    block_m = OutputBlockSpec("m", 0, 3, BlockKind.MODAL_SOFTMAX)
    for _ in range(n_each):  # modal identity within 1e-12
        p = rng.dirichlet(np.ones(3))
        p = p / p.sum()
        out = decode_output_block(block_m, encode_modal(spec_m, Distribution(tuple(p))))
        np.testing.assert_allclose(out.probabilities, p, atol=1e-12)

    assert time.perf_counter() - started < 5.0
    report(4, "encode/decode round trips")


def test_criterion_5_degradation_and_interpolation_exactness():
    # missing-index patterns, 1-based
    assert tuple(i + 1 for i in DEGRADATION_MISSING_SLOTS["half"]) == (2, 4, 6, 8, 10, 12)
    assert tuple(i + 1 for i in DEGRADATION_MISSING_SLOTS["two_thirds"]) == (
        2, 3, 5, 6, 8, 9, 11, 12,
    )
    assert tuple(i + 1 for i in DEGRADATION_MISSING_SLOTS["three_quarters"]) == (
        2, 3, 4, 6, 7, 8, 10, 11, 12,
    )

    rng = np.random.default_rng(5)
    for _ in range(200):
        c = rng.normal(scale=10.0, size=12)

        v = c.copy()
        v[list(DEGRADATION_MISSING_SLOTS["half"])] = np.nan
        out = interpolate_periodic(v, "half")
        for i in (1, 3, 5, 7, 9):  # 0-based even-month slots
            assert out[i] == (c[i - 1] + c[i + 1]) / 2.0
        assert out[11] == (c[0] + c[10]) / 2.0

        v = c.copy()
        v[list(DEGRADATION_MISSING_SLOTS["two_thirds"])] = np.nan
        out = interpolate_periodic(v, "two_thirds")
        assert out[1] == (2.0 * c[0] + c[3]) / 3.0
        assert out[2] == (c[0] + 2.0 * c[3]) / 3.0
        assert out[10] == (2.0 * c[9] + c[0]) / 3.0
        assert out[11] == (c[9] + 2.0 * c[0]) / 3.0

        v = c.copy()
        v[list(DEGRADATION_MISSING_SLOTS["three_quarters"])] = np.nan
        out = interpolate_periodic(v, "three_quarters")
        assert out[1] == (3.0 * c[0] + c[4]) / 4.0
        assert out[2] == (c[0] + c[4]) / 2.0
        assert out[3] == (c[0] + 3.0 * c[4]) / 4.0
        assert out[9] == (3.0 * c[8] + c[0]) / 4.0
        assert out[11] == (c[8] + 3.0 * c[0]) / 4.0
    report(5, "degradation patterns and interpolation formulas")


def test_criterion_6_decay_normalization():
    rng = np.random.default_rng(17)
    lam = 0.73
    # inputs: a 5-category one-hot group followed by one interval group
    arch = single_hidden(7, 4, (LINEAR,))
    groups = (
        ColumnGroup("c", 0, 5, 5.0, CodingTag.DISJUNCTIVE, (0.0,) * 5, (1.0,) * 5),
        ColumnGroup("iv", 5, 7, 1.0, CodingTag.MEAN_LENGTH, (0.0,) * 2, (1.0,) * 2),
    )
    coeffs = decay_coefficients(arch, DecayPolicy.uniform(lam), groups)
    for _ in range(50):
        w = rng.normal(size=arch.n_weights)
        penalty, _ = decay_penalty(w, coeffs)
        cat_sq = sum(
            w[arch.flat_index(0, neuron, j)] ** 2 for neuron in range(4) for j in range(5)
        )
        interval_sq = sum(
            w[arch.flat_index(0, neuron, j)] ** 2 for neuron in range(4) for j in range(5, 7)
        )
        out_sq = sum(w[arch.flat_index(1, 0, j)] ** 2 for j in range(4))
        expected = (lam / 5.0) * cat_sq + lam * interval_sq + lam * out_sq
        assert abs(penalty - expected) <= 1e-12 * max(1.0, abs(expected))
    report(6, "category-normalized weight decay")


def test_criterion_7_optimizer_sanity():
    started = time.perf_counter()
    rng = np.random.default_rng(31)

    # quadratic bowl in <= dim+1 conjugate-gradient iterations
    for dim in (2, 5, 12):
        center = rng.normal(size=dim)

        def bowl(w):
            d = w - center
            return float(d @ d), 2.0 * d

        w, trace = minimize(
            bowl, rng.normal(size=dim), TrainConfig(gradient_tolerance=1e-12)
        )
        assert trace.iterations <= dim + 1
        assert float(np.sum((w - center) ** 2)) <= 1e-8

    # 2-D Rosenbrock from the standard start
    def rosenbrock(w):
        x, y = w
        f = (1.0 - x) ** 2 + 100.0 * (y - x * x) ** 2
        g = np.array([-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)])
        return float(f), g

    w, _ = minimize(
        rosenbrock, np.array([-1.2, 1.0]), TrainConfig(max_iterations=5000, gradient_tolerance=1e-9)
    )
    assert np.linalg.norm(w - 1.0) <= 1e-4

    # XOR with a 2-2-1 tanh/logistic net within 10 restarts
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0.0, 1.0, 1.0, 0.0])
    arch = MlpArchitecture(
        2,
        ((2, Activation.TANH),),
        (OutputBlockSpec("xor", 0, 1, BlockKind.LOGISTIC_INDEPENDENT),),
    )

    def objective(w):
        trace = forward(arch, w, X)
        t = np.clip(trace.outputs[:, 0], 1e-12, 1.0 - 1e-12)
        value = float(-np.mean(y * np.log(t) + (1.0 - y) * np.log(1.0 - t)))
        grad_t = (-(y / t) + (1.0 - y) / (1.0 - t)) / len(y)
        return value, backward(arch, w, trace, grad_t[:, None])

    best = np.inf
    for seed in np.random.SeedSequence(7).spawn(10):
        w0 = arch.init_weights(np.random.default_rng(seed))
        w, _ = minimize(objective, w0, TrainConfig(max_iterations=500, gradient_tolerance=1e-10))
        best = min(best, objective(w)[0])
        if best < 0.05:
            break
    assert best < 0.05

    elapsed = time.perf_counter() - started
    assert elapsed < 60.0
    report(7, f"optimizer sanity in {elapsed:.1f}s")


def test_criterion_8_experiment_orderings():
    started = time.perf_counter()
    stations = generate_synthetic_stations(260, seed=7, noise_level=1.0)
    plan = SelectionPlan(hidden_sizes=(3, 10, 30), split=(140, 60, 60))
    config = TrainConfig(
        max_iterations=300,
        restarts=5,
        seed=20240,
        early_stopping=EarlyStopping(patience=50),
    )
    methods = ("full24", "mean2", "mean_sd4", "min_max4")
    experiment = run_full_experiment(stations, methods, plan, config)
    rows = {r.method: r for r in experiment.rows}

    # (a) means alone lose to both richer codings, on each coordinate
    for coordinate in ("longitude", "latitude"):
        assert rows["mean2"].mae[coordinate] > rows["mean_sd4"].mae[coordinate]
        assert rows["mean2"].mae[coordinate] > rows["min_max4"].mae[coordinate]

    # (b) latitude is the easier coordinate for every coding
    for method in methods:
        assert rows[method].mae["latitude"] < rows[method].mae["longitude"]

    # (c) raw-months inputs are the most fragile under half-degradation
    test_stations = [stations[i] for i in rows["full24"].test_indices]
    study = run_degradation_study(rows, test_stations, levels=("none", "half"))
    for coordinate in ("longitude", "latitude"):
        table = study.mae_table(coordinate)
        relative = {m: table[m]["half"] / table[m]["none"] for m in methods}
        assert relative["full24"] > relative["mean_sd4"], relative
        assert relative["full24"] > relative["min_max4"], relative

    elapsed = time.perf_counter() - started
    assert elapsed < 600.0
    report(8, f"experiment orderings in {elapsed:.0f}s")


def test_criterion_9_determinism(tmp_path):
    args = [
        "degrade-study",
        "--n", "60",
        "--seed", "4",
        "--methods", "full24,mean_sd4",
        "--sizes", "3",
        "--split", "30,15,15",
        "--restarts", "2",
        "--max-iterations", "80",
        "--levels", "none,half",
    ]
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert cli_main(args + ["--out", str(out_a)]) == 0
    assert cli_main(args + ["--out", str(out_b)]) == 0
    compared = 0
    for path in sorted(out_a.iterdir()):
        if path.name == "manifest.json":
            continue  # records the differing --out argument
        assert path.read_bytes() == (out_b / path.name).read_bytes(), path.name
        compared += 1
    assert compared >= 3

    csv_a = tmp_path / "s1.csv"
    csv_b = tmp_path / "s2.csv"
    assert cli_main(["gen-climate", "--n", "40", "--seed", "7", "--out", str(csv_a)]) == 0
    assert cli_main(["gen-climate", "--n", "40", "--seed", "7", "--out", str(csv_b)]) == 0
    assert csv_a.read_bytes() == csv_b.read_bytes()
    report(9, "seeded reruns byte-identical")
