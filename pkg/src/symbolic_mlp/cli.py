"""Command-line entry point.

Subcommands cover the whole workflow: ``recode`` (symbolic JSON to a
numeric matrix plus column-group metadata), ``train``, ``evaluate``,
``select`` (hidden-size sweep and optional cross-validation), ``impute``,
``gen-climate`` (synthetic station CSV), ``experiment`` (the full
multi-coding location study), and ``degrade-study`` (robustness against
regularly missing months).

Every command accepts ``--seed``, resolves options as flags > config file
> defaults, and writes a ``manifest.json`` recording input hashes, the
effective-config hash, and library versions. Reports contain no
timestamps, so a rerun with the same seed and config is byte-identical.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import platform
import sys
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .climate import (
    CODING_METHODS,
    DEGRADATION_MISSING_SLOTS,
    generate_synthetic_stations,
    load_stations,
    predictions_to_csv,
    run_degradation_study,
    run_full_experiment,
    save_stations,
)
from .imputation import impute_knn, impute_mean
from .mlp import (
    Activation,
    MlpArchitecture,
    architecture_from_dict,
    architecture_to_dict,
)
from .model_selection import SelectionPlan, k_fold_cv, split_indices, sweep
from .objective import DecayPolicy, EncodedDataset, mean_composite_loss
from .recoding import (
    EncodedMatrix,
    Standardizer,
    build_output_blocks,
    encode_table,
    encode_targets,
    fit_standardizer,
)
from .table_io import load_table
from .training import EarlyStopping, TrainConfig, train


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _json_dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_manifest(
    out_dir: Path,
    command: str,
    arguments: Mapping[str, Any],
    input_paths: Sequence[str | Path],
    effective_config: Mapping[str, Any],
) -> None:
    manifest = {
        "command": command,
        "arguments": {
            k: v for k, v in sorted(arguments.items()) if not callable(v)
        },
        "inputs": {
            str(p): _sha256(Path(p).read_bytes()) for p in sorted(map(str, input_paths))
        },
        "config_hash": _sha256(_json_dumps(effective_config).encode()),
        "versions": {
            "symbolic-mlp": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    (out_dir / "manifest.json").write_text(_json_dumps(manifest))


def _load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _train_config_from(config: Mapping[str, Any], seed: int | None, restarts: int | None) -> TrainConfig:
    decay = None
    decay_cfg = config.get("decay")
    if decay_cfg:
        if "lambda_per_layer" in decay_cfg:
            decay = DecayPolicy(tuple(decay_cfg["lambda_per_layer"]))
        else:
            decay = DecayPolicy.uniform(float(decay_cfg.get("lambda", 0.0)))
    stopping_cfg = config.get("early_stopping", {})
    stopping = EarlyStopping(
        enabled=bool(stopping_cfg.get("enabled", True)),
        patience=int(stopping_cfg.get("patience", 50)),
    )
    block_weights = config.get("block_weights")
    return TrainConfig(
        optimizer=str(config.get("optimizer", "conjugate_gradient")),
        max_iterations=int(config.get("max_iterations", 300)),
        gradient_tolerance=float(config.get("gradient_tolerance", 1e-6)),
        restarts=int(restarts if restarts is not None else config.get("restarts", 1)),
        seed=int(seed if seed is not None else config.get("seed", 0)),
        decay=decay,
        early_stopping=stopping,
        block_weights=None if block_weights is None else tuple(block_weights),
    )


def _train_config_to_dict(config: TrainConfig) -> dict[str, Any]:
    return {
        "optimizer": config.optimizer,
        "max_iterations": config.max_iterations,
        "gradient_tolerance": config.gradient_tolerance,
        "restarts": config.restarts,
        "seed": config.seed,
        "decay": None if config.decay is None else list(config.decay.lambda_per_layer),
        "early_stopping": {
            "enabled": config.early_stopping.enabled,
            "patience": config.early_stopping.patience,
        },
        "block_weights": None
        if config.block_weights is None
        else list(config.block_weights),
    }


def _groups_to_json(matrix: EncodedMatrix) -> list[dict[str, Any]]:
    return [
        {
            "source_variable": g.source_variable,
            "start": g.start,
            "stop": g.stop,
            "decay_divisor": g.decay_divisor,
            "coding_tag": g.coding_tag.value,
            "mean": list(g.mean),
            "scale": list(g.scale),
        }
        for g in matrix.groups
    ]


def _matrix_to_csv(matrix: EncodedMatrix) -> str:
    names = []
    for g in matrix.groups:
        if g.width == 1:
            names.append(g.source_variable)
        else:
            names.extend(f"{g.source_variable}[{i}]" for i in range(g.width))
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(names)
    for row in matrix.values:
        writer.writerow([repr(float(v)) for v in row])
    return buffer.getvalue()


def _ensure_out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_recode(args: argparse.Namespace) -> int:
    table = load_table(args.data)
    modes = _load_config(args.modes) if args.modes else None
    matrix = encode_table(table, modes)
    if args.standardize:
        matrix = fit_standardizer(matrix).apply(matrix)
    out = _ensure_out_dir(args.out)
    (out / "matrix.csv").write_text(_matrix_to_csv(matrix))
    (out / "groups.json").write_text(_json_dumps(_groups_to_json(matrix)))
    inputs = [args.data] + ([args.modes] if args.modes else [])
    write_manifest(
        out,
        "recode",
        {"data": args.data, "modes": args.modes, "standardize": args.standardize},
        inputs,
        {"modes": modes or {}, "standardize": args.standardize},
    )
    print(f"wrote {out / 'matrix.csv'} ({matrix.n_rows} rows x {matrix.n_columns} columns)")
    return 0


def _prepare_supervised(config: Mapping[str, Any], seed: int):
    """Load, split, encode, and standardize the dataset named by a config."""
    table = load_table(config["data"])
    split = tuple(config.get("split", (0.5, 0.25, 0.25)))
    idx_train, idx_val, idx_test = split_indices(table.n_rows, split, seed)
    t_train = table.subset(idx_train)

    modes = config.get("coding_modes")
    train_matrix = encode_table(t_train, modes)
    standardizer = fit_standardizer(train_matrix)
    train_matrix = standardizer.apply(train_matrix)

    blocks = build_output_blocks(t_train, config.get("block_kinds"))

    def encode_split(indices) -> EncodedDataset:
        part = table.subset(indices)
        inputs = standardizer.transform(encode_table(part, modes).values)
        targets, micro = encode_targets(part, blocks)
        return EncodedDataset(
            inputs=inputs, blocks=blocks, targets=targets, micro_counts=micro
        )

    return (
        table,
        standardizer,
        train_matrix,
        blocks,
        encode_split(idx_train),
        encode_split(idx_val),
        encode_split(idx_test) if len(idx_test) else None,
    )


def _build_arch(config: Mapping[str, Any], input_dim: int, blocks, hidden_size: int | None = None):
    hidden = config.get("hidden", [5])
    if isinstance(hidden, int):
        hidden = [hidden]
    if hidden_size is not None:
        hidden = [hidden_size]
    activation = Activation(config.get("hidden_activation", "tanh"))
    return MlpArchitecture(
        input_dim=input_dim,
        hidden=tuple((int(h), activation) for h in hidden),
        output_blocks=blocks,
    )


def _cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    train_config = _train_config_from(config, args.seed, args.restarts)
    (
        _table,
        standardizer,
        train_matrix,
        blocks,
        train_set,
        val_set,
        test_set,
    ) = _prepare_supervised(config, train_config.seed)

    arch = _build_arch(config, train_matrix.n_columns, blocks)
    report = train(arch, train_set, val_set, train_config, train_matrix.groups)

    out = _ensure_out_dir(args.out)
    fit = report.to_dict()
    if test_set is not None:
        fit["test_error"] = mean_composite_loss(
            arch, report.best_weights, test_set, train_config.block_weights
        )
    (out / "fit.json").write_text(_json_dumps(fit))
    bundle = {
        "architecture": architecture_to_dict(arch),
        "weights": [float(v) for v in report.best_weights],
        "input_standardizer": {
            "mean": [float(v) for v in standardizer.mean],
            "scale": [float(v) for v in standardizer.scale],
        },
        "coding_modes": config.get("coding_modes") or {},
        "block_kinds": config.get("block_kinds") or {},
    }
    (out / "model.json").write_text(_json_dumps(bundle))
    effective = {"train": _train_config_to_dict(train_config), "config": dict(config)}
    write_manifest(out, "train", vars(args), [config["data"], args.config], effective)
    print(
        f"trained {arch.layer_sizes} net: best validation error "
        f"{report.best_validation_error:.6g} (restart {report.best_restart}, "
        f"iteration {report.best_iteration})"
    )
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    bundle = json.loads(Path(args.model).read_text())
    arch = architecture_from_dict(bundle["architecture"])
    weights = np.array([float(v) for v in bundle["weights"]])
    standardizer = Standardizer(
        mean=np.array(bundle["input_standardizer"]["mean"]),
        scale=np.array(bundle["input_standardizer"]["scale"]),
    )
    table = load_table(args.data)
    modes = bundle.get("coding_modes") or None
    inputs = standardizer.transform(encode_table(table, modes).values)
    blocks = arch.output_blocks
    targets, micro = encode_targets(table, blocks)
    dataset = EncodedDataset(inputs=inputs, blocks=blocks, targets=targets, micro_counts=micro)
    metrics = {
        "mean_composite_loss": mean_composite_loss(arch, weights, dataset),
        "n_rows": dataset.n_rows,
    }
    out = _ensure_out_dir(args.out)
    (out / "metrics.json").write_text(_json_dumps(metrics))
    write_manifest(
        out, "evaluate", vars(args), [args.model, args.data], {"model": args.model}
    )
    print(f"mean composite loss: {metrics['mean_composite_loss']:.6g}")
    return 0


def _cmd_select(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    train_config = _train_config_from(config, args.seed, args.restarts)
    (
        _table,
        _standardizer,
        train_matrix,
        blocks,
        train_set,
        val_set,
        _test_set,
    ) = _prepare_supervised(config, train_config.seed)

    sizes = tuple(config.get("hidden_sizes", SelectionPlan().hidden_sizes))
    plan = SelectionPlan(hidden_sizes=sizes, split=tuple(config.get("split", (0.5, 0.25, 0.25))))

    def build(size: int) -> MlpArchitecture:
        return _build_arch(config, train_matrix.n_columns, blocks, hidden_size=size)

    report = sweep(build, train_set, val_set, plan, train_config, train_matrix.groups)
    result = report.to_dict()

    folds = config.get("cv_folds")
    if folds:
        merged = EncodedDataset(
            inputs=np.vstack([train_set.inputs, val_set.inputs]),
            blocks=blocks,
            targets=tuple(
                np.vstack([a, b]) for a, b in zip(train_set.targets, val_set.targets)
            ),
        )
        cv = k_fold_cv(build(report.winner_size), merged, int(folds), train_config)
        result["cross_validation"] = cv.to_dict()

    out = _ensure_out_dir(args.out)
    (out / "selection.json").write_text(_json_dumps(result))
    effective = {"train": _train_config_to_dict(train_config), "config": dict(config)}
    write_manifest(out, "select", vars(args), [config["data"], args.config], effective)
    print(f"winner: {report.winner_size} hidden neurons")
    return 0


def _read_numeric_csv(path: str) -> tuple[list[str] | None, np.ndarray]:
    rows = [r for r in csv.reader(io.StringIO(Path(path).read_text())) if r]
    if not rows:
        raise ValueError(f"{path}: empty CSV")

    def parse(cell: str) -> float:
        cell = cell.strip()
        return float("nan") if not cell or cell.lower() in {"nan", "na"} else float(cell)

    try:
        first = [parse(c) for c in rows[0]]
        header = None
        data = [first]
        start = 1
    except ValueError:
        header = rows[0]
        data = []
        start = 1
    data.extend([parse(c) for c in row] for row in rows[start:])
    return header, np.array(data, dtype=float)


def _cmd_impute(args: argparse.Namespace) -> int:
    header, matrix = _read_numeric_csv(args.data)
    filled = impute_mean(matrix) if args.method == "mean" else impute_knn(matrix, args.k)
    out = _ensure_out_dir(args.out)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    for row in filled:
        writer.writerow([repr(float(v)) for v in row])
    (out / "imputed.csv").write_text(buffer.getvalue())
    write_manifest(
        out,
        "impute",
        vars(args),
        [args.data],
        {"method": args.method, "k": args.k},
    )
    print(f"imputed {int(np.isnan(matrix).sum())} cells")
    return 0


def _cmd_gen_climate(args: argparse.Namespace) -> int:
    stations = generate_synthetic_stations(args.n, args.seed, args.noise)
    out_path = Path(args.out)
    if out_path.suffix == ".csv":
        out_path.parent.mkdir(parents=True, exist_ok=True)
        save_stations(stations, out_path)
        manifest_dir = out_path.parent
    else:
        manifest_dir = _ensure_out_dir(args.out)
        out_path = manifest_dir / "stations.csv"
        save_stations(stations, out_path)
    write_manifest(
        manifest_dir,
        "gen-climate",
        vars(args),
        [],
        {"n": args.n, "seed": args.seed, "noise": args.noise},
    )
    print(f"wrote {out_path} ({len(stations)} stations)")
    return 0


def _experiment_inputs(args: argparse.Namespace):
    if args.stations:
        stations = load_stations(args.stations)
        inputs = [args.stations]
    else:
        stations = generate_synthetic_stations(args.n, args.seed, args.noise)
        inputs = []
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    sizes = tuple(int(s) for s in args.sizes.split(","))
    split = tuple(float(s) for s in args.split.split(","))
    plan = SelectionPlan(hidden_sizes=sizes, split=split)
    config = TrainConfig(
        max_iterations=args.max_iterations,
        restarts=args.restarts,
        seed=args.seed,
        early_stopping=EarlyStopping(patience=args.patience),
    )
    return stations, methods, plan, config, inputs


def _experiment_effective(args: argparse.Namespace, methods, plan, config) -> dict[str, Any]:
    return {
        "methods": methods,
        "hidden_sizes": list(plan.hidden_sizes),
        "split": list(plan.split),
        "train": _train_config_to_dict(config),
        "noise": args.noise,
        "n": args.n,
    }


def _cmd_experiment(args: argparse.Namespace) -> int:
    stations, methods, plan, config, inputs = _experiment_inputs(args)
    report = run_full_experiment(stations, methods, plan, config, jobs=args.jobs)
    out = _ensure_out_dir(args.out)
    (out / "report.json").write_text(_json_dumps(report.to_dict()))
    (out / "table.txt").write_text(report.to_text_table())
    for row in report.rows:
        (out / f"predictions_{row.method}.csv").write_text(
            predictions_to_csv(row, stations)
        )
    write_manifest(
        out, "experiment", vars(args), inputs, _experiment_effective(args, methods, plan, config)
    )
    print(report.to_text_table(), end="")
    return 0


def _cmd_degrade_study(args: argparse.Namespace) -> int:
    stations, methods, plan, config, inputs = _experiment_inputs(args)
    levels = [l.strip() for l in args.levels.split(",") if l.strip()]
    experiment = run_full_experiment(stations, methods, plan, config, jobs=args.jobs)
    test_stations = [stations[i] for i in experiment.rows[0].test_indices]
    study = run_degradation_study(
        {r.method: r for r in experiment.rows}, test_stations, levels
    )
    out = _ensure_out_dir(args.out)
    (out / "experiment.json").write_text(_json_dumps(experiment.to_dict()))
    (out / "robustness.json").write_text(_json_dumps(study.to_dict()))
    (out / "robustness.csv").write_text(study.to_csv())
    effective = _experiment_effective(args, methods, plan, config)
    effective["levels"] = levels
    write_manifest(out, "degrade-study", vars(args), inputs, effective)
    print((out / "robustness.csv").read_text(), end="")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--stations", help="station CSV (default: generate synthetically)")
    parser.add_argument("--n", type=int, default=260, help="synthetic station count")
    parser.add_argument("--noise", type=float, default=1.0, help="synthetic noise level")
    parser.add_argument(
        "--methods", default=",".join(CODING_METHODS), help="comma-separated coding methods"
    )
    parser.add_argument("--sizes", default="3,10,30", help="comma-separated hidden sizes")
    parser.add_argument(
        "--full", action="store_true", help="use the full sweep (8 sizes, 10 restarts)"
    )
    parser.add_argument("--split", default="140,60,60", help="train,validation,test")
    parser.add_argument("--restarts", type=int, default=5)
    parser.add_argument("--max-iterations", type=int, default=300)
    parser.add_argument("--patience", type=int, default=50)
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for methods")
    parser.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symbolic-mlp",
        description="Train multilayer perceptrons on symbolic data via numeric recoding.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recode", help="encode a symbolic JSON table to a numeric matrix")
    p.add_argument("--data", required=True, help="symbolic table JSON")
    p.add_argument("--modes", help="JSON map of variable name to coding mode")
    p.add_argument("--standardize", action="store_true", help="center and scale columns")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_recode)

    p = sub.add_parser("train", help="fit one architecture from a config JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--restarts", type=int, help="override the config restart count")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("evaluate", help="score a saved model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("select", help="hidden-size sweep and optional k-fold CV")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_select)

    p = sub.add_parser("impute", help="fill missing entries of a numeric CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=("mean", "knn"), default="mean")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_impute)

    p = sub.add_parser("gen-climate", help="generate synthetic station CSV")
    p.add_argument("--n", type=int, default=260)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV path or output directory")
    p.set_defaults(handler=_cmd_gen_climate)

    p = sub.add_parser("experiment", help="full multi-coding location study")
    _add_experiment_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_experiment)

    p = sub.add_parser("degrade-study", help="robustness against missing months")
    _add_experiment_flags(p)
    p.add_argument(
        "--levels",
        default="none," + ",".join(DEGRADATION_MISSING_SLOTS),
        help="comma-separated degradation levels",
    )
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_degrade_study)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "full", False):
        args.sizes = ",".join(str(s) for s in SelectionPlan().hidden_sizes)
        args.restarts = 10
    try:
        return args.handler(args)
    except Exception as exc:  # diagnostics to stderr, exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
