"""Gradient-based minimization with restarts and early stopping.

The default optimizer is Polak-Ribiere conjugate gradient with a
direction reset every ``dim`` iterations and a backtracking line search
enforcing the Armijo sufficient-decrease condition (``c = 1e-4``). The
line search additionally refines accepted steps by one quadratic
interpolation, which lands on the exact line minimum whenever the
objective is quadratic along the search direction. Dense BFGS and plain
steepest descent are available under the same interface.

``train`` runs the optimizer from several random starting points,
monitors validation error after every iteration, and returns the weights
from the iteration (and restart) where validation error was smallest.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .mlp import MlpArchitecture
from .objective import (
    DecayPolicy,
    EncodedDataset,
    Objective,
    make_objective,
    mean_composite_loss,
)
from .recoding import ColumnGroup
from .symbolic import SchemaError

ARMIJO_C = 1e-4
_MIN_STEP = 1e-20


class TrainingError(RuntimeError):
    """No restart produced a usable model."""


@dataclass(frozen=True)
class EarlyStopping:
    enabled: bool = True
    patience: int = 50

    def __post_init__(self) -> None:
        if self.patience < 1:
            raise SchemaError("patience must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "conjugate_gradient"
    max_iterations: int = 300
    gradient_tolerance: float = 1e-6
    restarts: int = 1
    seed: int = 0
    decay: DecayPolicy | None = None
    early_stopping: EarlyStopping = field(default_factory=EarlyStopping)
    block_weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.optimizer not in ("conjugate_gradient", "bfgs", "gradient_descent"):
            raise SchemaError(f"unknown optimizer {self.optimizer!r}")
        if self.max_iterations < 1:
            raise SchemaError("max_iterations must be >= 1")
        if self.gradient_tolerance <= 0:
            raise SchemaError("gradient tolerance must be > 0")
        if self.restarts < 1:
            raise SchemaError("restarts must be >= 1")


@dataclass
class MinimizeTrace:
    values: list[float]
    gradient_norms: list[float]
    iterations: int
    stop_reason: str


# Callback signature: (iteration, weights, objective value) -> stop flag.
IterationCallback = Callable[[int, np.ndarray, float], bool]


def _line_search(
    objective: Objective,
    w: np.ndarray,
    f0: float,
    g0: np.ndarray,
    direction: np.ndarray,
    c: float = ARMIJO_C,
) -> tuple[float, np.ndarray, float, np.ndarray] | None:
    """Backtracking Armijo search along ``direction`` with quadratic refinement.

    Returns ``(alpha, w_new, f_new, g_new)`` or ``None`` when no acceptable
    step exists (including persistently non-finite objective values).
    """
    dphi0 = float(g0 @ direction)
    if not np.isfinite(dphi0) or dphi0 >= 0.0:
        return None
    alpha = 1.0
    for _ in range(60):
        candidate = w + alpha * direction
        f1, g1 = objective(candidate)
        if np.isfinite(f1) and f1 <= f0 + c * alpha * dphi0:
            denom = 2.0 * (f1 - f0 - dphi0 * alpha)
            if denom > 0.0:
                refined = -dphi0 * alpha * alpha / denom
                if 0.0 < refined < 10.0 * alpha and not np.isclose(refined, alpha):
                    w_ref = w + refined * direction
                    f_ref, g_ref = objective(w_ref)
                    if (
                        np.isfinite(f_ref)
                        and f_ref < f1
                        and f_ref <= f0 + c * refined * dphi0
                    ):
                        return refined, w_ref, f_ref, g_ref
            return alpha, candidate, f1, g1
        if np.isfinite(f1):
            denom = 2.0 * (f1 - f0 - dphi0 * alpha)
            trial = -dphi0 * alpha * alpha / denom if denom > 0.0 else 0.5 * alpha
            alpha = float(np.clip(trial, 0.1 * alpha, 0.5 * alpha))
        else:
            alpha *= 0.5
        if alpha < _MIN_STEP:
            break
    return None


def minimize(
    objective: Objective,
    w0: np.ndarray,
    config: TrainConfig | None = None,
    callback: IterationCallback | None = None,
) -> tuple[np.ndarray, MinimizeTrace]:
    """Minimize a differentiable scalar function of the weight vector.

    Accepted objective values are monotone non-increasing. Stops when the
    gradient norm falls under the tolerance, the iteration cap is reached,
    the line search fails, or the callback requests a stop.
    """
    config = config or TrainConfig()
    w = np.array(w0, dtype=float)
    dim = w.size
    f, g = objective(w)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise TrainingError("objective is not finite at the starting point")

    values = [f]
    gnorms = [float(np.linalg.norm(g))]
    trace = MinimizeTrace(values=values, gradient_norms=gnorms, iterations=0, stop_reason="")

    use_cg = config.optimizer == "conjugate_gradient"
    use_bfgs = config.optimizer == "bfgs"
    direction = -g
    hessian_inv = np.eye(dim) if use_bfgs else None

    for k in range(1, config.max_iterations + 1):
        if gnorms[-1] <= config.gradient_tolerance:
            trace.stop_reason = "gradient_tolerance"
            return w, trace

        if use_bfgs:
            direction = -(hessian_inv @ g)
        elif not use_cg:
            direction = -g
        if use_cg and (k - 1) % dim == 0 and k > 1:
            direction = -g  # periodic restart keeps directions conjugate-ish
        if float(g @ direction) >= 0.0:
            direction = -g

        step = _line_search(objective, w, f, g, direction)
        if step is None:
            trace.stop_reason = "line_search_failure"
            return w, trace
        _, w_new, f_new, g_new = step

        if use_cg:
            beta = max(0.0, float(g_new @ (g_new - g)) / float(g @ g))
            direction = -g_new + beta * direction
        elif use_bfgs:
            s = w_new - w
            y = g_new - g
            sy = float(s @ y)
            if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
                rho = 1.0 / sy
                i_mat = np.eye(dim)
                left = i_mat - rho * np.outer(s, y)
                hessian_inv = left @ hessian_inv @ left.T + rho * np.outer(s, s)

        w, f, g = w_new, f_new, g_new
        values.append(f)
        gnorms.append(float(np.linalg.norm(g)))
        trace.iterations = k
        if callback is not None and callback(k, w, f):
            trace.stop_reason = "callback"
            return w, trace

    trace.stop_reason = (
        "gradient_tolerance" if gnorms[-1] <= config.gradient_tolerance else "max_iterations"
    )
    return w, trace


@dataclass
class FitReport:
    """Outcome of one multi-restart training run."""

    best_weights: np.ndarray
    train_curve: tuple[float, ...]
    validation_curve: tuple[float, ...]
    stopping_reason: str
    restart_final_errors: tuple[float, ...]
    best_restart: int
    best_iteration: int
    best_validation_error: float
    wall_time: float

    def to_dict(self, include_timing: bool = False) -> dict[str, Any]:
        """JSON-safe view; timing is excluded by default so that reruns of
        the same seed/config serialize byte-identically."""
        out: dict[str, Any] = {
            "best_weights": [float(v) for v in self.best_weights],
            "train_curve": [float(v) for v in self.train_curve],
            "validation_curve": [float(v) for v in self.validation_curve],
            "stopping_reason": self.stopping_reason,
            "restart_final_errors": [float(v) for v in self.restart_final_errors],
            "best_restart": self.best_restart,
            "best_iteration": self.best_iteration,
            "best_validation_error": float(self.best_validation_error),
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out


@dataclass
class _RestartState:
    best_value: float
    best_weights: np.ndarray
    best_iteration: int
    since_improvement: int = 0
    train_curve: list[float] = field(default_factory=list)
    validation_curve: list[float] = field(default_factory=list)


def train(
    arch: MlpArchitecture,
    train_set: EncodedDataset,
    validation_set: EncodedDataset,
    config: TrainConfig | None = None,
    input_groups: Sequence[ColumnGroup] | None = None,
) -> FitReport:
    """Fit ``arch`` with seeded random restarts and validation-based early stopping.

    Each restart records validation error after every iteration (including
    the starting point) and keeps the weights from its best iteration; the
    returned report carries the best restart's snapshot and curves. Both
    datasets must already be encoded and share the training standardizer.
    """
    config = config or TrainConfig()
    if train_set.n_rows == 0 or validation_set.n_rows == 0:
        raise SchemaError("training and validation sets must be non-empty")

    objective = make_objective(
        arch,
        train_set,
        decay=config.decay,
        input_groups=input_groups,
        block_weights=config.block_weights,
    )

    def validation_error(w: np.ndarray) -> float:
        return mean_composite_loss(arch, w, validation_set, config.block_weights)

    started = time.perf_counter()
    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
    states: list[_RestartState | None] = []
    reasons: list[str] = []
    failures: list[str] = []

    for seed in seeds:
        rng = np.random.default_rng(seed)
        w0 = arch.init_weights(rng)
        try:
            f0, _ = objective(w0)
        except FloatingPointError:
            f0 = np.nan
        if not np.isfinite(f0):
            states.append(None)
            reasons.append("non_finite_start")
            failures.append("objective not finite at the starting point")
            continue
        v0 = validation_error(w0)
        state = _RestartState(
            best_value=v0, best_weights=w0.copy(), best_iteration=0
        )
        state.train_curve.append(f0)
        state.validation_curve.append(v0)

        def on_iteration(k: int, w: np.ndarray, f: float) -> bool:
            v = validation_error(w)
            state.train_curve.append(f)
            state.validation_curve.append(v)
            if v < state.best_value:
                state.best_value = v
                state.best_weights = w.copy()
                state.best_iteration = k
                state.since_improvement = 0
            else:
                state.since_improvement += 1
                if (
                    config.early_stopping.enabled
                    and state.since_improvement >= config.early_stopping.patience
                ):
                    return True
            return False

        _, trace = minimize(objective, w0, config, callback=on_iteration)
        states.append(state)
        reasons.append(
            "early_stopping" if trace.stop_reason == "callback" else trace.stop_reason
        )

    usable = [(i, s) for i, s in enumerate(states) if s is not None]
    if not usable:
        raise TrainingError("every restart failed: " + "; ".join(failures))
    best_index, best_state = min(usable, key=lambda item: (item[1].best_value, item[0]))

    return FitReport(
        best_weights=best_state.best_weights,
        train_curve=tuple(best_state.train_curve),
        validation_curve=tuple(best_state.validation_curve),
        stopping_reason=reasons[best_index],
        restart_final_errors=tuple(
            float("nan") if s is None else s.best_value for s in states
        ),
        best_restart=best_index,
        best_iteration=best_state.best_iteration,
        best_validation_error=best_state.best_value,
        wall_time=time.perf_counter() - started,
    )
