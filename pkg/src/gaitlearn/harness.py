"""Experiment orchestration: runs, metrics, Monte-Carlo averaging, file output.

Every run type (open-loop, filter tracking, training, policy evaluation)
lives behind one function here; the CLI is a thin wrapper.  Output files are
CSV time series plus a summary.json that embeds the fully resolved
configuration and seed, so a result can always be reproduced from its own
summary.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import control, qlearn
from .config import ExperimentConfig, config_dict
from .dynamics import DivergenceError, SimState, Trajectory, simulate, step
from .phase import RadiusEstimate, estimate_radius, true_phase
from .rng import rng_streams
from .sensor import observe_increment

TWO_PI = 2.0 * math.pi


@dataclass
class RunMetrics:
    """Per-run summary of a training run."""

    seed: int
    e_per_period: np.ndarray
    dq: float
    circ_rmse: float
    final_w: np.ndarray
    degenerate_steps: int
    wall_time: float


@dataclass
class MonteCarloResult:
    metrics: List[RunMetrics]
    failures: List[Tuple[int, int, str]]  # (run index, seed, message)
    mean_e: np.ndarray
    var_e: np.ndarray
    std_e: np.ndarray
    mean_dq: float
    dominance_fraction: float
    first_trace: Optional["qlearn.TrainResult"] = None  # full trace of run 0


def period_error(errors: np.ndarray, dt: float, period: float) -> np.ndarray:
    """Per-period mean of the squared residual (left-Riemann time average).

    Steps are bucketed by the period containing their start time; a partial
    trailing period is dropped.
    """
    if errors.size * dt < period:
        raise ValueError("series shorter than one period")
    idx = np.floor(np.arange(errors.size) * dt / period).astype(int)
    n_full = int(errors.size * dt / period + 1e-9)
    out = np.empty(n_full)
    sq = np.asarray(errors, dtype=float) ** 2
    for j in range(n_full):
        out[j] = np.sum(sq[idx == j]) * dt / period
    return out


def circular_rmse(a: np.ndarray, b: np.ndarray) -> float:
    """Root-mean-square angular distance, differences wrapped to [-pi, pi]."""
    d = np.mod(np.asarray(a) - np.asarray(b) + np.pi, TWO_PI) - np.pi
    return float(np.sqrt(np.mean(d * d)))


def first_harmonic_dominant(w: np.ndarray, factor: float = 3.0) -> bool:
    """Whether the u*cos weight dominates the other control weights."""
    return abs(w[4]) > factor * max(abs(w[5]), abs(w[6]), abs(w[7]))


def simulate_with_observations(cfg: ExperimentConfig, periods: float,
                               seed: Optional[int] = None) -> Dict[str, np.ndarray]:
    """Uncontrolled run that also records the noisy observation rate."""
    phys = cfg.physical
    sensor_cfg = cfg.sensor
    streams = rng_streams(cfg.run.seed if seed is None else seed)
    dt = sensor_cfg.dt
    n = int(round(periods * phys.period / dt))
    s = SimState(0.0, 0.0, 0.0, 0.0)
    out = {name: np.empty(n) for name in ("t", "x", "x_dot", "q", "y")}
    for k in range(n):
        obs = observe_increment(s, sensor_cfg, streams.sensor)
        s = step(s, 0.0, phys, dt)
        out["t"][k] = s.t
        out["x"][k] = s.x
        out["x_dot"][k] = s.x_dot
        out["q"][k] = s.q
        out["y"][k] = obs.y
    return out


def fit_phase_run(cfg: ExperimentConfig, periods: float = 50.0) -> Tuple[RadiusEstimate, Trajectory]:
    """Fit the orbit radius from a fresh uncontrolled run."""
    traj = simulate(cfg.physical, t_end=periods * cfg.period, dt=cfg.learn.dt)
    return estimate_radius(traj, cfg.physical.omega0), traj


def filter_metrics(cfg: ExperimentConfig, series: Dict[str, np.ndarray],
                   skip_periods: float = 10.0) -> Dict[str, float]:
    """Tracking quality of a closed-loop series after a settling window."""
    pm = cfg.phase_model
    mask = series["t"] >= skip_periods * cfg.period
    theta_true = true_phase(series["x"][mask], series["x_dot"][mask], pm, warn=False)
    return {
        "circ_rmse": circular_rmse(series["theta_hat"][mask], theta_true),
        "mean_resultant": float(np.mean(series["resultant"][mask])),
    }


def train_run(cfg: ExperimentConfig, run_index: int = 0) -> Tuple[RunMetrics, qlearn.TrainResult]:
    """One training run; the run seed is the base seed plus the run index."""
    seed = cfg.run.seed + run_index
    t0 = time.perf_counter()
    result = qlearn.train(cfg.physical, cfg.phase_model, cfg.sensor, cfg.filter,
                          cfg.learn, seed)
    wall = time.perf_counter() - t0
    e_j = period_error(result.bellman, cfg.learn.dt, cfg.period)
    skip = min(10.0, cfg.learn.horizon_periods / 2.0)
    mask = result.trace["t"] >= skip * cfg.period
    theta_true = true_phase(result.trace["x"][mask], result.trace["x_dot"][mask],
                            cfg.phase_model, warn=False)
    metrics = RunMetrics(
        seed=seed,
        e_per_period=e_j,
        dq=float(result.trace["q"][-1]),
        circ_rmse=circular_rmse(result.trace["theta_hat"][mask], theta_true),
        final_w=result.w,
        degenerate_steps=result.degenerate_steps,
        wall_time=wall,
    )
    return metrics, result


def _mc_worker(args: Tuple[ExperimentConfig, int]) -> Tuple[Optional[RunMetrics], str]:
    cfg, run_index = args
    try:
        return train_run(cfg, run_index)[0], ""
    except DivergenceError as exc:
        return None, str(exc)


def monte_carlo(cfg: ExperimentConfig, runs: Optional[int] = None) -> MonteCarloResult:
    """Independently seeded training runs with a deterministic ordered reduction.

    A failed run (diverged weights) is recorded and excluded from the
    aggregates rather than silently dropped.
    """
    n_runs = cfg.run.runs if runs is None else runs
    if n_runs < 1:
        raise ValueError(f"runs must be >= 1, got {n_runs}")
    metrics: List[Optional[RunMetrics]] = [None] * n_runs
    failures: List[Tuple[int, int, str]] = []
    first_trace = None
    try:
        metrics[0], first_trace = train_run(cfg, 0)
    except DivergenceError as exc:
        failures.append((0, cfg.run.seed, str(exc)))
    if cfg.run.workers > 1 and n_runs > 2:
        with ProcessPoolExecutor(max_workers=min(cfg.run.workers, n_runs - 1)) as pool:
            args = [(cfg, i) for i in range(1, n_runs)]
            for i, (m, msg) in zip(range(1, n_runs), pool.map(_mc_worker, args)):
                metrics[i] = m
                if m is None:
                    failures.append((i, cfg.run.seed + i, msg))
    else:
        for i in range(1, n_runs):
            try:
                metrics[i] = train_run(cfg, i)[0]
            except DivergenceError as exc:
                failures.append((i, cfg.run.seed + i, str(exc)))
    good = [m for m in metrics if m is not None]
    if not good:
        raise RuntimeError(f"all {n_runs} runs failed: {failures}")
    e_stack = np.array([m.e_per_period for m in good])
    return MonteCarloResult(
        metrics=good,
        failures=failures,
        mean_e=e_stack.mean(axis=0),
        var_e=e_stack.var(axis=0),
        std_e=e_stack.std(axis=0),
        mean_dq=float(np.mean([m.dq for m in good])),
        dominance_fraction=float(np.mean([first_harmonic_dominant(m.final_w) for m in good])),
        first_trace=first_trace,
    )


def calibrated_policy(cfg: ExperimentConfig, w: np.ndarray) -> Tuple[control.PolicySpec, Dict[str, object]]:
    """Build the baseline policy spec, calibrating C when not given."""
    pol = cfg.policy
    info: Dict[str, object] = {"calibration": pol.calibration}
    if math.isfinite(pol.c):
        c = pol.c
        info["calibration"] = "configured"
    elif pol.calibration == "grid":
        c, table = control.calibrate_grid(pol.grid_c, cfg.physical, cfg.phase_model,
                                          cfg.sensor, cfg.filter, cfg.learn, cfg.run.seed,
                                          eval_periods=pol.eval_periods,
                                          warmup_periods=pol.warmup_periods)
        info["grid"] = table
    else:
        c = control.calibrate_first_harmonic(w, cfg.learn.epsilon)
    info["c"] = float(c)
    return control.PolicySpec(kind="analytic", c=float(c)), info


def evaluate_run(cfg: ExperimentConfig, spec: control.PolicySpec,
                 seed: Optional[int] = None) -> control.EvalResult:
    return control.evaluate_policy(
        spec, cfg.physical, cfg.phase_model, cfg.sensor, cfg.filter, cfg.learn,
        cfg.run.seed if seed is None else seed,
        eval_periods=cfg.policy.eval_periods,
        warmup_periods=cfg.policy.warmup_periods)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    denom = math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b)))
    if denom == 0.0:
        return float("nan")
    return float(np.dot(a, b)) / denom


# ---------------------------------------------------------------------------
# file emission

def write_csv(path: Path, columns: Dict[str, np.ndarray]) -> None:
    """Header row plus one row per step, floats at 17 significant digits."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    n_rows = len(arrays[0])
    for name, arr in zip(names, arrays):
        if len(arr) != n_rows:
            raise ValueError(f"column {name} has {len(arr)} rows, expected {n_rows}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(n_rows):
            fh.write(",".join(f"{float(arr[i]):.17g}" for arr in arrays) + "\n")


def write_summary(path: Path, cfg: ExperimentConfig, payload: Dict[str, object]) -> None:
    """summary.json with the resolved config embedded."""
    body = {"config": config_dict(cfg), **payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")
