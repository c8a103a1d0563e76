"""Control policies and the closed-loop evaluator.

Policies map the filter ensemble (and time) to the tail-extension input.
Besides the learned greedy policy this module carries the first-harmonic
baseline law u = epsilon*C*mean(cos theta_i), whose amplitude constant C is
calibrated either from trained weights or by a small grid search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .dynamics import PhysicalParams, SimState, step
from .fpf import FilterSettings, fpf_step, init_ensemble, phase_estimate
from .phase import PhaseModel, h_phase
from .qlearn import LearnConfig, exploration_input, greedy_u
from .rng import rng_streams
from .sensor import SensorConfig, observe_increment

POLICY_KINDS = ("zero", "exploration", "analytic", "learned")

# Actuator saturation: the tail extension must keep the physical length
# positive (1 + u > 0), so every policy output is clipped to this range
# before it reaches the simulator.  Well-trained policies stay far inside.
U_SAT = 0.9


@dataclass(frozen=True)
class PolicySpec:
    """One active policy: zero, exploration, analytic baseline, or learned."""

    kind: str = "zero"
    c: float = 0.0                      # analytic amplitude constant
    w: Optional[np.ndarray] = None      # learned weights, required for kind="learned"

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}, expected one of {POLICY_KINDS}")
        if not math.isfinite(self.c):
            raise ValueError(f"analytic constant must be finite, got {self.c}")
        if self.kind == "learned" and self.w is None:
            raise ValueError("learned policy needs a weight vector")


@dataclass
class EvalResult:
    """Outcome of a closed-loop run: net rotation, control effort, series."""

    dq: float
    control_energy: float
    series: Dict[str, np.ndarray]
    degenerate_steps: int
    q_warmup_end: float
    q_end: float


def analytic_control(theta: np.ndarray, epsilon: float, c: float) -> float:
    """First-harmonic baseline law: epsilon*C times the mean cosine of the phases."""
    return epsilon * c * float(np.mean(np.cos(theta)))


def calibrate_first_harmonic(w: np.ndarray, epsilon: float) -> float:
    """Amplitude constant that makes the baseline law the first-harmonic
    slice of the learned greedy policy (-w5/w9 times mean cosine)."""
    return -float(w[4]) / (epsilon * float(w[8]))


def policy_input(spec: PolicySpec, theta: np.ndarray, t: float,
                 phys: PhysicalParams, cfg: LearnConfig) -> float:
    if spec.kind == "zero":
        return 0.0
    if spec.kind == "exploration":
        u = exploration_input(t, phys.omega0, cfg.explore_amp)
    elif spec.kind == "analytic":
        u = analytic_control(theta, cfg.epsilon, spec.c)
    else:
        u = greedy_u(theta, spec.w)
    return float(np.clip(u, -U_SAT, U_SAT))


def evaluate_policy(spec: PolicySpec, phys: PhysicalParams, model: PhaseModel,
                    sensor_cfg: SensorConfig, filt: FilterSettings, cfg: LearnConfig,
                    seed: int, eval_periods: float = 20.0,
                    warmup_periods: float = 10.0) -> EvalResult:
    """Close the loop: simulator, sensor, filter, policy, one step at a time.

    The filter first locks on during a warm-up window with the input held at
    zero; the policy is then switched on.  Net rotation dq and the control
    energy integral are accounted over the post-warm-up window only.  Each
    recorded row holds the post-step state and filter summary together with
    the input applied during that step.
    """
    streams = rng_streams(seed)
    ens = init_ensemble(filt.n_particles, phys.omega0, filt.delta, streams.particles)
    s = SimState(0.0, 0.0, 0.0, 0.0)

    dt = cfg.dt
    n_warm = int(round(warmup_periods * phys.period / dt))
    n_eval = int(round(eval_periods * phys.period / dt))
    n = n_warm + n_eval

    def h(th: np.ndarray) -> np.ndarray:
        return h_phase(th, model)

    cols = ("t", "x", "x_dot", "q", "u", "y", "theta_hat", "resultant",
            "kappa1", "kappa2")
    series = {name: np.empty(n) for name in cols}

    degenerate = 0
    energy = 0.0
    q_warmup_end = s.q
    for k in range(n):
        warm = k < n_warm
        u_k = 0.0 if warm else policy_input(spec, ens.theta, s.t, phys, cfg)
        obs = observe_increment(s, sensor_cfg, streams.sensor)
        s = step(s, u_k, phys, dt)
        ens, g = fpf_step(ens, obs.dz, dt, sensor_cfg.sigma_w, h)
        degenerate += g.degenerate
        if not warm:
            energy += u_k * u_k / (2.0 * cfg.epsilon) * dt

        th_hat, resultant = phase_estimate(ens)
        series["t"][k] = s.t
        series["x"][k] = s.x
        series["x_dot"][k] = s.x_dot
        series["q"][k] = s.q
        series["u"][k] = u_k
        series["y"][k] = obs.y
        series["theta_hat"][k] = th_hat
        series["resultant"][k] = resultant
        series["kappa1"][k] = g.kappa1
        series["kappa2"][k] = g.kappa2
        if k == n_warm - 1:
            q_warmup_end = s.q

    return EvalResult(dq=s.q - q_warmup_end, control_energy=energy, series=series,
                      degenerate_steps=degenerate, q_warmup_end=q_warmup_end, q_end=s.q)


def calibrate_grid(c_values, phys: PhysicalParams, model: PhaseModel,
                   sensor_cfg: SensorConfig, filt: FilterSettings, cfg: LearnConfig,
                   seed: int, eval_periods: float = 20.0,
                   warmup_periods: float = 10.0) -> Tuple[float, List[Dict[str, float]]]:
    """Pick the baseline amplitude by maximizing |dq| minus control energy.

    Runs one closed-loop evaluation per candidate C; all candidates share
    the same seed so they see the same noise realization.
    """
    table: List[Dict[str, float]] = []
    best_c = 0.0
    best_score = -math.inf
    for c in c_values:
        res = evaluate_policy(PolicySpec(kind="analytic", c=float(c)), phys, model,
                              sensor_cfg, filt, cfg, seed,
                              eval_periods=eval_periods, warmup_periods=warmup_periods)
        score = abs(res.dq) - res.control_energy
        table.append({"c": float(c), "dq": res.dq,
                      "control_energy": res.control_energy, "score": score})
        if score > best_score:
            best_score = score
            best_c = float(c)
    return best_c, table
