"""Continuous-time Q-learning over the oscillator ensemble.

The Q-function analogue for a continuous-time discounted problem is the
Hamiltonian: running cost plus the generator applied to the value function.
It is approximated as a linear combination of 9 fixed basis functions of
(phase, control), averaged over the particle ensemble.  Because the basis
is quadratic in u with a positive leading weight, the minimizing control
and the minimized Hamiltonian have closed forms.  Weights are fitted to the
pointwise Bellman residual along a single exploration trajectory, by default
through a once-per-period least-squares solve, optionally by per-step
gradient descent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .dynamics import DivergenceError, PhysicalParams, SimState, step
from .fpf import FilterSettings, fpf_step, init_ensemble
from .phase import PhaseModel, h_phase
from .rng import rng_streams
from .sensor import SensorConfig, observe_increment

# Floor for the quadratic-control weight: keeps the closed-form minimizer
# well posed for the whole trajectory, not just at initialization.
W_MIN = 1e-3

# Abort threshold for runaway weights.
W_MAX = 1e6

# Relaxation bound for the residual-descent step.  One update multiplies the
# local residual by (1 - dt*alpha*|grad|^2); while the ensemble is still
# synchronizing, |grad|^2 spikes by the 1/dt noise of the generator finite
# difference and the bare product exceeds 2, which turns descent into
# amplification.  Capping the effective step at GRAD_CAP/|grad|^2 keeps the
# factor within (0, 1] without moving the fixed point; the cap is inactive
# for ordinary gradient magnitudes.
GRAD_CAP = 1.0

# Hard bound on the weight change of a single update, as a second safeguard
# against residual outliers.  Inactive for ordinary step sizes.
STEP_CAP = 0.05

# Candidate minimizers evaluated while assembling least-squares rows are
# clipped to this range; early in a run the transient weight estimate can
# produce absurd controls that would otherwise contaminate the statistics.
U_ROW_CAP = 2.0

UPDATE_RULES = ("lstsq", "semi_gradient", "residual")

N_BASIS = 9


@dataclass(frozen=True)
class LearnConfig:
    gamma: float = 1.0          # discount rate
    epsilon: float = 1.0        # control penalty (cost has u^2 / (2*epsilon))
    alpha: float = 0.5          # learning gain (0 disables learning entirely)
    explore_amp: float = 0.25   # amplitude of the exploration input
    dt: float = 0.01
    horizon_periods: float = 100.0
    # How the weights are fitted to the per-step Bellman residual:
    #   "lstsq"         - once per period, solve the accumulated least-squares
    #                     moment conditions for the residual (default; reaches
    #                     the data-limited estimate within the horizon)
    #   "semi_gradient" - per-step descent differentiating only the cost-
    #                     mismatch term (classic bootstrapped Q-learning)
    #   "residual"      - per-step descent on the full squared residual
    update_rule: str = "lstsq"
    # Samples from this initial window are recorded but not assimilated: the
    # particle ensemble is still synchronizing and its statistics slew at the
    # 1/dt noise scale, which would otherwise poison the fit.
    estimator_warmup_periods: float = 2.0
    # For the per-step rules, the gain ramps linearly from 0 to alpha over
    # this many periods to ride out the same synchronization window.  Set to
    # 0 for a constant gain from the first step.
    alpha_ramp_periods: float = 1.0

    def __post_init__(self) -> None:
        for name in ("gamma", "epsilon", "dt", "horizon_periods"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        for name in ("alpha", "explore_amp", "estimator_warmup_periods", "alpha_ramp_periods"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be non-negative, got {value!r}")
        if self.update_rule not in UPDATE_RULES:
            raise ValueError(f"unknown update_rule {self.update_rule!r}, "
                             f"expected one of {UPDATE_RULES}")


@dataclass
class TrainResult:
    """Final weights plus the per-step learning trace."""

    w: np.ndarray
    bellman: np.ndarray      # pointwise Bellman residual per step
    w_hist: np.ndarray       # weights after each update, shape (n_steps, 9)
    trace: Dict[str, np.ndarray]
    degenerate_steps: int


def basis(theta: float, u: float) -> np.ndarray:
    """The 9 basis functions of (theta, u), in fixed order.

    First and second Fourier harmonics, the same harmonics times u, and the
    quadratic control term u^2/2.
    """
    c = math.cos(theta)
    s = math.sin(theta)
    c2 = 2.0 * c * c - 1.0
    s2 = 2.0 * s * c
    return np.array([c, s, c2, s2, u * c, u * s, u * c2, u * s2, 0.5 * u * u])


def phase_moments(theta: np.ndarray) -> np.ndarray:
    """Ensemble means of (cos, sin, cos 2., sin 2.) over the particle phases."""
    c = np.cos(theta)
    s = np.sin(theta)
    return np.array([c.mean(), s.mean(), (2.0 * c * c - 1.0).mean(), (2.0 * s * c).mean()])


def _mean_basis(m: np.ndarray, u: float) -> np.ndarray:
    """Ensemble mean of the basis vector, from the phase moments."""
    out = np.empty(N_BASIS)
    out[0:4] = m
    out[4:8] = u * m
    out[8] = 0.5 * u * u
    return out


def _bias_term(m: np.ndarray, w: np.ndarray) -> float:
    return float(w[0] * m[0] + w[1] * m[1] + w[2] * m[2] + w[3] * m[3])


def _linear_term(m: np.ndarray, w: np.ndarray) -> float:
    return float(w[4] * m[0] + w[5] * m[1] + w[6] * m[2] + w[7] * m[3])


def q_value(theta: np.ndarray, u: float, w: np.ndarray) -> float:
    """Ensemble-averaged Hamiltonian approximation at control u."""
    m = phase_moments(theta)
    return _bias_term(m, w) + u * _linear_term(m, w) + 0.5 * u * u * float(w[8])


def greedy_u(theta: np.ndarray, w: np.ndarray) -> float:
    """Minimizing control of the quadratic-in-u Hamiltonian approximation."""
    return -_linear_term(phase_moments(theta), w) / float(w[8])


def q_min(theta: np.ndarray, w: np.ndarray) -> float:
    """Minimum over u of the Hamiltonian approximation, in closed form."""
    m = phase_moments(theta)
    lin = _linear_term(m, w)
    return _bias_term(m, w) - lin * lin / (2.0 * float(w[8]))


def _q_min_m(m: np.ndarray, w: np.ndarray) -> float:
    lin = _linear_term(m, w)
    return _bias_term(m, w) - lin * lin / (2.0 * float(w[8]))


def _bellman_m(m_k: np.ndarray, m_k1: np.ndarray, u_k: float, c_k: float,
               w: np.ndarray, dt: float, gamma: float) -> float:
    q_u = _bias_term(m_k, w) + u_k * _linear_term(m_k, w) + 0.5 * u_k * u_k * float(w[8])
    return (_q_min_m(m_k1, w) - _q_min_m(m_k, w)) / dt + gamma * (c_k - q_u)


def _grad_bellman_m(m_k: np.ndarray, m_k1: np.ndarray, u_k: float,
                    w: np.ndarray, dt: float, gamma: float) -> np.ndarray:
    # Gradient of the minimized Hamiltonian with the minimizer held fixed
    # (exact for the quadratic-in-u form).
    u_star_k = -_linear_term(m_k, w) / float(w[8])
    u_star_k1 = -_linear_term(m_k1, w) / float(w[8])
    grad = (_mean_basis(m_k1, u_star_k1) - _mean_basis(m_k, u_star_k)) / dt
    grad -= gamma * _mean_basis(m_k, u_k)
    return grad


def bellman_error(theta_k: np.ndarray, theta_k1: np.ndarray, u_k: float, c_k: float,
                  w: np.ndarray, dt: float, gamma: float) -> float:
    """Pointwise Bellman residual between two consecutive ensembles.

    Discrete-difference approximation of the generator acting on the
    minimized Hamiltonian, plus the discounted cost mismatch.
    """
    return _bellman_m(phase_moments(theta_k), phase_moments(theta_k1),
                      u_k, c_k, w, dt, gamma)


def grad_bellman(theta_k: np.ndarray, theta_k1: np.ndarray, u_k: float, c_k: float,
                 w: np.ndarray, dt: float, gamma: float) -> np.ndarray:
    """Gradient of the pointwise Bellman residual with respect to the weights."""
    del c_k  # the residual is affine in w; the cost drops out of the gradient
    return _grad_bellman_m(phase_moments(theta_k), phase_moments(theta_k1),
                           u_k, w, dt, gamma)


def update_weights(w: np.ndarray, grad: np.ndarray, error: float,
                   alpha: float, dt: float) -> np.ndarray:
    """One gradient-descent step on the squared residual, with the w9 floor.

    The effective step is dt*alpha, relaxed to GRAD_CAP/|grad|^2 whenever the
    bare step would overshoot (see GRAD_CAP above), and bounded so one update
    never moves the weights by more than STEP_CAP.
    """
    gain = dt * alpha
    g2 = float(grad @ grad)
    if gain * g2 > GRAD_CAP:
        gain = GRAD_CAP / g2
    move = gain * abs(error) * math.sqrt(g2)
    if move > STEP_CAP:
        gain *= STEP_CAP / move
    out = w - gain * error * grad
    if not np.all(np.isfinite(out)):
        raise DivergenceError(f"non-finite weights after update: {out}")
    if out[8] < W_MIN:
        out[8] = W_MIN
    return out


def init_weights(rng: np.random.Generator) -> np.ndarray:
    """Random start: first 8 weights uniform on [-1, 1], w9 uniform on [0.9, 1.1].

    Starting w9 well above the floor avoids huge early controls from the
    closed-form minimizer.
    """
    w = np.empty(N_BASIS)
    w[0:8] = rng.uniform(-1.0, 1.0, size=8)
    w[8] = rng.uniform(0.9, 1.1)
    return w


def exploration_input(t: float, omega0: float = 1.0, amp: float = 0.25) -> float:
    """Two-tone probing input with irrationally related frequencies."""
    return amp * (math.sin(omega0 * t) + math.sin(math.pi * omega0 * t))


def _mean_basis_rows(moments: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Stack of mean-basis vectors for stored samples (vectorized _mean_basis)."""
    out = np.empty((len(u), N_BASIS))
    out[:, 0:4] = moments
    out[:, 4:8] = moments * u[:, None]
    out[:, 8] = 0.5 * u * u
    return out


def _batch_residuals(w: np.ndarray, m0: np.ndarray, m1: np.ndarray, u: np.ndarray,
                     c: np.ndarray, dt: float, gamma: float) -> np.ndarray:
    """Bellman residual on every stored sample at the given weights."""
    w9 = max(float(w[8]), W_MIN)
    lin0 = m0 @ w[4:8]
    lin1 = m1 @ w[4:8]
    qmin0 = m0 @ w[0:4] - lin0 * lin0 / (2.0 * w9)
    qmin1 = m1 @ w[0:4] - lin1 * lin1 / (2.0 * w9)
    q_u = m0 @ w[0:4] + u * lin0 + 0.5 * u * u * w9
    return (qmin1 - qmin0) / dt + gamma * (c - q_u)


def _lstsq_refit(w: np.ndarray, m0: np.ndarray, m1: np.ndarray, u: np.ndarray,
                 c: np.ndarray, dt: float, gamma: float,
                 max_iter: int = 25, damping: float = 0.5) -> np.ndarray:
    """Solve the accumulated Bellman moment conditions for the weights.

    The residual is affine in w once the inner minimizers are held fixed, so
    the fit alternates a linear solve against the instruments (the mean basis
    at the applied control, known before the transition) with a refresh of
    the minimizers, damped for stability.  Candidate minimizers are clipped
    to U_ROW_CAP while the estimate is still far off.  A candidate that
    worsens the mean squared residual on the stored samples is rejected, so
    the per-refit fit quality is non-increasing.
    """
    instruments = _mean_basis_rows(m0, u)
    rhs = -gamma * instruments.T @ c
    start = w
    for _ in range(max_iter):
        w9 = max(float(w[8]), W_MIN)
        u0 = np.clip(-(m0 @ w[4:8]) / w9, -U_ROW_CAP, U_ROW_CAP)
        u1 = np.clip(-(m1 @ w[4:8]) / w9, -U_ROW_CAP, U_ROW_CAP)
        rows = (_mean_basis_rows(m1, u1) - _mean_basis_rows(m0, u0)) / dt
        rows -= gamma * instruments
        normal = instruments.T @ rows + np.eye(N_BASIS)
        try:
            solved = np.linalg.solve(normal, rhs)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(solved)):
            break
        new = w + damping * (solved - w)
        new[8] = max(new[8], W_MIN)
        if np.max(np.abs(new - w)) < 1e-10:
            w = new
            break
        w = new
    old_msr = float(np.mean(_batch_residuals(start, m0, m1, u, c, dt, gamma) ** 2))
    new_msr = float(np.mean(_batch_residuals(w, m0, m1, u, c, dt, gamma) ** 2))
    return w if new_msr <= old_msr else start


def train(phys: PhysicalParams, model: PhaseModel, sensor_cfg: SensorConfig,
          filt: FilterSettings, cfg: LearnConfig, seed: int,
          s0: Optional[SimState] = None) -> TrainResult:
    """Run the full learning loop and return weights plus the trace.

    Per step: choose the exploration input, read one observation increment,
    advance the simulator, update the filter ensemble, form the one-step
    cost (finite-difference head-rotation rate plus control penalty) and the
    Bellman residual, then update the weights by the configured rule.  The
    simulator is used strictly as a black box: the reward comes from the
    reported head angle, never from the model equations.

    With the default "lstsq" rule the residual ingredients are accumulated
    and the weights are re-fitted once per drive period from all samples
    collected after the estimator warm-up.  The per-step descent rules
    instead call update_weights every step with their respective gradients.
    """
    streams = rng_streams(seed)
    ens = init_ensemble(filt.n_particles, phys.omega0, filt.delta, streams.particles)
    w = init_weights(streams.weights)
    s = s0 if s0 is not None else SimState(0.0, 0.0, 0.0, 0.0)

    dt = cfg.dt
    period = phys.period
    n_steps = int(round(cfg.horizon_periods * period / dt))
    k_assim = int(round(cfg.estimator_warmup_periods * period / dt))
    steps_per_refit = max(1, int(round(period / dt)))
    learning = cfg.alpha > 0.0
    ramp_time = cfg.alpha_ramp_periods * period

    def h(th: np.ndarray) -> np.ndarray:
        return h_phase(th, model)

    bellman = np.empty(n_steps)
    w_hist = np.empty((n_steps, N_BASIS))
    u_arr = np.empty(n_steps)
    q_arr = np.empty(n_steps)
    x_arr = np.empty(n_steps)
    xd_arr = np.empty(n_steps)
    theta_hat = np.empty(n_steps)
    resultant = np.empty(n_steps)
    t_arr = np.empty(n_steps)

    store = cfg.update_rule == "lstsq"
    if store:
        m0_buf = np.empty((n_steps, 4))
        m1_buf = np.empty((n_steps, 4))
        u_buf = np.empty(n_steps)
        c_buf = np.empty(n_steps)
        n_stored = 0

    degenerate = 0
    m_k = phase_moments(ens.theta)
    for k in range(n_steps):
        t = s.t
        u_k = exploration_input(t, phys.omega0, cfg.explore_amp)
        obs = observe_increment(s, sensor_cfg, streams.sensor)
        s_next = step(s, u_k, phys, dt)
        c_k = (s_next.q - s.q) / dt + u_k * u_k / (2.0 * cfg.epsilon)

        ens, g = fpf_step(ens, obs.dz, dt, sensor_cfg.sigma_w, h)
        degenerate += g.degenerate
        m_k1 = phase_moments(ens.theta)

        err = _bellman_m(m_k, m_k1, u_k, c_k, w, dt, cfg.gamma)
        bellman[k] = err

        if learning and cfg.update_rule == "lstsq":
            if k >= k_assim:
                m0_buf[n_stored] = m_k
                m1_buf[n_stored] = m_k1
                u_buf[n_stored] = u_k
                c_buf[n_stored] = c_k
                n_stored += 1
                if n_stored >= steps_per_refit and n_stored % steps_per_refit == 0:
                    w = _lstsq_refit(w, m0_buf[:n_stored], m1_buf[:n_stored],
                                     u_buf[:n_stored], c_buf[:n_stored],
                                     dt, cfg.gamma)
        elif learning:
            if cfg.update_rule == "residual":
                grad = _grad_bellman_m(m_k, m_k1, u_k, w, dt, cfg.gamma)
            else:
                grad = -cfg.gamma * _mean_basis(m_k, u_k)
            alpha_k = cfg.alpha if ramp_time <= 0.0 else cfg.alpha * min(1.0, t / ramp_time)
            w = update_weights(w, grad, err, alpha_k, dt)
        if np.max(np.abs(w)) > W_MAX:
            raise DivergenceError(
                f"weights exceeded {W_MAX:g} at step {k} (t={t:.2f}, seed={seed})")

        t_arr[k] = t
        u_arr[k] = u_k
        w_hist[k] = w
        q_arr[k] = s_next.q
        x_arr[k] = s_next.x
        xd_arr[k] = s_next.x_dot
        resultant[k] = math.hypot(m_k1[0], m_k1[1])
        theta_hat[k] = math.atan2(m_k1[1], m_k1[0]) % (2.0 * math.pi)

        s = s_next
        m_k = m_k1

    trace = {"t": t_arr, "u": u_arr, "bellman": bellman, "q": q_arr,
             "x": x_arr, "x_dot": xd_arr,
             "theta_hat": theta_hat, "resultant": resultant}
    return TrainResult(w=w, bellman=bellman, w_hist=w_hist, trace=trace,
                       degenerate_steps=degenerate)
