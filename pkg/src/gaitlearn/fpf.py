"""Coupled-oscillator particle filter for the phase variable.

An ensemble of N phase oscillators with heterogeneous fixed frequencies is
driven by the observation increments.  Each particle feels a feedback gain
times its innovation; the empirical distribution of the ensemble tracks the
posterior of the phase.  The gain is the weak-form solution of a Poisson
equation, computed by a Galerkin projection onto the first Fourier pair
{sin, cos}, which reduces to a closed-form 2x2 solve per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .dynamics import TWO_PI, DivergenceError

# Below this determinant the ensemble is fully synchronized and the Galerkin
# system is singular; the step falls back to zero gain and flags it.
DET_EPS = 1e-10

RESULTANT_EPS = 1e-12


@dataclass(frozen=True)
class FilterSettings:
    n_particles: int = 1000
    delta: float = 0.12  # half-width of the particle frequency spread

    def __post_init__(self) -> None:
        if self.n_particles < 2:
            raise ValueError(f"need at least 2 particles, got {self.n_particles}")
        if self.delta < 0.0:
            raise ValueError(f"delta must be non-negative, got {self.delta}")


@dataclass
class OscillatorEnsemble:
    """Particle phases in [0, 2pi) and their fixed per-particle frequencies."""

    theta: np.ndarray
    omega: np.ndarray

    @property
    def n(self) -> int:
        return self.theta.size


@dataclass(frozen=True)
class GainSolution:
    """Galerkin coefficients of the feedback gain v = kappa1*cos - kappa2*sin."""

    kappa1: float
    kappa2: float
    degenerate: bool = False

    def v(self, theta: np.ndarray) -> np.ndarray:
        return self.kappa1 * np.cos(theta) - self.kappa2 * np.sin(theta)


def init_ensemble(n: int, omega0: float, delta: float,
                  rng: np.random.Generator) -> OscillatorEnsemble:
    """Uniform phases on [0, 2pi); frequencies uniform on [omega0-delta, omega0+delta]."""
    if n < 2:
        raise ValueError(f"need at least 2 particles, got {n}")
    theta = rng.uniform(0.0, TWO_PI, size=n)
    omega = rng.uniform(omega0 - delta, omega0 + delta, size=n)
    return OscillatorEnsemble(theta=theta, omega=omega)


def gain(ens: OscillatorEnsemble, h: Callable[[np.ndarray], np.ndarray]) -> GainSolution:
    """Solve the weak-form Poisson equation for the gain on the ensemble.

    With test functions psi in {sin, cos}, the Galerkin system is
    A kappa = b with A_lk the ensemble mean of psi_l' psi_k' and
    b_l the mean of (h - h_mean) psi_l.
    """
    c = np.cos(ens.theta)
    s = np.sin(ens.theta)
    hv = np.asarray(h(ens.theta), dtype=float)
    dh = hv - hv.mean()
    a11 = float(np.mean(c * c))
    a22 = float(np.mean(s * s))
    a12 = float(-np.mean(s * c))
    det = a11 * a22 - a12 * a12
    if abs(det) < DET_EPS:
        return GainSolution(kappa1=0.0, kappa2=0.0, degenerate=True)
    b1 = float(np.mean(dh * s))
    b2 = float(np.mean(dh * c))
    kappa1 = (a22 * b1 - a12 * b2) / det
    kappa2 = (a11 * b2 - a12 * b1) / det
    return GainSolution(kappa1=kappa1, kappa2=kappa2)


def fpf_step(ens: OscillatorEnsemble, dz: float, dt: float, sigma_w: float,
             h: Callable[[np.ndarray], np.ndarray]) -> Tuple[OscillatorEnsemble, GainSolution]:
    """Advance the ensemble through one observation increment.

    Each particle rotates at its own frequency and is corrected by the
    pre-step gain times its innovation, with the usual midpoint form
    (h(theta_i) + h_mean)/2 inside the innovation.  Phases are wrapped back
    to [0, 2pi).  A control-rate term in the particle drift would enter
    here as an additional u-dependent rate; it is small relative to the
    base frequency and the update term, and is omitted.
    """
    g = gain(ens, h)
    hv = np.asarray(h(ens.theta), dtype=float)
    innovation = dz - 0.5 * (hv + hv.mean()) * dt
    theta = ens.theta + ens.omega * dt + g.v(ens.theta) / (sigma_w * sigma_w) * innovation
    bad = ~np.isfinite(theta)
    if bad.any():
        raise DivergenceError(f"non-finite particle update at index {int(np.argmax(bad))}")
    return OscillatorEnsemble(theta=np.mod(theta, TWO_PI), omega=ens.omega), g


def phase_estimate(ens: OscillatorEnsemble) -> Tuple[float, float]:
    """Circular mean of the ensemble and its resultant length R in [0, 1].

    R measures synchronization; when the ensemble is balanced (R below
    RESULTANT_EPS) the mean phase is undefined and returned as nan.
    """
    mc = float(np.mean(np.cos(ens.theta)))
    ms = float(np.mean(np.sin(ens.theta)))
    resultant = math.hypot(mc, ms)
    if resultant < RESULTANT_EPS:
        return math.nan, resultant
    return math.atan2(ms, mc) % TWO_PI, resultant
