"""Phase coordinate on the settled joint oscillation.

Once the driven shape dynamics settles onto its periodic orbit, the state
(x, x_dot) is summarized by a single phase angle.  The orbit is approximated
by a circle of radius r in the (x, x_dot/omega0) plane, fitted from an
uncontrolled run.  The phase-domain sensor function and the ground-truth
phase used for evaluation both live here.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import TWO_PI, Trajectory


@dataclass(frozen=True)
class PhaseModel:
    """Circular orbit approximation: amplitude r, angular rate omega0."""

    r: float = 0.56
    omega0: float = 1.0

    def __post_init__(self) -> None:
        if not self.r > 0.0:
            raise ValueError(f"r must be positive, got {self.r}")
        if not self.omega0 > 0.0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")


@dataclass(frozen=True)
class RadiusEstimate:
    r: float
    max_dev: float  # worst deviation of the instantaneous radius (ellipticity)


def limit_cycle_map(theta, pm: PhaseModel):
    """Point on the approximate orbit at a given phase: (r sin, r omega0 cos)."""
    return pm.r * np.sin(theta), pm.r * pm.omega0 * np.cos(theta)


def h_phase(theta, pm: PhaseModel):
    """Sensor function expressed in phase: the joint angle on the orbit."""
    return pm.r * np.sin(theta)


def true_phase(x, x_dot, pm: PhaseModel, warn: bool = True):
    """Phase of a state near the orbit, in [0, 2pi); evaluation-only ground truth.

    Projects (x, x_dot) onto the fitted circle.  States far off the orbit
    (radius deviating from r by more than 50%) trigger a warning since the
    projection is then meaningless.
    """
    if warn:
        rho = np.hypot(x, np.asarray(x_dot) / pm.omega0)
        if np.any(np.abs(rho - pm.r) > 0.5 * pm.r):
            warnings.warn("state far from the fitted orbit; phase projection is unreliable",
                          stacklevel=2)
    return np.mod(np.arctan2(x, np.asarray(x_dot) / pm.omega0), TWO_PI)


def estimate_radius(traj: Trajectory, omega0: float = 1.0,
                    fit_periods: float = 10.0) -> RadiusEstimate:
    """Fit the orbit radius from the tail of an uncontrolled run.

    Averages the instantaneous radius sqrt(x^2 + (x_dot/omega0)^2) over the
    final fit_periods periods; everything earlier is treated as transient.
    Requires at least 30 periods so that at least 20 are discarded.
    """
    period = TWO_PI / omega0
    span = traj.t[-1] - traj.t[0]
    if span < 30.0 * period:
        raise ValueError(
            f"trajectory covers {span / period:.1f} periods, need at least 30 to fit")
    mask = traj.t >= traj.t[-1] - fit_periods * period
    rho = np.hypot(traj.x[mask], traj.x_dot[mask] / omega0)
    r = float(np.mean(rho))
    return RadiusEstimate(r=r, max_dev=float(np.max(np.abs(rho - r))))


def phase_rate(traj: Trajectory, pm: PhaseModel, skip_periods: float = 20.0) -> float:
    """Mean advance rate of the unwrapped phase over the settled tail (rad/time)."""
    mask = traj.t >= traj.t[0] + skip_periods * (TWO_PI / pm.omega0)
    theta = np.unwrap(true_phase(traj.x[mask], traj.x_dot[mask], pm, warn=False))
    coef = np.polyfit(traj.t[mask], theta, 1)
    return float(coef[0])
