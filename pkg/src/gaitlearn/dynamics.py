"""Planar two-body swimmer: driven shape dynamics plus head-orientation drift.

Two rigid bodies (head and tail) are pinned at a single joint.  A periodic
torque drives the joint angle; conservation of angular momentum ties the
head orientation to the joint motion.  The control input stretches the tail
span, which modulates the inertia coupling and enables net reorientation
from an otherwise zero-mean oscillation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


class DivergenceError(RuntimeError):
    """State or weights became non-finite (or blew up) during a run."""


@dataclass(frozen=True)
class PhysicalParams:
    """Masses, inertias, spans and drive constants.

    Defaults are the reference parameter set used throughout the test
    suite: unit head mass, half-mass tail, unit spans, torsional spring
    kappa and light viscous friction b at the joint, unit-amplitude
    sinusoidal drive at unit frequency.
    """

    m1: float = 1.0
    m2: float = 0.5
    i1: float = 2.0 / 3.0
    i2: float = 1.0 / 6.0
    d1: float = 1.0
    d2_bar: float = 1.0
    kappa: float = 2.0
    b: float = 0.1
    tau0: float = 1.0
    omega0: float = 1.0

    def __post_init__(self) -> None:
        for name in ("m1", "m2", "i1", "i2", "d1", "d2_bar",
                     "kappa", "b", "tau0", "omega0"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")

    @property
    def period(self) -> float:
        return TWO_PI / self.omega0


@dataclass(frozen=True)
class AuxParams:
    """Derived inertia coefficients at a fixed tail extension."""

    m_red: float  # reduced mass m1*m2/(m1+m2)
    j1: float     # head inertia about the joint, i1 + m_red*d1^2
    j2: float     # tail inertia about the joint, i2 + m_red*d2^2
    lam: float    # inertial coupling, m_red*d1*d2

    def a1(self, x: float) -> float:
        return self.j1 + self.lam * math.cos(x)

    def a2(self, x: float) -> float:
        return self.j2 + self.lam * math.cos(x)

    def det(self, x: float) -> float:
        c = self.lam * math.cos(x)
        return self.j1 * self.j2 - c * c


@dataclass(frozen=True)
class SimState:
    """Joint angle x, joint rate x_dot, head orientation q (unwrapped), time t.

    q is deliberately not wrapped: the net drift of the head orientation is
    the quantity of interest.
    """

    x: float
    x_dot: float
    q: float
    t: float


@dataclass
class Trajectory:
    """Time series of a simulation run."""

    t: np.ndarray
    x: np.ndarray
    x_dot: np.ndarray
    q: np.ndarray


def aux_params(p: PhysicalParams, u: float = 0.0) -> AuxParams:
    """Evaluate the derived coefficients with the tail stretched to (1+u)*d2_bar.

    The extension enters the tail span only: j2 and lam pick up the longer
    lever arm, while the bare inertia i2 stays an independent parameter and
    the reduced mass involves the masses alone.
    """
    if not 1.0 + u > 0.0:
        raise ValueError(f"tail length must stay positive, got 1+u = {1.0 + u}")
    m_red = p.m1 * p.m2 / (p.m1 + p.m2)
    d2 = (1.0 + u) * p.d2_bar
    return AuxParams(
        m_red=m_red,
        j1=p.i1 + m_red * p.d1 * p.d1,
        j2=p.i2 + m_red * d2 * d2,
        lam=m_red * p.d1 * d2,
    )


def torque(t: float, p: PhysicalParams) -> float:
    """Open-loop joint torque tau0*sin(omega0*t)."""
    return p.tau0 * math.sin(p.omega0 * t)


def _shape_accel(x: float, x_dot: float, tau: float, aux: AuxParams,
                 p: PhysicalParams) -> float:
    a1 = aux.a1(x)
    a2 = aux.a2(x)
    det = aux.det(x)
    if det <= 0.0:
        raise ValueError(f"non-physical parameter set: det(x={x}) = {det} <= 0")
    centrifugal = -aux.lam * math.sin(x) * (a1 * a2 / (a1 + a2)) * x_dot * x_dot
    drive = (a1 + a2) * (tau - p.kappa * x - p.b * x_dot)
    return (centrifugal + drive) / det


def _group_rate(x: float, x_dot: float, aux: AuxParams) -> float:
    a1 = aux.a1(x)
    a2 = aux.a2(x)
    if a1 + a2 <= 0.0:
        raise ValueError(f"non-physical parameter set: a1+a2 = {a1 + a2} <= 0 at x={x}")
    return a2 / (a1 + a2) * x_dot


def shape_accel(s: SimState, tau: float, u: float, p: PhysicalParams) -> float:
    """Joint angular acceleration at state s under torque tau and extension u."""
    return _shape_accel(s.x, s.x_dot, tau, aux_params(p, u), p)


def group_rate(s: SimState, u: float, p: PhysicalParams) -> float:
    """Head-orientation rate induced by the joint motion (momentum balance)."""
    return _group_rate(s.x, s.x_dot, aux_params(p, u))


def step(s: SimState, u: float, p: PhysicalParams, dt: float) -> SimState:
    """Advance one fixed step with classical RK4.

    The torque is evaluated at the substep times; the control u is held
    constant over the step (zero-order hold).  The head angle q is advanced
    jointly, its stage rates evaluated at the RK4 stage values of (x, x_dot).
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    aux = aux_params(p, u)

    def rates(t, x, x_dot):
        if not (math.isfinite(x) and math.isfinite(x_dot)):
            raise DivergenceError(f"non-finite state during step at t={s.t}")
        tau = p.tau0 * math.sin(p.omega0 * t)
        return x_dot, _shape_accel(x, x_dot, tau, aux, p), _group_rate(x, x_dot, aux)

    half = 0.5 * dt
    k1x, k1v, k1q = rates(s.t, s.x, s.x_dot)
    k2x, k2v, k2q = rates(s.t + half, s.x + half * k1x, s.x_dot + half * k1v)
    k3x, k3v, k3q = rates(s.t + half, s.x + half * k2x, s.x_dot + half * k2v)
    k4x, k4v, k4q = rates(s.t + dt, s.x + dt * k3x, s.x_dot + dt * k3v)

    sixth = dt / 6.0
    out = SimState(
        x=s.x + sixth * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        x_dot=s.x_dot + sixth * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        q=s.q + sixth * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
        t=s.t + dt,
    )
    if not (math.isfinite(out.x) and math.isfinite(out.x_dot) and math.isfinite(out.q)):
        raise DivergenceError(f"non-finite state after step at t={s.t}: {out}")
    return out


def simulate(p: PhysicalParams, t_end: float, dt: float = 0.01,
             control=None, s0: SimState | None = None) -> Trajectory:
    """Integrate from s0 (default rest at the origin) up to t_end.

    control is an optional callable t -> u applied with zero-order hold; None
    means u = 0 throughout.  The returned arrays include the initial sample.
    """
    s = s0 if s0 is not None else SimState(0.0, 0.0, 0.0, 0.0)
    n = int(round(t_end / dt))
    t = np.empty(n + 1)
    x = np.empty(n + 1)
    x_dot = np.empty(n + 1)
    q = np.empty(n + 1)
    t[0], x[0], x_dot[0], q[0] = s.t, s.x, s.x_dot, s.q
    for k in range(n):
        u = 0.0 if control is None else float(control(s.t))
        s = step(s, u, p, dt)
        t[k + 1], x[k + 1], x_dot[k + 1], q[k + 1] = s.t, s.x, s.x_dot, s.q
    return Trajectory(t=t, x=x, x_dot=x_dot, q=q)
