"""Noisy integrated observation of the joint angle.

The sensor reports increments of Z with dZ = x dt + sigma_w dW, discretized
per simulator step by Euler-Maruyama (exact in distribution for the frozen
pre-step state).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import SimState


@dataclass(frozen=True)
class SensorConfig:
    sigma_w: float = 0.1
    dt: float = 0.01

    def __post_init__(self) -> None:
        if not self.sigma_w > 0.0:
            raise ValueError(f"sigma_w must be positive, got {self.sigma_w}")
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")


@dataclass(frozen=True)
class ObservationIncrement:
    dz: float  # increment of the integrated observation over one step
    y: float   # rate signal dz/dt, convenient for plotting


def observe_increment(s: SimState, cfg: SensorConfig,
                      rng: np.random.Generator) -> ObservationIncrement:
    """One observation increment for the state at the start of the step."""
    dz = s.x * cfg.dt + cfg.sigma_w * np.sqrt(cfg.dt) * rng.standard_normal()
    return ObservationIncrement(dz=dz, y=dz / cfg.dt)
