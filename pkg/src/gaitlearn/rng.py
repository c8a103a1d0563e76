"""Seed handling: one run seed, independent per-purpose generator streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RngStreams:
    """Independent generators split from a single run seed."""

    sensor: np.random.Generator
    particles: np.random.Generator
    weights: np.random.Generator


def rng_streams(seed: int) -> RngStreams:
    """Split one seed into the three streams a run consumes.

    Sensor noise, particle initialization and weight initialization each get
    their own child stream so that changing e.g. the particle count cannot
    perturb the observation noise realization.
    """
    children = np.random.SeedSequence(seed).spawn(3)
    return RngStreams(
        sensor=np.random.default_rng(children[0]),
        particles=np.random.default_rng(children[1]),
        weights=np.random.default_rng(children[2]),
    )
