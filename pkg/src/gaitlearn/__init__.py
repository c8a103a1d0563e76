"""Learning locomotion gaits for a planar two-body swimmer from noisy
partial observations: rigid-body simulator, coupled-oscillator particle
filter for the drive phase, and continuous-time Q-learning with a linear
Hamiltonian approximation, plus a first-harmonic baseline control law.
"""

from .config import ExperimentConfig, default_config, load_config
from .control import PolicySpec, analytic_control, evaluate_policy
from .dynamics import PhysicalParams, SimState, Trajectory, simulate, step
from .fpf import FilterSettings, OscillatorEnsemble, gain, fpf_step, init_ensemble, phase_estimate
from .phase import PhaseModel, estimate_radius, h_phase, limit_cycle_map, true_phase
from .qlearn import LearnConfig, TrainResult, train
from .sensor import SensorConfig, observe_increment

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "default_config", "load_config",
    "PolicySpec", "analytic_control", "evaluate_policy",
    "PhysicalParams", "SimState", "Trajectory", "simulate", "step",
    "FilterSettings", "OscillatorEnsemble", "gain", "fpf_step", "init_ensemble",
    "phase_estimate",
    "PhaseModel", "estimate_radius", "h_phase", "limit_cycle_map", "true_phase",
    "LearnConfig", "TrainResult", "train",
    "SensorConfig", "observe_increment",
    "__version__",
]
