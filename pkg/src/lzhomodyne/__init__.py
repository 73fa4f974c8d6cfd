"""Monitored Landau-Zener sweeps of a decaying qubit.

Simulates a two-level system driven through an avoided crossing while it
radiates into a continuously monitored homodyne channel: conditional
quantum trajectories, the unconditional master equation, the lossless
unitary reference, and ensemble statistics over reproducible noise streams.
"""

from .qubit import (
    BlochVector, NonPhysicalState, EPS_PHYS,
    GROUND, EXCITED, IDENTITY, SIGMA_MINUS, SIGMA_PLUS, NUMBER_OP,
    dag, excited_population, normalize, purity, to_bloch,
)
from .dynamics import (
    SweepParams, UndefinedCurrent,
    adiabaticity, current_increment, detuning, diffusion,
    diffusion_derivative, dissipator, drift, hamiltonian,
    homodyne_superop, lz_probability,
)
from .sde import (
    BrownianPath, IndivisibleFactor, NumericsConfig,
    coarsen, em_step, integrate, milstein_step, n_steps_for,
    sample_path, strong_error, trajectory_rng,
)
from .trajectory import (
    DEFAULT_THRESHOLDS, ReferenceRecord, TrajectoryRecord,
    dwell_fraction, dwell_time, max_excitation,
    simulate_conditional, solve_unconditional, solve_unitary,
)
from .ensemble import (
    DegenerateDistribution, EnsembleConfig, EnsembleRunError, EnsembleStats,
    HistogramStats, ValueOutOfRange,
    dwell_stats, exit_fraction, histogram, run_ensemble, skewness,
)
from .cli import ConfigError, RunConfig, main, parse_config

__version__ = "0.1.0"

__all__ = [
    "BlochVector", "NonPhysicalState", "EPS_PHYS",
    "GROUND", "EXCITED", "IDENTITY", "SIGMA_MINUS", "SIGMA_PLUS", "NUMBER_OP",
    "dag", "excited_population", "normalize", "purity", "to_bloch",
    "SweepParams", "UndefinedCurrent",
    "adiabaticity", "current_increment", "detuning", "diffusion",
    "diffusion_derivative", "dissipator", "drift", "hamiltonian",
    "homodyne_superop", "lz_probability",
    "BrownianPath", "IndivisibleFactor", "NumericsConfig",
    "coarsen", "em_step", "integrate", "milstein_step", "n_steps_for",
    "sample_path", "strong_error", "trajectory_rng",
    "DEFAULT_THRESHOLDS", "ReferenceRecord", "TrajectoryRecord",
    "dwell_fraction", "dwell_time", "max_excitation",
    "simulate_conditional", "solve_unconditional", "solve_unitary",
    "DegenerateDistribution", "EnsembleConfig", "EnsembleRunError",
    "EnsembleStats", "HistogramStats", "ValueOutOfRange",
    "dwell_stats", "exit_fraction", "histogram", "run_ensemble", "skewness",
    "ConfigError", "RunConfig", "main", "parse_config",
    "__version__",
]
