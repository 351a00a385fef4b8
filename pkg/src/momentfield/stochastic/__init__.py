from .gillespie import (
    EVENT_DTYPE,
    EnsembleStats,
    MarkovState,
    counts_from_fractions,
    gillespie_step,
    read_event_log,
    run_ensemble,
    simulate_path,
    transition_rates,
)
from .langevin import langevin_run
from .master import MasterSolution, generator, master_evolve, state_space_size
from .rng import default_seed, path_generator
from .spectrum import PowerSpectrum, power_spectrum

__all__ = [
    "EVENT_DTYPE",
    "EnsembleStats",
    "MarkovState",
    "MasterSolution",
    "PowerSpectrum",
    "counts_from_fractions",
    "default_seed",
    "generator",
    "gillespie_step",
    "langevin_run",
    "master_evolve",
    "path_generator",
    "power_spectrum",
    "read_event_log",
    "run_ensemble",
    "simulate_path",
    "state_space_size",
    "transition_rates",
]
