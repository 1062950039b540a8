"""Experiments layer: initial data, error norms, EOC studies and the CLI."""

from .config import ConfigError, dump_config, load_config
from .data import ManufacturedStokes, Shear, VortexPair, initial_shear, initial_vortex_pair
from .studies import (EOCTable, ExperimentConfig, RunResult, convergence_space,
                      convergence_time, eoc, error_l2, error_l2_exact,
                      fractional_norm_surrogate, prolongate, run_experiment)

__all__ = ["ConfigError", "EOCTable", "ExperimentConfig", "ManufacturedStokes", "RunResult",
           "Shear", "VortexPair", "convergence_space", "convergence_time", "dump_config", "eoc",
           "error_l2", "error_l2_exact", "fractional_norm_surrogate", "initial_shear",
           "initial_vortex_pair", "load_config", "prolongate", "run_experiment"]
