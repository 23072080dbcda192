"""Asynchronous shared-memory variance-reduced SGD.

Library layout:

  model      objective, gradients, variance-reduced update vectors
  data       LibSVM parsing, synthetic problems, dataset stats
  common     solver configuration and RNG conventions
  engine     live multiprocess solver (three synchronization schemes)
  baselines  sequential variance-reduced solver, decaying-step parallel SGD
  theory     convergence-rate certificates
  simulate   deterministic interleaving simulator and certificate validation
  metrics    per-epoch metrics and the CSV schema
  reference  cached high-precision optima for gap measurements
  cli        benchmark command line (`asyncsvrg-bench`)
"""

from .common import (CONSISTENT_LOCK, INCONSISTENT_LOCK, LOCK_FREE,
                     OPTION_AVERAGE, OPTION_CURRENT, SolverConfig)
from .model import Dataset, LossConstants, SparseExample

__all__ = [
    "CONSISTENT_LOCK", "INCONSISTENT_LOCK", "LOCK_FREE",
    "OPTION_AVERAGE", "OPTION_CURRENT",
    "SolverConfig", "Dataset", "LossConstants", "SparseExample",
]

__version__ = "0.1.0"
