"""
Configuration for the ParRep library and experiment harness
"""
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from src.utils.errors import ConfigurationError

# Project root directory
PROJECT_ROOT = Path(__file__).parent.parent.parent

# Optional .env at the project root (worker-pool override etc.)
load_dotenv(PROJECT_ROOT / '.env')

# Experiment directories
CONFIGS_DIR = PROJECT_ROOT / 'configs'
RESULTS_DIR = PROJECT_ROOT / 'results'


@dataclass(frozen=True)
class Tolerances:
    """Every numeric tolerance used by kernels, oracles and solvers"""

    row_sum: float = 1e-12
    distribution_sum: float = 1e-12
    qsd_stop: float = 1e-13
    qsd_max_iterations: int = 1_000_000
    qsd_residual: float = 1e-12
    equilibrium_residual: float = 1e-12
    detailed_balance: float = 1e-14


TOLERANCES = Tolerances()

# Engine defaults
DEFAULT_T_POLL = 1
DEFAULT_STOP_T_SIM = 10**7
DEFAULT_N_REPLICAS = 100
DEFAULT_REJECTION_MAX_RESTARTS = 1_000_000

# Harness defaults (desk scale)
DEFAULT_TRIALS = 20
DEFAULT_SEED = 42
DEFAULT_SIGMA_LEVEL = 3.0

# Extended-process oracle budget (states x counters)
EXTENDED_STATE_BUDGET = 10_000

# Uniform draws fetched per stream refill (serial streams, per-replica streams)
STREAM_CHUNK = 4096
REPLICA_STREAM_CHUNK = 256

# Replica counts at or above this step as one numpy array; below, each replica walks serially
VECTORIZE_THRESHOLD = 16

# Worker pool
WORKERS_ENV_VAR = 'PARREP_WORKERS'
DEFAULT_WORKERS = 1


def resolve_worker_count(requested: Optional[int] = None) -> int:
    """
    Resolve the replica worker-pool size

    Args:
        requested: Explicit size from an experiment config (None if unset)

    Returns:
        Pool size; the PARREP_WORKERS environment variable wins over the config
    """
    raw = os.environ.get(WORKERS_ENV_VAR)
    if raw is not None and raw.strip():
        try:
            workers = int(raw)
        except ValueError:
            raise ConfigurationError(f"{WORKERS_ENV_VAR} must be an integer, got {raw!r}")
    elif requested is not None:
        workers = int(requested)
    else:
        workers = DEFAULT_WORKERS

    if workers < 1:
        raise ConfigurationError(f"Worker count must be >= 1, got {workers}")
    return workers
