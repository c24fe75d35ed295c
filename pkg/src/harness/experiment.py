"""
Experiment configuration and multi-trial sweeps
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from dotenv import dotenv_values
from tqdm import tqdm

from src.harness.results import TrialRecord
from src.metastability.collection import validate
from src.models.catalog import ModelSpec, load_model
from src.parrep.engine import DEPHASING_MODES, ParRepConfig, run, speedup
from src.utils.config import (
    DEFAULT_N_REPLICAS,
    DEFAULT_SEED,
    DEFAULT_STOP_T_SIM,
    DEFAULT_T_POLL,
    DEFAULT_TRIALS,
    RESULTS_DIR,
    resolve_worker_count,
)
from src.utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

SWEEP_VARIABLES = ('t_corr_base', 'n')

CONFIG_KEYS = {
    'model', 'matrix_path', 'sets', 'observables', 'sweep_variable', 'sweep_values',
    't_corr_base', 't_corr_ratios', 't_phase_ratio', 'n', 't_poll', 'stop_t_sim',
    'trials', 'seed', 'dephasing_mode', 'idealized_decorrelation', 'workers', 'output',
}

# Per-trial seeds are kept below 2**63 so they fit a signed CSV column
SEED_MASK = (1 << 63) - 1


@dataclass
class ExperimentConfig:
    """One sweep of ParRep trials over T_corr base values or replica counts"""

    model: str
    sweep_values: List[int]
    sweep_variable: str = 't_corr_base'
    matrix_path: Optional[str] = None
    sets: Optional[str] = None
    observables: List[str] = field(default_factory=list)
    t_corr_base: int = 60
    t_corr_ratios: Optional[Dict[str, float]] = None
    t_phase_ratio: float = 1.0
    n: int = DEFAULT_N_REPLICAS
    t_poll: int = DEFAULT_T_POLL
    stop_t_sim: int = DEFAULT_STOP_T_SIM
    trials: int = DEFAULT_TRIALS
    seed: int = DEFAULT_SEED
    dephasing_mode: str = 'fleming_viot'
    idealized_decorrelation: bool = False
    workers: Optional[int] = None
    output: Path = field(default_factory=lambda: RESULTS_DIR / 'trials.csv')

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ConfigurationError(f"sweep_variable must be one of {SWEEP_VARIABLES}, got '{self.sweep_variable}'")
        if not self.sweep_values:
            raise ConfigurationError("sweep_values must not be empty")
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        if self.stop_t_sim < 1:
            raise ConfigurationError(f"stop_t_sim must be >= 1, got {self.stop_t_sim}")
        if self.dephasing_mode not in DEPHASING_MODES:
            raise ConfigurationError(f"dephasing_mode must be one of {DEPHASING_MODES}")
        if self.t_phase_ratio <= 0:
            raise ConfigurationError(f"t_phase_ratio must be positive, got {self.t_phase_ratio}")
        self.output = Path(self.output)


def _parse_int_list(key: str, raw: str) -> List[int]:
    try:
        return [int(v) for v in raw.split(',') if v.strip()]
    except ValueError:
        raise ConfigurationError(f"{key} must be a comma separated list of integers, got {raw!r}")


def parse_ratios(raw: str) -> Dict[str, float]:
    """Parse `S1:1,S2:4` into a ratio map"""
    ratios = {}
    for item in filter(None, (part.strip() for part in raw.split(','))):
        set_id, _, value = item.partition(':')
        try:
            ratios[set_id.strip()] = float(value)
        except ValueError:
            raise ConfigurationError(f"Bad T_corr ratio entry {item!r}")
    return ratios


def _parse_int(key: str, raw: str) -> int:
    """Integer value; scientific notation such as 1e7 is accepted when integral"""
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        value = float(raw)
    except ValueError:
        raise ConfigurationError(f"{key} must be an integer, got {raw!r}")
    if not value.is_integer():
        raise ConfigurationError(f"{key} must be an integer, got {raw!r}")
    return int(value)


def _parse_bool(key: str, raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off', ''):
        return False
    raise ConfigurationError(f"{key} must be a boolean, got {raw!r}")


def config_from_mapping(values: Mapping[str, Optional[str]]) -> ExperimentConfig:
    """
    Build an ExperimentConfig from raw KEY=VALUE strings

    Keys are case-insensitive; unknown keys are rejected.
    """
    values = {key.lower(): (value or '').strip() for key, value in values.items()}
    unknown = sorted(set(values) - CONFIG_KEYS)
    if unknown:
        raise ConfigurationError(f"Unknown config keys: {unknown}")
    if 'model' not in values or 'sweep_values' not in values:
        raise ConfigurationError("Config needs at least `model` and `sweep_values`")

    kwargs = {'model': values['model'], 'sweep_values': _parse_int_list('sweep_values', values['sweep_values'])}
    integer_keys = ('t_corr_base', 'n', 't_poll', 'stop_t_sim', 'trials', 'seed', 'workers')
    for key in integer_keys:
        if values.get(key):
            kwargs[key] = _parse_int(key, values[key])
    if values.get('t_phase_ratio'):
        try:
            kwargs['t_phase_ratio'] = float(values['t_phase_ratio'])
        except ValueError:
            raise ConfigurationError(f"t_phase_ratio must be a number, got {values['t_phase_ratio']!r}")

    for key in ('sweep_variable', 'matrix_path', 'sets', 'dephasing_mode', 'output'):
        if values.get(key):
            kwargs[key] = values[key]
    if values.get('observables'):
        kwargs['observables'] = [v.strip() for v in values['observables'].split(',') if v.strip()]
    if values.get('t_corr_ratios'):
        kwargs['t_corr_ratios'] = parse_ratios(values['t_corr_ratios'])
    if 'idealized_decorrelation' in values:
        kwargs['idealized_decorrelation'] = _parse_bool('idealized_decorrelation', values['idealized_decorrelation'])
    return ExperimentConfig(**kwargs)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read a flat KEY=VALUE experiment file"""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}")
    return config_from_mapping(dotenv_values(path))


def derive_trial_seed(master: int, trial: int) -> int:
    """First 64-bit word of SeedSequence(master, spawn_key=(trial,)), masked to 63 bits"""
    word = np.random.SeedSequence(int(master), spawn_key=(int(trial),)).generate_state(1, dtype=np.uint64)[0]
    return int(word) & SEED_MASK


def timings(
    ratios: Mapping[str, float],
    base: int,
    t_phase_ratio: float
) -> Tuple[Dict[str, int], Dict[str, int]]:
    """T_corr(S) = max(1, round(ratio * base)); T_phase(S) = max(1, round(t_phase_ratio * T_corr(S)))"""
    t_corr = {set_id: max(1, int(round(ratio * base))) for set_id, ratio in ratios.items()}
    t_phase = {set_id: max(1, int(round(t_phase_ratio * value))) for set_id, value in t_corr.items()}
    return t_corr, t_phase


def resolve_model(config: ExperimentConfig) -> ModelSpec:
    model = load_model(config.model, matrix_path=config.matrix_path, sets=config.sets)
    declared = {s.set_id for s in model.sets}
    if config.t_corr_ratios is not None:
        unknown = set(config.t_corr_ratios) - declared
        missing = declared - set(config.t_corr_ratios)
        if unknown or missing:
            raise ConfigurationError(
                f"t_corr_ratios must cover exactly the sets {sorted(declared)} "
                f"(unknown {sorted(unknown)}, missing {sorted(missing)})"
            )
    return model


def run_experiment(config: ExperimentConfig, progress: bool = True) -> Tuple[ModelSpec, List[TrialRecord]]:
    """
    Execute every (sweep value, trial) pair

    Each trial seed depends only on (master seed, trial index), so the same
    seed is reused across sweep values and trial order does not matter.

    Args:
        config: Experiment configuration
        progress: Show a tqdm progress bar

    Returns:
        (model, records in sweep-then-trial order)
    """
    model = resolve_model(config)
    observables = model.select(config.observables)
    ratios = config.t_corr_ratios or model.t_corr_ratios
    workers = resolve_worker_count(config.workers)

    logger.info(
        "Experiment: model=%s sweep %s over %s, %d trials, workers=%d",
        model.name, config.sweep_variable, config.sweep_values, config.trials, workers,
    )

    records: List[TrialRecord] = []
    total = len(config.sweep_values) * config.trials
    with tqdm(total=total, desc=f"{model.name} trials", disable=not progress) as bar:
        for value in config.sweep_values:
            base = value if config.sweep_variable == 't_corr_base' else config.t_corr_base
            n = value if config.sweep_variable == 'n' else config.n
            t_corr, t_phase = timings(ratios, base, config.t_phase_ratio)
            coll = model.collection(t_corr, t_phase)
            validate(coll, model.kernel)

            parrep_config = ParRepConfig(
                n=n,
                t_poll=config.t_poll,
                dephasing_mode=config.dephasing_mode,
                stop_t_sim=config.stop_t_sim,
                observables=observables,
                idealized_decorrelation=config.idealized_decorrelation,
                workers=workers,
            )
            for trial in range(config.trials):
                seed = derive_trial_seed(config.seed, trial)
                result = run(model.kernel, coll, parrep_config, model.initial_state, seed)
                acc = result.accumulators
                records.append(TrialRecord(
                    trial=trial,
                    sweep=value,
                    estimates=result.estimates,
                    t_sim=acc.t_sim,
                    wall_clock=acc.wall_clock,
                    speedup=speedup(acc),
                    n_decorr=acc.n_decorr_steps,
                    n_par_steps=acc.n_parallel_steps,
                    n_par_loops=acc.n_parallel_loops,
                    seed=seed,
                ))
                bar.update(1)

            logger.info("Sweep %s=%s done (T_corr=%s)", config.sweep_variable, value, t_corr)

    return model, records
