"""
Trial records: CSV emission, summaries and oracle comparison
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Union

import numpy as np
import pandas as pd

from src.evaluation.metrics import standard_error, z_score
from src.utils.config import DEFAULT_SIGMA_LEVEL
from src.utils.errors import OracleError

logger = logging.getLogger(__name__)

LEADING_COLUMNS = ['trial', 'sweep']
TRAILING_COLUMNS = ['T_sim', 'wall_clock', 'speedup', 'n_decorr', 'n_par_steps', 'n_par_loops', 'seed']
ESTIMATE_PREFIX = 'estimate_'


@dataclass
class TrialRecord:
    """Outcome of one ParRep trial at one sweep value"""

    trial: int
    sweep: int
    estimates: Dict[str, float]
    t_sim: int
    wall_clock: int
    speedup: float
    n_decorr: int
    n_par_steps: int
    n_par_loops: int
    seed: int

    def to_row(self) -> Dict[str, Union[int, float]]:
        row = {'trial': self.trial, 'sweep': self.sweep}
        row.update({f'{ESTIMATE_PREFIX}{name}': value for name, value in self.estimates.items()})
        row.update({
            'T_sim': self.t_sim,
            'wall_clock': self.wall_clock,
            'speedup': self.speedup,
            'n_decorr': self.n_decorr,
            'n_par_steps': self.n_par_steps,
            'n_par_loops': self.n_par_loops,
            'seed': self.seed,
        })
        return row


def columns_for(observables: Sequence[str]) -> List[str]:
    """Fixed header: trial,sweep,estimate_*,T_sim,wall_clock,speedup,n_decorr,n_par_steps,n_par_loops,seed"""
    return LEADING_COLUMNS + [f'{ESTIMATE_PREFIX}{name}' for name in observables] + TRAILING_COLUMNS


def records_to_frame(records: Sequence[TrialRecord], observables: Sequence[str] = ()) -> pd.DataFrame:
    """Records as a DataFrame in the fixed column order"""
    if not observables and records:
        observables = list(records[0].estimates)
    return pd.DataFrame([record.to_row() for record in records], columns=columns_for(observables))


def emit_csv(records: Sequence[TrialRecord], path: Union[str, Path], observables: Sequence[str] = ()) -> Path:
    """
    Write records to CSV, one row per (sweep value, trial) in input order

    Args:
        records: Trial records
        path: Output CSV path (parent directories are created)
        observables: Observable names; taken from the first record when omitted

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_to_frame(records, observables).to_csv(path, index=False)
    logger.info("Wrote %d trial records to %s", len(records), path)
    return path


def read_csv(path: Union[str, Path]) -> List[TrialRecord]:
    """Parse a CSV written by emit_csv back into records"""
    frame = pd.read_csv(path, float_precision='round_trip')
    names = [c[len(ESTIMATE_PREFIX):] for c in frame.columns if c.startswith(ESTIMATE_PREFIX)]
    records = []
    for values in frame.to_dict('records'):
        records.append(TrialRecord(
            trial=int(values['trial']),
            sweep=int(values['sweep']),
            estimates={name: float(values[f'{ESTIMATE_PREFIX}{name}']) for name in names},
            t_sim=int(values['T_sim']),
            wall_clock=int(values['wall_clock']),
            speedup=float(values['speedup']),
            n_decorr=int(values['n_decorr']),
            n_par_steps=int(values['n_par_steps']),
            n_par_loops=int(values['n_par_loops']),
            seed=int(values['seed']),
        ))
    return records


def summarize(records: Sequence[TrialRecord]) -> pd.DataFrame:
    """Mean and standard deviation of every numeric column per sweep value"""
    frame = records_to_frame(records).drop(columns=['trial', 'seed'])
    if frame.empty:
        return frame
    summary = frame.groupby('sweep', sort=False).agg(['mean', 'std'])
    summary.columns = [f'{stat}_{column}' for column, stat in summary.columns]
    summary.insert(0, 'trials', frame.groupby('sweep', sort=False).size())
    return summary.reset_index()


def compare_against_oracle(
    records: Sequence[TrialRecord],
    oracle: Mapping[str, float],
    sigma: float = DEFAULT_SIGMA_LEVEL
) -> pd.DataFrame:
    """
    Bias, spread and z-score of trial-mean estimates against exact values

    Args:
        records: Trial records
        oracle: Exact value per observable
        sigma: Pass threshold on |z| (z = bias / standard error of the mean)

    Returns:
        One row per (sweep value, observable); a sweep value with a single
        trial is not evaluable (z is NaN, passed is False)

    Raises:
        OracleError: An estimated observable has no oracle value
    """
    if not records:
        raise OracleError("No trial records to compare")
    names = list(records[0].estimates)
    missing = [name for name in names if name not in oracle]
    if missing:
        raise OracleError(f"Missing oracle values for {missing}")

    rows = []
    for sweep in dict.fromkeys(record.sweep for record in records):
        group = [record for record in records if record.sweep == sweep]
        for name in names:
            values = np.array([record.estimates[name] for record in group])
            bias = float(np.mean(values - oracle[name]))
            stderr = standard_error(values)
            evaluable = len(values) >= 2
            z = z_score(bias, stderr) if evaluable else float('nan')
            rows.append({
                'sweep': sweep,
                'observable': name,
                'oracle': oracle[name],
                'mean': float(values.mean()),
                'bias': bias,
                'std': float(values.std(ddof=1)) if len(values) > 1 else 0.0,
                'stderr': stderr,
                'z': z,
                'evaluable': evaluable,
                'passed': bool(evaluable and abs(z) <= sigma),
            })

    report = pd.DataFrame(rows)
    if not report['evaluable'].all():
        logger.warning("Oracle check needs at least 2 trials per sweep value; z is NaN where it has fewer")
    failed = report[~report['passed'] & report['evaluable']]
    for row in failed.itertuples(index=False):
        logger.warning("Oracle check failed at sweep %s for %s: z=%.2f", row.sweep, row.observable, row.z)
    return report
