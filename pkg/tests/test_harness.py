"""
Experiment configs, trial records and oracle comparison
"""
import numpy as np
import pandas as pd
import pytest

from src.harness import validation
from src.harness.experiment import (
    SEED_MASK,
    ExperimentConfig,
    config_from_mapping,
    derive_trial_seed,
    load_config,
    parse_ratios,
    run_experiment,
    timings,
)
from src.harness.results import (
    TrialRecord,
    columns_for,
    compare_against_oracle,
    emit_csv,
    read_csv,
    summarize,
)
from src.harness.validation import run_invariant_suite
from src.utils.config import WORKERS_ENV_VAR
from src.utils.errors import ConfigurationError, NumericError, OracleError

SMALL_RUN = {
    'MODEL': 'biased',
    'SWEEP_VARIABLE': 't_corr_base',
    'SWEEP_VALUES': '10,20',
    'N': '10',
    'T_POLL': '2',
    'STOP_T_SIM': '5000',
    'TRIALS': '2',
    'SEED': '11',
}


def _record(trial, sweep, x, seed=1):
    return TrialRecord(
        trial=trial, sweep=sweep, estimates={'x': x}, t_sim=1000, wall_clock=250, speedup=4.0,
        n_decorr=3, n_par_steps=2, n_par_loops=40, seed=seed,
    )


def test_config_from_mapping():
    config = config_from_mapping({
        'MODEL': 'entropic', 'SWEEP_VALUES': '30, 60', 'STOP_T_SIM': '1e7', 'T_CORR_RATIOS': 'S1:1,S2:4',
        'IDEALIZED_DECORRELATION': 'true', 'OBSERVABLES': 'x, f',
    })
    assert config.sweep_values == [30, 60]
    assert config.stop_t_sim == 10_000_000
    assert config.t_corr_ratios == {'S1': 1.0, 'S2': 4.0}
    assert config.idealized_decorrelation is True
    assert config.observables == ['x', 'f']
    assert config.n == 100 and config.t_poll == 1 and config.trials == 20


@pytest.mark.parametrize('values', [
    {'MODEL': 'biased'},
    {'MODEL': 'biased', 'SWEEP_VALUES': '10', 'COLOUR': 'red'},
    {'MODEL': 'biased', 'SWEEP_VALUES': 'ten'},
    {'MODEL': 'biased', 'SWEEP_VALUES': '10', 'STOP_T_SIM': '1.5'},
    {'MODEL': 'biased', 'SWEEP_VALUES': '10', 'SWEEP_VARIABLE': 't_poll'},
    {'MODEL': 'biased', 'SWEEP_VALUES': '10', 'DEPHASING_MODE': 'metropolis'},
    {'MODEL': 'biased', 'SWEEP_VALUES': '10', 'IDEALIZED_DECORRELATION': 'maybe'},
    {'MODEL': 'biased', 'SWEEP_VALUES': '10', 'TRIALS': '0'},
    {'MODEL': 'biased', 'SWEEP_VALUES': '10', 'T_PHASE_RATIO': '-1'},
])
def test_bad_configs(values):
    with pytest.raises(ConfigurationError):
        config_from_mapping(values)


def test_load_config(tmp_path):
    path = tmp_path / 'sweep.env'
    path.write_text('# comment\nMODEL=biased\nSWEEP_VALUES=10,20\nN=4\n')
    config = load_config(path)
    assert (config.model, config.sweep_values, config.n) == ('biased', [10, 20], 4)
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / 'missing.env')


def test_parse_ratios_and_timings():
    assert parse_ratios('S1:1.5, S2:4') == {'S1': 1.5, 'S2': 4.0}
    with pytest.raises(ConfigurationError):
        parse_ratios('S1:fast')
    t_corr, t_phase = timings({'S1': 1.5, 'S2': 1.0, 'S3': 0.001}, 60, 0.5)
    assert t_corr == {'S1': 90, 'S2': 60, 'S3': 1}
    assert t_phase == {'S1': 45, 'S2': 30, 'S3': 1}


def test_trial_seeds():
    seeds = [derive_trial_seed(42, trial) for trial in range(100)]
    assert seeds == [derive_trial_seed(42, trial) for trial in range(100)]
    assert len(set(seeds)) == 100
    assert all(0 <= seed <= SEED_MASK for seed in seeds)
    assert derive_trial_seed(43, 0) != seeds[0]


def test_emit_csv_layout(tmp_path):
    path = emit_csv([], tmp_path / 'empty.csv', observables=['x', 'f'])
    assert path.read_text().strip() == ','.join(columns_for(['x', 'f']))
    assert columns_for(['x'])[:3] == ['trial', 'sweep', 'estimate_x']

    one = emit_csv([_record(0, 10, 25.5)], tmp_path / 'one.csv')
    assert len(one.read_text().strip().splitlines()) == 2


def test_csv_round_trip(tmp_path):
    records = [_record(trial, sweep, 25.0 + 0.1 * trial + 1 / 3, seed=SEED_MASK - trial)
               for sweep in (10, 20) for trial in range(3)]
    path = emit_csv(records, tmp_path / 'trials.csv')
    assert read_csv(path) == records


def test_summarize():
    records = [_record(trial, sweep, float(trial)) for sweep in (10, 20) for trial in range(4)]
    summary = summarize(records)
    assert list(summary['sweep']) == [10, 20]
    assert list(summary['trials']) == [4, 4]
    assert summary['mean_estimate_x'].tolist() == [1.5, 1.5]
    assert 'std_speedup' in summary.columns


def test_compare_against_oracle():
    exact = [_record(trial, 10, 25.0) for trial in range(5)]
    report = compare_against_oracle(exact, {'x': 25.0})
    assert report.loc[0, 'bias'] == 0.0
    assert report.loc[0, 'z'] == 0.0
    assert bool(report.loc[0, 'passed'])

    biased_estimates = [_record(trial, 10, 30.0 + 0.01 * trial) for trial in range(5)]
    assert not compare_against_oracle(biased_estimates, {'x': 25.0})['passed'].any()

    with pytest.raises(OracleError):
        compare_against_oracle(exact, {'f': 0.5})
    with pytest.raises(OracleError):
        compare_against_oracle([], {'x': 25.0})


def test_single_trial_is_not_evaluable():
    report = compare_against_oracle([_record(0, 10, 26.0)], {'x': 25.0})
    assert np.isnan(report.loc[0, 'z'])
    assert not bool(report.loc[0, 'evaluable'])
    assert not bool(report.loc[0, 'passed'])
    assert report.loc[0, 'bias'] == 1.0

    pair = compare_against_oracle([_record(0, 10, 25.0), _record(1, 10, 25.0)], {'x': 25.0})
    assert bool(pair.loc[0, 'evaluable']) and bool(pair.loc[0, 'passed'])


def test_run_experiment(tmp_path, monkeypatch):
    monkeypatch.delenv(WORKERS_ENV_VAR, raising=False)
    config = config_from_mapping({**SMALL_RUN, 'OUTPUT': str(tmp_path / 'trials.csv')})
    model, records = run_experiment(config, progress=False)

    assert model.name == 'biased'
    assert [(r.sweep, r.trial) for r in records] == [(10, 0), (10, 1), (20, 0), (20, 1)]
    assert records[0].seed == records[2].seed == derive_trial_seed(11, 0)
    for record in records:
        assert record.t_sim > 5000
        assert record.speedup == pytest.approx(record.t_sim / record.wall_clock)
        assert set(record.estimates) == {'x', 'f'}


def test_experiments_are_reproducible_across_workers(tmp_path, monkeypatch):
    config = config_from_mapping(SMALL_RUN)
    paths = []
    for workers in ('1', '8'):
        monkeypatch.setenv(WORKERS_ENV_VAR, workers)
        _, records = run_experiment(config, progress=False)
        paths.append(emit_csv(records, tmp_path / f'trials_{workers}.csv'))
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_sweep_over_replica_counts(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV_VAR, raising=False)
    config = config_from_mapping({**SMALL_RUN, 'SWEEP_VARIABLE': 'n', 'SWEEP_VALUES': '1,4', 'TRIALS': '1'})
    _, records = run_experiment(config, progress=False)
    assert [r.sweep for r in records] == [1, 4]


def test_ratios_must_cover_declared_sets():
    config = ExperimentConfig(model='biased', sweep_values=[10], t_corr_ratios={'S1': 1.0, 'S2': 1.0})
    with pytest.raises(ConfigurationError):
        run_experiment(config, progress=False)


def test_invariant_suite_reports_failures(monkeypatch):
    def failing():
        raise NumericError("no convergence")

    checks = [('fine', lambda: 0.0, 1e-12), ('too_large', lambda: 1.0, 0.5), ('raises', failing, 1.0)]
    monkeypatch.setattr(validation, 'invariant_checks', lambda full: checks)
    table = run_invariant_suite()
    assert list(table['check']) == ['fine', 'too_large', 'raises']
    assert list(table['passed']) == [True, False, False]
    assert np.isnan(table.loc[2, 'value'])


@pytest.mark.slow
def test_invariant_suite_passes():
    table = run_invariant_suite(full=False)
    assert isinstance(table, pd.DataFrame)
    assert table['passed'].all(), table[~table['passed']].to_string()
