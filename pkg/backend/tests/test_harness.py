import json

import numpy as np
import pandas as pd
import pytest

from app.config import get_settings
from app.errors import HorizonOrder, MissingCheckpoint, ZeroVariancePair
from app.schemas import EnsembleSummaryDocument, ExperimentConfig
from app.services.dynamics import simulate
from app.services.harness import (
    check_convergence_clt,
    check_enumeration,
    check_martingale,
    check_sync_clt,
    check_synchronization,
    empirical_test_calibration,
    proxy_factor,
    run_checks,
    run_ensemble,
    total_variation,
    verify,
    verify_forcing,
    verify_limit_distribution,
    verify_reducible,
)
from app.services.spectral import classify_regime

LEADER = [[0.5, 0.5], [0.5, 0.5]]


def make_config(**overrides) -> ExperimentConfig:
    document = {
        'name': 'unit',
        'network': {'kind': 'mean-field', 'n': 3, 'alpha': 0.5},
        'schedule': {'gamma': 0.75, 'c': 1.0},
        'z0': [0.2, 0.5, 0.8],
        'horizon': 500,
        'replications': 200,
        'seed': 42,
        'checks': ['martingale'],
    }
    document.update(overrides)
    return ExperimentConfig.model_validate(document)


def regime_of(summary):
    return classify_regime(summary.spec, summary.config.schedule.gamma, summary.config.schedule.c)


def test_ensemble_rows_match_single_simulations(small_batches):
    config = make_config(replications=130, horizon=200)
    summary = run_ensemble(config)
    assert summary.at(200).shape == (130, 3)
    for r in (0, 64, 129):
        single = simulate(summary.network, summary.schedule, config.initial_state(3), 200, seed=42, replication=r)
        assert np.array_equal(summary.at(200)[r], single.states[-1])


def test_ensemble_does_not_depend_on_thread_count(monkeypatch):
    config = make_config(replications=150, horizon=300)
    monkeypatch.setenv('RSP_THREADS', '1')
    get_settings.cache_clear()
    serial = run_ensemble(config)
    monkeypatch.setenv('RSP_THREADS', '4')
    get_settings.cache_clear()
    parallel = run_ensemble(config)
    for n in serial.steps:
        assert np.array_equal(serial.at(n), parallel.at(n))


def test_missing_checkpoint():
    summary = run_ensemble(make_config(horizon=50, replications=10))
    with pytest.raises(MissingCheckpoint):
        summary.at(7)


def test_recorded_steps_include_analysis_points():
    config = make_config(horizon=20_000, analysis_n=200, checks=['convergence_clt'], checkpoints=[50])
    assert config.record_steps() == [0, 50, 200, 800, 2000, 20_000]


def test_martingale_check():
    summary = run_ensemble(make_config(replications=1000))
    report = check_martingale(summary)
    assert report.passed
    assert report.expected['z_tilde_0'] == pytest.approx(0.5)


def test_synchronization_check():
    config = make_config(
        network={'kind': 'mean-field', 'n': 4, 'alpha': 1.0}, z0=[0.1, 0.4, 0.6, 0.9],
        horizon=20_000, replications=50, early_n=200, checks=['synchronization'],
    )
    report = check_synchronization(run_ensemble(config))
    assert report.passed
    assert report.observed['median_spread'] < report.observed['median_spread_early']


@pytest.mark.slow
def test_sync_clt_variance_ratio():
    config = make_config(
        network={'kind': 'mean-field', 'n': 3, 'alpha': 1.0}, z0=0.5,
        horizon=8000, analysis_n=2000, replications=1000, checks=['sync_clt'],
        thresholds={'sync_ratio': [0.8, 1.25], 'sync_rate_tol': 0.3},
    )
    summary = run_ensemble(config)
    report = check_sync_clt(summary, summary.spec, regime_of(summary))
    assert report.passed, report.observed
    assert report.expected['pairwise_variance'] == pytest.approx(1.0)
    assert isinstance(report.table, pd.DataFrame)
    with pytest.raises(ZeroVariancePair):
        check_sync_clt(summary, summary.spec, regime_of(summary), pair=(1, 1))


def test_proxy_factor_tends_to_one():
    sched = make_config().schedule.build()
    assert proxy_factor(sched, 100, 1000) < proxy_factor(sched, 100, 100_000) < 1.0
    assert proxy_factor(sched, 100, 10 ** 6) == pytest.approx(1.0, abs=0.05)


@pytest.mark.slow
def test_convergence_clt_and_ci_coverage():
    config = make_config(
        network={'kind': 'mean-field', 'n': 4, 'alpha': 0.5}, z0=0.5,
        horizon=20_000, analysis_n=200, replications=1000,
        checks=['convergence_clt', 'ci_coverage'],
        thresholds={'convergence_ratio': [0.8, 1.2], 'coverage': [0.88, 0.99]},
    )
    summary = run_ensemble(config)
    convergence, coverage = run_checks(summary)
    assert convergence.passed, convergence.observed
    assert 'ratio_stability' in convergence.observed
    assert coverage.passed, coverage.observed
    with pytest.raises(HorizonOrder):
        check_convergence_clt(summary, summary.spec, regime_of(summary), n=200, n_prime=200)


def test_calibration_mechanics_under_null():
    config = make_config(
        network={'kind': 'mean-field', 'n': 4, 'alpha': 0.5}, z0=0.5, horizon=2000, replications=200,
        checks=['test_calibration'],
        thresholds={'size': [0.0, 0.15], 'mean_statistic_rel': 0.3, 'p_value_ks_max': 0.25},
    )
    report = empirical_test_calibration(run_ensemble(config))
    assert report.observed['dof'] == 3
    assert report.expected['mean_statistic'] == 3.0
    assert 0.0 <= report.observed['p_value_ks'] < 0.25
    assert 'p_value' in report.table
    assert report.passed, report.observed


def test_calibration_expected_mean_under_alternative():
    config = make_config(
        network={'kind': 'mean-field', 'n': 4, 'alpha': 0.25}, z0=0.5, horizon=2000, replications=200,
        hypothesized={'kind': 'mean-field', 'n': 4, 'alpha': 0.5}, checks=['test_calibration'],
    )
    report = empirical_test_calibration(run_ensemble(config))
    assert report.expected['mean_statistic'] == pytest.approx(6.0)
    assert report.observed['mean_statistic'] > 3.0


def test_forcing_check():
    config = make_config(
        forcing={'rho': 0.5, 'q': 0.3}, horizon=20_000, replications=50,
        checks=['forcing'], thresholds={'forcing_tol': 0.02},
    )
    report = verify_forcing(run_ensemble(config))
    assert report.passed, report.observed


def test_reducible_check():
    config = make_config(
        network={
            'kind': 'reducible',
            'blocks': {
                'leader_blocks': [LEADER, LEADER],
                'follower_block': [[0.5]],
                'coupling_blocks': [[[0.125], [0.125]], [[0.125], [0.125]]],
            },
        },
        z0=[0.0, 0.0, 1.0, 1.0, 0.5], horizon=2000, replications=20, checks=['reducible'],
    )
    summary = run_ensemble(config)
    assert summary.spec is None
    report = verify_reducible(summary)
    assert report.passed, report.observed
    assert report.observed['max_block_spread'] == 0.0
    assert report.observed['max_prediction_error'] < 0.1


def test_limit_distribution_check():
    config = make_config(
        network={'kind': 'mean-field', 'n': 3, 'alpha': 1.0}, z0=0.5, horizon=5000, replications=300,
        checks=['limit_distribution'],
    )
    report = verify_limit_distribution(run_ensemble(config))
    assert report.passed, report.observed
    assert report.table['count'].sum() <= 300


def test_enumeration_check():
    config = make_config(
        network={'kind': 'mean-field', 'n': 2, 'alpha': 0.5}, z0=[0.3, 0.6], horizon=3, replications=40_000,
        checks=['enumeration'], thresholds={'tv_max': 0.03, 'enumeration_bins': 50},
    )
    report = check_enumeration(run_ensemble(config))
    assert report.passed, report.observed
    assert report.observed['oracle_martingale_error'] < 1e-12


def test_total_variation():
    assert total_variation({(0,): 0.5, (1,): 0.5}, {(0,): 0.5, (1,): 0.5}) == 0.0
    assert total_variation({(0,): 1.0}, {(1,): 1.0}) == 1.0


def test_verify_writes_reproducible_reports(tmp_path):
    config = make_config(checks=['martingale', 'synchronization'], horizon=1000, replications=300)
    first = verify(config, tmp_path / 'first')
    second = verify(config, tmp_path / 'second')
    first_json = (tmp_path / 'first' / 'unit' / 'summary.json').read_bytes()
    assert first_json == (tmp_path / 'second' / 'unit' / 'summary.json').read_bytes()
    assert (tmp_path / 'first' / 'unit' / 'terminal.csv').exists()
    document = EnsembleSummaryDocument.model_validate(json.loads(first_json))
    assert [check.name for check in document.checks] == ['martingale', 'synchronization']
    assert document.passed == first.passed == second.passed
