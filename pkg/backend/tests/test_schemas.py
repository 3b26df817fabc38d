import json
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from app.config import get_settings
from app.schemas import (
    ConfidenceIntervalRequest,
    ExperimentConfig,
    NetworkDocument,
    NetworkSpecModel,
    ScheduleModel,
)
from app.services.network import follower_limit_weights

CONFIG_DIR = Path(__file__).resolve().parents[2] / 'configs'

BASE = {
    'network': {'kind': 'mean-field', 'n': 3, 'alpha': 0.5},
    'schedule': {'gamma': 0.75},
    'horizon': 10000,
    'replications': 10,
}


def config(**overrides):
    return ExperimentConfig.model_validate({**BASE, **overrides})


def test_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv('RSP_THREADS', '3')
    monkeypatch.setenv('RSP_LOG_LEVEL', 'debug')
    monkeypatch.setenv('RSP_BATCH_FLOATS', '4096')
    get_settings.cache_clear()
    settings = get_settings()
    assert settings.threads == 3
    assert settings.log_level == 'DEBUG'
    assert settings.batch_floats == 4096
    assert settings.output_dir == tmp_path / 'outputs'


def test_settings_reject_zero_threads(monkeypatch):
    monkeypatch.setenv('RSP_THREADS', '0')
    get_settings.cache_clear()
    with pytest.raises(ValidationError):
        get_settings()


def test_network_spec_builds_generators():
    assert NetworkSpecModel(kind='cycle', n=5).build().n_vertices == 5
    net = NetworkSpecModel(kind='special-vertex', n=4, p=0.4).build()
    assert net.weights[0, 0] == pytest.approx(0.4)
    matrix = NetworkSpecModel(kind='matrix', weights=[[0.5, 0.5], [0.5, 0.5]]).build()
    assert matrix.irreducible


def test_network_spec_builds_reducible():
    spec = NetworkSpecModel.model_validate({
        'kind': 'reducible',
        'blocks': {
            'leader_blocks': [[[1.0]], [[1.0]]],
            'follower_block': [[0.0]],
            'coupling_blocks': [[[0.5]], [[0.5]]],
        },
    })
    net = spec.build()
    assert net.n_vertices == 3
    assert not net.irreducible
    assert np.allclose(net.weights.sum(axis=0), 1.0)


@pytest.mark.parametrize('body', [
    {'kind': 'cycle'},
    {'kind': 'matrix', 'n': 2},
    {'kind': 'reducible'},
    {'kind': 'star', 'n': 3},
    {'kind': 'cycle', 'n': 3, 'colour': 'red'},
])
def test_network_spec_validation(body):
    with pytest.raises(ValidationError):
        NetworkSpecModel.model_validate(body)


def test_network_document_shape():
    with pytest.raises(ValidationError):
        NetworkDocument(n=2, weights=[[1.0, 0.0]])
    document = NetworkDocument(n=1, weights=[[1.0]])
    assert document.build().n_vertices == 1


@pytest.mark.parametrize('gamma', [0.5, 0.3, 1.01])
def test_schedule_gamma_range(gamma):
    with pytest.raises(ValidationError):
        ScheduleModel(gamma=gamma)


def test_schedule_default_offset():
    assert ScheduleModel(gamma=1.0, c=3.0).build().offset == pytest.approx(4.0)


def test_experiment_defaults():
    experiment = config()
    assert experiment.checks == ['martingale', 'synchronization']
    assert experiment.seed == 0
    assert experiment.n_analysis == 10000
    assert experiment.n_early == 100
    assert np.array_equal(experiment.initial_state(3), [0.5, 0.5, 0.5])


def test_analysis_time_uses_proxy_factor():
    experiment = config(checks=['convergence_clt'])
    assert experiment.n_analysis == 100
    assert experiment.record_steps() == [0, 100, 400, 1000, 10000]


def test_explicit_analysis_time_and_checkpoints():
    experiment = config(analysis_n=50, checkpoints=[300, 20, 300])
    assert experiment.checkpoints == [20, 300]
    assert experiment.record_steps() == [0, 20, 50, 100, 200, 300, 500, 5000, 10000]


@pytest.mark.parametrize('overrides', [
    {'checkpoints': [20000]},
    {'checkpoints': [-1]},
    {'analysis_n': 20000},
    {'checks': ['reducible']},
    {'checks': ['forcing']},
    {'checks': ['unknown']},
    {'horizon': 0},
    {'replications': 0},
    {'seed': 2 ** 64},
    {'level': 1.0},
])
def test_experiment_validation(overrides):
    with pytest.raises(ValidationError):
        config(**overrides)


def test_experiment_forcing_block():
    experiment = config(checks=['forcing'], forcing={'rho': 0.3, 'q': 0.7})
    variant = experiment.forcing.build()
    assert (variant.rho, variant.q) == (0.3, 0.7)


def test_experiment_from_file(tmp_path):
    path = tmp_path / 'experiment.json'
    path.write_text(json.dumps({**BASE, 'z0': [0.1, 0.2, 0.3], 'thresholds': {'spread_max': 0.1}}))
    experiment = ExperimentConfig.from_file(path)
    assert experiment.thresholds.spread_max == 0.1
    assert experiment.thresholds.tv_max == 0.01
    assert np.array_equal(experiment.initial_state(3), [0.1, 0.2, 0.3])


def test_ci_request_needs_exactly_one_observation():
    network = {'kind': 'cycle', 'n': 3}
    with pytest.raises(ValidationError):
        ConfidenceIntervalRequest(network=network, gamma=0.75, n=10)
    request = ConfidenceIntervalRequest(network=network, gamma=0.75, n=10, z_tilde=0.3)
    assert request.state is None


@pytest.mark.parametrize('path', sorted(CONFIG_DIR.glob('*.json')), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    experiment = ExperimentConfig.from_file(path)
    assert experiment.name == path.stem
    net = experiment.network.build()
    assert len(experiment.initial_state(net.n_vertices)) == net.n_vertices


def test_clt_configs_cover_both_sizes_and_cases():
    seen = set()
    for path in CONFIG_DIR.glob('clt_mean_field_*.json'):
        experiment = ExperimentConfig.from_file(path)
        assert experiment.proxy_factor == 100
        assert experiment.n_analysis == 10_000
        assert experiment.horizon == experiment.proxy_factor * experiment.n_analysis
        assert experiment.replications == 2000
        case = 'A' if experiment.schedule.gamma < 1.0 else 'B'
        seen.add((experiment.network.n, case))
    assert seen == {(3, 'A'), (4, 'A'), (3, 'B'), (4, 'B')}


def test_reducible_config_has_two_leaders_and_one_follower():
    experiment = ExperimentConfig.from_file(CONFIG_DIR / 'reducible.json')
    blocks = experiment.network.blocks.build()
    assert len(blocks.leader_blocks) == 2
    assert blocks.n_follower == 1
    assert experiment.horizon == 1_000_000
    assert experiment.thresholds.reducible_tol == 0.02
    assert np.allclose(follower_limit_weights(blocks), [[0.5, 0.5]])


def test_limit_distribution_config():
    experiment = ExperimentConfig.from_file(CONFIG_DIR / 'limit_distribution.json')
    assert experiment.horizon == 1_000_000
    assert experiment.replications == 1000
    assert experiment.schedule.gamma == 0.75
    assert np.allclose(experiment.initial_state(4), 0.5)
