import math

import numpy as np
import pytest

from app.errors import (
    DomainError,
    RankMismatch,
    RegimeBoundary,
    SameVertex,
    UnsupportedExample,
)
from app.services.asymptotics import (
    AppendixOracleInput,
    appendix_limit_estimate,
    appendix_limit_partial,
    appendix_limit_partials,
    appendix_limit_value,
    appendix_moment_bound_partial,
    closed_form,
    covariance_report,
    cycle_eigenpairs,
    expected_limit,
    pairwise_sync_variance,
    require_rank,
    sigma_hat,
    sigma_hat_symmetric,
    sigma_tilde_sq,
    special_vertex_expected_limit,
)
from app.services.network import build_network, cycle, mean_field, special_vertex
from app.services.spectral import RegimeClassification, classify_regime, decompose


def report_for(net, gamma, c):
    spec = decompose(net)
    return spec, covariance_report(spec, classify_regime(spec, gamma, c))


def test_sigma_tilde_doubly_stochastic(mf4_spec):
    assert sigma_tilde_sq(mf4_spec, 0.75, 1.0) == pytest.approx(1.0 / (4 * 0.5))


def test_sigma_tilde_special_vertex():
    spec = decompose(special_vertex(5, 0.8))
    expected = 1.0 / 0.5 * (0.8 ** 2 + 0.2 ** 2 / 4)
    assert sigma_tilde_sq(spec, 0.75, 1.0) == pytest.approx(expected)


def test_sigma_tilde_bounds(random_networks):
    for net in random_networks:
        spec = decompose(net)
        value = sigma_tilde_sq(spec, 0.75, 1.0)
        n = spec.n_vertices
        assert 1.0 / (n * 0.5) - 1e-12 <= value <= 1.0 / 0.5 + 1e-12


@pytest.mark.parametrize('n', range(2, 9))
@pytest.mark.parametrize('alpha', [0.25, 0.5, 1.0])
def test_mean_field_closed_form_case_a(n, alpha):
    spec, report = report_for(mean_field(n, alpha), 0.75, 1.0)
    closed = closed_form('mean-field', report.regime, n, alpha=alpha)
    assert np.allclose(report.Sigma_hat, closed.Sigma_hat, rtol=0.0, atol=1e-10)
    assert report.sigma_tilde_sq == pytest.approx(closed.sigma_tilde_sq)
    centering = np.eye(n) - 1.0 / n
    assert np.allclose(report.Sigma_hat, centering / (2 * alpha), atol=1e-10)


@pytest.mark.parametrize('alpha', [0.5, 1.0])
def test_mean_field_closed_form_case_b(alpha):
    spec, report = report_for(mean_field(4, alpha), 1.0, 2.0)
    assert report.regime.case == 'B'
    closed = closed_form('mean-field', report.regime, 4, alpha=alpha)
    assert np.allclose(report.Sigma_hat, closed.Sigma_hat, atol=1e-10)
    assert np.allclose(np.diag(report.Sigma_hat), 0.75 * 4.0 / (4 * alpha - 1))


def test_mean_field_case_c_rank_equals_m_star():
    spec, report = report_for(mean_field(4, 0.5), 1.0, 1.0)
    assert report.regime.case == 'C'
    assert report.rank_hat == report.expected_rank == report.regime.m_star == 3
    closed = closed_form('mean-field', report.regime, 4, alpha=0.5)
    assert np.allclose(report.Sigma_hat, closed.Sigma_hat, atol=1e-10)
    assert report.vanishing_diagonal == []


def test_cycle_covariance_eigenvalues():
    spec, report = report_for(cycle(4), 0.75, 1.0)
    assert np.allclose(report.sigma_hat_eigenvalues, [0.5, 0.5, 0.25, 0.0], atol=1e-10)
    closed = closed_form('cycle', report.regime, 4)
    assert np.allclose(report.Sigma_hat, closed.Sigma_hat, atol=1e-10)


def test_cycle_eigenpairs_are_biorthogonal():
    eigenvalues, left, right = cycle_eigenpairs(5)
    assert np.allclose(right.T @ left, np.eye(5), atol=1e-12)
    w = cycle(5).weights
    assert np.allclose(w.T @ left, left * eigenvalues, atol=1e-12)


@pytest.mark.parametrize('gamma, c', [(0.75, 1.0), (1.0, 2.0), (1.0, 0.5)])
def test_special_vertex_closed_form(gamma, c):
    net = special_vertex(4, 0.6)
    spec, report = report_for(net, gamma, c)
    closed = closed_form('special-vertex', report.regime, 4, p=0.6)
    assert np.allclose(report.Sigma_hat, closed.Sigma_hat, atol=1e-10)
    assert report.sigma_tilde_sq == pytest.approx(closed.sigma_tilde_sq)


def test_special_vertex_case_a_is_half_a_p():
    spec, report = report_for(special_vertex(3, 0.5), 0.75, 1.0)
    a = np.array([0.5, 0.25, 0.25])
    ones = np.ones(3)
    a_p = np.eye(3) + (a @ a) * np.outer(ones, ones) - np.outer(ones, a) - np.outer(a, ones)
    assert np.allclose(report.Sigma_hat, 0.5 * a_p, atol=1e-10)


def test_special_vertex_case_c_scale():
    spec, report = report_for(special_vertex(3, 0.5), 1.0, 0.5)
    assert report.regime.case == 'C'
    closed = closed_form('special-vertex', report.regime, 3, p=0.5)
    assert np.allclose(closed.Sigma_hat, report.Sigma_hat, atol=1e-10)
    a = np.array([0.5, 0.25, 0.25])
    ones = np.ones(3)
    a_p = np.eye(3) + (a @ a) * np.outer(ones, ones) - np.outer(ones, a) - np.outer(a, ones)
    assert np.allclose(report.Sigma_hat, 0.25 * a_p, atol=1e-10)


def test_structure_on_random_networks(random_networks):
    for net in random_networks:
        spec, report = report_for(net, 0.75, 1.0)
        matrix = report.Sigma_hat
        eigenvalues = np.linalg.eigvalsh(matrix)
        assert np.allclose(matrix, matrix.T, atol=1e-10)
        assert eigenvalues.min() > -1e-9 * eigenvalues.max()
        assert report.rank_hat == spec.n_vertices - 1
        assert spec.v1 @ matrix @ spec.v1 < 1e-8
        assert np.allclose(matrix @ spec.v1, 0.0, atol=1e-8)


def test_symmetric_shortcut_matches_general_path():
    spec = decompose(mean_field(5, 0.4))
    for gamma, c in [(0.75, 1.0), (1.0, 2.0)]:
        regime = classify_regime(spec, gamma, c)
        general, _ = sigma_hat(spec, regime)
        assert np.allclose(sigma_hat_symmetric(spec, regime), general, atol=1e-10)


def test_symmetric_shortcut_rejects_asymmetric(cycle4):
    spec = decompose(cycle4)
    with pytest.raises(DomainError):
        sigma_hat_symmetric(spec, classify_regime(spec, 0.75, 1.0))


def test_regime_boundary_in_case_b():
    spec = decompose(mean_field(4, 0.5))
    regime = RegimeClassification(gamma=1.0, c=1.0, case='B')
    with pytest.raises(RegimeBoundary):
        sigma_hat(spec, regime)


def test_pairwise_variance():
    spec, report = report_for(mean_field(4, 0.5), 0.75, 1.0)
    # (I - 11^T/N) / (2 alpha): 2 * (1 - 1/N) / (2 alpha) + 2 / (N 2 alpha)
    assert pairwise_sync_variance(report.Sigma_hat, 0, 1) == pytest.approx(2.0)
    assert report.pairwise[0, 1] == pytest.approx(2.0)
    assert np.all(np.diag(report.pairwise) == 0.0)
    with pytest.raises(SameVertex):
        pairwise_sync_variance(report.Sigma_hat, 2, 2)


def test_single_vertex_covariance():
    spec = decompose(mean_field(1, 1.0))
    matrix, rank = sigma_hat(spec, classify_regime(spec, 0.75, 1.0))
    assert matrix.shape == (1, 1)
    assert rank == 0


def test_require_rank():
    spec, report = report_for(mean_field(3, 0.5), 0.75, 1.0)
    require_rank(report)
    report.rank_hat = 1
    with pytest.raises(RankMismatch):
        require_rank(report)


def test_unsupported_closed_form(mf4_spec):
    with pytest.raises(UnsupportedExample):
        closed_form('star', classify_regime(mf4_spec, 0.75, 1.0), 4)


def test_expected_limits(sv3):
    spec = decompose(sv3)
    assert expected_limit(spec, np.array([1.0, 0.0, 0.0])) == pytest.approx(0.5)
    assert special_vertex_expected_limit(0.5, 1.0, 0.0) == pytest.approx(0.5)
    assert special_vertex_expected_limit(0.8, 0.2, 0.7) == pytest.approx(0.3)


def test_report_document_shape():
    _, report = report_for(cycle(4), 0.75, 1.0)
    document = report.to_dict()
    assert document['regime']['case'] == 'A'
    assert len(document['Sigma_hat']) == 4
    assert document['Sigma_tilde'][0][0] == pytest.approx(document['sigma_tilde_sq'])


# Product-sum oracles

ORACLE_CASES = [
    (AppendixOracleInput(0.5, 0.5, 0.75, 1.0, 10 ** 6), 1.0),
    (AppendixOracleInput(0.5, 0.5, 1.0, 2.0, 10 ** 6), 4.0),
    (AppendixOracleInput(0.5 + 0.3j, 0.5 - 0.3j, 1.0, 1.0, 10 ** 6), 1.0),
]


@pytest.mark.parametrize('inp, limit', ORACLE_CASES)
def test_appendix_limit_values(inp, limit):
    assert appendix_limit_value(inp) == pytest.approx(limit)


@pytest.mark.parametrize('inp, limit', ORACLE_CASES)
def test_appendix_partials_approach_limit(inp, limit):
    partial = appendix_limit_partial(inp)
    assert abs(partial - limit) / limit < 5e-2
    assert abs(appendix_limit_estimate(inp) - limit) / limit < 1e-2


def test_log_case_is_detected():
    assert ORACLE_CASES[2][0].log_normalized
    assert not ORACLE_CASES[0][0].log_normalized


def test_conjugate_imaginary_parts_cancel():
    inp = ORACLE_CASES[2][0].with_n(10 ** 4)
    assert abs(appendix_limit_partial(inp).imag) < 1e-9


def test_partials_converge_monotonically_in_error():
    inp = AppendixOracleInput(0.5, 0.5, 0.75, 1.0, 10 ** 5)
    values = appendix_limit_partials(inp, [10 ** 3, 10 ** 4, 10 ** 5])
    errors = [abs(v - 1.0) for v in values]
    assert errors[0] > errors[1] > errors[2]


def test_no_overflow_for_large_rates():
    inp = AppendixOracleInput(3.0, 2.5, 1.0, 1.0, 10 ** 5)
    value = appendix_limit_partial(inp)
    assert math.isfinite(value.real)
    assert value.real == pytest.approx(1.0 / 4.5, rel=1e-2)


def test_moment_bound_stays_bounded():
    inp = AppendixOracleInput(0.5, 0.5, 0.75, 1.0, 10 ** 4)
    small = appendix_moment_bound_partial(inp, 2.0)
    large = appendix_moment_bound_partial(inp.with_n(10 ** 5), 2.0)
    assert large < 2.0 * small


@pytest.mark.parametrize('kwargs', [
    {'alpha1': -0.5, 'alpha2': 0.5, 'gamma': 0.75, 'c': 1.0, 'n': 100},
    {'alpha1': 0.2, 'alpha2': 0.2, 'gamma': 1.0, 'c': 1.0, 'n': 100},
    {'alpha1': 0.5, 'alpha2': 0.5, 'gamma': 0.75, 'c': 1.0, 'n': 1},
])
def test_oracle_domain_errors(kwargs):
    with pytest.raises(DomainError):
        AppendixOracleInput(**kwargs)


def test_sigma_hat_does_not_depend_on_the_eigenbasis(random_networks):
    rng = np.random.default_rng(3)
    for net in random_networks[:20]:
        spec = decompose(net)
        regime = classify_regime(spec, 0.75, 1.0)
        matrix, _ = sigma_hat(spec, regime)

        perm = np.eye(net.n_vertices)[rng.permutation(net.n_vertices)]
        permuted = decompose(build_network(perm @ net.weights @ perm.T))
        permuted_matrix, _ = sigma_hat(permuted, classify_regime(permuted, 0.75, 1.0))
        assert np.allclose(permuted_matrix, perm @ matrix @ perm.T, atol=1e-9)


def test_sigma_hat_repeated_eigenvalue_matches_closed_form():
    # mean-field has 1 - alpha with multiplicity N - 1, so the numeric basis is arbitrary
    for n in (3, 5, 7):
        spec = decompose(mean_field(n, 0.25))
        regime = classify_regime(spec, 0.75, 1.0)
        matrix, _ = sigma_hat(spec, regime)
        expected = closed_form('mean-field', regime, n, alpha=0.25).Sigma_hat
        assert np.allclose(matrix, expected, atol=1e-10)
