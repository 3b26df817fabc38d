"""Confidence intervals for Z_inf and chi-square tests on the network topology."""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.stats import chi2, norm

from app.errors import (
    DegenerateState,
    InferenceError,
    NegativeEigenvalue,
    NotSymmetric,
    ProbOutOfRange,
    RankZero,
    UncoveredRegime,
)
from app.services.asymptotics import sigma_hat, sigma_tilde_sq
from app.services.network import WeightedNetwork
from app.services.spectral import RegimeClassification, SpectralData, classify_regime, decompose, validate_gamma
from app.services.dynamics import project

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-9
NEGATIVE_TOL = 1e-9
RANK_TOL = 1e-10


@dataclass(frozen=True)
class Standardizer:
    """
    Whitening map M = H L O^T for a PSD matrix Sigma of rank r.

    O holds the eigenvectors (eigenvalues descending), L the inverse square
    roots of the positive eigenvalues and H keeps the first r coordinates, so
    M Sigma M^T = I_r.
    """

    sigma: np.ndarray
    O: np.ndarray
    eigenvalues: np.ndarray
    rank: int

    @property
    def L(self) -> np.ndarray:
        inv_sqrt = np.zeros_like(self.eigenvalues)
        inv_sqrt[: self.rank] = 1.0 / np.sqrt(self.eigenvalues[: self.rank])
        return np.diag(inv_sqrt)

    @property
    def H(self) -> np.ndarray:
        return np.eye(self.rank, self.sigma.shape[0])

    @property
    def M(self) -> np.ndarray:
        return self.O[:, : self.rank].T / np.sqrt(self.eigenvalues[: self.rank])[:, np.newaxis]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """M x for one vector or M x_i for each row of a stack"""
        return np.asarray(x) @ self.M.T


def standardizer(Sigma: np.ndarray, rank_tol: float = RANK_TOL) -> Standardizer:
    """
    Raises:
        NotSymmetric: |Sigma - Sigma^T| above 1e-9
        NegativeEigenvalue: an eigenvalue below -1e-9 lambda_max
        RankZero: no eigenvalue above rank_tol lambda_max
    """
    sigma = np.asarray(Sigma, dtype=float)
    asymmetry = float(np.max(np.abs(sigma - sigma.T))) if sigma.size else 0.0
    if asymmetry > SYMMETRY_TOL:
        raise NotSymmetric(asymmetry)

    eigenvalues, vectors = np.linalg.eigh(0.5 * (sigma + sigma.T))
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues, vectors = eigenvalues[order], vectors[:, order]

    top = max(float(eigenvalues[0]), 0.0)
    if eigenvalues[-1] < -NEGATIVE_TOL * top:
        raise NegativeEigenvalue(float(eigenvalues[-1]))
    rank = int(np.sum(eigenvalues > rank_tol * top)) if top > 0 else 0
    if rank == 0:
        raise RankZero()
    return Standardizer(sigma=sigma, O=vectors, eigenvalues=eigenvalues, rank=rank)


def tail_quantile(kind: str, upper_prob: float, dof: Optional[int] = None) -> float:
    """
    x with P(X > x) = upper_prob for a standard normal or a chi-square(dof) X.

    Raises:
        ProbOutOfRange: upper_prob outside (0, 1)
    """
    if not 0.0 < upper_prob < 1.0:
        raise ProbOutOfRange(upper_prob)
    kind = kind.replace('-', '_')
    if kind == 'normal':
        return float(norm.isf(upper_prob))
    if kind == 'chi_square':
        if dof is None or dof < 1:
            raise InferenceError(f"chi-square quantile needs dof >= 1, got {dof!r}")
        return float(chi2.isf(upper_prob, dof))
    raise InferenceError(f"unknown distribution {kind!r}; expected 'normal' or 'chi_square'")


def chi_square_cdf(x: float, dof: int) -> float:
    return float(chi2.cdf(x, dof))


def _validate_level(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ProbOutOfRange(level)
    return 1.0 - level


def _validate_z(z_tilde: float) -> None:
    if not 0.0 < z_tilde < 1.0:
        raise DegenerateState(z_tilde)


@dataclass(frozen=True)
class ConfidenceInterval:
    center: float
    half_width: float
    lower: float
    upper: float
    level: float

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return {
            'center': self.center,
            'half_width': self.half_width,
            'lower': self.lower,
            'upper': self.upper,
            'level': self.level,
        }


def ci_half_width(z_tilde_n, n: int, gamma: float, s_tilde_sq: float, level: float):
    """sigma~ sqrt(Z~(1 - Z~)) n^-(gamma - 1/2) z_theta, vectorized over Z~"""
    theta = _validate_level(level)
    z_theta = tail_quantile('normal', theta / 2.0)
    z = np.asarray(z_tilde_n, dtype=float)
    return math.sqrt(s_tilde_sq) * np.sqrt(z * (1.0 - z)) * n ** -(gamma - 0.5) * z_theta


def confidence_interval(z_tilde_n: float, n: int, gamma: float, c: float, spec: SpectralData,
                        level: float = 0.95) -> ConfidenceInterval:
    """
    Interval for Z_inf centred at Z~_n with approximate level `level`, clamped to [0, 1].

    Raises:
        DegenerateState: Z~_n outside (0, 1)
        ProbOutOfRange: level outside (0, 1)
    """
    _validate_z(z_tilde_n)
    if n < 1:
        raise InferenceError(f"n must be >= 1, got {n}")
    half = float(ci_half_width(z_tilde_n, n, gamma, sigma_tilde_sq(spec, gamma, c), level))
    return ConfidenceInterval(
        center=float(z_tilde_n),
        half_width=half,
        lower=max(0.0, z_tilde_n - half),
        upper=min(1.0, z_tilde_n + half),
        level=level,
    )


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    statistic: float
    dof: int
    p_value: float
    critical_value: float
    reject: bool
    level: float
    case: str
    z_tilde: float
    n: int

    def to_dict(self) -> dict:
        return {
            'statistic': self.statistic,
            'dof': self.dof,
            'p_value': self.p_value,
            'critical_value': self.critical_value,
            'reject': self.reject,
            'level': self.level,
            'case': self.case,
            'z_tilde': self.z_tilde,
            'n': self.n,
        }


@dataclass(frozen=True)
class TopologyTest:
    """Everything the statistic needs from the hypothesized network, computed once"""

    spec: SpectralData
    regime: RegimeClassification
    standardizer: Standardizer

    @property
    def dof(self) -> int:
        return self.regime.m_star if self.regime.case == 'C' else self.spec.n_vertices - 1

    def statistics(self, Z: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """|T|^2 and Z~ for each row of Z (NaN statistic where Z~ is degenerate)"""
        z_tilde, z_hat = project(self.spec, np.atleast_2d(Z))
        z_tilde = np.asarray(z_tilde)
        interior = (z_tilde > 0.0) & (z_tilde < 1.0)
        scale = np.full(z_tilde.shape, np.nan)
        scale[interior] = self.regime.sync_rate(n) / np.sqrt(z_tilde[interior] * (1.0 - z_tilde[interior]))
        t = self.standardizer.apply(z_hat) * scale[:, np.newaxis]
        return np.sum(t ** 2, axis=1), z_tilde

    def evaluate(self, Z_n, n: int, level: float = 0.95) -> TestResult:
        theta = _validate_level(level)
        z = np.asarray(Z_n, dtype=float)
        statistic, z_tilde = self.statistics(z, n)
        _validate_z(float(z_tilde[0]))
        value = float(statistic[0])
        p_value = float(chi2.sf(value, self.dof))
        critical = tail_quantile('chi_square', theta, self.dof)
        return TestResult(
            statistic=value, dof=self.dof, p_value=p_value, critical_value=critical,
            reject=value > critical, level=level, case=self.regime.case,
            z_tilde=float(z_tilde[0]), n=int(n),
        )


def prepare_topology_test(hypothesized_net: WeightedNetwork, gamma: float, c: float,
                          tol: float = 1e-9) -> TopologyTest:
    spec = decompose(hypothesized_net)
    regime = classify_regime(spec, gamma, c, tol)
    matrix, rank = sigma_hat(spec, regime)
    whitening = standardizer(matrix)
    test = TopologyTest(spec=spec, regime=regime, standardizer=whitening)
    if whitening.rank != test.dof:
        logger.warning("Standardizer rank %d differs from the test's %d degrees of freedom", whitening.rank, test.dof)
    return test


def topology_test(Z_n, n: int, hypothesized_net: WeightedNetwork, gamma: float, c: float,
                  level: float = 0.95, tol: float = 1e-9) -> TestResult:
    """
    |T|^2 with T = rate_n [Z~(1 - Z~)]^{-1/2} M Z^_n under the hypothesized W.

    rate_n is n^{gamma/2}, sqrt(n) or sqrt(n / ln n) for cases A, B, C; the
    statistic is referred to chi-square with N - 1 (A, B) or m* (C) degrees
    of freedom.

    Raises:
        DegenerateState: Z~_n outside (0, 1)
        UncoveredRegime: gamma = 1 with Re(lambda*) above 1 - 1/(2c)
    """
    result = prepare_topology_test(hypothesized_net, gamma, c, tol).evaluate(Z_n, n, level)
    logger.info(
        "Topology test (case %s): |T|^2=%.6g, dof=%d, p=%.4g, reject=%s",
        result.case, result.statistic, result.dof, result.p_value, result.reject,
    )
    return result


def mean_field_alternative_scale(alpha0: float, alpha: float, gamma: float, c: float) -> float:
    """
    Asymptotic factor k with |T|^2 ~ k chi-square when the null is mean-field(alpha0)
    and the data come from mean-field(alpha).
    """
    validate_gamma(gamma)
    if gamma < 1.0:
        return alpha0 / alpha

    null_margin, true_margin = 2.0 * c * alpha0 - 1.0, 2.0 * c * alpha - 1.0
    if null_margin < -1e-12:
        raise UncoveredRegime(1.0 - alpha0, 1.0 - 1.0 / (2.0 * c))
    if true_margin < -1e-12:
        raise UncoveredRegime(1.0 - alpha, 1.0 - 1.0 / (2.0 * c))

    if abs(null_margin) <= 1e-12:
        # null in case C: the statistic uses sqrt(n / ln n)
        return 1.0 if abs(true_margin) <= 1e-12 else 0.0
    if abs(true_margin) <= 1e-12:
        return math.inf
    return null_margin / true_margin
