"""Asymptotic variances and covariances of the Perron and complementary components.

Also holds the closed forms of the canonical families and the deterministic
product-sum limits used as numeric oracles.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.errors import (
    AsymptoticsError,
    DimensionMismatch,
    DomainError,
    RankMismatch,
    RegimeBoundary,
    SameVertex,
    UnsupportedExample,
)
from app.services.network import special_vertex_vector
from app.services.spectral import RegimeClassification, SpectralData, validate_gamma

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
IMAG_TOL = 1e-9
BOUNDARY_TOL = 1e-9


def sigma_tilde_sq(spec: SpectralData, gamma: float, c: float) -> float:
    """c^2 |v1|^2 / (N (2 gamma - 1))"""
    validate_gamma(gamma)
    return c ** 2 * spec.v1_norm_sq / (spec.n_vertices * (2.0 * gamma - 1.0))


def _s_hat(eigenvalues: np.ndarray, right: np.ndarray, regime: RegimeClassification) -> np.ndarray:
    """Kernel matrix over the non-Perron index pairs (complex, symmetric)"""
    c = regime.c
    lam_sum = eigenvalues[:, np.newaxis] + eigenvalues[np.newaxis, :]
    gram = right.T @ right

    if regime.case == 'A':
        return c / (2.0 - lam_sum) * gram
    if regime.case == 'B':
        denominator = 2.0 * c - c * lam_sum - 1.0
        if denominator.size and np.min(np.abs(denominator)) < BOUNDARY_TOL:
            raise RegimeBoundary(
                f"2c - c(lambda_h + lambda_j) - 1 = {np.min(np.abs(denominator)):.3g} is too close to 0"
            )
        return c ** 2 / denominator * gram

    target = 2.0 - 1.0 / c
    critical = (np.abs(lam_sum.real - target) <= regime.tol) & (np.abs(lam_sum.imag) <= regime.tol)
    return np.where(critical, c ** 2 * gram, 0.0)


def _assemble(left: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    full = left @ kernel @ left.T
    residue = float(np.max(np.abs(full.imag))) if full.size else 0.0
    if residue > IMAG_TOL:
        raise AsymptoticsError(f"covariance has imaginary residue {residue:.3g} above {IMAG_TOL:g}")
    real = full.real
    return 0.5 * (real + real.T)


def numerical_rank(matrix: np.ndarray, rel_tol: float = RANK_TOL) -> int:
    """Number of eigenvalues above rel_tol times the largest one"""
    if matrix.size == 0:
        return 0
    eigenvalues = np.linalg.eigvalsh(matrix)
    top = eigenvalues.max()
    if top <= 0:
        return 0
    return int(np.sum(eigenvalues > rel_tol * top))


def expected_rank(regime: RegimeClassification, n_vertices: int) -> int:
    return regime.m_star if regime.case == 'C' else n_vertices - 1


def sigma_hat(spec: SpectralData, regime: RegimeClassification) -> Tuple[np.ndarray, int]:
    """
    U S U^T with the regime's kernel over index pairs 2..N, and its numerical rank.

    Raises:
        RegimeBoundary: case B with a vanishing kernel denominator
    """
    n = spec.n_vertices
    if n == 1:
        return np.zeros((1, 1)), 0
    matrix = _assemble(spec.U, _s_hat(spec.diag_D, spec.V, regime))
    return matrix, numerical_rank(matrix)


def sigma_hat_symmetric(spec: SpectralData, regime: RegimeClassification) -> np.ndarray:
    """Diagonal-kernel shortcut, valid when W is symmetric (U = V real orthonormal)"""
    w = spec.weights
    if not np.allclose(w, w.T, atol=1e-14, rtol=0.0):
        raise DomainError("symmetric shortcut requires a symmetric weight matrix")
    lam = spec.diag_D.real
    c = regime.c
    if regime.case == 'A':
        diagonal = c / (2.0 * (1.0 - lam))
    elif regime.case == 'B':
        diagonal = c / (2.0 * (1.0 - lam) - 1.0 / c)
    else:
        diagonal = np.where(np.abs(lam - regime.threshold) <= regime.tol, c ** 2, 0.0)
    left = spec.U.real
    return (left * diagonal) @ left.T


def pairwise_sync_variance(Sigma_hat: np.ndarray, j: int, k: int) -> float:
    """Sigma_jj + Sigma_kk - 2 Sigma_jk for distinct vertices j, k (0-based)"""
    if j == k:
        raise SameVertex(j)
    n = Sigma_hat.shape[0]
    if not (0 <= j < n and 0 <= k < n):
        raise DimensionMismatch(f"vertices ({j}, {k}) out of range for N={n}")
    return float(Sigma_hat[j, j] + Sigma_hat[k, k] - 2.0 * Sigma_hat[j, k])


def pairwise_matrix(Sigma_hat: np.ndarray) -> np.ndarray:
    d = np.diag(Sigma_hat)
    pairwise = d[:, np.newaxis] + d[np.newaxis, :] - 2.0 * Sigma_hat
    np.fill_diagonal(pairwise, 0.0)
    return pairwise


@dataclass
class CovarianceReport:
    regime: RegimeClassification
    sigma_tilde_sq: float
    Sigma_tilde: np.ndarray
    Sigma_hat: np.ndarray
    rank_hat: int
    expected_rank: int
    pairwise: np.ndarray
    vanishing_diagonal: List[int] = field(default_factory=list)
    source: str = 'spectral'

    @property
    def sigma_hat_eigenvalues(self) -> np.ndarray:
        return np.sort(np.linalg.eigvalsh(self.Sigma_hat))[::-1]

    def to_dict(self) -> dict:
        return {
            'source': self.source,
            'regime': self.regime.to_dict(),
            'sigma_tilde_sq': self.sigma_tilde_sq,
            'Sigma_tilde': self.Sigma_tilde.tolist(),
            'Sigma_hat': self.Sigma_hat.tolist(),
            'Sigma_hat_eigenvalues': self.sigma_hat_eigenvalues.tolist(),
            'rank_hat': self.rank_hat,
            'expected_rank': self.expected_rank,
            'pairwise': self.pairwise.tolist(),
            'vanishing_diagonal': self.vanishing_diagonal,
        }


def _report(regime: RegimeClassification, s_tilde: float, Sigma_hat: np.ndarray, source: str) -> CovarianceReport:
    n = Sigma_hat.shape[0]
    rank = numerical_rank(Sigma_hat)
    wanted = expected_rank(regime, n)
    if rank != wanted:
        logger.warning("Sigma_hat has numerical rank %d, expected %d (case %s)", rank, wanted, regime.case)

    vanishing = []
    if regime.case == 'C':
        scale = max(float(np.max(np.abs(Sigma_hat))), 1.0)
        vanishing = [j for j in range(n) if Sigma_hat[j, j] <= RANK_TOL * scale]
        if vanishing:
            logger.warning("Case C diagonal vanishes at vertices %s", vanishing)

    return CovarianceReport(
        regime=regime,
        sigma_tilde_sq=s_tilde,
        Sigma_tilde=np.full((n, n), s_tilde),
        Sigma_hat=Sigma_hat,
        rank_hat=rank,
        expected_rank=wanted,
        pairwise=pairwise_matrix(Sigma_hat),
        vanishing_diagonal=vanishing,
        source=source,
    )


def covariance_report(spec: SpectralData, regime: RegimeClassification) -> CovarianceReport:
    """sigma~^2, Sigma~, Sigma^ and the pairwise synchronization variances from the eigenstructure"""
    matrix, _ = sigma_hat(spec, regime)
    return _report(regime, sigma_tilde_sq(spec, regime.gamma, regime.c), matrix, 'spectral')


def require_rank(report: CovarianceReport) -> None:
    if report.rank_hat != report.expected_rank:
        raise RankMismatch(f"Sigma_hat has rank {report.rank_hat}, expected {report.expected_rank}")


def _centering(n: int) -> np.ndarray:
    return np.eye(n) - np.full((n, n), 1.0 / n)


def _regime_scale(regime: RegimeClassification, rate: float) -> float:
    """Kernel value for a symmetric eigenvalue 1 - rate"""
    c = regime.c
    if regime.case == 'A':
        return c / (2.0 * rate)
    if regime.case == 'B':
        denominator = 2.0 * c * rate - 1.0
        if abs(denominator) < BOUNDARY_TOL:
            raise RegimeBoundary(f"2c(1 - lambda) - 1 = {denominator:.3g} is too close to 0")
        return c ** 2 / denominator
    return c ** 2


def cycle_eigenpairs(n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic eigenvalues, left and right vectors of the N-cycle (Perron pair first)"""
    j = np.arange(n)[:, np.newaxis]
    k = np.arange(1, n + 1)[np.newaxis, :]
    left = np.exp(-2j * np.pi * j * k / n).T / np.sqrt(n)
    eigenvalues = np.exp(2j * np.pi * np.arange(n) / n)
    return eigenvalues, left, np.conj(left)


def closed_form(kind: str, regime: RegimeClassification, n: int,
                alpha: Optional[float] = None, p: Optional[float] = None) -> CovarianceReport:
    """
    Analytic covariance report for a canonical family.

    mean-field:     Sigma^ = k(alpha) (I - 11^T/N), W doubly stochastic
    special-vertex: Sigma^ = k(0) A_p, A_p = I + |a_p|^2 11^T - (1 a_p^T + a_p 1^T)
    cycle:          U S U^T from the analytic Fourier eigenpairs

    with k the regime's kernel evaluated at the family's repeated eigenvalue.

    Raises:
        UnsupportedExample: any other family
    """
    kind = kind.replace('_', '-')
    gamma, c = regime.gamma, regime.c
    validate_gamma(gamma)

    if kind == 'mean-field':
        if alpha is None:
            raise DomainError("mean-field closed form needs alpha")
        s_tilde = c ** 2 / (n * (2.0 * gamma - 1.0))
        matrix = _regime_scale(regime, alpha) * _centering(n)
    elif kind == 'special-vertex':
        if p is None:
            raise DomainError("special-vertex closed form needs p")
        a = special_vertex_vector(n, p)
        ones = np.ones(n)
        a_p = np.eye(n) + (a @ a) * np.outer(ones, ones) - (np.outer(ones, a) + np.outer(a, ones))
        s_tilde = c ** 2 * (a @ a) / (2.0 * gamma - 1.0)
        matrix = _regime_scale(regime, 1.0) * a_p
    elif kind == 'cycle':
        eigenvalues, left, right = cycle_eigenpairs(n)
        s_tilde = c ** 2 / (n * (2.0 * gamma - 1.0))
        matrix = _assemble(left[:, 1:], _s_hat(eigenvalues[1:], right[:, 1:], regime))
    else:
        raise UnsupportedExample(kind)

    return _report(regime, s_tilde, matrix, f"closed-form:{kind}")


def expected_limit(spec: SpectralData, z0) -> float:
    """E[Z_inf] = Z~_0 = N^{-1/2} v1^T Z0 (martingale mean)"""
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (spec.n_vertices,):
        raise DimensionMismatch(f"Z0 has shape {z0.shape}, expected ({spec.n_vertices},)")
    return float(spec.v1 @ z0 / np.sqrt(spec.n_vertices))


def special_vertex_expected_limit(p: float, z1: float, z2: float) -> float:
    return z1 * p + z2 * (1.0 - p)


# Product-sum oracles

LOG_CASE_TOL = 1e-12


@dataclass(frozen=True)
class AppendixOracleInput:
    """
    Parameters of the truncated product-sums with r_k = c / k^gamma,
    p_{k,j} = prod_{m=m0..k} (1 - alpha_j r_m) and l = 1/p.
    """

    alpha1: complex
    alpha2: complex
    gamma: float
    c: float
    n: int
    m0: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'alpha1', complex(self.alpha1))
        object.__setattr__(self, 'alpha2', complex(self.alpha2))
        validate_gamma(self.gamma)
        if self.c <= 0:
            raise DomainError(f"c must be positive, got {self.c!r}")
        if self.alpha1.real <= 0 or self.alpha2.real <= 0:
            raise DomainError(f"alpha real parts must be positive, got {self.alpha1}, {self.alpha2}")
        if self.gamma == 1.0 and self.c * self.real_sum < 1.0 - LOG_CASE_TOL:
            raise DomainError(f"gamma=1 needs c(a1 + a2) >= 1, got {self.c * self.real_sum:.6g}")
        if self.m0 is None:
            object.__setattr__(self, 'm0', default_m0(self.alpha1, self.alpha2, self.gamma, self.c))
        elif self.m0 < 2 or max(self.alpha1.real, self.alpha2.real) * self.c / self.m0 ** self.gamma >= 1.0:
            raise DomainError(f"m0={self.m0} must be >= 2 with max(a1, a2) r_m0 < 1")
        if self.n < self.m0:
            raise DomainError(f"n={self.n} is below m0={self.m0}")

    @property
    def real_sum(self) -> float:
        return self.alpha1.real + self.alpha2.real

    @property
    def log_normalized(self) -> bool:
        return self.gamma == 1.0 and abs(self.c * self.real_sum - 1.0) <= LOG_CASE_TOL

    def with_n(self, n: int) -> 'AppendixOracleInput':
        return AppendixOracleInput(self.alpha1, self.alpha2, self.gamma, self.c, n, self.m0)


def default_m0(alpha1: complex, alpha2: complex, gamma: float, c: float) -> int:
    """Smallest m0 >= 2 with max(a1, a2) c / m0^gamma < 1"""
    top = max(complex(alpha1).real, complex(alpha2).real)
    m = 2
    while top * c / m ** gamma >= 1.0:
        m += 1
    return m


def appendix_limit_value(inp: AppendixOracleInput) -> complex:
    """Limit of the normalized product-sum"""
    alpha_sum = inp.alpha1 + inp.alpha2
    if inp.log_normalized:
        return complex(inp.c ** 2) if abs(alpha_sum.imag) <= LOG_CASE_TOL else 0j
    if inp.gamma < 1.0:
        return inp.c / alpha_sum
    return inp.c ** 2 / (inp.c * alpha_sum - 1.0)


def _log_products(inp: AppendixOracleInput, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Rates r_k and cumulative log(p_{k,1} p_{k,2}) for k = m0..n"""
    k = np.arange(inp.m0, n + 1, dtype=float)
    r = inp.c / k ** inp.gamma
    logs = np.log1p(-inp.alpha1 * r) + np.log1p(-inp.alpha2 * r)
    return r, np.cumsum(logs)


def _normalization(inp: AppendixOracleInput, n: int) -> float:
    return n / np.log(n) if inp.log_normalized else float(n) ** inp.gamma


def appendix_limit_partials(inp: AppendixOracleInput, ns: Sequence[int]) -> List[complex]:
    """Normalized product-sums at every n in ns (one accumulation up to max(ns))"""
    top = max(ns)
    r, cum = _log_products(inp, top)
    weights = r ** 2
    values = []
    for n in ns:
        if n < inp.m0:
            raise DomainError(f"n={n} is below m0={inp.m0}")
        last = n - inp.m0
        # p_n l_k = exp(L_n - L_k)
        tail = np.exp(cum[last] - cum[: last + 1])
        values.append(complex(_normalization(inp, n) * np.sum(weights[: last + 1] * tail)))
    return values


def appendix_limit_partial(inp: AppendixOracleInput) -> complex:
    """
    n^gamma p_{n,1} p_{n,2} sum_{k=m0..n} r_k^2 l_{k,1} l_{k,2}, with n/ln(n) in
    place of n^gamma when gamma = 1 and c(a1 + a2) = 1.

    Accumulated in the log domain, so no partial product overflows.
    """
    return appendix_limit_partials(inp, [inp.n])[0]


def correction_exponent(inp: AppendixOracleInput) -> float:
    """Power of n in the leading finite-n bias of the power-normalized partials"""
    if inp.gamma < 1.0:
        return inp.gamma - 1.0
    return max(1.0 - inp.c * inp.real_sum, -1.0)


def appendix_limit_estimate(inp: AppendixOracleInput, n_ratio: int = 10) -> complex:
    """
    Two-point extrapolation of the partials at n and n / n_ratio that removes
    the leading bias term (a n^beta, or a / ln(n) in the log-normalized case).
    """
    m = max(inp.m0, inp.n // n_ratio)
    if m == inp.n:
        raise DomainError(f"n={inp.n} is too small to extrapolate with ratio {n_ratio}")
    s_m, s_n = appendix_limit_partials(inp, [m, inp.n])
    if inp.log_normalized:
        log_n, log_m = np.log(inp.n), np.log(m)
        return (s_n * log_n - s_m * log_m) / (log_n - log_m)
    beta = correction_exponent(inp)
    n_beta, m_beta = float(inp.n) ** beta, float(m) ** beta
    return (s_n * m_beta - s_m * n_beta) / (m_beta - n_beta)


def appendix_moment_bound_partial(inp: AppendixOracleInput, u: float) -> float:
    """
    n^{gamma(2u-1)} |p_{n,1}|^u |p_{n,2}|^u sum_k r_k^{2u} |l_{k,1}|^u |l_{k,2}|^u.

    Bounded in n whenever gamma < 1, or gamma = 1 with u c (a1 + a2) > 2u - 1.
    """
    if u < 1:
        raise DomainError(f"u must be >= 1, got {u!r}")
    if inp.gamma == 1.0 and u * inp.c * inp.real_sum <= 2.0 * u - 1.0:
        raise DomainError("gamma=1 moment bound needs u c (a1 + a2) > 2u - 1")
    r, cum = _log_products(inp, inp.n)
    tail = np.exp(u * (cum[-1].real - cum.real))
    return float(float(inp.n) ** (inp.gamma * (2.0 * u - 1.0)) * np.sum(r ** (2.0 * u) * tail))
