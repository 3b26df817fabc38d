"""Biorthogonal eigenstructure of W and the (gamma, c, lambda*) regime.

Left vectors u_j satisfy W^T u_j = lambda_j u_j, right vectors v_j satisfy
W v_j = lambda_j v_j, and the pairing u_h^T v_j = delta_hj uses the plain
(bilinear) transpose, never the conjugate one.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from app.errors import (
    BiorthogonalizationFailed,
    GammaOutOfRange,
    NotDiagonalizable,
    NotIrreducible,
    PerronSignError,
    RegimeError,
    UncoveredRegime,
)
from app.services.network import WeightedNetwork

logger = logging.getLogger(__name__)

CLUSTER_TOL = 1e-8
PAIRING_TOL = 1e-12
CONDITION_LIMIT = 1e12
SIGN_TOL = 1e-10
INVARIANT_TOL = 1e-9
REGIME_TOL = 1e-9

CASES = ('A', 'B', 'C')


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues (lambda_1 = 1 first) with unit-norm left and scaled right vectors"""

    weights: np.ndarray
    eigenvalues: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    v1: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.weights.shape[0]

    @property
    def u1(self) -> np.ndarray:
        return self.left_vectors[:, 0].real

    @property
    def U(self) -> np.ndarray:
        return self.left_vectors[:, 1:]

    @property
    def V(self) -> np.ndarray:
        return self.right_vectors[:, 1:]

    @property
    def diag_D(self) -> np.ndarray:
        return self.eigenvalues[1:]

    @property
    def lambda_star(self) -> Optional[complex]:
        if self.n_vertices == 1:
            return None
        return complex(self.eigenvalues[1])

    @property
    def v1_norm_sq(self) -> float:
        return float(self.v1 @ self.v1)

    def to_dict(self) -> dict:
        def grid(matrix):
            return [[{'re': float(x.real), 'im': float(x.imag)} for x in row] for row in matrix]

        star = self.lambda_star
        return {
            'n': self.n_vertices,
            'weights': self.weights.tolist(),
            'eigenvalues': [{'re': float(x.real), 'im': float(x.imag)} for x in self.eigenvalues],
            'left_vectors': grid(self.left_vectors),
            'right_vectors': grid(self.right_vectors),
            'v1': self.v1.tolist(),
            'lambda_star': None if star is None else {'re': star.real, 'im': star.imag},
        }


def _frozen(array: np.ndarray, dtype=complex) -> np.ndarray:
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


def _cluster(values: np.ndarray, tol: float = CLUSTER_TOL) -> List[List[int]]:
    """Group indices of numerically equal eigenvalues (transitively)"""
    parent = list(range(len(values)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            if abs(values[i] - values[j]) < tol * max(1.0, abs(values[i])):
                parent[find(i)] = find(j)

    groups: Dict[int, List[int]] = {}
    for i in range(len(values)):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _real_basis(vectors: np.ndarray, m: int) -> np.ndarray:
    """Orthonormal real basis of the real subspace spanned by Re/Im parts"""
    stacked = np.hstack([vectors.real, vectors.imag])
    basis, _, _ = np.linalg.svd(stacked, full_matrices=False)
    return basis[:, :m]


def _orthonormal(vectors: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(vectors)
    return q


def _pair(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Rescale right vectors within an eigenspace so that left^T right = I"""
    gram = left.T @ right
    if np.linalg.svd(gram, compute_uv=False).min() < PAIRING_TOL:
        raise BiorthogonalizationFailed(
            "left/right eigenvector pairing is singular (|u^T v| below 1e-12): W looks defective"
        )
    return right @ np.linalg.inv(gram)


def _order_key(value: complex) -> Tuple[float, float, float]:
    """
    Sort key for lambda_2..lambda_N.

    Descending real part. Equal real parts are broken by descending imaginary
    part over the upper half-plane members, each followed at once by its
    conjugate; a real eigenvalue comes after the pairs sharing its real part.
    So a+2i, a-2i, a+i, a-i, a.
    """
    return (-round(value.real, 9), -round(abs(value.imag), 9), -round(value.imag, 9))


def _perron_vector(right: np.ndarray, n: int) -> np.ndarray:
    v = right.real
    scale = np.max(np.abs(v))
    if np.any(v / scale < -SIGN_TOL) and np.any(v / scale > SIGN_TOL):
        raise PerronSignError(f"Perron right eigenvector has mixed signs: {v}")
    return v * np.sqrt(n) / v.sum()


def decompose(net: WeightedNetwork) -> SpectralData:
    """
    Biorthogonal eigendecomposition W^T = u_1 v_1^T + U D V^T.

    Within an eigenspace of multiplicity > 1 the left vectors are chosen
    orthonormal; conjugate eigenspaces receive conjugate bases.

    Raises:
        NotIrreducible: W is not strongly connected
        NotDiagonalizable: eigenvector matrix condition number above 1e12
        BiorthogonalizationFailed: a left/right pairing is singular
        PerronSignError: the Perron vector mixes signs
    """
    if not net.irreducible:
        raise NotIrreducible()

    w = np.asarray(net.weights, dtype=float)
    n = net.n_vertices
    if n == 1:
        one = np.ones((1, 1), dtype=complex)
        return SpectralData(
            weights=_frozen(w, float), eigenvalues=_frozen([1.0]),
            left_vectors=_frozen(one), right_vectors=_frozen(one), v1=_frozen([1.0], float),
        )

    values, vl, vr = linalg.eig(w, left=True, right=True)
    if np.linalg.cond(vr) > CONDITION_LIMIT:
        raise NotDiagonalizable(f"right eigenvector matrix is ill-conditioned (cond > {CONDITION_LIMIT:g})")
    left_raw = np.conj(vl)

    perron = int(np.argmin(np.abs(values - 1.0)))
    others = [i for i in range(n) if i != perron]
    clusters = [[others[i] for i in group] for group in _cluster(values[others])]

    # eigenspaces: representative value, left basis, right basis
    spaces: List[Tuple[complex, np.ndarray, np.ndarray]] = []
    upper, lower = [], []
    for members in clusters:
        rep = complex(np.mean(values[members]))
        m = len(members)
        if abs(rep.imag) <= CLUSTER_TOL:
            left = _real_basis(left_raw[:, members], m).astype(complex)
            right = _real_basis(vr[:, members], m).astype(complex)
            spaces.append((complex(rep.real, 0.0), left, _pair(left, right)))
        elif rep.imag > 0:
            upper.append((rep, members))
        else:
            lower.append((rep, members))

    if len(upper) != len(lower):
        raise BiorthogonalizationFailed("complex eigenvalues do not come in conjugate pairs")
    for rep, members in upper:
        partner = min(lower, key=lambda item: abs(item[0] - np.conj(rep)))
        if abs(partner[0] - np.conj(rep)) > CLUSTER_TOL * max(1.0, abs(rep)) or len(partner[1]) != len(members):
            raise BiorthogonalizationFailed(f"no conjugate partner for eigenvalue {rep}")
        left = _orthonormal(left_raw[:, members])
        right = _pair(left, vr[:, members])
        spaces.append((rep, left, right))
        spaces.append((np.conj(rep), np.conj(left), np.conj(right)))

    spaces.sort(key=lambda space: _order_key(space[0]))

    eigenvalues = [1.0 + 0.0j]
    left_cols = [np.full(n, 1.0 / np.sqrt(n), dtype=complex)]
    v1 = _perron_vector(vr[:, perron], n)
    right_cols = [v1.astype(complex)]
    for rep, left, right in spaces:
        for col in range(left.shape[1]):
            eigenvalues.append(rep)
            left_cols.append(left[:, col])
            right_cols.append(right[:, col])

    left_all = np.column_stack(left_cols)
    if np.linalg.cond(left_all) > CONDITION_LIMIT:
        raise NotDiagonalizable(f"left eigenvector matrix is ill-conditioned (cond > {CONDITION_LIMIT:g})")

    spec = SpectralData(
        weights=_frozen(w, float),
        eigenvalues=_frozen(eigenvalues),
        left_vectors=_frozen(left_all),
        right_vectors=_frozen(np.column_stack(right_cols)),
        v1=_frozen(v1, float),
    )

    residues = check_invariants(spec)
    if residues['biorthogonality'] > INVARIANT_TOL:
        raise BiorthogonalizationFailed(
            f"biorthogonality residue {residues['biorthogonality']:.3g} exceeds {INVARIANT_TOL:g}"
        )
    logger.info("Decomposed N=%d network: lambda*=%s, |v1|^2=%.6g", n, spec.lambda_star, spec.v1_norm_sq)
    logger.debug("Spectral residues: %s", residues)
    return spec


def reconstruct(spec: SpectralData) -> Tuple[np.ndarray, float]:
    """Real part of u_1 v_1^T + U D V^T (should equal W^T) and the largest imaginary residue"""
    full = np.outer(spec.u1, spec.v1) + (spec.U * spec.diag_D) @ spec.V.T
    return full.real, float(np.max(np.abs(full.imag)))


def check_invariants(spec: SpectralData) -> Dict[str, float]:
    """Largest entrywise residues of the biorthogonal identities"""
    n = spec.n_vertices
    identity = np.eye(n)
    left, right = spec.left_vectors, spec.right_vectors
    resolution = np.outer(spec.u1, spec.v1) + spec.U @ spec.V.T
    recon, recon_imag = reconstruct(spec)
    return {
        'biorthogonality': float(np.max(np.abs(right.T @ left - identity))),
        'identity_resolution': float(np.max(np.abs(resolution - identity))),
        'reconstruction': float(np.max(np.abs(recon - spec.weights.T))),
        'imaginary_residue': float(max(np.max(np.abs(resolution.imag)), recon_imag)),
        'perron_normalization': float(abs(spec.v1.sum() / np.sqrt(n) - 1.0)),
    }


@dataclass(frozen=True)
class RegimeClassification:
    """Asymptotic regime: A (gamma < 1), B (gamma = 1, subcritical lambda*), C (critical lambda*)"""

    gamma: float
    c: float
    case: str
    tol: float = REGIME_TOL
    a_star_set: Tuple[int, ...] = field(default_factory=tuple)

    @property
    def m_star(self) -> int:
        return len(self.a_star_set)

    @property
    def threshold(self) -> float:
        return 1.0 - 1.0 / (2.0 * self.c)

    def sync_rate(self, n: float) -> float:
        """Scaling of Z_n,j - Z_n,k (and of the topology statistic) at time n"""
        if self.case == 'A':
            return n ** (self.gamma / 2.0)
        if self.case == 'B':
            return np.sqrt(n)
        return np.sqrt(n / np.log(n))

    def convergence_rate(self, n: float) -> float:
        """Scaling of Z~_n - Z_inf"""
        return n ** (self.gamma - 0.5)

    def to_dict(self) -> dict:
        return {
            'gamma': self.gamma,
            'c': self.c,
            'case': self.case,
            'tol': self.tol,
            'a_star_set': list(self.a_star_set),
            'm_star': self.m_star,
        }


def validate_gamma(gamma: float) -> None:
    if not 0.5 < gamma <= 1.0:
        raise GammaOutOfRange(gamma)


def classify_regime(spec: SpectralData, gamma: float, c: float, tol: float = REGIME_TOL) -> RegimeClassification:
    """
    Classify (gamma, c, lambda*) into case A, B or C.

    a_star_set holds 0-based positions in spec.eigenvalues of the eigenvalues
    on the critical line Re(lambda) = 1 - 1/(2c), counted with multiplicity.

    Raises:
        GammaOutOfRange: gamma outside (1/2, 1]
        UncoveredRegime: gamma = 1 and Re(lambda*) above 1 - 1/(2c) + tol
    """
    validate_gamma(gamma)
    if c <= 0:
        raise RegimeError(f"c must be positive, got {c!r}")
    if tol <= 0:
        raise RegimeError(f"tolerance must be positive, got {tol!r}")

    if gamma < 1.0 or spec.lambda_star is None:
        case = 'A' if gamma < 1.0 else 'B'
        logger.info("Regime %s (gamma=%g, c=%g)", case, gamma, c)
        return RegimeClassification(gamma=gamma, c=c, case=case, tol=tol)

    threshold = 1.0 - 1.0 / (2.0 * c)
    gap = spec.lambda_star.real - threshold
    if gap < -tol:
        regime = RegimeClassification(gamma=gamma, c=c, case='B', tol=tol)
    elif gap <= tol:
        critical = tuple(
            j for j in range(1, spec.n_vertices) if abs(spec.eigenvalues[j].real - threshold) <= tol
        )
        regime = RegimeClassification(gamma=gamma, c=c, case='C', tol=tol, a_star_set=critical)
    else:
        raise UncoveredRegime(spec.lambda_star.real, threshold)

    logger.info(
        "Regime %s (gamma=%g, c=%g, Re(lambda*)=%.12g, threshold=%.12g, m*=%d)",
        regime.case, gamma, c, spec.lambda_star.real, threshold, regime.m_star,
    )
    return regime


def spectral_from_dict(document: dict) -> SpectralData:
    """Rebuild SpectralData from its JSON form and re-check the biorthogonal identities"""
    def grid(rows):
        return np.array([[complex(x['re'], x['im']) for x in row] for row in rows], dtype=complex)

    spec = SpectralData(
        weights=_frozen(document['weights'], float),
        eigenvalues=_frozen([complex(x['re'], x['im']) for x in document['eigenvalues']]),
        left_vectors=_frozen(grid(document['left_vectors'])),
        right_vectors=_frozen(grid(document['right_vectors'])),
        v1=_frozen(document['v1'], float),
    )
    residues = check_invariants(spec)
    if residues['biorthogonality'] > INVARIANT_TOL or residues['reconstruction'] > 1e-8:
        raise BiorthogonalizationFailed(f"spectral document fails its invariants: {residues}")
    return spec
