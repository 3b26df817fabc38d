"""Weighted adjacency matrices: validation, canonical families and reducible compositions.

Entry w[j][k] is the influence of vertex j on vertex k; columns sum to one.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import networkx as nx
import numpy as np
from scipy import linalg

from app.errors import (
    AlphaOutOfRange,
    ColumnNotNormalized,
    DimensionMismatch,
    NegativeWeight,
    NetworkError,
    NTooSmall,
    POutOfRange,
)

logger = logging.getLogger(__name__)

COLUMN_TOL = 1e-12


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class WeightedNetwork:
    """Validated column-normalized weighted adjacency matrix"""

    weights: np.ndarray
    irreducible: bool

    @property
    def n_vertices(self) -> int:
        return self.weights.shape[0]

    def is_doubly_stochastic(self, tol: float = COLUMN_TOL) -> bool:
        return bool(np.all(np.abs(self.weights.sum(axis=1) - 1.0) <= tol))

    def is_symmetric(self, tol: float = 1e-14) -> bool:
        return bool(np.allclose(self.weights, self.weights.T, atol=tol, rtol=0.0))

    def to_dict(self) -> dict:
        return {'n': self.n_vertices, 'weights': self.weights.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def is_strongly_connected(weights: np.ndarray) -> bool:
    """Strong connectivity of the digraph with an edge j->k whenever w[j][k] > 0"""
    graph = nx.from_numpy_array((np.asarray(weights) > 0).astype(int), create_using=nx.DiGraph)
    return nx.is_strongly_connected(graph)


def build_network(weights) -> WeightedNetwork:
    """
    Validate a weight matrix and wrap it.

    Columns within COLUMN_TOL of one are renormalized exactly so that the
    downstream algebra sees W^T 1 = 1.

    Raises:
        DimensionMismatch: matrix is empty, not square or not finite
        NegativeWeight: some entry is below zero
        ColumnNotNormalized: some column sum differs from one by more than COLUMN_TOL
    """
    w = np.array(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
        raise DimensionMismatch(f"weights must be a non-empty square matrix, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise DimensionMismatch("weights contain non-finite entries")

    negative = np.argwhere(w < 0)
    if negative.size:
        j, k = negative[0]
        raise NegativeWeight(int(j), int(k), float(w[j, k]))

    sums = w.sum(axis=0)
    for k, s in enumerate(sums):
        if abs(s - 1.0) > COLUMN_TOL:
            raise ColumnNotNormalized(k, float(s))
    w = w / sums[np.newaxis, :]

    return WeightedNetwork(weights=_frozen(w), irreducible=is_strongly_connected(w))


def mean_field(n: int, alpha: float) -> WeightedNetwork:
    """w[j][k] = alpha/N + delta_jk (1 - alpha)"""
    if n < 1:
        raise NTooSmall(n, 1)
    if not 0.0 < alpha <= 1.0:
        raise AlphaOutOfRange(alpha)
    w = np.full((n, n), alpha / n) + (1.0 - alpha) * np.eye(n)
    return build_network(w)


def cycle(n: int) -> WeightedNetwork:
    """Each vertex j influences only vertex j+1 (and N influences 1)"""
    if n < 2:
        raise NTooSmall(n, 2)
    w = np.zeros((n, n))
    w[np.arange(n), (np.arange(n) + 1) % n] = 1.0
    return build_network(w)


def special_vertex_vector(n: int, p: float) -> np.ndarray:
    """a_p = (p, (1-p)/(N-1), ..., (1-p)/(N-1))"""
    a = np.full(n, (1.0 - p) / (n - 1))
    a[0] = p
    return a


def special_vertex(n: int, p: float) -> WeightedNetwork:
    """W = a_p 1^T: every vertex listens to the same mixture, dominated by vertex 1"""
    if n < 2:
        raise NTooSmall(n, 2)
    if not 0.0 < p < 1.0:
        raise POutOfRange(p)
    return build_network(np.outer(special_vertex_vector(n, p), np.ones(n)))


GENERATORS = ('mean-field', 'cycle', 'special-vertex')


def network_from_spec(kind: str, n: Optional[int] = None, alpha: Optional[float] = None,
                      p: Optional[float] = None, weights=None) -> WeightedNetwork:
    """Dispatch a generator name (or an explicit matrix) to a network"""
    kind = kind.replace('_', '-')
    if kind == 'matrix':
        if weights is None:
            raise DimensionMismatch("kind 'matrix' requires explicit weights")
        return build_network(weights)
    if n is None:
        raise NTooSmall(0, 1)
    if kind == 'mean-field':
        return mean_field(n, 1.0 if alpha is None else alpha)
    if kind == 'cycle':
        return cycle(n)
    if kind == 'special-vertex':
        if p is None:
            raise POutOfRange(p)
        return special_vertex(n, p)
    raise NetworkError(f"unknown network generator {kind!r}; expected one of {GENERATORS + ('matrix',)}")


def load_network(path) -> WeightedNetwork:
    """Read {"n": N, "weights": [[...]]} from a JSON file"""
    with open(Path(path), 'r', encoding='utf-8') as f:
        document = json.load(f)
    weights = document.get('weights')
    if weights is None or len(weights) != document.get('n', len(weights)):
        raise DimensionMismatch(f"network document {path} has inconsistent 'n' and 'weights'")
    return build_network(weights)


@dataclass(frozen=True)
class BlockSpec:
    """Leader blocks W_1..W_m, an optional follower block W_f and couplings W_jf"""

    leader_blocks: List[np.ndarray]
    follower_block: Optional[np.ndarray] = None
    coupling_blocks: Optional[List[np.ndarray]] = None
    leader_sizes: List[int] = field(init=False)

    def __post_init__(self):
        leaders = [np.atleast_2d(np.array(b, dtype=float)) for b in self.leader_blocks]
        object.__setattr__(self, 'leader_blocks', leaders)
        object.__setattr__(self, 'leader_sizes', [b.shape[0] for b in leaders])
        if self.follower_block is not None:
            object.__setattr__(self, 'follower_block', np.atleast_2d(np.array(self.follower_block, dtype=float)))
        if self.coupling_blocks is not None:
            couplings = [np.atleast_2d(np.array(b, dtype=float)) for b in self.coupling_blocks]
            object.__setattr__(self, 'coupling_blocks', couplings)

    @property
    def n_follower(self) -> int:
        return 0 if self.follower_block is None else self.follower_block.shape[0]

    @property
    def n_vertices(self) -> int:
        return sum(self.leader_sizes) + self.n_follower

    def block_slices(self) -> List[slice]:
        """Vertex index ranges of the leader blocks, then of the follower block (if any)"""
        slices, start = [], 0
        for size in self.leader_sizes:
            slices.append(slice(start, start + size))
            start += size
        if self.n_follower:
            slices.append(slice(start, start + self.n_follower))
        return slices


def _validate_blocks(spec: BlockSpec) -> None:
    if not spec.leader_blocks:
        raise DimensionMismatch("at least one leader block is required")
    for index, block in enumerate(spec.leader_blocks):
        if block.shape[0] != block.shape[1]:
            raise DimensionMismatch(f"leader block {index} is not square: {block.shape}")
        if not build_network(block).irreducible:
            raise NetworkError(f"leader block {index} is reducible")

    if spec.follower_block is None:
        if spec.coupling_blocks:
            raise DimensionMismatch("coupling blocks given without a follower block")
        return

    follower = spec.follower_block
    if follower.shape[0] != follower.shape[1]:
        raise DimensionMismatch(f"follower block is not square: {follower.shape}")
    if spec.coupling_blocks is None or len(spec.coupling_blocks) != len(spec.leader_blocks):
        raise DimensionMismatch("one coupling block per leader block is required with a follower block")
    for index, (size, coupling) in enumerate(zip(spec.leader_sizes, spec.coupling_blocks)):
        if coupling.shape != (size, spec.n_follower):
            raise DimensionMismatch(
                f"coupling block {index} has shape {coupling.shape}, expected {(size, spec.n_follower)}"
            )
    if np.any(follower < 0):
        raise NegativeWeight(-1, -1, float(follower.min()))
    top = np.max(linalg.eigvals(follower).real)
    if top >= 1.0:
        raise NetworkError(f"follower block has an eigenvalue with real part {top:.6g} >= 1")


def assemble_reducible(spec: BlockSpec) -> WeightedNetwork:
    """
    Assemble the block-upper-triangular matrix

        [W_1  0  ...  0   W_1f]
        [ 0  W_2 ...  0   W_2f]
        [ ...               ...]
        [ 0   0  ... W_m  W_mf]
        [ 0   0  ...  0   W_f ]

    and validate it like any other network.
    """
    _validate_blocks(spec)
    n = spec.n_vertices
    w = np.zeros((n, n))
    slices = spec.block_slices()
    for block, rows in zip(spec.leader_blocks, slices):
        w[rows, rows] = block
    if spec.n_follower:
        follower = slices[-1]
        for coupling, rows in zip(spec.coupling_blocks, slices):
            w[rows, follower] = coupling
        w[follower, follower] = spec.follower_block

    network = build_network(w)
    logger.info(
        "Assembled reducible network: %d leader block(s) %s, %d follower vertex(es), irreducible=%s",
        len(spec.leader_blocks), spec.leader_sizes, spec.n_follower, network.irreducible,
    )
    return network


def follower_limit_weights(spec: BlockSpec) -> np.ndarray:
    """
    Convex weights of the follower limits over the leader-block limits.

    In the limit the followers satisfy Z_f = W_f^T Z_f + sum_j W_jf^T 1 z_j, so
    row i of the returned (n_f x m) matrix gives follower i's limit as a
    combination of the m block limits.
    """
    _validate_blocks(spec)
    if not spec.n_follower:
        return np.zeros((0, len(spec.leader_blocks)))
    inflow = np.column_stack([c.T @ np.ones(c.shape[0]) for c in spec.coupling_blocks])
    return np.linalg.solve(np.eye(spec.n_follower) - spec.follower_block.T, inflow)


def block_spec_from_lists(leaders: Sequence, follower=None, couplings=None) -> BlockSpec:
    return BlockSpec(
        leader_blocks=[np.array(b, dtype=float) for b in leaders],
        follower_block=None if follower is None else np.array(follower, dtype=float),
        coupling_blocks=None if couplings is None else [np.array(c, dtype=float) for c in couplings],
    )
