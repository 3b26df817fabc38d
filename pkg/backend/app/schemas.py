"""Wire documents and experiment configuration (pydantic models)."""

import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.services.dynamics import ForcingVariant, ReinforcementSchedule
from app.services.network import (
    BlockSpec,
    WeightedNetwork,
    assemble_reducible,
    block_spec_from_lists,
    network_from_spec,
)

Matrix = List[List[float]]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra='forbid')


class NetworkDocument(StrictModel):
    """{"n": N, "weights": [[...]]}, row-major"""

    n: int = Field(ge=1)
    weights: Matrix

    @model_validator(mode='after')
    def check_shape(self):
        if len(self.weights) != self.n or any(len(row) != self.n for row in self.weights):
            raise ValueError(f"weights must be {self.n}x{self.n}")
        return self

    @classmethod
    def from_network(cls, net: WeightedNetwork) -> 'NetworkDocument':
        return cls(n=net.n_vertices, weights=net.weights.tolist())

    def build(self) -> WeightedNetwork:
        return network_from_spec('matrix', weights=self.weights)


class ComplexValue(BaseModel):
    re: float
    im: float


class SpectralDocument(BaseModel):
    n: int
    weights: Matrix
    eigenvalues: List[ComplexValue]
    left_vectors: List[List[ComplexValue]]
    right_vectors: List[List[ComplexValue]]
    v1: List[float]
    lambda_star: Optional[ComplexValue] = None


class RegimeDocument(BaseModel):
    gamma: float
    c: float
    case: Literal['A', 'B', 'C']
    tol: float
    a_star_set: List[int]
    m_star: int


class CovarianceDocument(BaseModel):
    source: str
    regime: RegimeDocument
    sigma_tilde_sq: float
    Sigma_tilde: Matrix
    Sigma_hat: Matrix
    Sigma_hat_eigenvalues: List[float]
    rank_hat: int
    expected_rank: int
    pairwise: Matrix
    vanishing_diagonal: List[int]


class ConfidenceIntervalDocument(BaseModel):
    center: float
    half_width: float
    lower: float
    upper: float
    level: float


class TestResultDocument(BaseModel):
    statistic: float
    dof: int
    p_value: float
    critical_value: float
    reject: bool
    level: float
    case: Literal['A', 'B', 'C']
    z_tilde: float
    n: int


class ScheduleModel(StrictModel):
    gamma: float = Field(gt=0.5, le=1.0)
    c: float = Field(gt=0.0)
    offset: Optional[float] = Field(default=None, gt=0.0)

    def build(self) -> ReinforcementSchedule:
        return ReinforcementSchedule(gamma=self.gamma, c=self.c, offset=self.offset)


class ForcingModel(StrictModel):
    rho: float = Field(ge=0.0, lt=1.0)
    q: float = Field(ge=0.0, le=1.0)

    def build(self) -> ForcingVariant:
        return ForcingVariant(rho=self.rho, q=self.q)


class BlockSpecModel(StrictModel):
    leader_blocks: List[Matrix] = Field(min_length=1)
    follower_block: Optional[Matrix] = None
    coupling_blocks: Optional[List[Matrix]] = None

    def build(self) -> BlockSpec:
        return block_spec_from_lists(self.leader_blocks, self.follower_block, self.coupling_blocks)


class NetworkSpecModel(StrictModel):
    """A generator name with its parameters, an explicit matrix or a reducible composition"""

    kind: Literal['mean-field', 'cycle', 'special-vertex', 'matrix', 'reducible']
    n: Optional[int] = Field(default=None, ge=1)
    alpha: Optional[float] = None
    p: Optional[float] = None
    weights: Optional[Matrix] = None
    blocks: Optional[BlockSpecModel] = None

    @model_validator(mode='after')
    def check_parameters(self):
        if self.kind == 'reducible' and self.blocks is None:
            raise ValueError("kind 'reducible' requires 'blocks'")
        if self.kind == 'matrix' and self.weights is None:
            raise ValueError("kind 'matrix' requires 'weights'")
        if self.kind in ('mean-field', 'cycle', 'special-vertex') and self.n is None:
            raise ValueError(f"kind {self.kind!r} requires 'n'")
        return self

    def build(self) -> WeightedNetwork:
        if self.kind == 'reducible':
            return assemble_reducible(self.blocks.build())
        return network_from_spec(self.kind, n=self.n, alpha=self.alpha, p=self.p, weights=self.weights)


CheckName = Literal[
    'martingale',
    'synchronization',
    'sync_clt',
    'convergence_clt',
    'ci_coverage',
    'test_calibration',
    'forcing',
    'reducible',
    'limit_distribution',
    'enumeration',
]


class Thresholds(StrictModel):
    """Pass/fail bounds of the Monte Carlo checks"""

    degenerate_delta: float = 1e-3
    martingale_se: float = 4.0
    spread_max: float = 0.05
    sync_ratio: Tuple[float, float] = (0.9, 1.1)
    sync_rate_tol: float = 0.2
    convergence_ratio: Tuple[float, float] = (0.85, 1.15)
    size: Tuple[float, float] = (0.03, 0.08)
    mean_statistic_rel: float = 0.10
    p_value_ks_max: float = 0.05
    alternative_mean_rel: float = 0.15
    coverage: Tuple[float, float] = (0.90, 0.98)
    forcing_tol: float = 0.01
    reducible_tol: float = 0.02
    block_spread_max: float = 0.05
    interior_fraction_min: float = 0.5
    interior_bounds: Tuple[float, float] = (0.01, 0.99)
    max_bin_mass: float = 0.2
    histogram_bins: int = 50
    tv_max: float = 0.01
    enumeration_bins: int = 20


class ExperimentConfig(StrictModel):
    """One replicated experiment and the checks to run on it"""

    name: str = 'experiment'
    network: NetworkSpecModel
    schedule: ScheduleModel
    z0: Union[float, List[float]] = 0.5
    horizon: int = Field(ge=1)
    replications: int = Field(ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    checks: List[CheckName] = Field(default_factory=lambda: ['martingale', 'synchronization'])
    thresholds: Thresholds = Field(default_factory=Thresholds)
    forcing: Optional[ForcingModel] = None
    analysis_n: Optional[int] = Field(default=None, ge=2)
    early_n: Optional[int] = Field(default=None, ge=1)
    proxy_factor: int = Field(default=100, ge=2)
    stability_factor: int = Field(default=10, ge=2)
    checkpoints: List[int] = Field(default_factory=list)
    pair: Tuple[int, int] = (0, 1)
    level: float = Field(default=0.95, gt=0.0, lt=1.0)
    hypothesized: Optional[NetworkSpecModel] = None

    @field_validator('checkpoints')
    @classmethod
    def check_checkpoints(cls, value):
        if any(n < 0 for n in value):
            raise ValueError("checkpoints must be non-negative")
        return sorted(set(value))

    @model_validator(mode='after')
    def check_horizons(self):
        if any(n > self.horizon for n in self.checkpoints):
            raise ValueError(f"checkpoints must not exceed the horizon {self.horizon}")
        if self.analysis_n is not None and self.analysis_n > self.horizon:
            raise ValueError("analysis_n must not exceed the horizon")
        if 'reducible' in self.checks and self.network.kind != 'reducible':
            raise ValueError("check 'reducible' needs a network of kind 'reducible'")
        if 'forcing' in self.checks and self.forcing is None:
            raise ValueError("check 'forcing' needs a 'forcing' block")
        return self

    @property
    def n_analysis(self) -> int:
        """Analysis time n; defaults to horizon / proxy_factor when the proxy fits, else the horizon"""
        if self.analysis_n is not None:
            return self.analysis_n
        if 'convergence_clt' in self.checks or 'ci_coverage' in self.checks:
            return max(2, self.horizon // self.proxy_factor)
        return self.horizon

    @property
    def n_early(self) -> int:
        return self.early_n if self.early_n is not None else max(1, self.horizon // 100)

    def record_steps(self) -> List[int]:
        n = self.n_analysis
        steps = {0, self.horizon, n, self.n_early, *self.checkpoints}
        for multiple in (4 * n, self.stability_factor * n, self.proxy_factor * n):
            if multiple <= self.horizon:
                steps.add(multiple)
        return sorted(steps)

    def initial_state(self, n_vertices: int) -> np.ndarray:
        z0 = np.array(self.z0, dtype=float)
        return np.full(n_vertices, float(z0)) if z0.ndim == 0 else z0

    @classmethod
    def from_file(cls, path) -> 'ExperimentConfig':
        with open(Path(path), 'r', encoding='utf-8') as f:
            return cls.model_validate(json.load(f))


class TrajectorySummaryDocument(BaseModel):
    n: int
    final_state: List[float]
    z_tilde: Optional[float]
    spread: float
    seed: int
    replication: int
    schedule: dict
    variant: Optional[dict] = None


class CheckReportDocument(BaseModel):
    name: str
    passed: bool
    observed: dict
    expected: dict
    notes: List[str] = Field(default_factory=list)


class EnsembleSummaryDocument(BaseModel):
    config: ExperimentConfig
    n_vertices: int
    steps: List[int]
    terminal: dict
    aggregates: dict
    checks: List[CheckReportDocument]
    passed: bool


# HTTP request bodies

SIMULATION_HORIZON_LIMIT = 10 ** 5


class ConfidenceIntervalRequest(StrictModel):
    """Either z_tilde or the full state must be given"""

    network: NetworkSpecModel
    gamma: float
    c: float = 1.0
    n: int = Field(ge=1)
    z_tilde: Optional[float] = None
    state: Optional[List[float]] = None
    level: float = 0.95

    @model_validator(mode='after')
    def check_observation(self):
        if (self.z_tilde is None) == (self.state is None):
            raise ValueError("give exactly one of 'z_tilde' or 'state'")
        return self


class TopologyTestRequest(StrictModel):
    network: NetworkSpecModel
    state: List[float]
    n: int = Field(ge=2)
    gamma: float
    c: float = 1.0
    level: float = 0.95
    tol: float = Field(default=1e-9, gt=0.0)


class SimulationRequest(StrictModel):
    network: NetworkSpecModel
    schedule: ScheduleModel
    z0: Union[float, List[float]] = 0.5
    horizon: int = Field(ge=1, le=SIMULATION_HORIZON_LIMIT)
    stride: Optional[int] = Field(default=None, ge=1)
    forcing: Optional[ForcingModel] = None
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    replication: int = Field(default=0, ge=0)

    def initial_state(self, n_vertices: int) -> np.ndarray:
        z0 = np.array(self.z0, dtype=float)
        return np.full(n_vertices, float(z0)) if z0.ndim == 0 else z0
