"""Interacting reinforced stochastic processes: schedule, kernel, trajectories and exact enumeration.

One step draws X_{n+1,j} ~ Bernoulli((W^T Z_n)_j) independently across
vertices and moves Z_{n+1} = (1 - r_n) Z_n + r_n X_{n+1}.
"""

import io
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from app.config import get_settings
from app.errors import (
    DimensionMismatch,
    GammaOutOfRange,
    HorizonZero,
    InvalidState,
    ScheduleError,
    TooLarge,
)
from app.services.network import WeightedNetwork
from app.services.spectral import SpectralData

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 24
CUBE_TOL = 1e-15


@dataclass(frozen=True)
class ReinforcementSchedule:
    """r_n = c / (n + offset)^gamma for n >= 0"""

    gamma: float
    c: float
    offset: Optional[float] = None

    def __post_init__(self):
        if not 0.5 < self.gamma <= 1.0:
            raise GammaOutOfRange(self.gamma)
        if self.c <= 0:
            raise ScheduleError(f"c must be positive, got {self.c!r}")
        if self.offset is None:
            object.__setattr__(self, 'offset', float(default_offset(self.gamma, self.c)))
        elif self.offset <= 0:
            raise ScheduleError(f"offset must be positive, got {self.offset!r}")
        if self.rate(0) >= 1.0:
            raise ScheduleError(f"offset {self.offset!r} gives r_0 = {self.rate(0):.6g} >= 1")

    @classmethod
    def polya(cls, a: float, b: float) -> 'ReinforcementSchedule':
        """Eggenberger-Polya urn with a white and b black balls: r_n = 1/(a + b + n + 1)"""
        if a <= 0 or b <= 0:
            raise ScheduleError(f"urn composition must be positive, got a={a!r}, b={b!r}")
        return cls(gamma=1.0, c=1.0, offset=a + b + 1.0)

    def rate(self, n):
        return self.c / (np.asarray(n, dtype=float) + self.offset) ** self.gamma

    def rates(self, start: int, stop: int) -> np.ndarray:
        """r_start, ..., r_{stop-1}"""
        return self.rate(np.arange(start, stop))

    def to_dict(self) -> dict:
        return {'gamma': self.gamma, 'c': self.c, 'offset': self.offset}


def default_offset(gamma: float, c: float) -> int:
    """n0 = max(1, ceil(c^(1/gamma)) + 1), the smallest offset keeping r_n < 1"""
    return max(1, math.ceil(c ** (1.0 / gamma)) + 1)


@dataclass(frozen=True)
class ForcingVariant:
    """Mixes a constant input q into the reinforcement: rho X + (1 - rho) q"""

    rho: float
    q: float

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise InvalidState(f"rho must lie in [0, 1), got {self.rho!r}")
        if not 0.0 <= self.q <= 1.0:
            raise InvalidState(f"q must lie in [0, 1], got {self.q!r}")

    def to_dict(self) -> dict:
        return {'rho': self.rho, 'q': self.q}


@dataclass(frozen=True)
class SystemState:
    step: int
    Z: np.ndarray

    def __post_init__(self):
        z = np.array(self.Z, dtype=float)
        if z.ndim != 1:
            raise DimensionMismatch(f"state must be a vector, got shape {z.shape}")
        validate_cube(z)
        z.setflags(write=False)
        object.__setattr__(self, 'Z', z)


def validate_cube(z: np.ndarray) -> None:
    if np.any(z < -CUBE_TOL) or np.any(z > 1.0 + CUBE_TOL) or not np.all(np.isfinite(z)):
        raise InvalidState(f"inclinations must lie in [0, 1], got {z}")


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    """Independent stream per (master seed, replication index)"""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(replication),)))


def success_probabilities(z: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    (W^T z)_j for every row of z, summed over k in fixed order.

    Row results do not depend on how many rows are stacked together, which
    keeps batched and single-path simulations bit-identical.
    """
    p = z[:, 0, np.newaxis] * weights[0]
    for k in range(1, weights.shape[0]):
        p = p + z[:, k, np.newaxis] * weights[k]
    return p


def transition(z: np.ndarray, weights: np.ndarray, rate: float, uniforms: np.ndarray,
               variant: Optional[ForcingVariant] = None) -> np.ndarray:
    """One step for a batch of states z (R x N) given uniforms (R x N)"""
    x = (uniforms < success_probabilities(z, weights)).astype(float)
    target = x if variant is None else variant.rho * x + (1.0 - variant.rho) * variant.q
    z_next = z + rate * (target - z)
    # rounding can leave the cube by one ulp
    return np.clip(z_next, 0.0, 1.0)


def step(state: SystemState, net: WeightedNetwork, sched: ReinforcementSchedule,
         rng: np.random.Generator, variant: Optional[ForcingVariant] = None) -> SystemState:
    """Advance one step; consumes N uniforms from rng in vertex order"""
    if state.Z.shape[0] != net.n_vertices:
        raise DimensionMismatch(f"state has {state.Z.shape[0]} entries, network has {net.n_vertices} vertices")
    uniforms = rng.random((1, net.n_vertices))
    z = transition(state.Z[np.newaxis, :], net.weights, float(sched.rate(state.step)), uniforms, variant)
    return SystemState(step=state.step + 1, Z=z[0])


def step_forced(state: SystemState, net: WeightedNetwork, sched: ReinforcementSchedule,
                variant: ForcingVariant, rng: np.random.Generator) -> SystemState:
    return step(state, net, sched, rng, variant=variant)


def geometric_steps(horizon: int) -> List[int]:
    """0, 1, 2, 4, 8, ... up to and including the horizon"""
    steps, n = [0], 1
    while n < horizon:
        steps.append(n)
        n *= 2
    steps.append(horizon)
    return steps


def record_steps(horizon: int, stride: Optional[int] = None) -> List[int]:
    if stride is None:
        return geometric_steps(horizon)
    if stride < 1:
        raise InvalidState(f"stride must be >= 1, got {stride}")
    steps = list(range(0, horizon + 1, stride))
    if steps[-1] != horizon:
        steps.append(horizon)
    return steps


def _initial_states(z0, n_vertices: int, replications: int) -> np.ndarray:
    z0 = np.array(z0, dtype=float)
    if z0.ndim == 0:
        z0 = np.full(n_vertices, float(z0))
    if z0.shape != (n_vertices,):
        raise DimensionMismatch(f"Z0 has shape {z0.shape}, network has {n_vertices} vertices")
    validate_cube(z0)
    return np.tile(z0, (replications, 1))


@dataclass
class BatchResult:
    """States of a block of replications at the recorded steps"""

    replications: List[int]
    steps: List[int]
    states: Dict[int, np.ndarray]

    @property
    def final(self) -> np.ndarray:
        return self.states[self.steps[-1]]


def simulate_batch(net: WeightedNetwork, sched: ReinforcementSchedule, z0, horizon: int,
                   seed: int, replications: Sequence[int], steps: Optional[Iterable[int]] = None,
                   variant: Optional[ForcingVariant] = None) -> BatchResult:
    """
    Run several replications side by side.

    Replication r draws its uniforms from replication_rng(seed, r) in blocks of
    whole steps, so every row equals what simulate() returns for that
    replication alone.
    """
    if horizon < 1:
        raise HorizonZero(horizon)
    replications = [int(r) for r in replications]
    n = net.n_vertices
    wanted = sorted(set(steps)) if steps is not None else [0, horizon]
    if wanted[0] < 0 or wanted[-1] > horizon:
        raise InvalidState(f"recorded steps must lie in [0, {horizon}], got {wanted}")
    if wanted[-1] != horizon:
        wanted.append(horizon)

    weights = np.asarray(net.weights, dtype=float)
    rngs = [replication_rng(seed, r) for r in replications]
    z = _initial_states(z0, n, len(replications))
    recorded = {0: z.copy()} if wanted[0] == 0 else {}
    targets = set(wanted)

    block = max(1, get_settings().batch_floats // max(1, len(replications) * n))
    t = 0
    while t < horizon:
        chunk = min(block, horizon - t)
        uniforms = np.stack([g.random((chunk, n)) for g in rngs], axis=1)
        rates = sched.rates(t, t + chunk)
        for i in range(chunk):
            z = transition(z, weights, float(rates[i]), uniforms[i], variant)
            if t + i + 1 in targets:
                recorded[t + i + 1] = z.copy()
        t += chunk

    return BatchResult(replications=replications, steps=wanted, states=recorded)


@dataclass
class Trajectory:
    """One replication: the recorded (n, Z_n) pairs plus provenance"""

    schedule: ReinforcementSchedule
    network: WeightedNetwork
    z0: np.ndarray
    steps: List[int]
    states: np.ndarray
    seed: int
    replication: int
    variant: Optional[ForcingVariant] = None

    @property
    def final(self) -> SystemState:
        return SystemState(step=self.steps[-1], Z=self.states[-1])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.states, columns=[f"Z_{j + 1}" for j in range(self.states.shape[1])])
        frame.insert(0, 'n', self.steps)
        return frame

    def to_csv(self, path=None) -> Optional[str]:
        """Write n, Z_1..Z_N; returns the text when no path is given"""
        if path is None:
            buffer = io.StringIO()
            self.to_frame().to_csv(buffer, index=False)
            return buffer.getvalue()
        self.to_frame().to_csv(path, index=False)
        return None

    def summary(self, spec: Optional[SpectralData] = None) -> dict:
        final = self.states[-1]
        z_tilde = None if spec is None else float(project(spec, final)[0])
        return {
            'n': self.steps[-1],
            'final_state': final.tolist(),
            'z_tilde': z_tilde,
            'spread': float(spread(final)),
            'seed': self.seed,
            'replication': self.replication,
            'schedule': self.schedule.to_dict(),
            'variant': None if self.variant is None else self.variant.to_dict(),
        }


def simulate(net: WeightedNetwork, sched: ReinforcementSchedule, z0, horizon: int,
             stride: Optional[int] = None, variant: Optional[ForcingVariant] = None,
             seed: int = 0, replication: int = 0) -> Trajectory:
    """
    Iterate the dynamics from n = 0 to the horizon.

    Records n = 0, every stride-th step (powers of two when stride is None)
    and the final state; bit-reproducible given (seed, replication).

    Raises:
        HorizonZero: horizon < 1
    """
    if horizon < 1:
        raise HorizonZero(horizon)
    steps = record_steps(horizon, stride)
    batch = simulate_batch(net, sched, z0, horizon, seed, [replication], steps, variant)
    states = np.vstack([batch.states[n][0] for n in batch.steps])
    logger.debug("Simulated replication %d to n=%d (%d records)", replication, horizon, len(steps))
    return Trajectory(
        schedule=sched, network=net, z0=states[0].copy(), steps=batch.steps, states=states,
        seed=int(seed), replication=int(replication), variant=variant,
    )


def project(spec: SpectralData, Z) -> Tuple[Union[float, np.ndarray], np.ndarray]:
    """
    Z~ = N^{-1/2} v1^T Z and Z^ = Z - Z~ 1.

    Accepts one state (N,) or a stack of states (..., N).
    """
    z = np.asarray(Z, dtype=float)
    n = spec.n_vertices
    if z.shape[-1] != n:
        raise DimensionMismatch(f"state has {z.shape[-1]} entries, spectral data has {n} vertices")
    z_tilde = z @ spec.v1 / np.sqrt(n)
    z_hat = z - np.asarray(z_tilde)[..., np.newaxis]
    if z.ndim == 1:
        return float(z_tilde), z_hat
    return z_tilde, z_hat


def spread(Z) -> Union[float, np.ndarray]:
    """max_j Z_j - min_j Z_j"""
    z = np.asarray(Z, dtype=float)
    return z.max(axis=-1) - z.min(axis=-1)


@dataclass
class ExactDistribution:
    """Finite law of Z_n as (probability, state) atoms"""

    n: int
    probabilities: np.ndarray
    states: np.ndarray = field(repr=False)

    def mean(self) -> np.ndarray:
        return self.probabilities @ self.states

    def expected_z_tilde(self, spec: SpectralData) -> float:
        z_tilde, _ = project(spec, self.states)
        return float(self.probabilities @ z_tilde)

    def binned(self, bins: int) -> Dict[Tuple[int, ...], float]:
        """Probability of each cell of a regular grid with `bins` cells per coordinate"""
        return bin_law(self.states, bins, self.probabilities)

    def atoms(self) -> List[Tuple[float, List[float]]]:
        return [(float(p), s.tolist()) for p, s in zip(self.probabilities, self.states)]


def bin_law(states: np.ndarray, bins: int, weights: Optional[np.ndarray] = None) -> Dict[Tuple[int, ...], float]:
    states = np.atleast_2d(states)
    if weights is None:
        weights = np.full(states.shape[0], 1.0 / states.shape[0])
    cells = np.minimum((states * bins).astype(int), bins - 1)
    keys, inverse = np.unique(cells, axis=0, return_inverse=True)
    mass = np.bincount(inverse.ravel(), weights=weights, minlength=len(keys))
    return {tuple(int(i) for i in key): float(m) for key, m in zip(keys, mass)}


def enumerate_exact(net: WeightedNetwork, sched: ReinforcementSchedule, z0, n_max: int,
                    variant: Optional[ForcingVariant] = None) -> ExactDistribution:
    """
    Exact law of Z_{n_max} by branching over every X-sequence.

    Branches reaching bitwise-identical states are merged and zero-probability
    branches dropped, so the atom count is at most 2^(N n_max).

    Raises:
        TooLarge: N * n_max above 24
    """
    n = net.n_vertices
    if n * n_max > ENUMERATION_LIMIT:
        raise TooLarge(n, n_max, ENUMERATION_LIMIT)
    if n_max < 0:
        raise HorizonZero(n_max)

    weights = np.asarray(net.weights, dtype=float)
    states = _initial_states(z0, n, 1)
    probs = np.ones(1)
    outcomes = ((np.arange(2 ** n)[:, np.newaxis] >> np.arange(n)) & 1).astype(float)

    for t in range(n_max):
        p = success_probabilities(states, weights)
        # (branches, outcomes, vertices)
        factors = np.where(outcomes[np.newaxis, :, :] == 1.0, p[:, np.newaxis, :], 1.0 - p[:, np.newaxis, :])
        branch_probs = (probs[:, np.newaxis] * factors.prod(axis=2)).ravel()
        target = outcomes if variant is None else variant.rho * outcomes + (1.0 - variant.rho) * variant.q
        r = float(sched.rate(t))
        new_states = states[:, np.newaxis, :] + r * (target[np.newaxis, :, :] - states[:, np.newaxis, :])
        new_states = np.clip(new_states, 0.0, 1.0).reshape(-1, n)

        keep = branch_probs > 0
        unique, inverse = np.unique(new_states[keep], axis=0, return_inverse=True)
        probs = np.bincount(inverse.ravel(), weights=branch_probs[keep], minlength=len(unique))
        states = unique

    logger.debug("Enumerated %d atoms for N=%d, n=%d", len(probs), n, n_max)
    return ExactDistribution(n=n_max, probabilities=probs, states=states)


def expected_state(net: WeightedNetwork, sched: ReinforcementSchedule, z0, n: int,
                   variant: Optional[ForcingVariant] = None) -> np.ndarray:
    """E[Z_n] from the linear recursion E[Z_{t+1}] = E[Z_t] + r_t (W^T E[Z_t] - E[Z_t])"""
    weights = np.asarray(net.weights, dtype=float)
    mean = _initial_states(z0, net.n_vertices, 1)
    for t in range(n):
        drift = success_probabilities(mean, weights)
        if variant is not None:
            drift = variant.rho * drift + (1.0 - variant.rho) * variant.q
        mean = mean + float(sched.rate(t)) * (drift - mean)
    return mean[0]
