"""Exact verification of the Markov type 2 inequality with constant 1.

Expectations over stationary reversible chains are computed from the
stationary vector and powers of the transition matrix, never by sampling
trajectories: the inequality under test has constant exactly 1, and
Monte Carlo noise would drown the signal.  A degenerate instance (frozen
chain or constant image map) yields a first-class "vacuous" outcome
rather than a number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ReversibleChain",
    "MappedConfiguration",
    "chain_from_weights",
    "markov_ratio",
    "transition_power",
    "MarkovReport",
    "verify_markov_type2",
    "euclidean_sampler",
    "group_sampler",
]

ROWSUM_ATOL = 1e-12
STATIONARY_ATOL = 1e-10
BALANCE_ATOL = 1e-12
MAX_STATES = 64


@dataclass(frozen=True)
class ReversibleChain:
    """Stationary reversible Markov chain on finitely many states.

    Validated on construction: rows of the transition matrix sum to 1,
    the distribution is stationary, and detailed balance
    pi_i a_ij = pi_j a_ji holds entrywise.
    """

    pi: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float)
        a = np.array(self.transition, dtype=float)
        n = pi.shape[0]
        if n < 1 or n > MAX_STATES:
            raise ValueError(f"state count must be in [1, {MAX_STATES}]")
        if a.shape != (n, n):
            raise ValueError("transition matrix shape must match the state count")
        if np.any(a < 0) or np.any(pi < 0):
            raise ValueError("probabilities must be nonnegative")
        if np.max(np.abs(a.sum(axis=1) - 1.0)) > ROWSUM_ATOL:
            raise ValueError("transition rows must sum to 1")
        if abs(math.fsum(pi.tolist()) - 1.0) > ROWSUM_ATOL:
            raise ValueError("stationary vector must sum to 1")
        if np.max(np.abs(pi @ a - pi)) > STATIONARY_ATOL:
            raise ValueError("distribution is not stationary")
        balance = pi[:, None] * a - (pi[:, None] * a).T
        if np.max(np.abs(balance)) > BALANCE_ATOL:
            raise ValueError("detailed balance fails: the chain is not reversible")
        pi.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "transition", a)

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]


def chain_from_weights(weights: np.ndarray) -> ReversibleChain:
    """Reversible chain from a symmetric nonnegative weight matrix.

    pi is proportional to row sums and a_ij = w_ij / rowsum_i; every row
    must have positive sum so no state is absorbing by accident.
    """
    w = np.array(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("weight matrix must be square")
    if not np.array_equal(w, w.T):
        raise ValueError("weight matrix must be symmetric")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    rowsums = w.sum(axis=1)
    if np.any(rowsums <= 0):
        raise ValueError("every row needs positive total weight")
    pi = rowsums / rowsums.sum()
    a = w / rowsums[:, None]
    return ReversibleChain(pi, a)


@dataclass(frozen=True)
class MappedConfiguration:
    """A chain together with images of its states in some metric space."""

    chain: ReversibleChain
    images: tuple
    metric: Callable

    def __post_init__(self):
        images = tuple(self.images)
        if len(images) != self.chain.n_states:
            raise ValueError("one image per state required")
        object.__setattr__(self, "images", images)

    def squared_distances(self) -> np.ndarray:
        n = len(self.images)
        d2 = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                d = float(self.metric(self.images[i], self.images[j]))
                d2[i, j] = d2[j, i] = d * d
        return d2


def transition_power(a: np.ndarray, t: int, method: str = "iterative") -> np.ndarray:
    """A^t either by repeated multiplication or by squaring."""
    if t < 0:
        raise ValueError("power must be nonnegative")
    if method == "iterative":
        out = np.eye(a.shape[0])
        for _ in range(t):
            out = out @ a
        return out
    if method == "squaring":
        return np.linalg.matrix_power(a, t)
    raise ValueError(f"unknown method {method!r}")


def markov_ratio(cfg: MappedConfiguration, t: int,
                 d2: Optional[np.ndarray] = None) -> Optional[float]:
    """E d^2(f(Z_t), f(Z_0)) over t * E d^2(f(Z_1), f(Z_0)), or None if vacuous.

    Expectations are exact: E d^2(f(Z_t), f(Z_0)) = sum_ij pi_i (A^t)_ij d2_ij.
    """
    if t < 1:
        raise ValueError("time must be >= 1")
    if d2 is None:
        d2 = cfg.squared_distances()
    pi = cfg.chain.pi
    a = cfg.chain.transition
    denom_step = float(np.sum(pi[:, None] * a * d2))
    if denom_step == 0.0:
        return None
    at = transition_power(a, t)
    numer = float(np.sum(pi[:, None] * at * d2))
    return numer / (t * denom_step)


@dataclass
class MarkovReport:
    """Outcome of a randomized inequality check.

    ``rows`` holds (trial, t, ratio-or-None); vacuous trials are kept, not
    dropped.  ``worst`` identifies the largest ratio seen and ``passed``
    compares it against K^2 with a small absolute tolerance.
    """

    constant: float
    trials: int
    t_max: int
    seed: int
    rows: list
    max_ratio: Optional[float]
    worst: Optional[dict]
    all_vacuous: bool

    @property
    def passed(self) -> bool:
        if self.max_ratio is None:
            return True
        return self.max_ratio <= self.constant ** 2 + 1e-9

    def to_csv(self) -> str:
        lines = ["trial,t,ratio,max_over_t"]
        by_trial: dict = {}
        for trial, t, ratio in self.rows:
            if ratio is not None:
                by_trial.setdefault(trial, []).append(ratio)
        for trial, t, ratio in self.rows:
            peak = max(by_trial[trial]) if trial in by_trial else ""
            lines.append(f"{trial},{t},{'' if ratio is None else repr(ratio)},"
                         f"{peak if peak == '' else repr(peak)}")
        return "\n".join(lines) + "\n"


def verify_markov_type2(sampler: Callable, trials: int, t_max: int,
                        constant: float = 1.0, seed: int = 0) -> MarkovReport:
    """Evaluate the inequality across seeded random configurations.

    ``sampler(rng)`` must return a :class:`MappedConfiguration`; all
    ratios for 1 <= t <= t_max are recorded.  The run is deterministic
    given the seed.
    """
    rng = np.random.default_rng(seed)
    rows = []
    max_ratio = None
    worst = None
    for trial in range(trials):
        cfg = sampler(rng)
        d2 = cfg.squared_distances()
        for t in range(1, t_max + 1):
            ratio = markov_ratio(cfg, t, d2=d2)
            rows.append((trial, t, ratio))
            if ratio is not None and (max_ratio is None or ratio > max_ratio):
                max_ratio = ratio
                worst = {"trial": trial, "t": t, "ratio": ratio,
                         "pi": cfg.chain.pi.tolist(),
                         "transition": cfg.chain.transition.tolist(),
                         "images": [np.asarray(p, dtype=float).tolist()
                                    for p in cfg.images]}
    return MarkovReport(constant=constant, trials=trials, t_max=t_max, seed=seed,
                        rows=rows, max_ratio=max_ratio, worst=worst,
                        all_vacuous=max_ratio is None)


def _random_chain(rng: np.random.Generator, max_states: int) -> ReversibleChain:
    n = int(rng.integers(2, max_states + 1))
    w = rng.random((n, n))
    w = (w + w.T) / 2.0
    return chain_from_weights(w)


def euclidean_sampler(dim: int = 3, max_states: int = 6) -> Callable:
    """Random chains with images in Euclidean space (the flat baseline)."""
    def sample(rng: np.random.Generator) -> MappedConfiguration:
        chain = _random_chain(rng, max_states)
        images = tuple(rng.standard_normal(dim) for _ in range(chain.n_states))
        metric = lambda p, q: float(np.linalg.norm(np.asarray(p) - np.asarray(q)))
        return MappedConfiguration(chain, images, metric)
    return sample


def group_sampler(group, max_states: int = 6) -> Callable:
    """Random chains with images sampled from a compact group's geodesic metric."""
    def sample(rng: np.random.Generator) -> MappedConfiguration:
        chain = _random_chain(rng, max_states)
        images = tuple(group.random_element(rng) for _ in range(chain.n_states))
        return MappedConfiguration(chain, images, group.distance)
    return sample
