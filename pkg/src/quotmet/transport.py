"""Exact optimal transport for finitely supported measures.

The assignment problem is solved by scipy's shortest-augmenting-path
solver; general-weight transportation problems are solved as linear
programs with the HiGHS simplex, which returns exact vertex solutions.
No entropic regularization anywhere: distances feed distortion
measurements and approximate solvers would contaminate them.

Tuples of points considered up to reordering are handled by
:func:`perm_quotient_distance` and embed isometrically as uniform
empirical measures via :func:`ivanov_embed`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.optimize
import scipy.sparse

__all__ = [
    "DiscreteMeasure",
    "solve_assignment",
    "squared_cost_matrix",
    "w2_discrete",
    "perm_quotient_distance",
    "ivanov_embed",
    "coupling_feasibility_error",
]

WEIGHT_ATOL = 1e-12
MARGINAL_ATOL = 1e-10

# metric(p, q) -> float; None means atoms are Euclidean coordinate vectors
MetricOracle = Optional[Callable]


def _point_key(p):
    """Hashable key identifying a point exactly (bitwise for arrays)."""
    if isinstance(p, np.ndarray):
        return ("arr", p.shape, np.ascontiguousarray(p, dtype=float).tobytes())
    if isinstance(p, tuple):
        return tuple(_point_key(x) for x in p)
    if isinstance(p, (int, float, np.floating, np.integer)):
        return float(p)
    return p


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure: atoms plus positive weights.

    Atoms may be raw coordinate vectors or opaque points understood by a
    caller-supplied metric oracle; finite support makes the second-moment
    condition automatic.
    """

    atoms: tuple
    weights: np.ndarray

    def __post_init__(self):
        atoms = tuple(self.atoms)
        w = np.array(self.weights, dtype=float)
        if len(atoms) == 0:
            raise ValueError("a measure needs at least one atom")
        if w.shape != (len(atoms),):
            raise ValueError("one weight per atom required")
        if np.any(w <= 0.0):
            raise ValueError("weights must be strictly positive")
        if abs(math.fsum(w.tolist()) - 1.0) > WEIGHT_ATOL:
            raise ValueError("weights must sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(np.abs(self.weights - 1.0 / len(self)) <= WEIGHT_ATOL))

    @classmethod
    def from_points(cls, points: Sequence, weights=None) -> "DiscreteMeasure":
        """Build a measure, merging weights of exactly repeated points."""
        points = list(points)
        if weights is None:
            weights = [1.0 / len(points)] * len(points) if points else []
        merged: dict = {}
        order = []
        for p, w in zip(points, weights):
            k = _point_key(p)
            if k in merged:
                merged[k][1] += w
            else:
                merged[k] = [p, w]
                order.append(k)
        atoms = [merged[k][0] for k in order]
        ws = [merged[k][1] for k in order]
        return cls(tuple(atoms), np.array(ws))

    def to_json_dict(self) -> dict:
        atoms = []
        for a in self.atoms:
            arr = np.asarray(a, dtype=float)
            atoms.append(arr.tolist())
        return {"atoms": atoms, "weights": self.weights.tolist()}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DiscreteMeasure":
        return cls(tuple(np.array(a, dtype=float) for a in doc["atoms"]),
                   np.array(doc["weights"]))


def solve_assignment(cost: np.ndarray):
    """Minimum-cost perfect matching on a square cost matrix.

    Returns ``(perm, total)`` where ``perm[i]`` is the column matched to
    row ``i`` and ``total`` is the exactly rounded sum of the selected
    entries.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix entries must be finite")
    rows, cols = scipy.optimize.linear_sum_assignment(c)
    perm = np.empty(c.shape[0], dtype=int)
    perm[rows] = cols
    total = math.fsum(c[i, perm[i]] for i in range(c.shape[0]))
    return perm, total


def squared_cost_matrix(xs: Sequence, ys: Sequence, metric: MetricOracle = None) -> np.ndarray:
    """Matrix of squared ground distances between two point families."""
    if metric is None:
        a = np.asarray(np.stack([np.atleast_1d(np.asarray(p, dtype=float)) for p in xs]))
        b = np.asarray(np.stack([np.atleast_1d(np.asarray(p, dtype=float)) for p in ys]))
        if a.shape[1] != b.shape[1]:
            raise ValueError("atom dimensions differ")
        diff = a[:, None, :] - b[None, :, :]
        cost = np.einsum("ijk,ijk->ij", diff, diff)
    else:
        cost = np.empty((len(xs), len(ys)))
        for i, p in enumerate(xs):
            for j, q in enumerate(ys):
                d = float(metric(p, q))
                if math.isnan(d) or d < 0.0:
                    raise ValueError(f"metric oracle returned invalid distance {d}")
                cost[i, j] = d * d
    if not np.all(np.isfinite(cost)):
        raise ValueError("ground distances must be finite")
    return cost


def _transport_lp(cost: np.ndarray, wx: np.ndarray, wy: np.ndarray) -> np.ndarray:
    n, m = cost.shape
    # marginal constraints on the n*m transport variables
    row = scipy.sparse.kron(scipy.sparse.eye(n), np.ones((1, m)))
    col = scipy.sparse.kron(np.ones((1, n)), scipy.sparse.eye(m))
    a_eq = scipy.sparse.vstack([row, col]).tocsr()
    b_eq = np.concatenate([wx, wy])
    res = scipy.optimize.linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq,
                                 bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transportation LP failed: {res.message}")
    return res.x.reshape(n, m)


def coupling_feasibility_error(coupling: np.ndarray, mu: DiscreteMeasure,
                               nu: DiscreteMeasure) -> float:
    """Largest deviation of the coupling's marginals from the two weight vectors."""
    c = np.asarray(coupling, dtype=float)
    return float(max(np.max(np.abs(c.sum(axis=1) - mu.weights)),
                     np.max(np.abs(c.sum(axis=0) - nu.weights))))


def w2_discrete(mu: DiscreteMeasure, nu: DiscreteMeasure,
                metric: MetricOracle = None, method: str = "auto"):
    """Exact 2-Wasserstein distance between two discrete measures.

    Solves the transportation problem on squared ground costs and returns
    ``(distance, coupling)`` with the coupling an (len(mu), len(nu))
    matrix.  ``method`` is ``"auto"`` (route uniform equal-size instances
    to the assignment solver, everything else to the LP), ``"lp"`` or
    ``"assignment"``.
    """
    cost = squared_cost_matrix(mu.atoms, nu.atoms, metric)
    n, m = cost.shape
    uniform_pair = n == m and mu.is_uniform and nu.is_uniform
    if method == "assignment" and not uniform_pair:
        raise ValueError("assignment route needs equal-size uniform measures")
    if method not in ("auto", "lp", "assignment"):
        raise ValueError(f"unknown method {method!r}")

    if uniform_pair and method in ("auto", "assignment"):
        perm, total = solve_assignment(cost)
        coupling = np.zeros((n, m))
        coupling[np.arange(n), perm] = 1.0 / n
        value = total / n
    else:
        coupling = _transport_lp(cost, mu.weights, nu.weights)
        value = math.fsum((coupling * cost).ravel().tolist())
    err = coupling_feasibility_error(coupling, mu, nu)
    if err > MARGINAL_ATOL:
        raise RuntimeError(f"solver returned an infeasible coupling (error {err:.2e})")
    return math.sqrt(max(value, 0.0)), coupling


def perm_quotient_distance(xs: Sequence, ys: Sequence, metric: MetricOracle = None) -> float:
    """Distance between equal-length tuples considered up to reordering.

    Root-mean-square optimal matching cost: the minimum over permutations
    of ``sqrt(mean_i d(x_i, y_sigma(i))^2)``.  With this normalization the
    map onto uniform empirical measures is an isometry into the
    2-Wasserstein space, so tuple distances and measure distances agree.
    """
    if len(xs) != len(ys):
        raise ValueError(f"tuple lengths differ: {len(xs)} vs {len(ys)}")
    cost = squared_cost_matrix(xs, ys, metric)
    _, total = solve_assignment(cost)
    return math.sqrt(max(total, 0.0) / len(xs))


def ivanov_embed(points: Sequence) -> DiscreteMeasure:
    """Uniform empirical measure of a tuple whose length is a power of two.

    Weight 1/N on each listed atom, with exactly repeated atoms merged.
    Repeating every entry of a tuple yields the same measure, so the
    images for N, 2N, 4N, ... are nested.
    """
    n = len(points)
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"tuple length must be a power of two, got {n}")
    return DiscreteMeasure.from_points(points)
