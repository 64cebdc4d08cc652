"""Concrete compact groups with bi-invariant metrics at desk scale.

Flat tori and the unit quaternions (the round 3-sphere), closed under
l2-products and metric scaling.  Each group knows its geodesic distance,
group operations, finite nets with a covering-radius estimate, and an
explicit Riemannian-isometric embedding into Euclidean space together
with its inverse.  The embeddings are closed-form (circle factors map to
round circles, quaternions map to the round sphere), so every quantity
used downstream is exactly computable.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "CompactGroup",
    "Torus",
    "SU2",
    "ProductGroup",
    "ScaledGroup",
    "scaled",
    "circle",
    "group_from_dict",
    "budget_net",
    "leaf_factors",
    "flatten_elements",
    "pairwise_distance_matrix",
    "OffManifoldError",
]

MANIFOLD_ATOL = 1e-6
UNIT_ATOL = 1e-12


class OffManifoldError(ValueError):
    """A Euclidean point was too far from the embedded group to invert."""


class CompactGroup(ABC):
    """Common interface of the concrete bi-invariant groups."""

    # -- group structure ----------------------------------------------

    @abstractmethod
    def identity(self): ...

    @abstractmethod
    def op(self, g, h): ...

    @abstractmethod
    def inverse(self, g): ...

    @abstractmethod
    def halve(self, g):
        """Principal square root: the midpoint of the shortest geodesic from
        the identity to ``g`` (a deterministic branch is picked at the cut
        locus)."""

    # -- metric ---------------------------------------------------------

    @abstractmethod
    def distance(self, g, h) -> float: ...

    @abstractmethod
    def diameter(self) -> float: ...

    @abstractmethod
    def local_embedding_distortion(self, threshold: float) -> float:
        """Infimum of chordal over geodesic distance among pairs closer than
        ``threshold``; tends to 1 as the threshold shrinks."""

    def inverse_lipschitz(self) -> float:
        """Upper bound for the Lipschitz constant of the inverse embedding
        (arc over chord, maximal at antipodes of a circle factor)."""
        return math.pi / 2

    # -- Euclidean embedding --------------------------------------------

    @property
    @abstractmethod
    def embedding_dim(self) -> int: ...

    @abstractmethod
    def embed(self, g) -> np.ndarray: ...

    @abstractmethod
    def unembed(self, p: np.ndarray): ...

    # -- sampling ---------------------------------------------------------

    @abstractmethod
    def net(self, q: int, seed: int = 0):
        """Finite point set with a covering-radius estimate, as ``(elements, mesh)``."""

    @abstractmethod
    def random_element(self, rng: np.random.Generator): ...

    @abstractmethod
    def element_key(self, g):
        """Hashable exact identity of an element."""

    @abstractmethod
    def element_to_jsonable(self, g): ...

    @abstractmethod
    def element_from_jsonable(self, obj): ...

    @abstractmethod
    def to_jsonable(self) -> dict: ...


def _wrap(coords: np.ndarray, circumference: float) -> np.ndarray:
    out = np.mod(coords, circumference)
    # mod can return the modulus itself for tiny negatives
    out[out >= circumference] = 0.0
    return out


def _shortest_rep(coords: np.ndarray, circumference: float) -> np.ndarray:
    """Representative of each coordinate in (-c/2, c/2]."""
    half = circumference / 2.0
    rep = np.mod(coords + half, circumference) - half
    rep[rep == -half] = half
    return rep


def _chord_over_geodesic(u: float) -> float:
    """sin(u)/u with the removable singularity filled in."""
    return 1.0 if u == 0.0 else math.sin(u) / u


@dataclass(frozen=True)
class Torus(CompactGroup):
    """Flat torus: ``dims`` circle factors sharing one circumference.

    Elements are coordinate vectors canonicalized into [0, circumference)
    on every operation so repeated arithmetic cannot drift.
    """

    dims: int
    circumference: float

    def __post_init__(self):
        if self.dims < 1:
            raise ValueError("torus needs at least one dimension")
        if not self.circumference > 0:
            raise ValueError("circumference must be positive")

    def element(self, coords) -> np.ndarray:
        c = np.array(coords, dtype=float).reshape(self.dims)
        return _wrap(c, self.circumference)

    def identity(self):
        return np.zeros(self.dims)

    def op(self, g, h):
        return _wrap(np.asarray(g) + np.asarray(h), self.circumference)

    def inverse(self, g):
        return _wrap(-np.asarray(g), self.circumference)

    def halve(self, g):
        return _wrap(_shortest_rep(np.asarray(g, dtype=float), self.circumference) / 2.0,
                     self.circumference)

    def distance(self, g, h) -> float:
        delta = np.abs(np.asarray(g, dtype=float) - np.asarray(h, dtype=float))
        delta = np.minimum(delta, self.circumference - delta)
        return float(np.sqrt(np.sum(delta ** 2)))

    def diameter(self) -> float:
        return math.sqrt(self.dims) * self.circumference / 2.0

    def local_embedding_distortion(self, threshold: float) -> float:
        if not threshold > 0:
            raise ValueError("threshold must be positive")
        # Worst pairs concentrate geodesic length in as few circle factors
        # as possible; each factor saturates at half its circumference.
        radius = self.circumference / (2.0 * math.pi)
        per_factor_max = self.circumference / 2.0
        remaining = min(threshold, self.diameter())
        num = 0.0
        den = 0.0
        for _ in range(self.dims):
            step = min(remaining, per_factor_max)
            if step <= 0.0:
                break
            num += (2.0 * radius * math.sin(step / (2.0 * radius))) ** 2
            den += step ** 2
            remaining = math.sqrt(max(remaining ** 2 - step ** 2, 0.0))
        return math.sqrt(num / den) if den else 1.0

    @property
    def embedding_dim(self) -> int:
        return 2 * self.dims

    def embed(self, g) -> np.ndarray:
        radius = self.circumference / (2.0 * math.pi)
        angles = 2.0 * math.pi * np.asarray(g, dtype=float) / self.circumference
        out = np.empty(2 * self.dims)
        out[0::2] = radius * np.cos(angles)
        out[1::2] = radius * np.sin(angles)
        return out

    def unembed(self, p: np.ndarray):
        p = np.asarray(p, dtype=float)
        if p.shape != (2 * self.dims,):
            raise OffManifoldError(f"expected {2 * self.dims} coordinates")
        radius = self.circumference / (2.0 * math.pi)
        xy = p.reshape(self.dims, 2)
        norms = np.sqrt(np.sum(xy ** 2, axis=1))
        if np.max(np.abs(norms - radius)) > MANIFOLD_ATOL:
            raise OffManifoldError(
                f"point is {np.max(np.abs(norms - radius)):.3e} away from the torus embedding")
        angles = np.arctan2(xy[:, 1], xy[:, 0])
        return _wrap(angles * self.circumference / (2.0 * math.pi), self.circumference)

    def net(self, q: int, seed: int = 0):
        if q < 1:
            raise ValueError("net size parameter must be >= 1")
        # Subgroup grid, q points per coordinate; covering radius is exact.
        ticks = np.arange(q) * (self.circumference / q)
        grids = np.meshgrid(*([ticks] * self.dims), indexing="ij")
        elements = [np.array(pt) for pt in zip(*(g.ravel() for g in grids))]
        mesh = math.sqrt(self.dims) * self.circumference / (2.0 * q)
        return elements, mesh

    def random_element(self, rng: np.random.Generator):
        return rng.uniform(0.0, self.circumference, self.dims)

    def element_key(self, g):
        return np.ascontiguousarray(g, dtype=float).tobytes()

    def element_to_jsonable(self, g):
        return np.asarray(g, dtype=float).tolist()

    def element_from_jsonable(self, obj):
        return self.element(obj)

    def to_jsonable(self) -> dict:
        return {"kind": "torus", "dims": self.dims, "circumference": self.circumference}


def circle(circumference: float = 2.0 * math.pi) -> Torus:
    return Torus(1, circumference)


def _quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


@dataclass(frozen=True)
class SU2(CompactGroup):
    """Unit quaternions with the round metric of the given radius."""

    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def element(self, coords) -> np.ndarray:
        q = np.array(coords, dtype=float).reshape(4)
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > UNIT_ATOL:
            raise ValueError(f"quaternion norm {norm} is not 1")
        return q / norm

    def identity(self):
        return np.array([1.0, 0.0, 0.0, 0.0])

    def op(self, g, h):
        out = _quat_mul(np.asarray(g, dtype=float), np.asarray(h, dtype=float))
        return out / np.linalg.norm(out)

    def inverse(self, g):
        g = np.asarray(g, dtype=float)
        return np.array([g[0], -g[1], -g[2], -g[3]])

    def halve(self, g):
        g = np.asarray(g, dtype=float)
        angle = math.acos(min(1.0, max(-1.0, float(g[0]))))
        vec = g[1:]
        norm = float(np.linalg.norm(vec))
        if norm < 1e-15:
            # identity halves to itself; the antipode's axis is arbitrary,
            # pick a fixed one so results are reproducible
            axis = np.array([1.0, 0.0, 0.0]) if g[0] < 0 else np.zeros(3)
            if g[0] > 0:
                return self.identity()
        else:
            axis = vec / norm
        half = angle / 2.0
        return np.concatenate([[math.cos(half)], math.sin(half) * axis])

    def distance(self, g, h) -> float:
        dot = float(np.dot(np.asarray(g, dtype=float), np.asarray(h, dtype=float)))
        return self.radius * math.acos(min(1.0, max(-1.0, dot)))

    def diameter(self) -> float:
        return math.pi * self.radius

    def local_embedding_distortion(self, threshold: float) -> float:
        if not threshold > 0:
            raise ValueError("threshold must be positive")
        u = min(threshold, self.diameter()) / (2.0 * self.radius)
        return _chord_over_geodesic(u)

    @property
    def embedding_dim(self) -> int:
        return 4

    def embed(self, g) -> np.ndarray:
        return self.radius * np.asarray(g, dtype=float)

    def unembed(self, p: np.ndarray):
        p = np.asarray(p, dtype=float)
        if p.shape != (4,):
            raise OffManifoldError("expected 4 coordinates")
        norm = float(np.linalg.norm(p))
        if abs(norm - self.radius) > MANIFOLD_ATOL:
            raise OffManifoldError(
                f"point is {abs(norm - self.radius):.3e} away from the sphere embedding")
        return p / norm

    def net(self, q: int, seed: int = 0, mesh_samples: int = 100_000):
        """Deterministic quasi-uniform q-point net by farthest-point insertion.

        The candidate pool and the covering-radius evaluation sample are
        drawn from seeded generators, so results are reproducible bit for
        bit given the seed.  The mesh estimate is measured empirically.
        """
        if q < 1:
            raise ValueError("net size parameter must be >= 1")
        rng = np.random.default_rng(seed)
        pool = rng.standard_normal((max(4096, 16 * q), 4))
        pool /= np.linalg.norm(pool, axis=1, keepdims=True)
        pool[0] = self.identity()
        chosen = [0]
        # geodesic farthest-point sampling over the pool
        dots = np.abs(pool @ pool[0])
        best = np.arccos(np.clip(pool @ pool[0], -1.0, 1.0))
        for _ in range(q - 1):
            idx = int(np.argmax(best))
            chosen.append(idx)
            best = np.minimum(best, np.arccos(np.clip(pool @ pool[idx], -1.0, 1.0)))
        elements = [pool[i].copy() for i in chosen]
        sample_rng = np.random.default_rng(seed + 1)
        sample = sample_rng.standard_normal((mesh_samples, 4))
        sample /= np.linalg.norm(sample, axis=1, keepdims=True)
        net_arr = np.stack(elements)
        gaps = np.arccos(np.clip(sample @ net_arr.T, -1.0, 1.0)).min(axis=1)
        mesh = self.radius * float(gaps.max())
        return elements, mesh

    def random_element(self, rng: np.random.Generator):
        q = rng.standard_normal(4)
        return q / np.linalg.norm(q)

    def element_key(self, g):
        return np.ascontiguousarray(g, dtype=float).tobytes()

    def element_to_jsonable(self, g):
        return np.asarray(g, dtype=float).tolist()

    def element_from_jsonable(self, obj):
        return self.element(obj)

    def to_jsonable(self) -> dict:
        return {"kind": "su2", "radius": self.radius}


@dataclass(frozen=True)
class ProductGroup(CompactGroup):
    """l2-product of groups; elements are tuples of factor elements."""

    factors: tuple

    def __post_init__(self):
        factors = tuple(self.factors)
        if len(factors) < 1:
            raise ValueError("product needs at least one factor")
        object.__setattr__(self, "factors", factors)

    def identity(self):
        return tuple(f.identity() for f in self.factors)

    def op(self, g, h):
        return tuple(f.op(a, b) for f, a, b in zip(self.factors, g, h))

    def inverse(self, g):
        return tuple(f.inverse(a) for f, a in zip(self.factors, g))

    def halve(self, g):
        return tuple(f.halve(a) for f, a in zip(self.factors, g))

    def distance(self, g, h) -> float:
        return math.sqrt(math.fsum(f.distance(a, b) ** 2
                                   for f, a, b in zip(self.factors, g, h)))

    def diameter(self) -> float:
        return math.sqrt(math.fsum(f.diameter() ** 2 for f in self.factors))

    def local_embedding_distortion(self, threshold: float) -> float:
        if not threshold > 0:
            raise ValueError("threshold must be positive")
        # Conservative: the worst single factor absorbing as much of the
        # threshold as it can.  Mixing across factors only averages ratios
        # upward, so this is a valid lower bound.
        return min(f.local_embedding_distortion(threshold) for f in self.factors)

    def inverse_lipschitz(self) -> float:
        return max(f.inverse_lipschitz() for f in self.factors)

    @property
    def embedding_dim(self) -> int:
        return sum(f.embedding_dim for f in self.factors)

    def embed(self, g) -> np.ndarray:
        return np.concatenate([f.embed(a) for f, a in zip(self.factors, g)])

    def unembed(self, p: np.ndarray):
        p = np.asarray(p, dtype=float)
        if p.shape != (self.embedding_dim,):
            raise OffManifoldError(f"expected {self.embedding_dim} coordinates")
        out = []
        start = 0
        for f in self.factors:
            out.append(f.unembed(p[start:start + f.embedding_dim]))
            start += f.embedding_dim
        return tuple(out)

    def net(self, q: int, seed: int = 0):
        parts = [f.net(q, seed=seed + i) for i, f in enumerate(self.factors)]
        elements = [()]
        for part, _ in parts:
            elements = [e + (x,) for e in elements for x in part]
        mesh = math.sqrt(math.fsum(m ** 2 for _, m in parts))
        return elements, mesh

    def random_element(self, rng: np.random.Generator):
        return tuple(f.random_element(rng) for f in self.factors)

    def element_key(self, g):
        return tuple(f.element_key(a) for f, a in zip(self.factors, g))

    def element_to_jsonable(self, g):
        return [f.element_to_jsonable(a) for f, a in zip(self.factors, g)]

    def element_from_jsonable(self, obj):
        return tuple(f.element_from_jsonable(a) for f, a in zip(self.factors, obj))

    def to_jsonable(self) -> dict:
        return {"kind": "product", "factors": [f.to_jsonable() for f in self.factors]}


@dataclass(frozen=True)
class ScaledGroup(CompactGroup):
    """The same group with all distances multiplied by a positive factor.

    The isometric embedding of the scaled group is the pointwise scaling
    of the base embedding.  Nested scalings normalize to a single factor;
    use :func:`scaled` to construct.
    """

    base: CompactGroup
    factor: float

    def __post_init__(self):
        if not self.factor > 0:
            raise ValueError("scale factor must be positive")
        if isinstance(self.base, ScaledGroup):
            object.__setattr__(self, "factor", self.factor * self.base.factor)
            object.__setattr__(self, "base", self.base.base)

    def identity(self):
        return self.base.identity()

    def op(self, g, h):
        return self.base.op(g, h)

    def inverse(self, g):
        return self.base.inverse(g)

    def halve(self, g):
        return self.base.halve(g)

    def distance(self, g, h) -> float:
        return self.factor * self.base.distance(g, h)

    def diameter(self) -> float:
        return self.factor * self.base.diameter()

    def local_embedding_distortion(self, threshold: float) -> float:
        if not threshold > 0:
            raise ValueError("threshold must be positive")
        return self.base.local_embedding_distortion(threshold / self.factor)

    def inverse_lipschitz(self) -> float:
        return self.base.inverse_lipschitz()

    @property
    def embedding_dim(self) -> int:
        return self.base.embedding_dim

    def embed(self, g) -> np.ndarray:
        return self.factor * self.base.embed(g)

    def unembed(self, p: np.ndarray):
        return self.base.unembed(np.asarray(p, dtype=float) / self.factor)

    def net(self, q: int, seed: int = 0):
        elements, mesh = self.base.net(q, seed=seed)
        return elements, self.factor * mesh

    def random_element(self, rng: np.random.Generator):
        return self.base.random_element(rng)

    def element_key(self, g):
        return self.base.element_key(g)

    def element_to_jsonable(self, g):
        return self.base.element_to_jsonable(g)

    def element_from_jsonable(self, obj):
        return self.base.element_from_jsonable(obj)

    def to_jsonable(self) -> dict:
        return {"kind": "scaled", "factor": self.factor, "base": self.base.to_jsonable()}


def scaled(base: CompactGroup, factor: float) -> CompactGroup:
    """Scale a group's metric, collapsing nested and unit factors."""
    if not factor > 0:
        raise ValueError("scale factor must be positive")
    if isinstance(base, ScaledGroup):
        return scaled(base.base, factor * base.factor)
    if factor == 1.0:
        return base
    return ScaledGroup(base, factor)


def group_from_dict(doc: dict) -> CompactGroup:
    kind = doc.get("kind")
    if kind == "torus":
        return Torus(int(doc["dims"]), float(doc["circumference"]))
    if kind == "su2":
        return SU2(float(doc.get("radius", 1.0)))
    if kind == "product":
        return ProductGroup(tuple(group_from_dict(f) for f in doc["factors"]))
    if kind == "scaled":
        return ScaledGroup(group_from_dict(doc["base"]), float(doc["factor"]))
    raise ValueError(f"unknown group kind {kind!r}")


def leaf_factors(group: CompactGroup, scale: float = 1.0) -> list:
    """Flatten products and scalings into (leaf group, accumulated scale) pairs."""
    if isinstance(group, ScaledGroup):
        return leaf_factors(group.base, scale * group.factor)
    if isinstance(group, ProductGroup):
        out = []
        for f in group.factors:
            out.extend(leaf_factors(f, scale))
        return out
    return [(group, scale)]


def flatten_elements(group: CompactGroup, elements: Sequence) -> np.ndarray:
    """Stack raw leaf coordinates of elements into rows (tori: angles,
    spheres: unit quaternions), matching the order of :func:`leaf_factors`."""
    def coords(g, grp):
        if isinstance(grp, ScaledGroup):
            return coords(g, grp.base)
        if isinstance(grp, ProductGroup):
            return np.concatenate([coords(a, f) for a, f in zip(g, grp.factors)])
        return np.asarray(g, dtype=float).ravel()
    return np.stack([coords(g, group) for g in elements])


def pairwise_distance_matrix(group: CompactGroup, xs: Sequence, ys: Sequence) -> np.ndarray:
    """Geodesic distances between two element families, vectorized per leaf."""
    a = flatten_elements(group, xs)
    b = flatten_elements(group, ys)
    total = np.zeros((len(xs), len(ys)))
    start = 0
    for leaf, scale in leaf_factors(group):
        if isinstance(leaf, Torus):
            width = leaf.dims
            for k in range(width):
                delta = np.abs(a[:, start + k, None] - b[None, :, start + k])
                delta = np.minimum(delta, leaf.circumference - delta)
                total += (scale * delta) ** 2
        elif isinstance(leaf, SU2):
            width = 4
            dots = a[:, start:start + 4] @ b[:, start:start + 4].T
            arc = leaf.radius * np.arccos(np.clip(dots, -1.0, 1.0))
            total += (scale * arc) ** 2
        else:
            raise TypeError(f"no vectorized distance for {type(leaf).__name__}")
        start += width
    return np.sqrt(total)


def _leaf_budgets(n_leaves: int, budget: int) -> list:
    """Split a total point budget across leaves, products staying <= budget."""
    base = max(1, int(budget ** (1.0 / n_leaves)))
    counts = [base] * n_leaves
    while True:
        for i in range(n_leaves):
            counts[i] += 1
            if math.prod(counts) > budget:
                counts[i] -= 1
                return counts


def budget_net(group: CompactGroup, budget: int, seed: int = 0):
    """Net whose total size is at most ``budget`` points.

    Unlike :meth:`CompactGroup.net`, whose parameter is per coordinate for
    tori and per factor for products, this treats the argument as a
    global budget and splits it across leaf factors.  Used by the lifting
    pipeline, where the atom count multiplies by the net size at every
    stage.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if isinstance(group, ScaledGroup):
        elements, mesh = budget_net(group.base, budget, seed=seed)
        return elements, group.factor * mesh
    if isinstance(group, Torus):
        counts = _leaf_budgets(group.dims, budget)
        axes = [np.arange(k) * (group.circumference / k) for k in counts]
        grids = np.meshgrid(*axes, indexing="ij")
        elements = [np.array(pt) for pt in zip(*(g.ravel() for g in grids))]
        mesh = math.sqrt(math.fsum((group.circumference / (2 * k)) ** 2 for k in counts))
        return elements, mesh
    if isinstance(group, SU2):
        return group.net(budget, seed=seed)
    if isinstance(group, ProductGroup):
        counts = _leaf_budgets(len(group.factors), budget)
        parts = [budget_net(f, k, seed=seed + i)
                 for i, (f, k) in enumerate(zip(group.factors, counts))]
        elements = [()]
        for part, _ in parts:
            elements = [e + (x,) for e in elements for x in part]
        mesh = math.sqrt(math.fsum(m ** 2 for _, m in parts))
        return elements, mesh
    raise TypeError(f"no budget net for {type(group).__name__}")
