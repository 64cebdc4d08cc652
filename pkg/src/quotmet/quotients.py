"""Distances in quotient constructions.

Three flavors: Euclidean space modulo an explicit finite isometry group,
the torus compactification of a permutation action (coordinate
permutations crossed with lattice shifts), and the diagonal quotient of a
doubled, sqrt(2)-scaled group which recovers the group itself.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .groups import CompactGroup

__all__ = [
    "EuclideanIsometry",
    "FiniteIsometryGroup",
    "LatticeShiftAction",
    "euclidean_quotient_distance",
    "compactified_distance",
    "diagonal_quotient_distance",
    "diagonal_canonical",
    "permutation_group",
]

ORTHO_ATOL = 1e-10
CLOSURE_ATOL = 1e-9


@dataclass(frozen=True)
class EuclideanIsometry:
    """Affine isometry x -> Qx + t with Q orthogonal."""

    matrix: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = np.array(self.matrix, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("orthogonal part must be a square matrix")
        t = np.array(self.translation, dtype=float).reshape(q.shape[0])
        gram_err = np.max(np.abs(q.T @ q - np.eye(q.shape[0])))
        if gram_err > ORTHO_ATOL:
            raise ValueError(f"matrix is not orthogonal (error {gram_err:.3e})")
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "matrix", q)
        object.__setattr__(self, "translation", t)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float) + self.translation

    def compose(self, other: "EuclideanIsometry") -> "EuclideanIsometry":
        return EuclideanIsometry(self.matrix @ other.matrix,
                                 self.matrix @ other.translation + self.translation)

    def inverse(self) -> "EuclideanIsometry":
        return EuclideanIsometry(self.matrix.T, -(self.matrix.T @ self.translation))

    def gap_to(self, other: "EuclideanIsometry") -> float:
        return float(max(np.max(np.abs(self.matrix - other.matrix)),
                         np.max(np.abs(self.translation - other.translation))))

    @classmethod
    def identity(cls, dim: int) -> "EuclideanIsometry":
        return cls(np.eye(dim), np.zeros(dim))

    def to_jsonable(self) -> dict:
        return {"matrix": self.matrix.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_jsonable(cls, doc: dict) -> "EuclideanIsometry":
        return cls(np.array(doc["matrix"]), np.array(doc["translation"]))


@dataclass(frozen=True)
class FiniteIsometryGroup:
    """Explicit finite set of Euclidean isometries, validated as a group.

    Construction checks the identity is present and that composition and
    inversion land back in the listed elements (nearest-element matching
    at a small tolerance), which catches generator mistakes before they
    corrupt distance values.
    """

    elements: tuple

    def __post_init__(self):
        elements = tuple(self.elements)
        if not elements:
            raise ValueError("a group needs at least the identity")
        dim = elements[0].dim
        if any(e.dim != dim for e in elements):
            raise ValueError("all isometries must share one dimension")
        ident = EuclideanIsometry.identity(dim)
        if min(e.gap_to(ident) for e in elements) > CLOSURE_ATOL:
            raise ValueError("group does not contain the identity")
        for a in elements:
            if min(a.inverse().gap_to(e) for e in elements) > CLOSURE_ATOL:
                raise ValueError("group is not closed under inversion")
            for b in elements:
                prod = a.compose(b)
                if min(prod.gap_to(e) for e in elements) > CLOSURE_ATOL:
                    raise ValueError("group is not closed under composition")
        object.__setattr__(self, "elements", elements)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return self.elements[0].dim

    def to_jsonable(self) -> list:
        return [e.to_jsonable() for e in self.elements]

    @classmethod
    def from_jsonable(cls, docs: Sequence[dict]) -> "FiniteIsometryGroup":
        return cls(tuple(EuclideanIsometry.from_jsonable(d) for d in docs))


def permutation_group(perms: Sequence[Sequence[int]]) -> FiniteIsometryGroup:
    """Expand permutation arrays into the corresponding matrix group.

    Each entry maps coordinate j of the input to coordinate perm[j] of the
    output.
    """
    elements = []
    for perm in perms:
        perm = list(perm)
        m = len(perm)
        q = np.zeros((m, m))
        for j, i in enumerate(perm):
            q[i, j] = 1.0
        elements.append(EuclideanIsometry(q, np.zeros(m)))
    return FiniteIsometryGroup(tuple(elements))


def full_symmetric_group(m: int) -> FiniteIsometryGroup:
    """All m! coordinate permutations of Euclidean m-space."""
    return permutation_group(list(itertools.permutations(range(m))))


def euclidean_quotient_distance(x: np.ndarray, y: np.ndarray,
                                group: FiniteIsometryGroup) -> float:
    """Distance between the orbits of x and y: min over g of |x - g(y)|."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (group.dim,) or y.shape != (group.dim,):
        raise ValueError(f"points must have dimension {group.dim}")
    images = np.stack([g.apply(y) for g in group.elements])
    return float(np.min(np.linalg.norm(images - x, axis=1)))


@dataclass(frozen=True)
class LatticeShiftAction:
    """Integer shifts of every coordinate, scaled by M."""

    scale: float
    dim: int

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("shift scale must be positive")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")


def compactified_distance(x: np.ndarray, y: np.ndarray,
                          perms: FiniteIsometryGroup,
                          shifts: LatticeShiftAction) -> float:
    """Distance in the flat orbifold quotient by permutations and M-shifts.

    Points are canonicalized into the fundamental cube [0, M)^m.  For a
    fixed permuted image the shift lattice decouples coordinatewise, so
    the minimum over all integer shift vectors is the l2 combination of
    per-coordinate circle distances of circumference M; the minimum over
    the permutation group is taken outside.
    """
    m, big_m = shifts.dim, shifts.scale
    x = np.mod(np.asarray(x, dtype=float), big_m)
    y = np.mod(np.asarray(y, dtype=float), big_m)
    if x.shape != (m,) or y.shape != (m,) or perms.dim != m:
        raise ValueError(f"points and actions must have dimension {m}")
    best = math.inf
    for g in perms.elements:
        delta = np.abs(x - np.mod(g.apply(y), big_m))
        delta = np.minimum(delta, big_m - delta)
        best = min(best, float(np.sqrt(np.sum(delta ** 2))))
    return best


def diagonal_quotient_distance(a, b, group: CompactGroup, net: Sequence) -> float:
    """Distance between diagonal orbits of pairs in the doubled scaled group.

    ``a`` and ``b`` are pairs of elements of ``group``; the simultaneous
    left action is discretized on ``net``, so the value is an upper bound
    on the true quotient distance that tightens as the net refines.  The
    sqrt(2) factors of the doubled group are built in.
    """
    a1, a2 = a
    b1, b2 = b
    best = math.inf
    for g in net:
        d1 = group.distance(group.op(g, a1), b1)
        d2 = group.distance(group.op(g, a2), b2)
        best = min(best, math.sqrt(2.0 * d1 * d1 + 2.0 * d2 * d2))
    return best


def diagonal_canonical(a, group: CompactGroup):
    """Canonical representative g1^-1 g2 of the diagonal orbit of (g1, g2).

    Group distances between canonical representatives equal the exact
    quotient distances (the net-free limit of
    :func:`diagonal_quotient_distance`); this is verified numerically by
    the test suite rather than assumed.
    """
    g1, g2 = a
    return group.op(group.inverse(g1), g2)
