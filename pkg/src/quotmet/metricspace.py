"""Finite metric spaces with validated distance matrices.

A :class:`FiniteMetricSpace` is the universal input/output format of this
package: labeled points plus a dense symmetric matrix that is checked for
positivity off the diagonal and for the triangle inequality on
construction.  Scaling, l2-products and powers of spaces are provided as
free functions, together with the Lipschitz and bi-Lipschitz constants of
maps between finite spaces.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Relative tolerance for the triangle-inequality check; inputs typically
# come from floating-point geodesic computations.
TRIANGLE_RTOL = 1e-12

__all__ = [
    "FiniteMetricSpace",
    "PointMap",
    "scale_space",
    "product_space",
    "power_space",
    "lipschitz_constant",
    "bilipschitz_constant",
]


@dataclass(frozen=True)
class FiniteMetricSpace:
    """Labeled points with a validated distance matrix.

    Invariants checked on construction: the matrix is square, symmetric,
    zero exactly on the diagonal, strictly positive off it (points are
    distinct; pseudo-metrics are rejected), and satisfies the triangle
    inequality up to ``TRIANGLE_RTOL`` relative to the largest entry.
    Instances are immutable and safe for concurrent reads.
    """

    labels: tuple
    dist: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        d = np.array(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {d.shape}")
        n = d.shape[0]
        if len(labels) != n:
            raise ValueError(f"{len(labels)} labels for a {n}x{n} matrix")
        if len(set(labels)) != n:
            raise ValueError("labels must be unique")
        if not np.all(np.isfinite(d)):
            raise ValueError("distances must be finite")
        if not np.array_equal(d, d.T):
            if not np.allclose(d, d.T, rtol=0, atol=1e-15 * max(1.0, d.max(initial=0.0))):
                raise ValueError("distance matrix is not symmetric")
            d = (d + d.T) / 2.0
        if np.any(np.diag(d) != 0.0):
            raise ValueError("diagonal must be exactly zero")
        off = d[~np.eye(n, dtype=bool)]
        if off.size and off.min() <= 0.0:
            raise ValueError("distinct points must be at positive distance")
        tol = TRIANGLE_RTOL * d.max(initial=0.0)
        for k in range(n):
            slack = d - (d[:, k][:, None] + d[k, :][None, :])
            if slack.max(initial=0.0) > tol:
                i, j = np.unravel_index(np.argmax(slack), slack.shape)
                raise ValueError(
                    f"triangle inequality fails: d({labels[i]},{labels[j]}) > "
                    f"d(.,{labels[k]}) sum by {slack[i, j]:.3e}"
                )
        d.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dist", d)

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        return self.labels.index(label)

    def distance(self, a, b) -> float:
        """Distance between two points given by label."""
        return float(self.dist[self.index(a), self.index(b)])

    # -- serialization ------------------------------------------------

    def to_json_dict(self) -> dict:
        return {"labels": [_label_out(l) for l in self.labels],
                "dist": self.dist.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, doc: dict) -> "FiniteMetricSpace":
        if "labels" not in doc or "dist" not in doc:
            raise ValueError("document must have 'labels' and 'dist' fields")
        return cls(tuple(_label_in(l) for l in doc["labels"]), np.array(doc["dist"]))

    @classmethod
    def from_json(cls, text: str) -> "FiniteMetricSpace":
        return cls.from_json_dict(json.loads(text))

    def to_csv(self) -> str:
        """CSV export, one row ``label_i,label_j,distance`` per unordered pair."""
        buf = io.StringIO()
        n = len(self)
        for i in range(n):
            for j in range(i + 1, n):
                buf.write(f"{_label_str(self.labels[i])},{_label_str(self.labels[j])},"
                          f"{float(self.dist[i, j])!r}\n")
        return buf.getvalue()


def _label_out(label):
    return list(label) if isinstance(label, tuple) else label


def _label_in(label):
    return tuple(_label_in(x) for x in label) if isinstance(label, list) else label


def _label_str(label) -> str:
    if isinstance(label, tuple):
        return "(" + " ".join(_label_str(x) for x in label) + ")"
    return str(label)


@dataclass(frozen=True)
class PointMap:
    """A map between finite metric spaces, given by domain-index -> codomain-index."""

    domain: FiniteMetricSpace
    codomain: FiniteMetricSpace
    assignment: tuple

    def __post_init__(self):
        assignment = tuple(int(i) for i in self.assignment)
        if len(assignment) != len(self.domain):
            raise ValueError("assignment must cover every domain point")
        for i in assignment:
            if not 0 <= i < len(self.codomain):
                raise ValueError(f"assignment target {i} out of range")
        object.__setattr__(self, "assignment", assignment)


def scale_space(space: FiniteMetricSpace, factor: float) -> FiniteMetricSpace:
    """The same points with every distance multiplied by ``factor`` (> 0)."""
    if not factor > 0:
        raise ValueError("scale factor must be positive")
    return FiniteMetricSpace(space.labels, factor * space.dist)


def product_space(x: FiniteMetricSpace, y: FiniteMetricSpace) -> FiniteMetricSpace:
    """l2-product: points are pairs, squared distances add."""
    labels = tuple((lx, ly) for lx in x.labels for ly in y.labels)
    dx2 = np.repeat(np.repeat(x.dist ** 2, len(y), axis=0), len(y), axis=1)
    dy2 = np.tile(y.dist ** 2, (len(x), len(x)))
    return FiniteMetricSpace(labels, np.sqrt(dx2 + dy2))


def power_space(x: FiniteMetricSpace, n: int) -> FiniteMetricSpace:
    """Iterated l2-product of ``x`` with itself; labels are flat n-tuples."""
    if n < 1:
        raise ValueError("power requires n >= 1")
    out = FiniteMetricSpace(tuple((l,) for l in x.labels), x.dist)
    for _ in range(n - 1):
        prod = product_space(out, x)
        flat = tuple(head + (tail,) for head, tail in prod.labels)
        out = FiniteMetricSpace(flat, prod.dist)
    return out


def _pair_distances(m: PointMap):
    n = len(m.domain)
    idx = np.array(m.assignment)
    iu = np.triu_indices(n, k=1)
    dx = m.domain.dist[iu]
    dy = m.codomain.dist[idx[:, None], idx[None, :]][iu]
    return dx, dy


def lipschitz_constant(m: PointMap) -> float:
    """sup of d_codomain / d_domain over distinct pairs; 0 for constant maps."""
    if len(m.domain) < 2:
        raise ValueError("Lipschitz constant needs at least two points")
    dx, dy = _pair_distances(m)
    return float(np.max(dy / dx))


def bilipschitz_constant(m: PointMap) -> float:
    """Smallest c >= 1 with d_Y/c <= d_X <= c*d_Y over all pairs.

    Returns ``inf`` when the map collapses two distinct points, which is
    how a failed embedding announces itself.  Equals exactly 1 for
    isometries.
    """
    if len(m.domain) < 2:
        return 1.0
    dx, dy = _pair_distances(m)
    if np.any(dy == 0.0):
        return math.inf
    ratios = dy / dx
    return float(max(np.max(ratios), np.max(1.0 / ratios)))
