"""Lift-and-embed pipeline for finite subsets of a compact group.

Starting from delta measures on a group G, each stage lifts measures into
the sqrt(2)-scaled square of the current level group, discretizing the
invariant fiber measure of the diagonal action on a finite net.  After m
stages the atoms live in a large product group that is isometrically a
scaled power of G; pushing atoms through the closed-form Euclidean
embedding yields uniform empirical measures in Euclidean space, whose
pairwise distances are permutation-quotient distances of atom tuples.
The pipeline reports how far the correspondence is from an isometry.

Folding every lifted atom back down recovers the source point exactly,
which pins the lower bound: measured distances can exceed the group
distance only through net discretization, and can fall below it only
through the chordal shortcut of the embedding.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .groups import (CompactGroup, ProductGroup, budget_net,
                     pairwise_distance_matrix, scaled)
from .transport import perm_quotient_distance, solve_assignment

__all__ = [
    "TowerConfig",
    "LiftedMeasure",
    "PipelineReport",
    "AtomCapError",
    "build_tower",
    "stage_net",
    "delta_measure",
    "lift_measure",
    "fold_atom",
    "embed_measure",
    "project_back",
    "run_pipeline",
]

SQRT2 = math.sqrt(2.0)
NET_STRATEGIES = ("grid", "aligned")


class AtomCapError(RuntimeError):
    """Raised when per-level nets would push the atom count over the cap."""

    def __init__(self, level: int, atoms: int, cap: int):
        self.level = level
        self.atoms = atoms
        self.cap = cap
        super().__init__(
            f"lift at level {level} would produce {atoms} atoms, over the cap {cap}")


@dataclass(frozen=True)
class TowerConfig:
    """Parameters of one pipeline run.

    ``depth`` must be even so the final scale 2^(depth/2) is an integer.
    ``net_sizes`` gives the total net size used by each lifting stage; the
    final atom count is their product and must stay at or below
    ``atom_cap``.  ``net_strategy`` selects how stage nets are placed (see
    :func:`stage_net`).  Intermediate transport distances are recorded for
    levels whose atom count is at most ``level_w2_cap``.
    """

    group: CompactGroup
    depth: int
    net_sizes: tuple = ()
    net_strategy: str = "aligned"
    atom_cap: int = 2048
    level_w2_cap: int = 512
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "net_sizes", tuple(int(q) for q in self.net_sizes))
        if self.depth < 0 or self.depth % 2 != 0:
            raise ValueError("depth must be a nonnegative even integer")
        if len(self.net_sizes) != self.depth:
            raise ValueError(f"need {self.depth} net sizes, got {len(self.net_sizes)}")
        if any(q < 1 for q in self.net_sizes):
            raise ValueError("net sizes must be positive")
        if self.net_strategy not in NET_STRATEGIES:
            raise ValueError(f"net_strategy must be one of {NET_STRATEGIES}")
        if self.atom_cap < 1:
            raise ValueError("atom cap must be positive")

    def to_jsonable(self) -> dict:
        return {"group": self.group.to_jsonable(), "depth": self.depth,
                "net_sizes": list(self.net_sizes), "net_strategy": self.net_strategy,
                "atom_cap": self.atom_cap, "level_w2_cap": self.level_w2_cap,
                "seed": self.seed}


def build_tower(group: CompactGroup, depth: int) -> list:
    """Level groups: each level is the sqrt(2)-scaled square of the previous.

    Level 0 is the group itself; level i has 2^i leaf copies each scaled
    by 2^(i/2), so an even final depth m gives (2^(m/2) G)^(2^m)
    isometrically.
    """
    levels = [group]
    for _ in range(depth):
        half = scaled(levels[-1], SQRT2)
        levels.append(ProductGroup((half, half)))
    return levels


def _twisted_embed(group: CompactGroup, t, level: int):
    """Canonical curve G -> level group along which optimal lift rotations lie.

    Defined recursively by pairing the images of t and its inverse.  The
    map is a homomorphism when the group is abelian, so the image of a
    cyclic subgroup net is again a subgroup of the level group; the
    optimal coupling between lifted deltas rotates along exactly this
    alternating-sign curve.
    """
    if level == 0:
        return t
    return (_twisted_embed(group, t, level - 1),
            _twisted_embed(group, group.inverse(t), level - 1))


def stage_net(config: TowerConfig, levels: Sequence[CompactGroup], stage: int):
    """Net of the stage-th level group used to discretize its lift.

    Strategies:

    ``grid``
        A budgeted net of the whole level group (subgroup grids for tori,
        farthest-point nets for spheres).  Mesh estimates are exact or
        measured; coverage of high-dimensional levels is necessarily
        coarse at small budgets.
    ``aligned``
        The image of a budgeted net of the base group under the canonical
        curve along which optimal lift rotations travel.  Same size at
        every stage; over an abelian base the image of a cyclic net is a
        subgroup, which keeps rotation couplings measure-preserving, and
        stage distances are exact whenever the needed half-shifts land on
        the base net.

    Returns ``(elements, mesh)`` where the mesh is the exact or measured
    covering radius for ``grid`` nets and the conservative half diameter
    of the level group for the curve strategy.
    """
    q = config.net_sizes[stage]
    if config.net_strategy == "grid":
        return budget_net(levels[stage], q, seed=config.seed + stage)
    params, _ = budget_net(config.group, q, seed=config.seed + stage)
    elements = [_twisted_embed(config.group, t, stage) for t in params]
    return elements, levels[stage].diameter() / 2.0


@dataclass(frozen=True)
class LiftedMeasure:
    """Uniform measure over atoms of a level group."""

    level: int
    atoms: tuple
    weight: float

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("a lifted measure needs atoms")
        expected = 1.0 / len(self.atoms)
        if abs(self.weight - expected) > 1e-12:
            raise ValueError("lifted measures are uniform")

    def __len__(self) -> int:
        return len(self.atoms)


def delta_measure(point) -> LiftedMeasure:
    return LiftedMeasure(0, (point,), 1.0)


def lift_measure(mu: LiftedMeasure, net: Sequence,
                 level_group: CompactGroup) -> LiftedMeasure:
    """One lifting stage: atoms (s, s u) for net rotations s and atoms u.

    This discretizes the invariant measure on the fiber of the diagonal
    action; folding each new atom recovers the old one exactly, so the
    pushforward of the lift is the original measure.
    """
    if not net:
        raise ValueError("net must be nonempty")
    atoms = tuple((s, level_group.op(s, u)) for s in net for u in mu.atoms)
    return LiftedMeasure(mu.level + 1, atoms, mu.weight / len(net))


def fold_atom(atom, lower_group: CompactGroup):
    """Project one level down: (u, v) -> u^-1 v."""
    u, v = atom
    return lower_group.op(lower_group.inverse(u), v)


def embed_measure(mu: LiftedMeasure, levels: Sequence[CompactGroup]) -> np.ndarray:
    """Euclidean images of the atoms at the measure's level, one row each."""
    group = levels[mu.level]
    return np.stack([group.embed(a) for a in mu.atoms])


def project_back(point: np.ndarray, levels: Sequence[CompactGroup]):
    """Invert the embedding at the top level, then fold down to the base."""
    atom = levels[-1].unembed(point)
    for lower in reversed(levels[:-1]):
        atom = fold_atom(atom, lower)
    return atom


@dataclass
class PipelineReport:
    """Everything measured during one pipeline run.

    ``pairs`` rows are (label_x, label_y, base distance, final distance,
    final/base ratio, per-level transport distances or None).  Wall-clock
    figures are informative only; the deterministic content is exposed by
    :meth:`core_dict`.
    """

    config: dict
    labels: tuple
    atom_counts: tuple
    meshes: tuple
    pairs: list
    distortion: float
    lipschitz_upper_slack: float
    stage_seconds: dict

    def core_dict(self) -> dict:
        return {"config": self.config, "labels": list(self.labels),
                "atom_counts": list(self.atom_counts), "meshes": list(self.meshes),
                "pairs": self.pairs, "distortion": self.distortion,
                "lipschitz_upper_slack": self.lipschitz_upper_slack}

    def to_json_dict(self) -> dict:
        doc = self.core_dict()
        doc["stage_seconds"] = self.stage_seconds
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    def pairs_csv(self) -> str:
        lines = ["x_label,y_label,d_base,d_final,ratio"]
        for row in self.pairs:
            lines.append(f"{row[0]},{row[1]},{float(row[2])!r},{float(row[3])!r},"
                         f"{float(row[4])!r}")
        return "\n".join(lines) + "\n"


def run_pipeline(points: Sequence, config: TowerConfig,
                 labels: Optional[Sequence[str]] = None) -> PipelineReport:
    """Lift, embed and measure a finite subset of the configured group.

    Every point is lifted through the same per-level nets, so all images
    share the same atom count N and the final distance between two images
    is the permutation-quotient distance of their Euclidean N-tuples
    (equivalently the transport distance of the uniform empirical
    measures).  The reported distortion is the bi-Lipschitz constant of
    the correspondence against the base group distances.
    """
    points = list(points)
    if not points:
        raise ValueError("need at least one point")
    if labels is None:
        labels = tuple(f"p{i}" for i in range(len(points)))
    labels = tuple(labels)
    if len(labels) != len(points):
        raise ValueError("one label per point required")

    atoms = 1
    for stage, q in enumerate(config.net_sizes):
        atoms *= q
        if atoms > config.atom_cap:
            raise AtomCapError(stage + 1, atoms, config.atom_cap)

    levels = build_tower(config.group, config.depth)
    timings: dict = {}

    t0 = time.perf_counter()
    nets = []
    meshes = []
    for stage in range(config.depth):
        elements, mesh = stage_net(config, levels, stage)
        nets.append(elements)
        meshes.append(mesh)
    timings["nets"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    stage_atoms = []  # per point, the atom tuples after each stage
    for p in points:
        mu = delta_measure(p)
        trail = [mu.atoms]
        for stage in range(config.depth):
            mu = lift_measure(mu, nets[stage], levels[stage])
            trail.append(mu.atoms)
        stage_atoms.append(trail)
    atom_counts = tuple(int(math.prod(config.net_sizes[:i])) for i in range(config.depth + 1))
    timings["lift"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    images = [np.stack([levels[-1].embed(a) for a in trail[-1]]) for trail in stage_atoms]
    timings["embed"] = time.perf_counter() - t0

    # levels cheap enough for the optional transport diagnostics
    level_track = [lvl for lvl in range(1, config.depth + 1)
                   if atom_counts[lvl] <= config.level_w2_cap]

    t0 = time.perf_counter()
    pairs = []
    ratios = []
    eps_net = 2.0 * SQRT2 * math.fsum(meshes)
    slack = -math.inf
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            d_base = config.group.distance(points[i], points[j])
            d_final = perm_quotient_distance(images[i], images[j])
            level_w2: list = []
            for lvl in range(1, config.depth + 1):
                if lvl not in level_track:
                    level_w2.append(None)
                    continue
                cost = pairwise_distance_matrix(levels[lvl], stage_atoms[i][lvl],
                                                stage_atoms[j][lvl]) ** 2
                _, total = solve_assignment(cost)
                level_w2.append(math.sqrt(max(total, 0.0) / atom_counts[lvl]))
            slack = max(slack, d_final - (d_base + eps_net))
            if d_base > 0 and d_final > 0:
                ratios.append(max(d_final / d_base, d_base / d_final))
            pairs.append([labels[i], labels[j], d_base, d_final,
                          (d_final / d_base) if d_base else math.inf, level_w2])
    timings["distances"] = time.perf_counter() - t0

    if slack > 1e-9:
        raise RuntimeError(
            f"lift upper bound violated by {slack:.3e}: final distances must "
            f"stay within {eps_net:.3e} of the base distances")

    distortion = max(ratios) if ratios else 1.0
    return PipelineReport(config=config.to_jsonable(), labels=labels,
                          atom_counts=atom_counts, meshes=tuple(meshes),
                          pairs=pairs, distortion=distortion,
                          lipschitz_upper_slack=slack if pairs else 0.0,
                          stage_seconds=timings)
