"""Command-line front end: reproducible experiments emitting CSV tables.

Subcommands: ``distance`` (pairwise distance tables under a chosen
space), ``tower`` (lift-and-embed distortion sweeps), ``markov``
(inequality verification runs) and ``selftest`` (quick invariant
battery).  Every output file starts with header lines embedding the full
resolved configuration and seed; apart from the timestamp line the
outputs are deterministic.

Exit codes: 0 success, 1 assertion or inequality failure, 2 config error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .groups import SU2, group_from_dict, circle
from .markov import euclidean_sampler, group_sampler, verify_markov_type2
from .metricspace import FiniteMetricSpace
from .quotients import (FiniteIsometryGroup, LatticeShiftAction,
                        compactified_distance, euclidean_quotient_distance,
                        permutation_group)
from .tower import AtomCapError, TowerConfig, run_pipeline
from .transport import DiscreteMeasure, perm_quotient_distance, w2_discrete

JOBS_ENV = "QUOTMET_JOBS"


class ConfigError(Exception):
    """Malformed experiment configuration; the message names the field."""


def _need(doc: dict, field: str):
    if field not in doc:
        raise ConfigError(f"missing config field '{field}'")
    return doc[field]


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")


def _header(config: dict) -> str:
    stamp = datetime.datetime.now().isoformat(timespec="seconds")
    return (f"# quotmet {__version__} config: {json.dumps(config, sort_keys=True)}\n"
            f"# timestamp: {stamp}\n")


def _write(out_dir: Path, name: str, header: str, body: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(header + body)
    tmp.replace(path)
    return path


# ---------------------------------------------------------------- distance

def _distance_matrix(doc: dict):
    space = _need(doc, "space")
    kind = _need(space, "metric")
    points = _need(doc, "points")
    labels = doc.get("labels") or [f"p{i}" for i in range(len(points))]
    if len(labels) != len(points):
        raise ConfigError("field 'labels' must match 'points' in length")

    if kind == "geodesic":
        group = group_from_dict(_need(space, "group"))
        elems = [group.element_from_jsonable(p) for p in points]
        mat = [[group.distance(a, b) for b in elems] for a in elems]
    elif kind == "euclidean_quotient":
        iso = FiniteIsometryGroup.from_jsonable(_need(space, "isometries"))
        pts = [np.array(p, dtype=float) for p in points]
        mat = [[euclidean_quotient_distance(a, b, iso) for b in pts] for a in pts]
    elif kind == "compactified":
        perms = permutation_group(_need(space, "permutations"))
        shifts = LatticeShiftAction(float(_need(space, "shift_scale")), perms.dim)
        pts = [np.array(p, dtype=float) for p in points]
        mat = [[compactified_distance(a, b, perms, shifts) for b in pts] for a in pts]
    elif kind == "perm_quotient":
        tuples = [[np.array(q, dtype=float) for q in p] for p in points]
        mat = [[perm_quotient_distance(a, b) for b in tuples] for a in tuples]
    elif kind == "w2":
        measures = [DiscreteMeasure.from_json_dict(p) for p in points]
        mat = [[w2_discrete(a, b)[0] for b in measures] for a in measures]
    else:
        raise ConfigError(f"unknown space metric '{kind}'")
    return labels, np.array(mat)


def cmd_distance(doc: dict, out_dir: Path) -> int:
    labels, mat = _distance_matrix(doc)
    header = _header(doc)
    body_json = json.dumps({"labels": labels, "dist": mat.tolist()}, indent=1) + "\n"
    lines = ["label_i,label_j,distance"]
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            lines.append(f"{labels[i]},{labels[j]},{float(mat[i, j])!r}")
    _write(out_dir, "distances.json", header, body_json)
    path = _write(out_dir, "distances.csv", header, "\n".join(lines) + "\n")
    try:
        FiniteMetricSpace(tuple(labels), mat)
    except ValueError as exc:
        print(f"note: table is not a valid finite metric space ({exc})")
    print(f"wrote {path}")
    return 0


# ------------------------------------------------------------------- tower

def _tower_cell(group_doc, points_doc, cell, cap, seed):
    group = group_from_dict(group_doc)
    points = [group.element_from_jsonable(p) for p in points_doc]
    config = TowerConfig(group, int(cell["depth"]), tuple(cell.get("net_sizes", ())),
                         net_strategy=cell.get("net_strategy", "aligned"),
                         atom_cap=cap, seed=seed)
    try:
        report = run_pipeline(points, config)
    except AtomCapError as exc:
        return cell, None, str(exc)
    return cell, report, ""


def cmd_tower(doc: dict, out_dir: Path, cap: int, seed: int, jobs: int) -> int:
    group_doc = _need(doc, "group")
    points_doc = _need(doc, "points")
    sweep = _need(doc, "sweep")
    if not isinstance(sweep, list):
        raise ConfigError("field 'sweep' must be a list of cells")
    for cell in sweep:
        if "depth" not in cell:
            raise ConfigError("sweep cell missing field 'depth'")

    results = []
    if jobs > 1 and len(sweep) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_tower_cell, group_doc, points_doc, cell, cap, seed)
                    for cell in sweep]
            results = [f.result() for f in futs]
    else:
        results = [_tower_cell(group_doc, points_doc, cell, cap, seed)
                   for cell in sweep]

    header = _header({**doc, "cap": cap, "seed": seed})
    lines = ["depth,net_sizes,net_strategy,atoms,distortion,error"]
    for cell, report, err in results:
        sizes = "x".join(str(s) for s in cell.get("net_sizes", ()))
        strategy = cell.get("net_strategy", "aligned")
        if report is None:
            lines.append(f"{cell['depth']},{sizes},{strategy},,,{err}")
            continue
        lines.append(f"{cell['depth']},{sizes},{strategy},"
                     f"{report.atom_counts[-1]},{report.distortion!r},")
        tag = f"m{cell['depth']}_{sizes or 'none'}"
        _write(out_dir, f"tower_{tag}_pairs.csv", header, report.pairs_csv())
        _write(out_dir, f"tower_{tag}_report.json", "",
               json.dumps(report.to_json_dict(), indent=1) + "\n")
    path = _write(out_dir, "tower_sweep.csv", header, "\n".join(lines) + "\n")
    print(f"wrote {path}")
    return 0


# ------------------------------------------------------------------ markov

def _markov_sampler(name: str, doc: dict):
    max_states = int(doc.get("max_states", 6))
    if name == "euclidean":
        return euclidean_sampler(dim=int(doc.get("dim", 3)), max_states=max_states)
    if name == "su2":
        return group_sampler(SU2(float(doc.get("radius", 1.0))), max_states=max_states)
    if name == "torus":
        dims = int(doc.get("dims", 2))
        circ = float(doc.get("circumference", 2 * math.pi))
        from .groups import Torus
        return group_sampler(Torus(dims, circ), max_states=max_states)
    raise ConfigError(f"unknown markov target '{name}'")


def cmd_markov(doc: dict, out_dir: Path, seed: int) -> int:
    targets = doc.get("targets", ["euclidean", "su2", "torus"])
    trials = int(doc.get("trials", 100))
    t_max = int(doc.get("t_max", 10))
    constant = float(doc.get("K", 1.0))
    header = _header({**doc, "seed": seed})

    failed = False
    summary = ["target,trials,t_max,K,max_ratio,vacuous,passed"]
    for name in targets:
        sampler = _markov_sampler(name, doc)
        report = verify_markov_type2(sampler, trials, t_max, constant=constant,
                                     seed=seed)
        _write(out_dir, f"markov_{name}.csv", header, report.to_csv())
        ratio = "" if report.max_ratio is None else repr(report.max_ratio)
        note = "all_vacuous" if report.all_vacuous else ""
        summary.append(f"{name},{trials},{t_max},{constant},{ratio},{note},"
                       f"{report.passed}")
        if not report.passed:
            failed = True
            print(f"FAIL {name}: max ratio {report.max_ratio} exceeds "
                  f"K^2 = {constant ** 2}")
            print("worst configuration:")
            print(json.dumps(report.worst, indent=1))
        else:
            extra = " (all trials vacuous)" if report.all_vacuous else ""
            print(f"pass {name}: max ratio "
                  f"{report.max_ratio if report.max_ratio is not None else 'n/a'}"
                  f"{extra}")
    path = _write(out_dir, "markov_summary.csv", header, "\n".join(summary) + "\n")
    print(f"wrote {path}")
    return 1 if failed else 0


# ---------------------------------------------------------------- selftest

def _selftest_checks(seed: int):
    import itertools

    from .metricspace import PointMap, bilipschitz_constant, scale_space
    from .quotients import full_symmetric_group
    from .transport import solve_assignment
    from .groups import Torus

    rng = np.random.default_rng(seed)

    def check_assignment():
        cost = rng.random((5, 5))
        _, total = solve_assignment(cost)
        brute = min(math.fsum(cost[i, p[i]] for i in range(5))
                    for p in itertools.permutations(range(5)))
        return abs(total - brute) == 0.0, f"assignment vs brute force gap {total - brute}"

    def check_w2_triangle():
        pts = [rng.standard_normal(2) for _ in range(9)]
        ms = [DiscreteMeasure.from_points(pts[i:i + 3]) for i in (0, 3, 6)]
        d01 = w2_discrete(ms[0], ms[1])[0]
        d12 = w2_discrete(ms[1], ms[2])[0]
        d02 = w2_discrete(ms[0], ms[2])[0]
        return d02 <= d01 + d12 + 1e-9, f"triangle slack {d02 - d01 - d12:.2e}"

    def check_group_axioms():
        g = SU2(1.0)
        a, b, c = (g.random_element(rng) for _ in range(3))
        assoc = np.max(np.abs(g.op(g.op(a, b), c) - g.op(a, g.op(b, c))))
        inv = g.distance(g.op(a, g.inverse(a)), g.identity())
        return assoc <= 1e-12 and inv <= 1e-9, f"assoc {assoc:.2e} inverse {inv:.2e}"

    def check_bi_invariance():
        g = SU2(1.0)
        worst = 0.0
        for _ in range(20):
            a, x, y = (g.random_element(rng) for _ in range(3))
            d = g.distance(x, y)
            worst = max(worst,
                        abs(g.distance(g.op(a, x), g.op(a, y)) - d),
                        abs(g.distance(g.op(x, a), g.op(y, a)) - d))
        return worst <= 1e-12, f"worst deviation {worst:.2e}"

    def check_quotient_invariance():
        group = full_symmetric_group(3)
        x, y = rng.standard_normal(3), rng.standard_normal(3)
        base = euclidean_quotient_distance(x, y, group)
        worst = max(abs(euclidean_quotient_distance(g.apply(x), y, group) - base)
                    for g in group.elements)
        return worst <= 1e-10, f"orbit deviation {worst:.2e}"

    def check_bilipschitz():
        pts = rng.standard_normal((4, 2))
        d = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(-1))
        x = FiniteMetricSpace(tuple("abcd"), d)
        y = scale_space(x, 2.0)
        c = bilipschitz_constant(PointMap(x, y, (0, 1, 2, 3)))
        return abs(c - 2.0) <= 1e-12, f"scale-2 map constant {c}"

    def check_tower_roundtrip():
        g = circle(2 * math.pi)
        from .tower import (TowerConfig, build_tower, delta_measure,
                            lift_measure, project_back, stage_net)
        cfg = TowerConfig(g, 2, (4, 4))
        levels = build_tower(g, 2)
        mu = delta_measure(g.element([1.0]))
        for i in range(2):
            mu = lift_measure(mu, stage_net(cfg, levels, i)[0], levels[i])
        worst = max(g.distance(project_back(levels[2].embed(a), levels),
                               g.element([1.0])) for a in mu.atoms)
        return worst <= 1e-9, f"roundtrip error {worst:.2e}"

    def check_markov_t1():
        from .markov import chain_from_weights, markov_ratio, MappedConfiguration
        w = rng.random((4, 4))
        chain = chain_from_weights((w + w.T) / 2.0)
        images = tuple(rng.standard_normal(2) for _ in range(4))
        cfg = MappedConfiguration(chain, images,
                                  lambda p, q: float(np.linalg.norm(p - q)))
        r = markov_ratio(cfg, 1)
        return r is not None and abs(r - 1.0) <= 1e-12, f"t=1 ratio {r}"

    def check_torus_wrap():
        t = Torus(2, 1.0)
        d = t.distance(t.element([0.1, 0.9]), t.element([0.9, 0.1]))
        return abs(d - math.sqrt(0.08)) <= 1e-12, f"wrap distance {d}"

    return [("assignment_exact", check_assignment),
            ("w2_triangle", check_w2_triangle),
            ("group_axioms", check_group_axioms),
            ("bi_invariance", check_bi_invariance),
            ("quotient_orbit_invariance", check_quotient_invariance),
            ("bilipschitz_scale", check_bilipschitz),
            ("tower_roundtrip", check_tower_roundtrip),
            ("markov_t1_identity", check_markov_t1),
            ("torus_wraparound", check_torus_wrap)]


def cmd_selftest(seed: int) -> int:
    failures = 0
    for name, check in _selftest_checks(seed):
        try:
            ok, detail = check()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failures += 0 if ok else 1
    return 1 if failures else 0


# -------------------------------------------------------------------- main

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quotmet",
        description="distance tables, embedding towers and inequality checks "
                    "over quotient constructions")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="JSON experiment configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--cap", type=int, default=None,
                       help="override the atom cap")
        p.add_argument("--jobs", type=int, default=None,
                       help=f"parallel sweep cells (default ${JOBS_ENV} or 1)")

    common(sub.add_parser("distance", help="pairwise distance tables"))
    common(sub.add_parser("tower", help="lift-and-embed distortion sweep"))
    common(sub.add_parser("markov", help="Markov type 2 inequality runs"))
    st = sub.add_parser("selftest", help="run the invariant battery")
    st.add_argument("--seed", type=int, default=0)
    return parser


def _resolve_jobs(args) -> int:
    if args.jobs is not None:
        return max(1, args.jobs)
    env = os.environ.get(JOBS_ENV)
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"environment variable {JOBS_ENV} must be an integer")
    return 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return cmd_selftest(args.seed)
        doc = _load_config(args.config)
        seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
        out_dir = Path(args.out)
        if args.command == "distance":
            return cmd_distance({**doc, "seed": seed}, out_dir)
        if args.command == "tower":
            cap = args.cap if args.cap is not None else int(doc.get("cap", 2048))
            return cmd_tower(doc, out_dir, cap, seed, _resolve_jobs(args))
        if args.command == "markov":
            return cmd_markov(doc, out_dir, seed)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
