"""Command-line front end: ``coarsekit gen|verify|report``.

All numbers are written with fixed precision, so identical arguments and seed
give byte-identical output.  ``COARSEKIT_THREADS`` sets the worker count for
per-ball checks.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import random
import sys
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from . import __version__, sl2
from .coarse_maps import (Status, action_properness_profile, extended_kernel, grid_host, neighborhood_retraction,
                          padded_box_host, pullback_kernel, control_envelopes, verify_action_negativity)
from .graphs import (BoxSpace, FiniteGraph, FiniteMetricSpace, GraphError, assemble_box_space, cayley_graph_sl2,
                     random_regular_with_girth, shortest_path_metric, spectral_profile)
from .kernels import Kernel, NotCertifiable, asymptotic_cnd_check, excluded_prefix, is_cnd_projected, properness_profile
from .rep_spectra import (GroupAlgebraElement, first_injective_modulus, kazhdan_projection_decay, random_element,
                          representation_defect, trivial_isolation_gap)
from .tree_embed import verify_embedding_identity


@dataclass(frozen=True)
class RunConfig:
    command: str
    kind: str
    inputs: tuple[str, ...]
    seed: int
    tol: float
    cap: int
    out: str | None
    format: str

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if self.cap < 2:
            raise ValueError(f"cap must be at least 2, got {self.cap}")


def _fixed(obj):
    """Round floats to 12 significant digits, recursively."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x) or math.isnan(x):
            return str(x)
        return float(f"{x:.12g}")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Fraction):
        return [obj.numerator, obj.denominator]
    if isinstance(obj, dict):
        return {str(k): _fixed(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_fixed(v) for v in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _dumps(obj) -> str:
    return json.dumps(_fixed(obj), indent=2, sort_keys=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("COARSEKIT_THREADS", "1")))
    except ValueError:
        return 1


# -- gen -------------------------------------------------------------------------------


def _piece(desc: dict, seed: int) -> FiniteGraph:
    kind = desc["kind"]
    if kind == "cycle":
        return FiniteGraph.cycle(int(desc["n"]))
    if kind == "regular-girth":
        return random_regular_with_girth(int(desc["degree"]), int(desc["size"]), int(desc["girth"]),
                                         int(desc.get("seed", seed)))
    if kind == "cayley-sl2":
        return cayley_graph_sl2(int(desc["mod"]))
    if kind == "petersen":
        return FiniteGraph.petersen()
    raise ValueError(f"unknown piece kind {kind!r}")


def cmd_gen(args, cfg: RunConfig) -> int:
    params: dict = {}
    if cfg.kind == "cycle":
        params = {"n": args.n}
        payload = FiniteGraph.cycle(args.n).to_json()
    elif cfg.kind == "regular-girth":
        params = {"degree": args.degree, "size": args.size, "girth": args.girth}
        payload = random_regular_with_girth(args.degree, args.size, args.girth, cfg.seed).to_json()
    elif cfg.kind == "cayley-sl2":
        if args.mod > cfg.cap:
            raise ValueError(f"modulus {args.mod} exceeds --cap {cfg.cap}")
        params = {"mod": args.mod}
        payload = cayley_graph_sl2(args.mod).to_json()
    elif cfg.kind == "boxspace":
        with open(args.pieces) as fh:
            layout = json.load(fh)
        descs = layout["pieces"] if isinstance(layout, dict) else layout
        spacing = layout.get("spacing") if isinstance(layout, dict) else None
        params = {"pieces": descs, "spacing": spacing}
        payload = assemble_box_space([_piece(d, cfg.seed + i) for i, d in enumerate(descs)], spacing).to_json()
    else:
        raise ValueError(f"unknown generator {cfg.kind!r}")
    _emit(_dumps(payload), cfg.out)
    if cfg.out:
        manifest = {"tool": "coarsekit", "version": __version__, "command": "gen", "kind": cfg.kind,
                    "params": params, "seed": cfg.seed, "output": os.path.basename(cfg.out)}
        _emit(_dumps(manifest), cfg.out + ".manifest.json")
    return 0


# -- verify ----------------------------------------------------------------------------


def _load_graph(path: str) -> FiniteGraph:
    return FiniteGraph.load(path)


def _load_box(path: str) -> BoxSpace:
    with open(path) as fh:
        return BoxSpace.from_json(json.load(fh))


def _suite_tree(args, cfg):
    if cfg.inputs:
        trees = [_load_graph(p) for p in cfg.inputs]
    else:
        trees = [FiniteGraph.random_tree(args.n, cfg.seed)]
    rng = random.Random(cfg.seed)
    checks = []
    for t in trees:
        base = rng.randrange(t.vertex_count)
        try:
            proof = verify_embedding_identity(t, base)
            checks.append({"vertices": t.vertex_count, "basepoint": base, "pairs": proof.pairs_checked, "ok": True})
        except (AssertionError, GraphError) as e:
            checks.append({"vertices": t.vertex_count, "basepoint": base, "ok": False, "error": str(e)})
    return checks


def _suite_girth_cnd(args, cfg):
    if not cfg.inputs:
        raise ValueError("girth-cnd needs --input boxspace.json")
    box = _load_box(cfg.inputs[0])
    kernel = Kernel.from_metric(box.metric)
    try:
        rep = asymptotic_cnd_check(box, kernel, args.radius, tol=cfg.tol, workers=_threads())
    except NotCertifiable as e:
        return [{"ok": False, "status": "NOT_CERTIFIABLE", "radius": args.radius, "failing_piece": e.failing_piece,
                 "reason": e.reason, "girths": [g if g != math.inf else "inf" for g in box.girths]}]
    out = rep.to_json()
    out["ok"] = rep.certified
    return [out]


def _suite_pullback(args, cfg):
    rng = np.random.default_rng(cfg.seed)
    checks = []
    for i in range(args.count):
        n = int(rng.integers(2, 41))
        t = FiniteGraph.random_tree(n, int(rng.integers(1 << 30)))
        target = shortest_path_metric(t)
        m = int(rng.integers(1, 41))
        f = rng.integers(0, n, size=m)
        src = FiniteMetricSpace(np.abs(np.subtract.outer(np.arange(m), np.arange(m))))
        cm = control_envelopes(f.tolist(), src, target)
        v = is_cnd_projected(pullback_kernel(cm, Kernel.from_metric(target)), cfg.tol)
        checks.append({"case": i, "source": m, "target": n, "verdict": v.verdict.value, "max_eig": v.max_eig,
                       "ok": v.is_cnd})
    return checks


def _glem_hosts(seed: int, count: int):
    rng = random.Random(seed)
    for i in range(count):
        sizes = sorted(rng.sample(range(3, 16), 3))
        pieces = [FiniteGraph.cycle(s) if rng.random() < 0.5 else FiniteGraph.random_tree(s, rng.randrange(1 << 30))
                  for s in sizes]
        yield padded_box_host(pieces, seed=seed + i, pendant_length=6, pendants_per_piece=2, handles_per_piece=1)


def _suite_glem(args, cfg):
    checks = []
    for i, sh in enumerate(_glem_hosts(cfg.seed, args.count)):
        rf = neighborhood_retraction(sh.host, args.r_max)
        problems = rf.check_invariants()
        ks = [extended_kernel(sh, rf, r) for r in range(args.r_max + 1)]
        nest = 0
        for s in range(args.r_max + 1):
            for r in range(s + 1, args.r_max + 1):
                if not np.array_equal(ks[r].restrict_to(ks[s].points), ks[s].kernel.values):
                    problems.append(f"k_{r} does not extend k_{s}")
                nest += 1
        checks.append({"host": i, "points": sh.host.size, "nesting_pairs": nest, "problems": problems,
                       "ok": not problems})
    return checks


def _suite_action(args, cfg):
    sh = grid_host(pad=args.R)
    rf = neighborhood_retraction(sh.host, args.R)
    ext = extended_kernel(sh, rf, args.R)
    r_prime = int(math.ceil(sh.coarse_map.rho_plus(args.radius + 2 * args.R)))
    prefix = excluded_prefix(sh.box, r_prime)
    rng = random.Random(cfg.seed)
    eligible = [x for x in ext.points if sh.box.piece_of(ext.images[ext.position[x]])[0] >= prefix]
    sym_fail = neg_fail = done = 0
    worst = -math.inf
    while done < args.count:
        x = rng.choice(eligible)
        gs = _random_config(rng, args.radius)
        ts = [rng.uniform(-1, 1) for _ in gs]
        mean = sum(ts) / len(ts)
        ts = [t - mean for t in ts]
        res = verify_action_negativity(sh, ext, x, gs, ts, prefix, tol=cfg.tol)
        if res.status is Status.NOT_APPLICABLE:
            continue
        done += 1
        worst = max(worst, res.value)
        neg_fail += res.status is Status.VIOLATED
        for g in gs:
            y = sh.patch.translate(x, g)
            if ext.value(x, y) != ext.value(y, x):
                sym_fail += 1
    prof = action_properness_profile(sh, ext, args.max_length, prefix)
    return [
        {"check": "symmetry", "configurations": done, "failures": sym_fail, "ok": sym_fail == 0},
        {"check": "negativity", "configurations": done, "max_value": worst, "failures": neg_fail, "ok": neg_fail == 0},
        {"check": "properness_l_minus_R", "ok": prof.dominates_r, "profile": prof.to_json()},
        {"check": "properness_l_minus_2R", "ok": prof.dominates_2r},
    ]


def _random_config(rng: random.Random, radius: int) -> list[tuple[int, int]]:
    """Between 2 and 6 translations inside the l1 ball of radius floor(radius/2), so diameter <= radius."""
    h = radius // 2
    out = []
    for _ in range(rng.randint(2, 6)):
        a = rng.randint(-h, h)
        rest = h - abs(a)
        out.append((a, rng.randint(-rest, rest)))
    return out


def _suite_rep(args, cfg):
    moduli = list(range(2, min(args.max_mod, cfg.cap) + 1))
    gap = trivial_isolation_gap(moduli)
    rng = random.Random(cfg.seed)
    checks = [{"check": "gap", "ok": gap.epsilon > 0, "table": gap.to_json()}]
    defects = 0
    for _ in range(args.count):
        x, y = random_element(rng), random_element(rng)
        defects += representation_defect(x, y, min(7, moduli[-1])) != 0
    checks.append({"check": "representation", "elements": args.count, "failures": defects, "ok": defects == 0})
    ball = sorted(sl2.word_ball(3))
    needed = []
    for _ in range(args.count):
        x = random_element(rng)
        xi = {g: Fraction(rng.randint(-3, 3) or 1) for g in rng.sample(ball, 3)}
        res = first_injective_modulus(x, xi, cap=cfg.cap)
        needed.append(None if res is None else res.n)
    checks.append({"check": "pushforward", "first_moduli": needed, "ok": all(n is not None for n in needed)})
    return checks


SUITES = {"tree": _suite_tree, "girth-cnd": _suite_girth_cnd, "pullback": _suite_pullback, "glem": _suite_glem,
          "action": _suite_action, "rep": _suite_rep}


def cmd_verify(args, cfg: RunConfig) -> int:
    checks = SUITES[cfg.kind](args, cfg)
    failures = [c for c in checks if not c["ok"]]
    report = {"suite": cfg.kind, "config": asdict(cfg), "passed": not failures, "checks": checks,
              "failures": failures}
    if cfg.format == "csv":
        _emit(_csv(["index", "ok"], [(i, str(c["ok"]).lower()) for i, c in enumerate(checks)]), cfg.out)
    else:
        _emit(_dumps(report), cfg.out)
    return 0 if not failures else 1


# -- report ----------------------------------------------------------------------------


def _read_optional(path: str | None) -> str:
    if not path:
        return ""
    with open(path) as fh:
        return fh.read()


def cmd_report(args, cfg: RunConfig) -> int:
    kind = cfg.kind
    if kind == "decay":
        table = kazhdan_projection_decay(args.mod, args.k_max)
        header = ["k", "norm", "bound"]
        rows = [(k, v, table.bound(k)) for k, v in enumerate(table.norms)]
        data = table.to_json()
    elif kind == "profile":
        text = _read_optional(cfg.inputs[0] if cfg.inputs else None)
        header = ["r", "upper", "lower"]
        rows, data = [], {"radii": [], "upper": [], "lower": []}
        if text.strip():
            g = FiniteGraph.from_json(json.loads(text)) if text.lstrip().startswith("{") else FiniteGraph.from_edge_list(text)
            m = shortest_path_metric(g)
            prof = properness_profile(Kernel.from_metric(m), m)
            rows = [(r, float(u), float(lo)) for r, u, lo in zip(prof.radii, prof.upper, prof.lower)]
            data = prof.to_json()
    elif kind == "spectrum":
        text = _read_optional(cfg.inputs[0] if cfg.inputs else None)
        header = ["bin_low", "bin_high", "count"]
        rows, data = [], {"bins": []}
        if text.strip():
            g = FiniteGraph.from_json(json.loads(text)) if text.lstrip().startswith("{") else FiniteGraph.from_edge_list(text)
            ev = spectral_profile(g).adjacency_eigenvalues
            d = max(g.max_degree, 1)
            counts, edges = np.histogram(ev, bins=args.bins, range=(-d, d))
            rows = [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(len(counts))]
            data = {"bins": [list(r) for r in rows]}
    elif kind == "gap":
        gap = trivial_isolation_gap(range(2, min(args.max_mod, cfg.cap) + 1))
        header = ["n", "lambda2", "lambda_min", "lambda_star"]
        rows = [(n, gap.lambda2[n], gap.lambda_min[n], gap.lambda_star(n)) for n in gap.moduli]
        data = gap.to_json()
    else:
        raise ValueError(f"unknown report {kind!r}")
    if cfg.format == "csv":
        _emit(_csv(header, rows), cfg.out)
    else:
        _emit(_dumps({"report": kind, "seed": cfg.seed, "data": data}), cfg.out)
    return 0


# -- argument parsing ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--cap", type=int, default=13)
    common.add_argument("--out")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--input", action="append", default=[], dest="inputs")

    parser = argparse.ArgumentParser(prog="coarsekit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"coarsekit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="generate graphs and box spaces")
    gen.add_argument("kind", choices=("cycle", "regular-girth", "cayley-sl2", "boxspace"))
    gen.add_argument("--n", type=int, default=8)
    gen.add_argument("--degree", type=int, default=3)
    gen.add_argument("--size", type=int, default=10)
    gen.add_argument("--girth", type=int, default=5)
    gen.add_argument("--mod", type=int, default=5)
    gen.add_argument("--pieces", help="JSON list of piece descriptors, or {pieces, spacing}")

    ver = sub.add_parser("verify", parents=[common], help="run a verification suite")
    ver.add_argument("kind", choices=tuple(SUITES))
    ver.add_argument("--n", type=int, default=200, help="random tree size")
    ver.add_argument("--radius", type=int, default=2)
    ver.add_argument("--count", type=int, default=10)
    ver.add_argument("--r-max", type=int, default=5)
    ver.add_argument("--R", type=int, default=2)
    ver.add_argument("--max-length", type=int, default=20)
    ver.add_argument("--max-mod", type=int, default=13)

    rep = sub.add_parser("report", parents=[common], help="emit plot data")
    rep.add_argument("kind", choices=("decay", "profile", "spectrum", "gap"))
    rep.add_argument("--mod", type=int, default=5)
    rep.add_argument("--k-max", type=int, default=30)
    rep.add_argument("--bins", type=int, default=20)
    rep.add_argument("--max-mod", type=int, default=13)
    return parser


COMMANDS = {"gen": cmd_gen, "verify": cmd_verify, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(args.command, args.kind, tuple(args.inputs), args.seed, args.tol, args.cap, args.out,
                        args.format)
        return COMMANDS[args.command](args, cfg)
    except (ValueError, GraphError, OSError) as e:
        print(f"coarsekit: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
