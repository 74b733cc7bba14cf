"""Acceptance suite: one PASS/FAIL line per criterion, printed at the end of the run.

Tolerances and time limits are fixed here and are never loosened to make a
criterion pass.  A criterion that fails is reported as FAIL with its evidence.
"""

import json
import math
import random
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from coarsekit import sl2
from coarsekit.cli import main
from coarsekit.coarse_maps import (Status, action_properness_profile, control_envelopes, extended_kernel, grid_host,
                                   neighborhood_retraction, padded_box_host, pullback_kernel,
                                   verify_action_negativity)
from coarsekit.graphs import FiniteGraph, FiniteMetricSpace, girth, random_regular_with_girth, shortest_path_metric
from coarsekit.kernels import (Kernel, certify_cnd, excluded_prefix, is_cnd_projected, is_cnd_sampled,
                               is_cnd_schoenberg)
from coarsekit.rep_spectra import (PermutationRep, first_injective_modulus, kazhdan_projection_decay, random_element,
                                   representation_defect, sl2_quotient, trivial_isolation_gap)
from coarsekit.tree_embed import ball_cnd_certificate, ball_kernel, verify_embedding_identity

from conftest import ACCEPTANCE_RESULTS

DATA = Path(__file__).parent / "data"


def record(label, ok, elapsed, limit, detail):
    timed_ok = limit is None or elapsed < limit
    verdict = "PASS" if ok and timed_ok else "FAIL"
    budget = "" if limit is None else f" / {limit:g}s"
    line = f"[{verdict}] {label}: {detail} ({elapsed:.2f}s{budget})"
    ACCEPTANCE_RESULTS.append(line)
    print(line)
    return ok and timed_ok


def test_criterion_01_tree_identity():
    rng = random.Random(1)
    start = time.perf_counter()
    pairs = 0
    largest = 0
    for i in range(50):
        n = 500 if i == 0 else rng.randint(1, 500)
        t = FiniteGraph.random_tree(n, rng.randrange(1 << 30))
        proof = verify_embedding_identity(t, rng.randrange(n))
        pairs += proof.pairs_checked
        largest = max(largest, n)
    elapsed = time.perf_counter() - start
    assert record("1 tree identity", True, elapsed, 10,
                  f"50 trees up to {largest} vertices, {pairs} pairs exact")


def test_criterion_02_girth_ball_cnd():
    start = time.perf_counter()
    sizes = [100, 250, 500, 1000, 2000]
    balls = 0
    worst = -math.inf
    failures = []
    for seed, n in enumerate(sizes):
        g = random_regular_with_girth(3, n, 8, seed=seed)
        assert girth(g) >= 8
        for v in range(n):
            cert = ball_cnd_certificate(g, v, 3)
            _, k = ball_kernel(g, v, 3)
            proj = is_cnd_projected(k)
            worst = max(worst, proj.max_eig)
            balls += 1
            if not (cert.is_cnd and proj.is_cnd and proj.max_eig <= 1e-9):
                failures.append((n, v))
    elapsed = time.perf_counter() - start
    ok = not failures and worst <= 1e-9
    assert record("2 girth-ball CND", ok, elapsed, 60,
                  f"{len(sizes)} cubic graphs of girth >= 8, {balls} radius-3 balls, "
                  f"max projected eigenvalue {worst:.3e}, failures {failures[:3]}")


def test_criterion_03_negative_control():
    start = time.perf_counter()
    k = Kernel.from_metric(shortest_path_metric(FiniteGraph.complete_bipartite(2, 3)))
    v = certify_cnd(k)
    value = k.exact_quadratic_form(v.exact_witness) if v.exact_witness else Fraction(0)
    tnorm = sum(x * x for x in v.exact_witness) if v.exact_witness else Fraction(1)
    normalized = float(value / tnorm)
    elapsed = time.perf_counter() - start
    ok = not v.is_cnd and sum(v.exact_witness) == 0 and normalized > 1e-6
    assert record("3 K_{2,3} negative control", ok, elapsed, 1,
                  f"verdict {v.verdict.value}, witness t^T K t / |t|^2 = {normalized:.6g}")


def _random_kernel(rng: np.random.Generator) -> Kernel:
    n = int(rng.integers(2, 13))
    kind = int(rng.integers(0, 4))
    if kind == 0:
        a = rng.uniform(0, 5, (n, n))
        a = a + a.T
    elif kind == 1:
        pts = rng.standard_normal((n, int(rng.integers(1, 4))))
        a = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    elif kind == 2:
        a = shortest_path_metric(FiniteGraph.random_tree(n, int(rng.integers(1 << 30)))).dist.astype(float)
    else:
        a = rng.integers(0, 6, (n, n)).astype(float)
        a = a + a.T
    np.fill_diagonal(a, 0.0)
    return Kernel(a)


def test_criterion_04_checker_equivalence():
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    disagreements, mc_false_alarm = [], []
    cnd_count = 0
    for i in range(1000):
        k = _random_kernel(rng)
        proj = is_cnd_projected(k)
        scho = is_cnd_schoenberg(k)
        mc = is_cnd_sampled(k, samples=10_000, seed=i)
        cnd_count += proj.is_cnd
        if proj.verdict is not scho.verdict:
            disagreements.append(i)
        if not mc.is_cnd and proj.is_cnd:
            mc_false_alarm.append(i)
    elapsed = time.perf_counter() - start
    ok = not disagreements and not mc_false_alarm
    assert record("4 checker oracle equivalence", ok, elapsed, 60,
                  f"1000 kernels ({cnd_count} CND), projected/Schoenberg disagreements {len(disagreements)}, "
                  f"Monte Carlo contradictions {len(mc_false_alarm)}")


def test_criterion_05_pullback_preservation():
    rng = np.random.default_rng(5)
    start = time.perf_counter()
    bad = []
    for i in range(200):
        n, m = int(rng.integers(2, 41)), int(rng.integers(1, 41))
        target = shortest_path_metric(FiniteGraph.random_tree(n, int(rng.integers(1 << 30))))
        if i % 2:
            pts = rng.standard_normal((m, 2))
            source = FiniteMetricSpace(np.abs(pts[:, None] - pts[None]).sum(-1))
        else:
            source = shortest_path_metric(FiniteGraph.random_tree(m, int(rng.integers(1 << 30))))
        base = Kernel.from_metric(target)
        assert is_cnd_projected(base).is_cnd
        f = control_envelopes(rng.integers(0, n, m).tolist(), source, target)
        if not is_cnd_projected(pullback_kernel(f, base)).is_cnd:
            bad.append(i)
    elapsed = time.perf_counter() - start
    assert record("5 pullback preservation", not bad, elapsed, 30, f"200 pairs, non-CND pullbacks {bad}")


def test_criterion_06_retraction_coherence():
    rng = random.Random(6)
    start = time.perf_counter()
    problems = []
    nest = 0
    points = 0
    for i in range(10):
        sizes = sorted(rng.sample(range(3, 16), 3))
        pieces = [FiniteGraph.cycle(s) if rng.random() < 0.5 else FiniteGraph.random_tree(s, rng.randrange(1 << 30))
                  for s in sizes]
        sh = padded_box_host(pieces, seed=i, pendant_length=6, pendants_per_piece=2, handles_per_piece=1)
        rf = neighborhood_retraction(sh.host, 5)
        problems += rf.check_invariants()
        points += sh.host.size
        for x in range(sh.host.size):
            for r in range(1, 6):
                if rf.assigned_at[x] <= r:
                    p = rf.p(r, x)
                    if sh.host.metric.dist[p, x] > r:
                        problems.append(f"host {i}: d(p_{r}(x), x) > {r} at {x}")
        ks = [extended_kernel(sh, rf, r) for r in range(6)]
        for s in range(6):
            for r in range(s + 1, 6):
                nest += 1
                if not np.array_equal(ks[r].restrict_to(ks[s].points), ks[s].kernel.values):
                    problems.append(f"host {i}: k_{r} restricted to N_{s} differs from k_{s}")
    elapsed = time.perf_counter() - start
    assert record("6 retraction/extension coherence", not problems, elapsed, 10,
                  f"10 hosts ({points} points), {nest} nesting pairs, problems {problems[:3]}")


def _config(rng, radius):
    h = radius // 2
    out = []
    for _ in range(rng.randint(2, 6)):
        a = rng.randint(-h, h)
        rest = h - abs(a)
        out.append((a, rng.randint(-rest, rest)))
    return out


@pytest.fixture(scope="module")
def action_setup():
    start = time.perf_counter()
    big_r, r = 2, 2
    sh = grid_host(pad=big_r)
    rf = neighborhood_retraction(sh.host, big_r)
    ext = extended_kernel(sh, rf, big_r)
    prefix = excluded_prefix(sh.box, int(math.ceil(sh.coarse_map.rho_plus(r + 2 * big_r))))
    return sh, ext, prefix, r, time.perf_counter() - start


def test_criterion_07_action_checks(action_setup):
    sh, ext, prefix, r, setup_time = action_setup
    start = time.perf_counter()
    rng = random.Random(7)
    eligible = [x for x in ext.points if sh.box.piece_of(ext.images[ext.position[x]])[0] >= prefix]
    sym_fail = neg_fail = done = 0
    worst = -math.inf
    while done < 1000:
        x = rng.choice(eligible)
        gs = _config(rng, r)
        ts = [rng.uniform(-1, 1) for _ in gs]
        mean = sum(ts) / len(ts)
        ts = [t - mean for t in ts]
        res = verify_action_negativity(sh, ext, x, gs, ts, prefix, tol=1e-9)
        if res.status is Status.NOT_APPLICABLE:
            continue
        done += 1
        worst = max(worst, res.value)
        neg_fail += res.status is Status.VIOLATED
        for g in gs:
            y = sh.patch.translate(x, g)
            if ext.value(x, y) != ext.value(y, x):
                sym_fail += 1
    elapsed = time.perf_counter() - start + setup_time
    sym_ok = record("7a action symmetry", sym_fail == 0, elapsed, 60,
                    f"{done} configurations beyond prefix {prefix}, asymmetric pairs {sym_fail}")
    neg_ok = record("7b action negativity", neg_fail == 0 and worst <= 1e-9, elapsed, 60,
                    f"{done} configurations, max quadratic form {worst:.3e}, violations {neg_fail}")
    assert sym_ok and neg_ok


def test_criterion_07c_action_properness(action_setup):
    sh, ext, prefix, r, setup_time = action_setup
    start = time.perf_counter()
    prof = action_properness_profile(sh, ext, 20, prefix)
    elapsed = time.perf_counter() - start + setup_time
    detail = (f"min k(x, xg) vs rho_-(l - R) for l <= 20, first violation (x, g, value, bound) = {prof.witness_r}; "
              f"rho_-(l - 2R) dominated: {prof.dominates_2r}")
    assert record("7c action properness against rho_-(l - R)", prof.dominates_r, elapsed, 60, detail)


def test_criterion_08_congruence_suite():
    rng = random.Random(8)
    start = time.perf_counter()
    defects, star_err = 0, 0.0
    for i in range(100):
        x, y = random_element(rng), random_element(rng)
        n = 2 + i % 6
        defects += representation_defect(x, y, n) != 0
        rep = PermutationRep(sl2_quotient(n))
        star_err = max(star_err, float(np.abs(rep.matrix(x.star()).toarray() - rep.matrix(x).toarray().T).max()))
    ball = sorted(sl2.word_ball(3))
    needed = []
    for _ in range(100):
        x = random_element(rng, radius=3)
        xi = {g: Fraction(rng.randint(-3, 3) or 1, rng.randint(1, 3)) for g in rng.sample(ball, 3)}
        res = first_injective_modulus(x, xi, cap=13)
        needed.append(None if res is None else res.n)
    elapsed = time.perf_counter() - start
    ok = defects == 0 and star_err <= 1e-9 and all(n is not None and n <= 13 for n in needed)
    largest = max((n for n in needed if n is not None), default=None)
    assert record("8 congruence suite", ok, elapsed, 120,
                  f"representation defects {defects}, C* identity error {star_err:.1e}, "
                  f"pushforward moduli found for {sum(n is not None for n in needed)}/100 (largest {largest})")


def test_criterion_09_isolation_and_decay():
    start = time.perf_counter()
    gap = trivial_isolation_gap(range(2, 14))
    truth_path = DATA / "gap_ground_truth.json"
    if not truth_path.exists():
        truth = {"generators": "T, T^-1, S, S^-1", "epsilon": gap.epsilon,
                 "moduli": {str(n): {"lambda2": gap.lambda2[n], "lambda_min": gap.lambda_min[n]}
                            for n in gap.moduli}}
        truth_path.write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
    truth = json.loads(truth_path.read_text())
    drift = max(max(abs(gap.lambda2[n] - truth["moduli"][str(n)]["lambda2"]),
                    abs(gap.lambda_min[n] - truth["moduli"][str(n)]["lambda_min"])) for n in gap.moduli)
    excess = max(kazhdan_projection_decay(n, 30).max_excess() for n in range(2, 8))
    elapsed = time.perf_counter() - start
    ok = gap.epsilon > 0 and excess <= 1e-8 and drift <= 1e-9
    assert record("9 isolation and Kazhdan decay", ok, elapsed, 120,
                  f"epsilon {gap.epsilon:.6f}, max ||M^k - P|| - lambda*^k over n <= 7, k <= 30 is {excess:.2e}, "
                  f"drift from ground truth {drift:.1e}")


DETERMINISM_RUNS = [
    ["gen", "regular-girth", "--degree", "3", "--size", "60", "--girth", "6"],
    ["gen", "cayley-sl2", "--mod", "5"],
    ["verify", "tree", "--n", "80"],
    ["verify", "pullback", "--count", "20"],
    ["verify", "glem", "--count", "3"],
    ["verify", "action", "--count", "200"],
    ["verify", "rep", "--count", "10", "--max-mod", "7"],
    ["report", "decay", "--mod", "5", "--format", "csv"],
    ["report", "gap", "--max-mod", "8"],
]


def test_criterion_10_determinism(tmp_path):
    start = time.perf_counter()
    mismatched = []
    pieces = tmp_path / "pieces.json"
    pieces.write_text(json.dumps([{"kind": "cycle", "n": 4}, {"kind": "regular-girth", "degree": 3,
                                                                "size": 40, "girth": 6}]))
    runs = DETERMINISM_RUNS + [["gen", "boxspace", "--pieces", str(pieces)]]
    for i, argv in enumerate(runs):
        outputs = []
        out = tmp_path / f"run{i}.out"
        for _ in range(2):
            main(argv + ["--seed", "10", "--out", str(out)])
            outputs.append(out.read_bytes())
        if outputs[0] != outputs[1] or not outputs[0]:
            mismatched.append(" ".join(argv[:2]))
    box = tmp_path / "box.json"
    main(["gen", "boxspace", "--pieces", str(pieces), "--seed", "10", "--out", str(box)])
    girth_out = tmp_path / "girth.json"
    girth_runs = []
    for _ in range(2):
        main(["verify", "girth-cnd", "--input", str(box), "--radius", "1", "--out", str(girth_out)])
        girth_runs.append(girth_out.read_bytes())
    if girth_runs[0] != girth_runs[1]:
        mismatched.append("verify girth-cnd")
    elapsed = time.perf_counter() - start
    assert record("10 determinism", not mismatched, elapsed, None,
                  f"{len(runs) + 1} commands run twice with fixed seeds, differing outputs {mismatched}")
