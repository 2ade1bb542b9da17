"""Acceptance criteria, one test each, at the agreed tolerances.

Each test records a PASS/FAIL line shown in the pytest terminal summary.
"""

import math
import time
from fractions import Fraction

import numpy as np
from scipy.stats import ks_2samp

from beta_adic._kernels import OrbitKernel
from beta_adic.adic import predecessor, successor, successor_index
from beta_adic.beta_core import (
    BetaParam,
    ParryAutomaton,
    cylinders,
    full_cylinder_cover,
    parry_density,
    sample_uniform_words,
    word_float,
)
from beta_adic.cli import run_command
from beta_adic.cocycle import block_count_bounds, block_occupation, first_digit
from beta_adic.errors import MaximalPoint
from beta_adic.experiments import ExperimentConfig, run_experiment
from beta_adic.spectral import build_ulam, invariant_density

B = BetaParam(Fraction(5, 2))
AUT = ParryAutomaton(B)
D1 = first_digit(B)


def test_01_successor_exactness(criterion):
    start = time.perf_counter()
    L = 8
    ws = list(AUT.words(L))
    order = sorted(ws, key=lambda w: w[::-1])
    nxt = {a: b for a, b in zip(order, order[1:])}
    hits = inv = total = 0
    for w in ws:
        if successor_index(B, w) >= L:
            continue  # successor leaves the rank-8 block
        total += 1
        s = successor(B, w)
        hits += s == nxt[w]
        inv += predecessor(B, s) == w
    elapsed = time.perf_counter() - start
    ok = hits == inv == total == len(ws) - 1 and elapsed < 5
    criterion("1 successor exactness", ok, f"{hits}/{total} successor, {inv}/{total} inverse, {elapsed:.2f}s")


def test_02_measure_preservation(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    words = sample_uniform_words(B, rng, 10**5, 30)
    pushed, maximal = [], 0
    for w in words:
        try:
            pushed.append(word_float(B, successor(B, w)))
        except MaximalPoint:
            maximal += 1
    fresh = np.random.default_rng(3).random(10**5)
    ks = ks_2samp(np.array(pushed), fresh).statistic
    elapsed = time.perf_counter() - start
    criterion(
        "2 measure preservation",
        ks < 0.01 and elapsed < 30,
        f"KS={ks:.4f}, maximal={maximal}, {elapsed:.1f}s",
    )


def test_03_full_cylinders(criterion):
    bad = 0
    full = 0
    for k in range(1, 7):
        for c in cylinders(AUT, k):
            if c.is_full:
                full += 1
                bad += (c.b - c.a) != B.beta ** -k
    cover = full_cylinder_cover(B, 1, AUT)
    ok = bad == 0 and cover.uncovered == Fraction(1, 25)
    criterion("3 full cylinders", ok, f"{full} full cylinders, {bad} wrong measure, uncovered={cover.uncovered}")


def test_04_invariant_density(criterion):
    start = time.perf_counter()
    est = invariant_density(build_ulam(B, 4096))
    fine = (np.arange(4096 * 16) + 0.5) / (4096 * 16)
    oracle = parry_density(B, fine).reshape(4096, 16).mean(axis=1)
    l1 = float(np.abs(est.values - oracle).mean())
    lo, hi = 1 - 1 / 2.5, 1 / (1 - 1 / 2.5)
    elapsed = time.perf_counter() - start
    ok = est.values.min() >= lo - 0.02 and est.values.max() <= hi + 0.02 and l1 < 0.01 and elapsed < 60
    criterion(
        "4 invariant density",
        ok,
        f"range=[{est.values.min():.4f}, {est.values.max():.4f}], L1={l1:.2e}, {elapsed:.1f}s",
    )


def test_05_block_estimate(criterion):
    start = time.perf_counter()
    n, r = 10, 100
    kernel = OrbitKernel(D1)
    words = sample_uniform_words(B, np.random.default_rng(5), 200, 40)
    ratios = np.array([kernel.blocks(w, n, r)[0] / (2.5**n * r) for w in words])
    good = float(np.mean((ratios >= 0.9) & (ratios <= 1.1)))
    elapsed = time.perf_counter() - start
    criterion(
        "5 block estimate",
        good >= 0.9 and elapsed < 300,
        f"{good:.1%} of ratios in [0.9, 1.1], median={np.median(ratios):.3f}, {elapsed:.1f}s",
    )


def test_06_sandwich(criterion):
    rng = np.random.default_rng(6)
    kernel = OrbitKernel(D1)
    inside = literal = 0
    instances = 50
    for _ in range(instances):
        w = sample_uniform_words(B, rng, 1, 30)[0]
        n, r = int(rng.integers(1, 9)), int(rng.integers(1, 11))
        res = block_occupation(D1, w, n, r, automaton=AUT)
        inside += res.lower <= res.count <= res.upper
        # the same count truncated at K_n^r steps, reported for reference
        k_r, _ = kernel.blocks(w, n, r)
        counts, _ = kernel.occupation(w, 0.0, res_window(), np.array([k_r], dtype=np.int64))
        literal += res.lower <= int(counts[0]) <= res.upper
    criterion(
        "6 sandwich",
        inside == instances,
        f"{inside}/{instances} within bounds over r whole blocks; {literal}/{instances} when stopped at K_n^r steps",
    )


def res_window():
    from beta_adic.cocycle import default_window

    return default_window(D1)


def test_07_clt(criterion):
    rep = run_experiment(ExperimentConfig(kind="clt", n=10**4, trials=10**4, seed=7))
    ks = rep.summary["ks_normal"]
    criterion("7 CLT", ks < 0.03, f"KS={ks:.4f}, sigma2={rep.summary['sigma2']:.5f}")


def test_08_llt(criterion):
    start = time.perf_counter()
    rep = run_experiment(ExperimentConfig(kind="llt", n=16))
    s = rep.summary
    elapsed = time.perf_counter() - start
    ok = s["max_rel_error"] <= 0.20 and s["sup_spread"] <= 1.25 and elapsed < 600
    criterion(
        "8 LLT",
        ok,
        f"max rel error {s['max_rel_error']:.3f} at |t|<=2, C={s['uniform_bound_C']:.3f}, "
        f"sup spread {s['sup_spread']:.3f} over n=10..16, {s['leaves']} leaves, {elapsed:.0f}s",
    )


def test_09a_lemma_final(criterion):
    rep = run_experiment(ExperimentConfig(kind="lemma-final", n=10**5, trials=500, seed=9, epsilon=0.15, delta=3.0))
    s = rep.summary
    criterion(
        "9a LEMMA_FINAL",
        s["pass_fraction"] >= 0.85,
        f"pass fraction {s['pass_fraction']:.3f} ({s['passed']}/{s['eligible']}), l_n={s['l_n']}",
    )


def test_09b_distributional_stability(criterion):
    rep = run_experiment(ExperimentConfig(kind="ds", n=10**5, trials=2000, seed=9))
    s = rep.summary
    best = min(s["ks_exp_half_chi2"], s["ks_exp_chi2"])
    criterion(
        "9b DS",
        best < 0.10,
        f"KS exp(-chi2/2)={s['ks_exp_half_chi2']:.4f}, KS exp(-chi2)={s['ks_exp_chi2']:.4f}, "
        f"median={s['median']:.3f}",
    )


def test_10_bounded_rational_ergodicity(criterion):
    rep = run_experiment(
        ExperimentConfig(kind="bre", n=10**6, trials=1000, seed=10, schedule=(10**3, 10**4, 10**5, 10**6))
    )
    s = rep.summary
    ok = s["max_ratio"] < 20 and abs(s["slope"]) <= 0.05
    ratios = ", ".join(f"{v:.2f}" for v in s["sup_mean_ratio"])
    criterion("10 BRE", ok, f"sup/mean ratios [{ratios}], slope={s['slope']:.4f}")


def test_11_determinism(criterion, tmp_path, monkeypatch):
    runs = []
    for workers in ("1", "4"):
        monkeypatch.setenv("BETA_ADIC_THREADS", workers)
        out = tmp_path / workers
        snapshot = {}
        for kind, extra in [("ds", ["--n", "20000", "--trials", "200"]), ("clt", ["--n", "2000", "--trials", "600"])]:
            assert run_command(["experiment", kind, "--seed", "11", "--output", str(out), *extra]) == 0
        for p in sorted(out.iterdir()):
            snapshot[p.name] = p.read_bytes()
        runs.append(snapshot)
    kinds = sorted({name.rsplit(".", 1)[1] for name in runs[0]})
    ok = runs[0] == runs[1] and kinds == ["csv", "json", "svg"]
    criterion("11 determinism", ok, f"{len(runs[0])} files ({', '.join(kinds)}) identical across 1 and 4 workers")
