"""Seeded Monte Carlo experiments on random walk adic orbits, with persisted reports.

Every report is a pure function of its config.  Trials draw from their own
stream ``rng_stream(seed, trial)`` and results are reassembled in trial order,
so the worker count never changes the output.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from ._kernels import OrbitKernel
from .beta_core import BetaParam, format_beta, parse_beta, sample_uniform_words
from .cocycle import INTEGERS, Observable, Window, birkhoff_forward, observable_from_spec
from .errors import DomainError, FeasibilityExceeded, MaximalPoint
from .spectral import birkhoff_samples, llt_profile, spectral_sigma2

CLT, DS, LEMMA_FINAL, BRE, LLT = "CLT", "DS", "LEMMA_FINAL", "BRE", "LLT"
KINDS = (CLT, DS, LEMMA_FINAL, BRE, LLT)
PASS, WARN, FAIL, DEGENERATE = "PASS", "WARN", "FAIL", "DEGENERATE"

THREADS_ENV = "BETA_ADIC_THREADS"
#: total tau-steps (or digits) an experiment may request
MAX_WORK = 5 * 10**10
#: trials sharing one random stream in CLT runs
CLT_BLOCK = 250
#: resamples allowed per trial before giving up
MAX_RESAMPLES = 100
#: below this the asymptotic variance is treated as zero
SIGMA2_FLOOR = 1e-8

# acceptance thresholds
CLT_KS = 0.03
DS_KS = 0.10
LEMMA_PASS = 0.85
BRE_RATIO = 20.0
BRE_SLOPE = 0.05
LLT_REL = 0.20
LLT_SYM = 0.25
LLT_SPREAD = 1.25

DEFAULT_N = {CLT: 10**4, DS: 10**5, LEMMA_FINAL: 10**5, BRE: 10**6, LLT: 16}
DEFAULT_TRIALS = {CLT: 10**4, DS: 2000, LEMMA_FINAL: 500, BRE: 1000, LLT: 1}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    beta: str = "5/2"
    observable: object = "d1"
    n: int | None = None
    trials: int | None = None
    seed: int = 0
    depth: int = 40
    window: object = None
    epsilon: float = 0.15
    delta: float = 3.0
    schedule: tuple[int, ...] | None = None
    targets: tuple[float, ...] = (-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0)
    point: str = "1,0,1,1"
    bins: int = 4096
    workers: int | None = None
    output: str | None = None

    def __post_init__(self):
        kind = str(self.kind).upper().replace("-", "_")
        if kind not in KINDS:
            raise DomainError(f"unknown experiment kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "beta", format_beta(parse_beta(self.beta)))
        if self.n is None:
            object.__setattr__(self, "n", DEFAULT_N[kind])
        if self.trials is None:
            object.__setattr__(self, "trials", DEFAULT_TRIALS[kind])
        if self.schedule is not None:
            object.__setattr__(self, "schedule", tuple(int(v) for v in self.schedule))
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))
        if int(self.n) < 1 or int(self.trials) < 1:
            raise DomainError("n and trials must be at least 1")
        if self.depth < 1:
            raise DomainError("depth must be at least 1")

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        d.pop("output")
        for k in ("schedule", "targets"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d

    @property
    def stem(self) -> str:
        return f"{self.kind.lower()}_{self.beta.replace('/', '-')}_{self.n}_{self.seed}"


@dataclass
class ExperimentReport:
    kind: str
    inputs: dict
    summary: dict
    verdict: str
    columns: tuple[str, ...] = ()
    rows: list = field(default_factory=list)

    def to_json(self) -> str:
        payload = {"kind": self.kind, "inputs": self.inputs, "summary": self.summary, "verdict": self.verdict}
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


# -- statistics ---------------------------------------------------------------


def cdf_exp_half_chi2(v):
    """``P(exp(-Z^2/2) <= v) = 2(1 - Phi(sqrt(-2 ln v)))`` for a standard normal Z."""
    arr = np.asarray(v, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise DomainError("argument must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        out = np.where(arr > 0, 2 * norm.sf(np.sqrt(-2 * np.log(np.where(arr > 0, arr, 1.0)))), 0.0)
    return float(out) if out.ndim == 0 else out


def cdf_exp_chi2(v):
    """``P(exp(-Z^2) <= v) = 2(1 - Phi(sqrt(-ln v)))``."""
    arr = np.asarray(v, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise DomainError("argument must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        out = np.where(arr > 0, 2 * norm.sf(np.sqrt(-np.log(np.where(arr > 0, arr, 1.0)))), 0.0)
    return float(out) if out.ndim == 0 else out


def _clip_unit(cdf: Callable) -> Callable:
    return lambda x: cdf(np.clip(x, 0.0, 1.0))


def ks_statistic(sample: Sequence[float], cdf: Callable | Sequence[float]) -> float:
    """Sup distance between the empirical CDF and ``cdf``.

    ``cdf`` may be a callable (one-sample) or a second sample (two-sample).
    """
    x = np.sort(np.asarray(sample, dtype=float))
    if x.size == 0:
        raise DomainError("empty sample")
    if not callable(cdf):
        y = np.sort(np.asarray(cdf, dtype=float))
        grid = np.concatenate([x, y])
        fx = np.searchsorted(x, grid, side="right") / x.size
        fy = np.searchsorted(y, grid, side="right") / y.size
        return float(np.max(np.abs(fx - fy)))
    f = np.asarray(cdf(x), dtype=float)
    # empirical CDF jumps at each distinct value
    upper = np.searchsorted(x, x, side="right") / x.size
    lower = np.searchsorted(x, x, side="left") / x.size
    return float(max(np.max(upper - f), np.max(f - lower)))


def rng_stream(seed: int, trial: int) -> np.random.Generator:
    """Independent generator for trial ``trial`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(trial),))))


# -- helpers ------------------------------------------------------------------


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = requested or os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise DomainError(f"{THREADS_ENV} must be an integer, got {cap!r}") from exc
    return max(1, n)


def _map(fn, items, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


@lru_cache(maxsize=32)
def _context(beta: str, obs_key: str, bins: int):
    b = BetaParam(Fraction(beta))
    obs = observable_from_spec(b, json.loads(obs_key))
    s2 = spectral_sigma2(obs, bins=bins).sigma2
    return b, obs, s2


def _setup(cfg: ExperimentConfig):
    return _context(cfg.beta, json.dumps(cfg.observable, sort_keys=True), cfg.bins)


def _window(cfg: ExperimentConfig, obs: Observable) -> Window:
    return parse_window(cfg.window, obs)


def parse_window(w, obs: Observable) -> Window:
    """``None`` (default window), a point ``y`` or ``[y]``, or an interval ``[lo, hi]``."""
    if w is None:
        return Window.point(0) if obs.group == INTEGERS else Window.interval(0, 1)
    if isinstance(w, (list, tuple)):
        if len(w) == 1:
            return Window.point(Fraction(str(w[0])))
        if len(w) == 2:
            return Window.interval(Fraction(str(w[0])), Fraction(str(w[1])))
        raise DomainError("window must be [y] or [lo, hi]")
    return Window.point(Fraction(str(w)))


def _guard(work: float) -> None:
    if work > MAX_WORK:
        raise FeasibilityExceeded(f"requested {work:.3g} steps exceeds the limit {MAX_WORK:.3g}")


def _sampled_orbit(kernel: OrbitKernel, beta: BetaParam, rng, depth: int, window: Window, checkpoints):
    """Sample x under Lebesgue and count fiber visits; resample on maximal points."""
    for resamples in range(MAX_RESAMPLES + 1):
        word = sample_uniform_words(beta, rng, 1, depth)[0]
        try:
            counts, _ = kernel.occupation(word, 0.0, window, checkpoints)
        except MaximalPoint:
            continue
        return word, counts, resamples
    raise MaximalPoint(f"{MAX_RESAMPLES} consecutive samples hit maximal points")


def _ln(beta: BetaParam, n: int) -> int:
    """``l_n = floor(log_beta n)``, guarded against floating error at exact powers."""
    l = int(math.floor(math.log(n) / math.log(beta.value)))
    while beta.beta ** (l + 1) <= n:
        l += 1
    while l > 0 and beta.beta ** l > n:
        l -= 1
    return max(l, 1)


# -- experiment kinds ---------------------------------------------------------


def _run_clt(cfg: ExperimentConfig, workers: int) -> ExperimentReport:
    beta, obs, s2 = _setup(cfg)
    n, trials = cfg.n, cfg.trials
    _guard(n * trials)
    blocks = [(b, min(CLT_BLOCK, trials - b * CLT_BLOCK)) for b in range(-(-trials // CLT_BLOCK))]
    parts = _map(lambda bk: birkhoff_samples(obs, n, bk[1], rng_stream(cfg.seed, bk[0])), blocks, workers)
    sums = np.concatenate(parts)
    sigma = math.sqrt(s2)
    summary = {"sigma2": s2, "mean_m": obs.mean_m, "trials": trials}
    if s2 < SIGMA2_FLOOR:
        z = np.zeros(trials)
        summary["ks_normal"] = None
        verdict = DEGENERATE
    else:
        z = (sums - n * obs.mean_m) / (sigma * math.sqrt(n))
        ks = ks_statistic(z, norm.cdf)
        summary.update(ks_normal=ks, sample_mean=float(z.mean()), sample_std=float(z.std(ddof=1)))
        verdict = PASS if ks < CLT_KS else FAIL
    rows = [(i, n, float(s), float(v)) for i, (s, v) in enumerate(zip(sums, z))]
    return ExperimentReport(CLT, cfg.echo(), summary, verdict, ("trial", "n", "phi_n", "normalized"), rows)


def _orbit_trials(cfg: ExperimentConfig, workers: int, checkpoints):
    beta, obs, s2 = _setup(cfg)
    window = _window(cfg, obs)
    kernel = OrbitKernel(obs)
    cps = np.asarray(checkpoints, dtype=np.int64)
    l = _ln(beta, cfg.n)

    def trial(i):
        rng = rng_stream(cfg.seed, i)
        word, counts, resamples = _sampled_orbit(kernel, beta, rng, cfg.depth, window, cps)
        phibar = float(birkhoff_forward(obs, word, l)) - l * obs.mean_m
        return counts, resamples, phibar

    return beta, obs, s2, window, l, _map(trial, list(range(cfg.trials)), workers)


def _run_ds(cfg: ExperimentConfig, workers: int) -> ExperimentReport:
    _guard(cfg.n * cfg.trials)
    beta, obs, s2, window, l, results = _orbit_trials(cfg, workers, [cfg.n])
    n = cfg.n
    scale = math.sqrt(s2 * 2 * math.pi * l) / (n * window.size)
    counts = np.array([r[0][0] for r in results], dtype=float)
    vals = scale * counts
    resamples = sum(r[1] for r in results)
    summary = {
        "sigma2": s2,
        "l_n": l,
        "a_n": n / math.sqrt(s2 * 2 * math.pi * l) if s2 >= SIGMA2_FLOOR else None,
        "trials": cfg.trials,
        "resamples": resamples,
        "resample_fraction": resamples / cfg.trials,
        "median": float(np.median(vals)),
        "mean": float(vals.mean()),
    }
    if s2 < SIGMA2_FLOOR:
        summary.update(ks_exp_half_chi2=None, ks_exp_chi2=None, best_law=None, mean_count=float(counts.mean()))
        verdict = DEGENERATE
    else:
        ks_half = ks_statistic(vals, _clip_unit(cdf_exp_half_chi2))
        ks_full = ks_statistic(vals, _clip_unit(cdf_exp_chi2))
        best = "exp_half_chi2" if ks_half <= ks_full else "exp_chi2"
        summary.update(ks_exp_half_chi2=ks_half, ks_exp_chi2=ks_full, best_law=best)
        ok = min(ks_half, ks_full) < DS_KS and resamples < 1e-3 * cfg.trials
        verdict = PASS if ok else FAIL
    rows = [(i, n, int(c), float(v), r[2]) for i, (c, v, r) in enumerate(zip(counts, vals, results))]
    return ExperimentReport(DS, cfg.echo(), summary, verdict, ("trial", "n", "S_n", "normalized", "phibar_l"), rows)


def _run_lemma(cfg: ExperimentConfig, workers: int) -> ExperimentReport:
    _guard(cfg.n * cfg.trials)
    beta, obs, s2, window, l, results = _orbit_trials(cfg, workers, [cfg.n])
    n = cfg.n
    degenerate = s2 < SIGMA2_FLOOR
    scale = math.sqrt(s2 * 2 * math.pi * l) / (n * window.size)
    rows, eligible, passed = [], 0, 0
    for i, (counts, _, phibar) in enumerate(results):
        v = scale * float(counts[0])
        inside = abs(phibar) / math.sqrt(l) < cfg.delta
        ok = None
        if inside and not degenerate:
            eligible += 1
            target = math.exp(-phibar**2 / (2 * s2 * l))
            ok = abs(v - target) <= cfg.epsilon
            passed += ok
        rows.append((i, n, int(counts[0]), v, phibar, int(inside), "" if ok is None else int(ok)))
    resamples = sum(r[1] for r in results)
    frac = passed / eligible if eligible else None
    summary = {
        "sigma2": s2,
        "l_n": l,
        "trials": cfg.trials,
        "eligible": eligible,
        "passed": passed,
        "pass_fraction": frac,
        "resamples": resamples,
        "resample_fraction": resamples / cfg.trials,
    }
    if degenerate:
        verdict = DEGENERATE
    else:
        verdict = PASS if frac is not None and frac >= LEMMA_PASS else FAIL
    cols = ("trial", "n", "S_n", "normalized", "phibar_l", "in_ball", "pass")
    return ExperimentReport(LEMMA_FINAL, cfg.echo(), summary, verdict, cols, rows)


def _run_bre(cfg: ExperimentConfig, workers: int) -> ExperimentReport:
    schedule = sorted(cfg.schedule or [10**k for k in range(3, int(round(math.log10(cfg.n))) + 1)])
    if not schedule or schedule[-1] != cfg.n:
        schedule = sorted(set(schedule) | {cfg.n})
    _guard(schedule[-1] * cfg.trials)
    beta, obs, s2, window, l, results = _orbit_trials(cfg, workers, schedule)
    counts = np.array([r[0] for r in results], dtype=float)
    sup = counts.max(axis=0)
    mean = counts.mean(axis=0)
    ratio = sup / mean
    ns = np.array(schedule, dtype=float)
    scaled = mean * np.sqrt(np.log(ns)) / ns
    slope = float(np.polyfit(np.log(ns), np.log(scaled), 1)[0]) if len(ns) > 1 else None
    resamples = sum(r[1] for r in results)
    summary = {
        "sigma2": s2,
        "points": cfg.trials,
        "schedule": schedule,
        "sup": sup.tolist(),
        "mean": mean.tolist(),
        "sup_mean_ratio": ratio.tolist(),
        "max_ratio": float(ratio.max()),
        "scaled_mean": scaled.tolist(),
        "slope": slope,
        "resamples": resamples,
    }
    ok = bool(np.all(ratio < BRE_RATIO)) and slope is not None and abs(slope) <= BRE_SLOPE
    verdict = PASS if ok else FAIL
    rows = [(i, int(m), int(c)) for i, r in enumerate(results) for m, c in zip(schedule, r[0])]
    return ExperimentReport(BRE, cfg.echo(), summary, verdict, ("trial", "n", "S_n"), rows)


def _run_llt(cfg: ExperimentConfig, workers: int) -> ExperimentReport:
    from .beta_core import parse_word

    beta, obs, s2 = _setup(cfg)
    if cfg.n > 18:
        raise FeasibilityExceeded("preimage enumeration is limited to n <= 18")
    if s2 < SIGMA2_FLOOR:
        return ExperimentReport(LLT, cfg.echo(), {"sigma2": s2}, DEGENERATE)
    word = parse_word(cfg.point)
    cont = None if obs.group == INTEGERS else _window(cfg, obs).size
    ns = list(range(max(1, min(10, cfg.n)), cfg.n + 1))
    profiles = _map(lambda m: llt_profile(obs, word, m, cfg.targets, s2, window=cont), ns, workers)
    final = profiles[-1]
    gauss = np.exp(-final.t_values**2 / 2) / math.sqrt(2 * math.pi)
    rel = np.abs(final.values - gauss) / gauss
    within = np.abs(final.t_values) <= 2
    targets = np.array(cfg.targets)
    sym = [
        abs(final.values[i] - final.values[j]) / max(final.values[i], final.values[j])
        for i, t in enumerate(targets) if t > 0
        for j in np.flatnonzero(targets == -t)
    ]
    sups = [p.sup_value for p in profiles]
    spread = max(sups) / min(sups)
    summary = {
        "sigma2": s2,
        "leaves": final.leaves,
        "max_rel_error": float(rel[within].max()) if within.any() else None,
        "max_asymmetry": float(max(sym)) if sym else None,
        "uniform_bound_C": float(max(sups)),
        "sup_by_n": dict(zip([str(m) for m in ns], sups)),
        "sup_spread": spread,
    }
    ok = (summary["max_rel_error"] is None or summary["max_rel_error"] <= LLT_REL) and spread <= LLT_SPREAD
    rows = [(float(t), float(v)) for t, v in zip(final.t_values, final.values)]
    return ExperimentReport(LLT, cfg.echo(), summary, PASS if ok else FAIL, ("t", "value"), rows)


_RUNNERS = {CLT: _run_clt, DS: _run_ds, LEMMA_FINAL: _run_lemma, BRE: _run_bre, LLT: _run_llt}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run one configured experiment; output is independent of the worker count."""
    return _RUNNERS[cfg.kind](cfg, worker_count(cfg.workers))


# -- persistence --------------------------------------------------------------


def write_report(report: ExperimentReport, directory, stem: str) -> tuple[Path, Path]:
    """Write ``stem.json`` and ``stem.csv`` under ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    jpath, cpath = out / f"{stem}.json", out / f"{stem}.csv"
    jpath.write_text(report.to_json())
    with cpath.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(report.columns)
        w.writerows(report.rows)
    return jpath, cpath
