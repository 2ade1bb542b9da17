import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from beta_adic.beta_core import BetaParam, ParryAutomaton, count_admissible_prefixes, cylinders, parry_density
from beta_adic.cocycle import Observable, constant, first_digit, rounded_identity
from beta_adic.errors import DomainError
from beta_adic.spectral import (
    MONTE_CARLO,
    SPECTRAL,
    aperiodicity_scan,
    apply_L,
    build_ulam,
    invariant_density,
    leading_eigenpair,
    llt_count_check,
    llt_profile,
    monte_carlo_sigma2,
    sigma_squared,
)

B = BetaParam(Fraction(5, 2))
D1 = first_digit(B)


@pytest.fixture(scope="module")
def op4096():
    return build_ulam(B, 4096)


def markov_sigma2(beta: BetaParam, states: int = 60, lags: int = 400) -> float:
    """Green-Kubo variance of the first-digit process from the follower-state chain.

    In state m the point is uniform on [0, T^m 1); digit d has probability
    |[d/beta, (d+1)/beta) ∩ [0, T^m 1)| / T^m 1 and moves to state 0 (d below
    the bound) or m + 1 (d equal to it).
    """
    b = float(beta.beta)
    t = [float(v) for v in beta.one_orbit[: states + 1]]
    one = beta.one_expansion
    P = np.zeros((states, states))
    edges = []  # (m, d, next, prob)
    for m in range(states - 1):
        for d in range(one[m] + 1):
            lo, hi = d / b, min((d + 1) / b, t[m])
            p = max(0.0, hi - lo) / t[m]
            nxt = 0 if d < one[m] else m + 1
            edges.append((m, d, nxt, p))
            P[m, nxt] += p
    P[states - 1, 0] = 1.0  # negligible truncation mass
    w, v = np.linalg.eig(P.T)
    pi = np.real(v[:, np.argmin(abs(w - 1))])
    pi /= pi.sum()
    g = np.zeros(states)
    g2 = np.zeros(states)
    for m, d, _, p in edges:
        g[m] += p * d
        g2[m] += p * d * d
    mu = pi @ g
    var = pi @ g2 - mu**2
    total = var
    h = g.copy()  # h = P^{k-1} g
    for _ in range(lags):
        cross = sum(pi[m] * p * d * h[nxt] for m, d, nxt, p in edges)
        total += 2 * (cross - mu**2)
        h = P @ h
    return float(total)


def test_row_sums_small_and_large():
    for bins in (4, 4096):
        op = build_ulam(B, bins)
        assert np.allclose(np.asarray(op.matrix.sum(axis=1)).ravel(), 1.0, atol=1e-12)


def test_bins_must_be_at_least_two():
    with pytest.raises(DomainError):
        build_ulam(B, 1)


def test_leading_eigenvalue_is_one(op4096):
    lam, _, _ = leading_eigenpair(op4096, tol=1e-12)
    assert abs(lam - 1) < 1e-8


def test_zero_twist_is_untwisted(op4096):
    tw = op4096.twisted(0.0, D1)
    assert np.array_equal(tw.matrix.toarray().real, op4096.matrix.toarray())
    assert not np.any(tw.matrix.toarray().imag)


def test_density_against_parry_series(op4096):
    est = invariant_density(op4096)
    assert est.integral() == pytest.approx(1.0, abs=1e-10)
    # bin averages of the Parry series by fine midpoint sampling
    fine = (np.arange(4096 * 16) + 0.5) / (4096 * 16)
    oracle = parry_density(B, fine).reshape(4096, 16).mean(axis=1)
    assert np.abs(est.values - oracle).mean() < 0.01
    assert est.values.min() >= 0.6 - 0.02
    assert est.values.max() <= 1 / 0.6 + 0.02


def test_integer_base_density_is_constant():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        b = BetaParam(3)
    est = invariant_density(build_ulam(b, 300))
    assert np.allclose(est.values, 1.0, atol=1e-6)


def test_L_scales_density_by_beta(op4096):
    h = invariant_density(op4096).values
    assert np.allclose(apply_L(op4096, h), 2.5 * h, atol=1e-8)


def test_sigma_squared_constant_is_zero(op4096):
    assert sigma_squared(constant(B, 2), SPECTRAL, base=op4096).sigma2 == pytest.approx(0, abs=1e-3)


def test_sigma_squared_coboundary():
    # phi = d1 o T - d1 is constant on rank-2 cylinders
    aut = ParryAutomaton(B)
    pieces = [((c.a, c.b), c.word[1] - c.word[0]) for c in cylinders(aut, 2)]
    cob = Observable.from_pieces(B, pieces)
    assert sigma_squared(cob, SPECTRAL, bins=2048).sigma2 == pytest.approx(0, abs=1e-3)
    rng = np.random.default_rng(0)
    v = [monte_carlo_sigma2(cob, n, 4000, rng).sigma2 for n in (10, 100, 1000)]
    assert v[0] > v[1] > v[2]
    assert v[2] < 0.01


def test_sigma_squared_matches_markov_chain_oracle(op4096):
    oracle = markov_sigma2(B)
    spec = sigma_squared(D1, SPECTRAL, base=op4096)
    assert spec.sigma2 == pytest.approx(oracle, rel=1e-3)
    mc = sigma_squared(D1, MONTE_CARLO, n=1000, trials=20000, seed=1)
    assert mc.sigma2 == pytest.approx(spec.sigma2, rel=0.05)
    assert mc.sigma2 >= 0 and mc.stderr > 0


def test_sigma_squared_real_observable():
    rid = rounded_identity(B)
    spec = sigma_squared(rid, SPECTRAL, bins=4096).sigma2
    mc = sigma_squared(rid, MONTE_CARLO, n=500, trials=20000, seed=2).sigma2
    assert mc == pytest.approx(spec, rel=0.05)


def test_aperiodicity_scan():
    grid = np.linspace(np.pi / 128, np.pi, 128)
    base = build_ulam(B, 1024)
    assert aperiodicity_scan(constant(B, 0), grid, base=base).verdict == "FAIL"
    rep = aperiodicity_scan(constant(B, 2), grid, base=base)
    assert rep.verdict == "FAIL"
    assert rep.moduli[-1] == pytest.approx(1.0, abs=1e-8)  # t = 2 pi / 2
    rep = aperiodicity_scan(D1, grid, base=base)
    assert rep.verdict == "PASS"
    assert rep.margin > 0
    # continuity at 0 puts the maximum at the smallest t; the modulus decays away from it
    assert rep.argmax_t == pytest.approx(np.pi / 128)
    assert rep.moduli[-1] < 0.9
    with pytest.raises(DomainError):
        aperiodicity_scan(D1, [0.0, 1.0], base=base)


def test_llt_leaf_count_matches_automaton():
    for n in (1, 5, 10):
        for w in [(), (1, 0, 1, 1), (2, 1)]:
            leaves, count = llt_count_check(D1, w, n)
            assert leaves == count == count_admissible_prefixes(ParryAutomaton(B), n, w)


def test_llt_profile_center_and_symmetry():
    s2 = sigma_squared(D1, SPECTRAL, bins=4096).sigma2
    prof = llt_profile(D1, (1, 0, 1, 1), 16, [-1.0, -0.5, 0.0, 0.5, 1.0], s2)
    centre = prof.values[2]
    assert centre == pytest.approx(1 / math.sqrt(2 * math.pi), rel=0.2)
    for i, j in [(0, 4), (1, 3)]:
        a, b = prof.values[i], prof.values[j]
        assert abs(a - b) <= 0.25 * max(a, b)
    assert prof.leaves > 2 * 10**6


def test_llt_continuous_window():
    rid = rounded_identity(B)
    s2 = sigma_squared(rid, SPECTRAL, bins=4096).sigma2
    prof = llt_profile(rid, (1, 0, 1, 1), 12, [0.0], s2, window=0.5)
    assert prof.values[0] == pytest.approx(1 / math.sqrt(2 * math.pi), rel=0.3)
