"""Transfer-operator numerics: Ulam matrices, invariant density, variance, LLT profiles."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .beta_core import (
    BetaParam,
    ParryAutomaton,
    count_admissible_prefixes,
    parry_density,
    sample_digit_streams,
    value_of,
)
from .cocycle import Observable
from .errors import DomainError, EnumerationTooLarge, NoConvergence

MONTE_CARLO = "MONTE_CARLO"
SPECTRAL = "SPECTRAL"

#: preimage-tree leaves allowed in :func:`llt_profile`
LLT_LEAF_LIMIT = 5_000_000


@dataclass(frozen=True)
class UlamOperator:
    """Bin-transition matrix ``M[i, j] = lambda(bin_i ∩ T^{-1} bin_j) / lambda(bin_i)``.

    ``pieces`` keeps every intersection ``bin_i ∩ branch_d ∩ T^{-1} bin_j`` as
    (row, col, weight, x-midpoint) so twisted operators reuse the geometry.
    Acting on mass vectors from the left, ``p -> p M`` is the Lebesgue transfer
    operator; the twisted version is ``p -> (p e^{it phi}) M``.
    """

    beta: BetaParam
    bins: int
    matrix: sp.csr_matrix
    pieces: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    twist: tuple[float, Observable] | None = None

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.bins) + 0.5) / self.bins

    def twisted(self, t: float, obs: Observable) -> "UlamOperator":
        rows, cols, w, xm = self.pieces
        data = w * np.exp(1j * t * obs.evaluate(xm))
        mat = sp.csr_matrix((data, (rows, cols)), shape=(self.bins, self.bins))
        return UlamOperator(self.beta, self.bins, mat, self.pieces, (t, obs))

    def apply(self, p: np.ndarray) -> np.ndarray:
        """One step on a mass vector (row vector convention)."""
        return self.matrix.T @ p


def _ulam_pieces(beta: BetaParam, bins: int):
    b = beta.beta
    rows, cols, weights, mids = [], [], [], []
    for i in range(bins):
        lo, hi = Fraction(i, bins), Fraction(i + 1, bins)
        for d in range(beta.digit_max + 1):
            a = max(lo, Fraction(d) / b)
            c = min(hi, Fraction(d + 1) / b)
            if a >= c:
                continue
            ya, yc = b * a - d, b * c - d
            j = math.floor(ya * bins)
            while j < bins and Fraction(j, bins) < yc:
                y0 = max(ya, Fraction(j, bins))
                y1 = min(yc, Fraction(j + 1, bins))
                if y1 > y0:
                    rows.append(i)
                    cols.append(j)
                    weights.append(float((y1 - y0) / b * bins))
                    mids.append(float(((y0 + y1) / 2 + d) / b))
                j += 1
    return (np.array(rows), np.array(cols), np.array(weights), np.array(mids))


def build_ulam(beta: BetaParam, bins: int, twist: tuple[float, Observable] | None = None) -> UlamOperator:
    """Ulam discretization from exact cut points of the branches of ``T_beta``."""
    if bins < 2:
        raise DomainError("need at least two bins")
    pieces = _ulam_pieces(beta, bins)
    rows, cols, w, _ = pieces
    mat = sp.csr_matrix((w, (rows, cols)), shape=(bins, bins))
    op = UlamOperator(beta, bins, mat, pieces)
    if twist is not None:
        op = op.twisted(*twist)
    return op


def leading_eigenpair(op: UlamOperator, tol: float = 1e-13, max_iter: int = 100_000, start=None):
    """Dominant eigenvalue of ``p -> p M`` by power iteration.

    Returns ``(eigenvalue, normalized eigenvector, iterations)``.
    """
    mt = op.matrix.T.tocsr()
    v = np.full(op.bins, 1.0 / op.bins, dtype=mt.dtype) if start is None else np.asarray(start, dtype=mt.dtype)
    v = v / np.linalg.norm(v)
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = mt @ v
        lam_new = np.vdot(v, w)
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0, w, it
        # fix the phase so the iteration converges as a vector
        w = w / nrm
        k = int(np.argmax(np.abs(w)))
        w = w * (abs(w[k]) / w[k])
        resid = np.linalg.norm(mt @ w - lam_new * w)
        if resid < tol and abs(lam_new - lam) < tol:
            return lam_new, w, it
        v, lam = w, lam_new
    raise NoConvergence(f"power iteration residual {resid:.3g} after {max_iter} iterations")


@dataclass(frozen=True)
class DensityEstimate:
    midpoints: np.ndarray
    values: np.ndarray

    @property
    def bins(self) -> int:
        return len(self.values)

    def integral(self) -> float:
        return float(self.values.sum() / self.bins)

    def __call__(self, x) -> np.ndarray:
        idx = np.clip((np.asarray(x, dtype=float) * self.bins).astype(int), 0, self.bins - 1)
        return self.values[idx]


def invariant_density(op: UlamOperator, tol: float = 1e-10, max_iter: int = 100_000) -> DensityEstimate:
    """Normalized fixed vector of the untwisted Ulam operator, as a density."""
    if op.twist is not None:
        raise DomainError("invariant density needs the untwisted operator")
    _, v, _ = leading_eigenpair(op, tol=tol, max_iter=max_iter)
    p = np.real(v)
    p = p / p.sum()
    # residual check on the normalized mass vector
    if np.abs(op.apply(p) - p).sum() > 10 * tol * op.bins:
        raise NoConvergence("invariant vector residual above tolerance")
    return DensityEstimate(op.midpoints, p * op.bins)


def apply_L(op: UlamOperator, f: np.ndarray) -> np.ndarray:
    """``L f(x) = sum_{Tz = x} f(z)`` on bin densities (``L = beta`` times the Lebesgue transfer)."""
    return op.beta.value * op.apply(f / op.bins) * op.bins


def apply_transfer_m(op: UlamOperator, h: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Transfer operator of ``(X, m, T)``: ``T-hat f = P(f h) / h``."""
    return op.apply(f * h / op.bins) * op.bins / h


@dataclass(frozen=True)
class SigmaEstimate:
    sigma2: float
    method: str
    n_used: int
    trials: int
    stderr: float


def _log_modulus(base: UlamOperator, obs: Observable, t: float, start=None):
    lam, vec, _ = leading_eigenpair(base.twisted(t, obs), tol=1e-14, max_iter=20_000, start=start)
    return math.log(abs(lam)), vec


def spectral_sigma2(obs: Observable, bins: int = 4096, dt: float = 1e-3, base: UlamOperator | None = None) -> SigmaEstimate:
    """``sigma^2 = -(d^2/dt^2) log|lambda(t)|`` at 0, central differences with one Richardson step."""
    base = base or build_ulam(obs.beta, bins)
    f1, v1 = _log_modulus(base, obs, dt)
    f2, _ = _log_modulus(base, obs, 2 * dt, start=v1)
    # |lambda(-t)| = |lambda(t)| and lambda(0) = 1
    d1 = 2 * f1 / dt**2
    d2 = 2 * f2 / (2 * dt) ** 2
    second = (4 * d1 - d2) / 3
    return SigmaEstimate(max(0.0, -second), SPECTRAL, base.bins, 0, abs(d1 - d2) / 3)


def birkhoff_samples(obs: Observable, n: int, trials: int, rng: np.random.Generator, invariant: bool = True,
                     chunk: int = 1000) -> np.ndarray:
    """``phi_n`` for ``trials`` random points (invariant measure or Lebesgue)."""
    beta = obs.beta
    table = obs.kernel_spec()[0]
    out = np.empty(trials)
    pad = 0 if table.size else 48
    for start in range(0, trials, chunk):
        size = min(chunk, trials - start)
        digits = sample_digit_streams(beta, rng, size, n + pad, invariant=invariant)
        if table.size:
            out[start:start + size] = table[digits].sum(axis=1)
            continue
        v = rng.random(size)  # point in the final residual: a tail detail beyond 48 digits
        vals = np.zeros(size)
        for k in range(n + pad - 1, -1, -1):
            v = (digits[:, k] + v) / beta.value
            if k < n:
                vals += obs.evaluate(v)
        out[start:start + size] = vals
    return out


def monte_carlo_sigma2(obs: Observable, n: int, trials: int, rng: np.random.Generator) -> SigmaEstimate:
    """Empirical ``Var_m(phi_n) / n`` over invariant-measure samples."""
    s = birkhoff_samples(obs, n, trials, rng, invariant=True)
    var = float(np.var(s, ddof=1))
    return SigmaEstimate(var / n, MONTE_CARLO, n, trials, var / n * math.sqrt(2.0 / (trials - 1)))


def sigma_squared(obs: Observable, method: str = SPECTRAL, **params) -> SigmaEstimate:
    """Asymptotic variance ``lim Var_m(phi_n) / n`` by spectral curvature or Monte Carlo."""
    if method == SPECTRAL:
        return spectral_sigma2(obs, **params)
    if method == MONTE_CARLO:
        rng = params.pop("rng", None) or np.random.default_rng(params.pop("seed", 0))
        return monte_carlo_sigma2(obs, params.get("n", 1000), params.get("trials", 4000), rng)
    raise DomainError(f"unknown method {method!r}")


def _spectral_radius(op: UlamOperator) -> float:
    try:
        vals = spla.eigs(op.matrix.T, k=1, which="LM", tol=1e-12, maxiter=20_000, return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise NoConvergence(f"ARPACK failed at t = {op.twist[0]}") from exc
    return float(abs(vals[0]))


@dataclass(frozen=True)
class AperiodicityReport:
    t_grid: np.ndarray
    moduli: np.ndarray
    max_modulus: float
    argmax_t: float
    margin: float
    verdict: str


def aperiodicity_scan(obs: Observable, t_grid: Sequence[float], bins: int = 1024, margin: float = 1e-2,
                      unit_tol: float = 1e-6, base: UlamOperator | None = None) -> AperiodicityReport:
    """Leading-eigenvalue modulus of ``P(t)`` over a grid avoiding 0.

    FAIL when the modulus reaches 1 (within ``unit_tol``) somewhere on the grid.
    Near 0 the modulus decays like ``1 - sigma^2 t^2 / 2``; WARN when, past that
    initial decay, it climbs back within ``margin`` of 1.  This is a numerical
    heuristic, not a proof of aperiodicity.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.abs(t_grid) < 1e-9):
        raise DomainError("t grid must exclude a neighbourhood of 0")
    base = base or build_ulam(obs.beta, bins)
    order = np.argsort(np.abs(t_grid), kind="stable")
    t_grid = t_grid[order]
    # twisted operators can carry several eigenvalues of nearly equal modulus,
    # which stalls power iteration; ARPACK only needs the largest modulus
    mods = np.array([_spectral_radius(base.twisted(t, obs)) for t in t_grid])
    k = int(np.argmax(mods))
    top = float(mods[k])
    # end of the initial decreasing run away from t = 0
    run = 1
    while run < len(mods) and mods[run] <= mods[run - 1]:
        run += 1
    later = float(mods[run:].max()) if run < len(mods) else 0.0
    if top >= 1 - unit_tol:
        verdict = "FAIL"
    elif later >= 1 - margin:
        verdict = "WARN"
    else:
        verdict = "PASS"
    return AperiodicityReport(t_grid, mods, top, float(t_grid[k]), 1 - top, verdict)


@dataclass(frozen=True)
class LLTProfile:
    n: int
    sigma: float
    mean: float
    targets: np.ndarray
    t_values: np.ndarray
    values: np.ndarray
    leaves: int
    sup_value: float

    def rows(self):
        return list(zip(self.t_values.tolist(), self.values.tolist()))


def preimage_tree(obs: Observable, word: Sequence[int], n: int, limit: int = LLT_LEAF_LIMIT):
    """Values ``z`` and sums ``phi_n(z)`` over ``T^{-n}(x)``.

    Prepending digit ``d`` to ``z`` gives the preimage ``(d + z) / beta``,
    admissible exactly when it stays below 1.
    """
    beta = obs.beta
    b = beta.value
    table = obs.kernel_spec()[0]
    z = np.array([float(value_of(beta, word))])
    s = np.zeros(1)
    for _ in range(n):
        zs, ss = [], []
        for d in range(beta.digit_max + 1):
            keep = d + z < b
            if not keep.any():
                continue
            zn = (d + z[keep]) / b
            val = table[d] if table.size else obs.evaluate(zn)
            zs.append(zn)
            ss.append(s[keep] + val)
        z, s = np.concatenate(zs), np.concatenate(ss)
        if z.size > limit:
            raise EnumerationTooLarge(f"preimage tree exceeds {limit} leaves")
    return z, s


def llt_profile(
    obs: Observable,
    word: Sequence[int],
    n: int,
    t_targets: Sequence[float],
    sigma2: float,
    window: float | None = None,
    density: Callable | None = None,
) -> LLTProfile:
    """``sigma sqrt(n) T-hat^n(1_{phi_n = k_n})(x)`` on the preimage tree of ``x``.

    ``T-hat^n f(x) = sum_{T^n z = x} f(z) h(z) / (beta^n h(x))``.  For integer
    observables ``k_n`` is the lattice point nearest ``n E_m(phi) + t sigma sqrt(n)``
    and the returned ``t`` is the standardized value of that lattice point; with
    ``window = |I|`` the event is ``phi_n in k_n + [0, |I|)`` and the value is
    divided by ``|I|``.
    """
    beta = obs.beta
    density = density or (lambda x: parry_density(beta, x))
    z, s = preimage_tree(obs, word, n)
    x = float(value_of(beta, word))
    weights = density(z) / (beta.value**n * float(density(np.array([x]))[0]))
    sigma = math.sqrt(sigma2)
    mu = obs.mean_m
    scale = sigma * math.sqrt(n)
    ks, ts, vals = [], [], []
    for t in t_targets:
        target = n * mu + t * scale
        if window is None:
            k = round(target)
            mass = weights[np.rint(s) == k].sum()
            vals.append(scale * mass)
        else:
            k = target
            mass = weights[(s >= k) & (s < k + window)].sum()
            vals.append(scale * mass / window)
        ks.append(k)
        ts.append((k - n * mu) / scale)
    if window is None:
        _, inv = np.unique(np.rint(s), return_inverse=True)
        sup = scale * float(np.bincount(inv.ravel(), weights=weights).max())
    else:
        sup = max(vals)
    return LLTProfile(n, sigma, mu, np.array(ks, dtype=float), np.array(ts), np.array(vals), int(z.size), sup)


def llt_count_check(obs: Observable, word: Sequence[int], n: int) -> tuple[int, int]:
    """(tree leaves, automaton preimage count) for the same point; they must agree."""
    z, _ = preimage_tree(obs, word, n)
    return int(z.size), count_admissible_prefixes(ParryAutomaton(obs.beta), n, tuple(word))


def _write_pairs(path, header, xs, ys) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(zip(np.asarray(xs, dtype=float).tolist(), np.asarray(ys, dtype=float).tolist()))
    return path


def write_density_csv(est: DensityEstimate, path) -> Path:
    """Columns ``x, value`` at the bin midpoints."""
    return _write_pairs(path, ("x", "value"), est.midpoints, est.values)


def write_llt_csv(profile: LLTProfile, path) -> Path:
    """Columns ``t, value`` at the evaluated targets."""
    return _write_pairs(path, ("t", "value"), profile.t_values, profile.values)
