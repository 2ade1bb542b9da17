"""Step observables, Birkhoff sums, the adic cocycle and the random walk adic map.

The exact routines in this module evaluate observables on rational orbit
points; :mod:`beta_adic._kernels` provides compiled equivalents for long orbits.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _kernels
from .adic import HORIZON, adic_step, agree_index, successor
from .beta_core import (
    BetaParam,
    DigitWord,
    ParryAutomaton,
    alpha_breaks,
    invariant_measure,
    value_of,
)
from .errors import DepthExceeded, DomainError, EnumerationTooLarge

INTEGERS = "Z"
REALS = "R"

#: cap on preimages visited by :func:`block_count_bounds`
ENUMERATION_LIMIT = 2_000_000


@dataclass(frozen=True)
class Observable:
    """Step function on ``[0, 1)``: value ``values[i]`` on ``[breaks[i], breaks[i+1])``."""

    beta: BetaParam
    group: str
    breaks: tuple[Fraction, ...]
    values: tuple

    def __post_init__(self):
        if self.group not in (INTEGERS, REALS):
            raise DomainError(f"group must be 'Z' or 'R', got {self.group!r}")
        b = self.breaks
        if b[0] != 0 or b[-1] != 1 or any(x >= y for x, y in zip(b, b[1:])):
            raise DomainError("breakpoints must increase strictly from 0 to 1")
        if len(self.values) != len(b) - 1:
            raise DomainError("need one value per piece")
        missing = set(alpha_breaks(self.beta)) - set(b)
        if missing:
            raise DomainError(f"pieces must refine the digit partition; missing {sorted(missing)}")
        if self.group == INTEGERS and any(Fraction(v).denominator != 1 for v in self.values):
            raise DomainError("integer-valued observable required for G = Z")

    @classmethod
    def from_pieces(cls, beta: BetaParam, pieces, group: str = INTEGERS) -> "Observable":
        """Build from ``[((a, b), value), ...]`` covering ``[0, 1)`` in order."""
        pieces = sorted(((Fraction(a), Fraction(b)), Fraction(v)) for (a, b), v in pieces)
        breaks = [pieces[0][0][0]]
        for (a, b), _ in pieces:
            if a != breaks[-1]:
                raise DomainError("pieces must be contiguous")
            breaks.append(b)
        values = tuple(int(v) if group == INTEGERS else v for _, v in pieces)
        return cls(beta, group, tuple(breaks), values)

    def __call__(self, x: Fraction):
        i = bisect.bisect_right(self.breaks, x) - 1
        return self.values[i]

    @property
    def pieces(self):
        return [((a, b), v) for a, b, v in zip(self.breaks, self.breaks[1:], self.values)]

    @cached_property
    def digit_values(self) -> tuple | None:
        """Per-digit values when the observable is constant on each digit cell."""
        ab = alpha_breaks(self.beta)
        out = []
        for lo, hi in zip(ab, ab[1:]):
            vals = {v for a, b, v in zip(self.breaks, self.breaks[1:], self.values) if lo <= a < hi}
            if len(vals) != 1:
                return None
            out.append(vals.pop())
        return tuple(out)

    @cached_property
    def mean_m(self) -> float:
        """``E_m(phi)`` under the invariant measure."""
        return sum(
            float(v) * invariant_measure(self.beta, float(a), float(b))
            for a, b, v in zip(self.breaks, self.breaks[1:], self.values)
        )

    @cached_property
    def variation_bound(self) -> Fraction:
        """``C_{phi, alpha}``: the largest total variation over a digit cell."""
        ab = alpha_breaks(self.beta)
        best = Fraction(0)
        for lo, hi in zip(ab, ab[1:]):
            vals = [Fraction(v) for a, v in zip(self.breaks, self.values) if lo <= a < hi]
            best = max(best, sum((abs(x - y) for x, y in zip(vals, vals[1:])), Fraction(0)))
        return best

    def shifted(self, c) -> "Observable":
        return Observable(self.beta, self.group, self.breaks, tuple(v - c for v in self.values))

    def evaluate(self, x) -> np.ndarray:
        """Vectorised float evaluation."""
        idx = np.searchsorted(self.float_breaks, np.asarray(x, dtype=float), side="right") - 1
        return self.float_values[np.clip(idx, 0, len(self.values) - 1)]

    @cached_property
    def float_breaks(self) -> np.ndarray:
        return np.array([float(b) for b in self.breaks])

    @cached_property
    def float_values(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])

    def kernel_spec(self) -> tuple:
        """Arrays consumed by the compiled kernels: (digit table or empty, breaks, values)."""
        dv = self.digit_values
        table = np.array([float(v) for v in dv]) if dv is not None else np.empty(0)
        return table, self.float_breaks, self.float_values


def first_digit(beta: BetaParam) -> Observable:
    """``phi(x) = d_1(x)``, integer valued and constant on digit cells."""
    ab = alpha_breaks(beta)
    return Observable(beta, INTEGERS, ab, tuple(range(len(ab) - 1)))


def constant(beta: BetaParam, c, group: str = INTEGERS) -> Observable:
    ab = alpha_breaks(beta)
    c = int(c) if group == INTEGERS else Fraction(c)
    return Observable(beta, group, ab, (c,) * (len(ab) - 1))


def rounded_identity(beta: BetaParam, pieces: int = 64) -> Observable:
    """``phi(x) = floor(pieces * x) / pieces`` refined by the digit partition (G = R)."""
    pts = {Fraction(j, pieces) for j in range(pieces + 1)} | set(alpha_breaks(beta))
    breaks = tuple(sorted(pts))
    values = tuple(Fraction(math.floor(a * pieces), pieces) for a in breaks[:-1])
    return Observable(beta, REALS, breaks, values)


@dataclass(frozen=True)
class Window:
    """Fiber target ``I``: the point ``{lo}`` (counting measure) or ``[lo, hi)``."""

    lo: Fraction = Fraction(0)
    hi: Fraction | None = None

    @classmethod
    def point(cls, y=0) -> "Window":
        return cls(Fraction(y), None)

    @classmethod
    def interval(cls, lo, hi) -> "Window":
        lo, hi = Fraction(lo), Fraction(hi)
        if hi <= lo:
            raise DomainError("empty window")
        return cls(lo, hi)

    @property
    def is_point(self) -> bool:
        return self.hi is None

    @property
    def size(self) -> float:
        return 1.0 if self.is_point else float(self.hi - self.lo)

    def __contains__(self, v) -> bool:
        if self.is_point:
            return v == self.lo
        return self.lo <= v < self.hi

    def bounds(self) -> tuple[float, float, bool]:
        return float(self.lo), float(self.lo if self.hi is None else self.hi), self.is_point


def default_window(obs: Observable) -> Window:
    return Window.point(0) if obs.group == INTEGERS else Window.interval(0, 1)


@dataclass(frozen=True)
class SkewPoint:
    base: DigitWord
    fiber: Fraction | int = 0


@dataclass(frozen=True)
class OccupationResult:
    n: int
    count: int
    lower: int | None = None
    upper: int | None = None
    final: SkewPoint | None = field(default=None, compare=False)


def orbit_value(obs: Observable, word: Sequence[int], k: int):
    """``phi(T^k x)`` evaluated exactly."""
    dv = obs.digit_values
    if dv is not None:
        return dv[word[k] if k < len(word) else 0]
    return obs(value_of(obs.beta, word[k:]))


def birkhoff_forward(obs: Observable, word: Sequence[int], n: int):
    """``phi_n(x) = sum_{k<n} phi(T^k x)`` on the exact orbit of a digit word."""
    if n < 0:
        raise DomainError("n must be non-negative")
    if n > len(word) + HORIZON:
        raise DepthExceeded(f"n = {n} beyond word length plus horizon")
    return sum((orbit_value(obs, word, k) for k in range(n)), 0)


def pair_difference(obs: Observable, x: Sequence[int], z: Sequence[int], upto: int | None = None):
    """``psi(x, z) = sum_k phi(T^k x) - phi(T^k z)`` for tail-equivalent words.

    Terms with ``k >= N(x, z) - 1`` vanish; ``upto`` truncates the sum at
    ``k <= upto`` when given.
    """
    stop = agree_index(x, z) - 1
    if upto is not None:
        stop = min(stop, upto + 1)
    return sum((orbit_value(obs, x, k) - orbit_value(obs, z, k) for k in range(stop)), 0)


def adic_cocycle(obs: Observable, word: Sequence[int]):
    """``psi(x, tau x)``, the fiber increment of the random walk adic map."""
    return pair_difference(obs, word, successor(obs.beta, word))


def tau_phi_step(obs: Observable, p: SkewPoint) -> SkewPoint:
    """``tau_phi(x, y) = (tau x, y + psi(x, tau x))``."""
    step = adic_step(obs.beta, p.base)
    inc = pair_difference(obs, p.base, step.result)
    return SkewPoint(step.result, p.fiber + inc)


def occupation_sum_reference(obs: Observable, p: SkewPoint, n: int, window: Window) -> OccupationResult:
    """``S_n(1_{X x I})(x, y)`` by exact iteration (slow; for validation)."""
    count = 0
    q = p
    for _ in range(n):
        if q.fiber in window:
            count += 1
        q = tau_phi_step(obs, q)
    return OccupationResult(n, count, final=q)


def occupation_sum(obs: Observable, p: SkewPoint, n: int, window: Window | None = None) -> OccupationResult:
    """``S_n(1_{X x I})(x, y) = #{0 <= k < n : fiber of tau_phi^k(x, y) in I}``."""
    if n < 0:
        raise DomainError("n must be non-negative")
    window = window or default_window(obs)
    if obs.group == INTEGERS and not window.is_point:
        raise DomainError("use a point window {y} for G = Z")
    kernel = _kernels.OrbitKernel(obs)
    counts, state = kernel.occupation(p.base, float(p.fiber), window, np.array([n], dtype=np.int64))
    return OccupationResult(n, int(counts[0]), final=SkewPoint(state.word(), state.fiber))


def enumerate_preimages(automaton: ParryAutomaton, n: int, tail: Sequence[int]):
    """All ``z`` in ``T^{-n}(value(tail))`` as digit words ``v tail``."""
    for v in automaton.words(n, tail):
        yield v + tuple(tail)


def block_count_bounds(
    obs: Observable,
    word: Sequence[int],
    n: int,
    r: int,
    window: Window | None = None,
    y=0,
    automaton: ParryAutomaton | None = None,
) -> tuple[int, int]:
    """Preimage-count sandwich for ``S_{K_n^r(x)}(1_{X x I})(x, y)``.

    Block ``j`` is ``T^{-n}(tau^j T^n x)``; a preimage ``z`` counts when
    ``y + sum_{k=0}^{n + N(T^n x, tau^j T^n x)} phi(T^k x) - phi(T^k z)`` lies in
    ``I``.  ``upper`` sums blocks ``j = 0..r-1`` and ``lower`` blocks ``1..r-1``.
    """
    if r <= 0:
        return 0, 0
    window = window or default_window(obs)
    beta = obs.beta
    automaton = automaton or ParryAutomaton(beta)
    x = tuple(word) + (0,) * max(0, n - len(word))
    base_tail = x[n:]
    tail = base_tail
    lower = upper = 0
    visited = 0
    for j in range(r):
        if j:
            tail = successor(beta, tail)
        stop = n + agree_index(base_tail, tail)
        hits = 0
        for z in enumerate_preimages(automaton, n, tail):
            visited += 1
            if visited > ENUMERATION_LIMIT:
                raise EnumerationTooLarge(f"more than {ENUMERATION_LIMIT} preimages")
            d = sum(
                (orbit_value(obs, x, k) - orbit_value(obs, z, k) for k in range(stop + 1)),
                0,
            )
            if y + d in window:
                hits += 1
        upper += hits
        if j:
            lower += hits
    return lower, upper


def observable_from_spec(beta: BetaParam, spec) -> Observable:
    """Build an observable from a config value.

    Accepted forms: ``"d1"``, ``"zero"``, ``"const:c"``, ``"identity"`` or
    ``"identity:k"`` (x rounded down to a k-piece step function), or a mapping
    ``{"group": "Z" | "R", "pieces": [[a, b, value], ...]}``.
    """
    if isinstance(spec, str):
        name, _, arg = spec.strip().partition(":")
        if name == "d1" and not arg:
            return first_digit(beta)
        if name == "zero" and not arg:
            return constant(beta, 0)
        if name == "const" and arg:
            c = Fraction(arg)
            return constant(beta, c, INTEGERS if c.denominator == 1 else REALS)
        if name == "identity":
            return rounded_identity(beta, int(arg) if arg else 64)
        raise DomainError(f"unknown observable {spec!r}")
    if isinstance(spec, dict):
        extra = set(spec) - {"group", "pieces"}
        if extra:
            raise DomainError(f"unknown observable keys {sorted(extra)}")
        try:
            pieces = [((a, b), v) for a, b, v in spec["pieces"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError("observable pieces must be [a, b, value] triples") from exc
        return Observable.from_pieces(beta, pieces, spec.get("group", INTEGERS))
    raise DomainError(f"unsupported observable spec {spec!r}")


def block_occupation(
    obs: Observable,
    word: Sequence[int],
    n: int,
    r: int,
    window: Window | None = None,
    y=0,
    automaton: ParryAutomaton | None = None,
) -> OccupationResult:
    """Occupation count over the first ``r`` rank-``n`` blocks of the orbit of ``x``.

    The blocks hold ``K_n^r(x) + r`` orbit points (each block ends on an
    n-maximal point, and ``K_n`` counts steps, not points).  The count is
    returned together with the preimage bounds of :func:`block_count_bounds`.
    """
    window = window or default_window(obs)
    kernel = _kernels.OrbitKernel(obs)
    k_r, _ = kernel.blocks(word, n, r)
    steps = k_r + r if r else 0
    counts, state = kernel.occupation(word, float(y), window, np.array([steps], dtype=np.int64))
    lower, upper = block_count_bounds(obs, word, n, r, window, y, automaton)
    return OccupationResult(steps, int(counts[0]), lower, upper, SkewPoint(state.word(), state.fiber))
