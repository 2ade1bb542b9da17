"""Exact beta-expansion arithmetic, Parry admissibility and cylinder combinatorics.

Points of ``[0, 1)`` are represented by finite digit words with an implicit
zero tail.  The base is held as an exact :class:`fractions.Fraction`, so
greedy digits, cylinder endpoints and preimage counts are computed without
rounding.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import AmbiguousBoundary, DepthExceeded, DomainError

DigitWord = tuple[int, ...]

#: number of digits of d(1, beta) computed beyond the requested working depth
GUARD_DIGITS = 64
#: default working depth L_max for sampled points and orbit growth
DEFAULT_DEPTH = 128
FORBIDDEN = -1


def parse_beta(value) -> Fraction:
    """Parse ``"p/q"``, a decimal string, an int, a float or a Fraction.

    Floats are converted exactly (every binary float is a rational).
    """
    if isinstance(value, Fraction):
        beta = value
    elif isinstance(value, (int, np.integer)):
        beta = Fraction(int(value))
    elif isinstance(value, float):
        beta = Fraction(value)
    elif isinstance(value, str):
        try:
            beta = Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"cannot parse beta from {value!r}") from exc
    else:
        raise DomainError(f"unsupported beta type {type(value).__name__}")
    if beta <= 1:
        raise DomainError(f"beta must exceed 1, got {beta}")
    return beta


def parse_word(text: str) -> DigitWord:
    """Parse a comma-separated digit word; the empty string is the empty word."""
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError as exc:
        raise DomainError(f"malformed digit word {text!r}") from exc


def format_word(word: Sequence[int]) -> str:
    return ",".join(str(int(d)) for d in word)


def format_beta(beta: Fraction) -> str:
    return str(beta.numerator) if beta.denominator == 1 else f"{beta.numerator}/{beta.denominator}"


def _find_period(digits: Sequence[int], min_reps: int = 3) -> int | None:
    """Smallest period p such that the trailing part of ``digits`` repeats
    at least ``min_reps`` times with period p (heuristic)."""
    n = len(digits)
    for p in range(1, n // (min_reps + 1) + 1):
        span = p * min_reps
        tail = digits[n - span:]
        if all(tail[i] == tail[i - p] for i in range(p, span)):
            # require the repetition to extend over half the sequence
            start = n - span
            while start - p >= 0 and digits[start - p:start] == digits[start:start + p]:
                start -= p
            if start <= n // 2:
                return p
    return None


@dataclass(frozen=True)
class BetaParam:
    """The base beta with its expansion of one.

    ``one_orbit[m]`` is ``T^m(1)`` (with ``T(1) = beta - floor(beta)``), so the
    cylinder reached in automaton state ``m`` maps onto ``[0, one_orbit[m])``.
    """

    beta: Fraction
    depth: int = DEFAULT_DEPTH
    one_expansion: DigitWord = field(init=False)
    one_orbit: tuple[Fraction, ...] = field(init=False, repr=False)
    one_is_finite: bool = field(init=False)
    periodicity_flag: int | None = field(init=False)

    def __init__(self, beta, depth: int = DEFAULT_DEPTH):
        beta = parse_beta(beta)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "depth", int(depth))
        total = int(depth) + GUARD_DIGITS
        digits, orbit = [], [Fraction(1)]
        t = Fraction(1)
        finite = False
        for _ in range(total):
            y = beta * t
            d = math.floor(y)
            t = y - d
            digits.append(d)
            orbit.append(t)
            if t == 0:
                finite = True
                break
        object.__setattr__(self, "one_expansion", tuple(digits))
        object.__setattr__(self, "one_orbit", tuple(orbit))
        object.__setattr__(self, "one_is_finite", finite)
        period = None if finite else _find_period(digits)
        object.__setattr__(self, "periodicity_flag", period)
        if finite:
            warnings.warn(f"d(1, {beta}) is finite; the beta-shift is of finite type", stacklevel=2)
        elif period is not None:
            warnings.warn(
                f"d(1, {beta}) looks eventually periodic (period {period}) over {total} digits",
                stacklevel=2,
            )

    @property
    def digit_max(self) -> int:
        return math.floor(self.beta)

    @property
    def value(self) -> float:
        return float(self.beta)

    def __str__(self) -> str:
        return format_beta(self.beta)

    @cached_property
    def one_expansion_array(self) -> np.ndarray:
        """d(1, beta) as int64, zero padded to ``depth + GUARD_DIGITS`` when finite."""
        arr = np.zeros(self.depth + GUARD_DIGITS, dtype=np.int64)
        arr[: len(self.one_expansion)] = self.one_expansion
        return arr

    @cached_property
    def one_orbit_array(self) -> np.ndarray:
        arr = np.zeros(self.depth + GUARD_DIGITS + 1)
        arr[: len(self.one_orbit)] = [float(t) for t in self.one_orbit]
        return arr

    def one_digit(self, k: int) -> int:
        """Digit ``d_{k+1}(1, beta)`` (0-based index); zeros past a finite end."""
        if k < len(self.one_expansion):
            return self.one_expansion[k]
        if self.one_is_finite:
            return 0
        raise DepthExceeded(f"d(1, beta) only known to {len(self.one_expansion)} digits")

    def compare_with_one(self, digits: Sequence[int], start: int = 0, shift: int = 0) -> int:
        """Lexicographic comparison of ``digits[start:] 0^inf`` against ``sigma^shift d(1, beta)``.

        Returns -1, 0 or 1.  Equality can only be certified when d(1, beta) is
        finite; for a truncated infinite expansion a tie over the known window
        raises :class:`DepthExceeded`.
        """
        n = len(digits)
        known = len(self.one_expansion)
        k = 0
        while True:
            i, j = start + k, shift + k
            a = digits[i] if i < n else 0
            if j < known:
                b = self.one_expansion[j]
            elif self.one_is_finite:
                if i >= n:
                    return 0
                b = 0
            else:
                raise DepthExceeded("tie with d(1, beta) over its whole truncated window")
            if a != b:
                return -1 if a < b else 1
            k += 1


@dataclass(frozen=True)
class Cylinder:
    word: DigitWord
    a: Fraction
    b: Fraction
    is_full: bool

    @property
    def rank(self) -> int:
        return len(self.word)

    @property
    def length(self) -> Fraction:
        return self.b - self.a


class Expansion(NamedTuple):
    digits: DigitWord
    residual: Fraction


class CylinderCover(NamedTuple):
    cylinders: list[Cylinder]
    uncovered: Fraction


class ParryAutomaton:
    """Follower-state automaton of the beta-shift.

    State ``m`` means the current suffix agrees with the first ``m`` digits of
    d(1, beta).  From state ``m`` a digit below ``d_{m+1}`` resets to 0, the
    digit ``d_{m+1}`` advances to ``m + 1`` and larger digits are forbidden.
    """

    def __init__(self, beta: BetaParam, max_state: int | None = None):
        self.beta = beta
        self.max_state = len(beta.one_expansion) if max_state is None else int(max_state)
        if not beta.one_is_finite:
            self.max_state = min(self.max_state, len(beta.one_expansion))

    def bound(self, m: int) -> int:
        if m >= self.max_state and not self.beta.one_is_finite:
            raise DepthExceeded(f"automaton truncated at {self.max_state} states")
        return self.beta.one_digit(m)

    def transition(self, m: int, digit: int) -> int:
        b = self.bound(m)
        if digit < b:
            return 0
        if digit == b:
            return m + 1
        return FORBIDDEN

    def run(self, word: Sequence[int], state: int = 0) -> int:
        for d in word:
            state = self.transition(state, d)
            if state == FORBIDDEN:
                return FORBIDDEN
        return state

    def tail_ok(self, state: int, tail: Sequence[int] = ()) -> bool:
        """Whether ``tail 0^inf`` may follow a prefix ending in ``state``."""
        return self.beta.compare_with_one(tail, 0, state) < 0

    def accepts(self, word: Sequence[int]) -> bool:
        state = self.run(word)
        return state != FORBIDDEN and self.tail_ok(state)

    def image_length(self, state: int) -> Fraction:
        """Right end of ``T^k`` of a rank-k cylinder ending in ``state``."""
        if state < len(self.beta.one_orbit):
            return self.beta.one_orbit[state]
        if self.beta.one_is_finite:
            return Fraction(0)
        raise DepthExceeded("state beyond the known orbit of 1")

    def words(self, length: int, tail: Sequence[int] = ()) -> Iterator[DigitWord]:
        """All words ``w`` of the given length with ``w tail 0^inf`` admissible, in lex order."""
        dmax = self.beta.digit_max

        def rec(prefix: list[int], state: int):
            if len(prefix) == length:
                if self.tail_ok(state, tail):
                    yield tuple(prefix)
                return
            for d in range(dmax + 1):
                nxt = self.transition(state, d)
                if nxt == FORBIDDEN:
                    break
                prefix.append(d)
                yield from rec(prefix, nxt)
                prefix.pop()

        yield from rec([], 0)


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(x)


def expand(beta: BetaParam, x, depth: int, radius=0) -> Expansion:
    """Greedy digits ``d_k(x) = floor(beta T^{k-1} x)`` for ``k = 1..depth``.

    ``x = 1`` follows the expansion-of-one rule ``T(1) = beta - floor(beta)``.
    With a positive ``radius`` the point is only known to lie in
    ``[x - radius, x + radius]``; a digit that is not constant on that interval
    raises :class:`AmbiguousBoundary`.
    """
    x = _as_fraction(x)
    radius = _as_fraction(radius)
    if depth < 0:
        raise DomainError("depth must be non-negative")
    if not (0 <= x <= 1) or (x == 1 and radius):
        raise DomainError(f"x must lie in [0, 1), got {x}")
    b = beta.beta
    digits = []
    if radius == 0:
        t = x
        for _ in range(depth):
            y = b * t
            d = math.floor(y)
            digits.append(d)
            t = y - d
        return Expansion(tuple(digits), t)
    lo, hi = x - radius, x + radius
    if lo < 0 or hi >= 1:
        raise AmbiguousBoundary("uncertainty interval leaves [0, 1)")
    for k in range(depth):
        ylo, yhi = b * lo, b * hi
        d = math.floor(ylo)
        if math.floor(yhi) != d:
            raise AmbiguousBoundary(f"digit {k + 1} not determined at radius {radius}")
        digits.append(d)
        lo, hi = ylo - d, yhi - d
    return Expansion(tuple(digits), (lo + hi) / 2)


def value_of(beta: BetaParam, word: Sequence[int]) -> Fraction:
    """Exact value ``sum_k w_k beta^{-k}`` of a digit word."""
    v = Fraction(0)
    b = beta.beta
    for d in reversed(word):
        v = (v + d) / b
    return v


def word_float(beta: BetaParam, word: Sequence[int]) -> float:
    v = 0.0
    b = beta.value
    for d in reversed(word):
        v = (v + d) / b
    return v


def is_admissible(word: Sequence[int], beta: BetaParam) -> bool:
    """Parry's criterion by direct comparison of every suffix of ``w 0^inf``."""
    dmax = beta.digit_max
    if any(d < 0 or d > dmax for d in word):
        raise DomainError(f"digits must lie in 0..{dmax}")
    known = len(beta.one_expansion)
    if len(word) > known and not beta.one_is_finite:
        raise DepthExceeded(f"word longer than the truncated d(1, beta) ({known} digits)")
    return all(beta.compare_with_one(word, s) < 0 for s in range(len(word)))


def count_admissible_prefixes(automaton: ParryAutomaton, n: int, tail: Sequence[int] = ()) -> int:
    """Number of length-``n`` words ``w`` with ``w tail 0^inf`` admissible.

    Equals ``#T^{-n}(value(tail))``; computed by dynamic programming over the
    follower states.
    """
    if n < 0:
        raise DomainError("n must be non-negative")
    counts = {0: 1}
    for _ in range(n):
        nxt: dict[int, int] = {}
        for m, c in counts.items():
            b = automaton.bound(m)
            if b:
                nxt[0] = nxt.get(0, 0) + b * c
            nxt[m + 1] = nxt.get(m + 1, 0) + c
        counts = nxt
    return sum(c for m, c in counts.items() if automaton.tail_ok(m, tail))


def cylinder(automaton: ParryAutomaton, word: Sequence[int]) -> Cylinder:
    state = automaton.run(word)
    if state == FORBIDDEN or not automaton.tail_ok(state):
        raise DomainError(f"{format_word(word)} is not an admissible prefix")
    beta = automaton.beta
    a = value_of(beta, word)
    length = automaton.image_length(state) / beta.beta ** len(word)
    return Cylinder(tuple(word), a, a + length, state == 0)


def cylinders(automaton: ParryAutomaton, rank: int) -> list[Cylinder]:
    """All nonempty rank-``rank`` cylinders, in increasing order of position."""
    return [cylinder(automaton, w) for w in automaton.words(rank)]


def full_cylinder_cover(beta: BetaParam, k: int, automaton: ParryAutomaton | None = None) -> CylinderCover:
    """Full rank-``k`` cylinders plus full rank-``k+1`` cylinders inside the
    non-full rank-``k`` ones, with the Lebesgue measure left uncovered."""
    if k < 1:
        raise DomainError("k must be at least 1")
    automaton = automaton or ParryAutomaton(beta)
    out = []
    for cyl in cylinders(automaton, k):
        if cyl.is_full:
            out.append(cyl)
            continue
        for d in range(beta.digit_max + 1):
            w = cyl.word + (d,)
            state = automaton.run(w)
            if state == FORBIDDEN:
                break
            if state == 0:
                out.append(cylinder(automaton, w))
    covered = sum((c.length for c in out), Fraction(0))
    return CylinderCover(out, 1 - covered)


def sample_uniform_words(beta: BetaParam, rng: np.random.Generator, size: int, depth: int) -> list[DigitWord]:
    """Expand ``size`` Lebesgue-uniform rationals ``u / 2^128`` to ``depth`` digits.

    Integer-only arithmetic: with ``beta = p/q`` the residual after ``k`` steps
    is ``a_k / (2^128 q^k)``.
    """
    p, q = beta.beta.numerator, beta.beta.denominator
    raw = rng.bytes(16 * size)
    out = []
    for i in range(size):
        a = int.from_bytes(raw[16 * i:16 * i + 16], "little")
        den = 1 << 128
        digits = []
        for _ in range(depth):
            den *= q
            pa = p * a
            d = pa // den
            a = pa - d * den
            digits.append(d)
        out.append(tuple(digits))
    return out


def stationary_state_weights(beta: BetaParam, max_state: int | None = None) -> np.ndarray:
    """Invariant law of the follower state, proportional to ``T^m(1) beta^{-m}``."""
    orbit = beta.one_orbit_array
    m = len(beta.one_orbit) if max_state is None else max_state
    m = min(m, len(orbit))
    w = np.array([orbit[i] * beta.value ** (-i) for i in range(m)])
    return w / w.sum()


def sample_digit_streams(
    beta: BetaParam,
    rng: np.random.Generator,
    size: int,
    length: int,
    invariant: bool = True,
) -> np.ndarray:
    """Digit sequences of random points, generated through the follower states.

    Conditioned on the prefix, ``T^k x`` is uniform on ``[0, T^m(1))`` where
    ``m`` is the follower state, so the digits form a Markov chain over states.
    Starting in state 0 samples Lebesgue measure; starting from the stationary
    state law samples the invariant measure ``m = h dx`` exactly.
    """
    orbit = beta.one_orbit_array
    n_states = len(beta.one_orbit) - 1 if not beta.one_is_finite else len(beta.one_orbit)
    one = beta.one_expansion_array
    if invariant:
        w = stationary_state_weights(beta, n_states)
        state = rng.choice(n_states, size=size, p=w)
    else:
        state = np.zeros(size, dtype=np.int64)
    b = beta.value
    out = np.empty((size, length), dtype=np.int8)
    for k in range(length):
        v = orbit[state] * rng.random(size)
        d = np.floor(b * v).astype(np.int64)
        bound = one[np.minimum(state, len(one) - 1)]
        d = np.minimum(d, bound)
        out[:, k] = d
        state = np.where(d < bound, 0, state + 1)
        if state.max() >= n_states:
            raise DepthExceeded("digit chain ran past the truncated orbit of 1")
    return out


def _parry_terms(beta: BetaParam, terms: int | None):
    orbit = beta.one_orbit_array
    terms = len(beta.one_orbit) if terms is None else min(terms, len(beta.one_orbit))
    t = orbit[:terms]
    w = beta.value ** -np.arange(terms, dtype=float)
    return t, w, float(np.dot(w, t))


def parry_density(beta: BetaParam, x, terms: int | None = None) -> np.ndarray:
    """Invariant density ``h(x) = C sum_{n >= 0: x < T^n(1)} beta^{-n}`` (Parry's series)."""
    t, w, norm = _parry_terms(beta, terms)
    order = np.argsort(t)
    ts = t[order]
    # tail[i] = sum of weights of the i-th smallest orbit point and above
    tail = np.concatenate([np.cumsum(w[order][::-1])[::-1], [0.0]])
    idx = np.searchsorted(ts, np.asarray(x, dtype=float), side="right")
    return tail[idx] / norm


def invariant_measure(beta: BetaParam, a, b, terms: int | None = None) -> float:
    """``m([a, b))`` for the normalized Parry density."""
    if b <= a:
        return 0.0
    t, w, norm = _parry_terms(beta, terms)
    return float(np.dot(w, np.clip(t, a, b) - a)) / norm


def alpha_breaks(beta: BetaParam) -> tuple[Fraction, ...]:
    """Endpoints of the natural partition ``[j/beta, (j+1)/beta) ∩ [0, 1)``."""
    pts = [Fraction(j) / beta.beta for j in range(beta.digit_max + 1)]
    pts = [p for p in pts if p < 1]
    return tuple(pts) + (Fraction(1),)
