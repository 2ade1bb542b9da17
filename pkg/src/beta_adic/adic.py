"""The adic (reverse-lexicographic successor) transformation and block counts.

All functions here operate on exact digit tuples and serve both as the public
API and as the reference against which the compiled orbit kernels are tested.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .beta_core import (
    BetaParam,
    DigitWord,
    ParryAutomaton,
    count_admissible_prefixes,
)
from .errors import DepthExceeded, DomainError, MaximalPoint, MinimalPoint

#: extra positions searched past the end of a word for the successor index
HORIZON = 64


@dataclass(frozen=True)
class AdicStep:
    n0: int
    result: DigitWord


@dataclass(frozen=True)
class BlockStats:
    n: int
    K_n: int
    J_n: int
    r: int
    K_n_r: int


def _digit(word: Sequence[int], i: int) -> int:
    return word[i] if i < len(word) else 0


def below_threshold(beta: BetaParam, word: Sequence[int], k: int) -> bool:
    """Whether ``T^k x < 1 - 1/beta``, i.e. ``(d_{k+1} + 1, d_{k+2}, ...)`` is admissible."""
    bumped = (_digit(word, k) + 1,) + tuple(word[k + 1:])
    return beta.compare_with_one(bumped) < 0


def successor_index(beta: BetaParam, word: Sequence[int], horizon: int = HORIZON) -> int:
    """Least ``n0 >= 0`` with ``T^{n0} x < 1 - 1/beta``."""
    for k in range(len(word) + horizon + 1):
        if below_threshold(beta, word, k):
            return k
    raise MaximalPoint(f"no successor index within {len(word) + horizon} digits")


def adic_step(beta: BetaParam, word: Sequence[int], horizon: int = HORIZON) -> AdicStep:
    n0 = successor_index(beta, word, horizon)
    out = list(word) + [0] * max(0, n0 + 1 - len(word))
    for i in range(n0):
        out[i] = 0
    out[n0] += 1
    return AdicStep(n0, tuple(out))


def successor(beta: BetaParam, word: Sequence[int], horizon: int = HORIZON) -> DigitWord:
    """Reverse-lexicographic successor ``tau(x) = (0^{n0}, d_{n0+1}+1, d_{n0+2}, ...)``.

    The result keeps the length of ``word`` unless the increment lands past it.
    """
    return adic_step(beta, word, horizon).result


def predecessor(beta: BetaParam, word: Sequence[int]) -> DigitWord:
    """Inverse of :func:`successor` on words that are not all zero.

    Decrements the first nonzero digit and refills the prefix before it from
    right to left with the largest digit keeping the word admissible.
    """
    k = next((i for i, d in enumerate(word) if d), None)
    if k is None:
        raise MinimalPoint("the all-zero word has no predecessor")
    out = list(word)
    out[k] -= 1
    for i in range(k - 1, -1, -1):
        # d_1 = floor(beta) > 0 so digit 0 always fits; search downward
        for d in range(beta.digit_max, -1, -1):
            out[i] = d
            if beta.compare_with_one(out, i) < 0:
                break
    return tuple(out)


def is_n_extremal(beta: BetaParam, word: Sequence[int], n: int, horizon: int = HORIZON) -> tuple[bool, bool]:
    """(n-minimal, n-maximal) within the preimage set ``T^{-n}(T^n x)``.

    The reverse-lex least prefix is ``0^n``; ``x`` is the greatest exactly when
    its successor must change a digit beyond position ``n``.
    """
    if n < 0:
        raise DomainError("n must be non-negative")
    if n > len(word) + horizon:
        raise DepthExceeded(f"n = {n} beyond word length plus horizon")
    minimal = all(_digit(word, i) == 0 for i in range(n))
    maximal = successor_index(beta, word, horizon) >= n
    return minimal, maximal


def steps_to_maximal(beta: BetaParam, word: Sequence[int], n: int) -> tuple[int, DigitWord]:
    """``K_n(x)`` and ``tau^{K_n(x)} x`` by direct iteration."""
    k = 0
    w = tuple(word)
    while successor_index(beta, w) < n:
        w = successor(beta, w)
        k += 1
    return k, w


def tau_n(beta: BetaParam, word: Sequence[int], n: int) -> DigitWord:
    """Jump to the next n-minimal point, ``tau^{K_n(x) + 1} x``."""
    _, w = steps_to_maximal(beta, word, n)
    return successor(beta, w)


def preimage_count(beta: BetaParam, word: Sequence[int], n: int, automaton: ParryAutomaton | None = None) -> int:
    """``J_n(x) = #T^{-n}(T^n x)``."""
    automaton = automaton or ParryAutomaton(beta)
    return count_admissible_prefixes(automaton, n, tuple(word[n:]))


def block_stats(beta: BetaParam, word: Sequence[int], n: int, r: int, automaton: ParryAutomaton | None = None) -> BlockStats:
    """``K_n``, ``J_n`` at ``x`` and ``K_n^r(x) = K_n(x) + sum_{j=1}^{r-1} K_n(tau_n^j x)``."""
    if n < 0 or r < 0:
        raise DomainError("n and r must be non-negative")
    k0, w = steps_to_maximal(beta, word, n)
    j_n = preimage_count(beta, word, n, automaton)
    total = 0
    for j in range(r):
        if j == 0:
            k = k0
        else:
            w = successor(beta, w)
            k, w = steps_to_maximal(beta, w, n)
        total += k
    return BlockStats(n=n, K_n=k0, J_n=j_n, r=r, K_n_r=total)


def agree_index(x: Sequence[int], y: Sequence[int]) -> int:
    """``N(x, x') = min{n >= 1 : x_j = x'_j for all j >= n}`` (1-based, zero tails)."""
    last = 0
    for i in range(max(len(x), len(y))):
        if _digit(x, i) != _digit(y, i):
            last = i + 1
    return last + 1
