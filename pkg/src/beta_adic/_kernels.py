"""Compiled orbit kernels for the adic and random walk adic maps.

Words live in a fixed-capacity int64 buffer plus a length; the implicit tail
is zero.  Fibers are float64, which is exact for integer observables and for
dyadic step values in the range used here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DepthExceeded, MaximalPoint

OK = 0
ERR_MAXIMAL = -1
ERR_DEPTH = -2
ERR_CAPACITY = -3

#: extra buffer room for word growth along long orbits
GROWTH = 64


@njit(cache=True, nogil=True)
def successor_index(w, length, one, one_len, one_finite, horizon):
    """Least k with (w[k] + 1, w[k+1], ...) lexicographically below d(1, beta)."""
    for k in range(length + horizon + 1):
        j = 0
        while True:
            i = k + j
            a = w[i] if i < length else 0
            if j == 0:
                a += 1
            if j < one_len:
                b = one[j]
            elif one_finite:
                if i >= length:
                    break
                b = 0
            else:
                return ERR_DEPTH
            if a < b:
                return k
            if a > b:
                break
            j += 1
    return ERR_MAXIMAL


@njit(cache=True, nogil=True)
def _piece(breaks, x):
    i = np.searchsorted(breaks, x, side="right") - 1
    if i < 0:
        i = 0
    if i > breaks.shape[0] - 2:
        i = breaks.shape[0] - 2
    return i


@njit(cache=True, nogil=True)
def cocycle_increment(w, length, n0, table, breaks, pvals, beta):
    """psi(x, tau x) given the successor index n0 of x (word not yet advanced)."""
    if table.shape[0] > 0:
        inc = 0.0
        for i in range(n0):
            inc += table[w[i]] - table[0]
        d = w[n0] if n0 < length else 0
        inc += table[d] - table[d + 1]
        return inc
    s = 0.0
    for i in range(length - 1, n0, -1):
        s = (w[i] + s) / beta
    d = w[n0] if n0 < length else 0
    v_old = (d + s) / beta
    v_new = (d + 1 + s) / beta
    inc = pvals[_piece(breaks, v_old)] - pvals[_piece(breaks, v_new)]
    for i in range(n0 - 1, -1, -1):
        v_old = (w[i] + v_old) / beta
        v_new = v_new / beta
        inc += pvals[_piece(breaks, v_old)] - pvals[_piece(breaks, v_new)]
    return inc


@njit(cache=True, nogil=True)
def advance(w, length, n0):
    for i in range(n0):
        w[i] = 0
    w[n0] += 1
    if n0 + 1 > length:
        length = n0 + 1
    return length


@njit(cache=True, nogil=True)
def run_occupation(w, length, fiber, one, one_len, one_finite, table, breaks, pvals, beta,
                   lo, hi, is_point, checkpoints, counts, horizon):
    """Iterate tau_phi, recording S_n at each checkpoint (sorted, last = total steps)."""
    cap = w.shape[0]
    n_total = checkpoints[checkpoints.shape[0] - 1]
    ci = 0
    count = 0
    while ci < checkpoints.shape[0] and checkpoints[ci] == 0:
        counts[ci] = 0
        ci += 1
    for k in range(n_total):
        if is_point:
            if fiber == lo:
                count += 1
        elif fiber >= lo and fiber < hi:
            count += 1
        while ci < checkpoints.shape[0] and checkpoints[ci] == k + 1:
            counts[ci] = count
            ci += 1
        n0 = successor_index(w, length, one, one_len, one_finite, horizon)
        if n0 < 0:
            return length, fiber, n0
        if n0 + 1 > cap:
            return length, fiber, ERR_CAPACITY
        fiber += cocycle_increment(w, length, n0, table, breaks, pvals, beta)
        length = advance(w, length, n0)
    return length, fiber, OK


@njit(cache=True, nogil=True)
def run_adic(w, length, one, one_len, one_finite, steps, horizon):
    """Apply tau ``steps`` times in place."""
    cap = w.shape[0]
    for _ in range(steps):
        n0 = successor_index(w, length, one, one_len, one_finite, horizon)
        if n0 < 0:
            return length, n0
        if n0 + 1 > cap:
            return length, ERR_CAPACITY
        length = advance(w, length, n0)
    return length, OK


@njit(cache=True, nogil=True)
def run_blocks(w, length, one, one_len, one_finite, n, r, horizon, per_block):
    """K_n^r(x): per_block[j] = K_n(tau_n^j x); the word ends at tau^{K_n^r + r - 1} x."""
    cap = w.shape[0]
    total = 0
    for j in range(r):
        if j > 0:
            n0 = successor_index(w, length, one, one_len, one_finite, horizon)
            if n0 < 0:
                return total, length, n0
            if n0 + 1 > cap:
                return total, length, ERR_CAPACITY
            length = advance(w, length, n0)
        k = 0
        while True:
            n0 = successor_index(w, length, one, one_len, one_finite, horizon)
            if n0 < 0:
                return total, length, n0
            if n0 >= n:
                break
            length = advance(w, length, n0)
            k += 1
        per_block[j] = k
        total += k
    return total, length, OK


def raise_status(status: int) -> None:
    if status == ERR_MAXIMAL:
        raise MaximalPoint("successor undefined within the search horizon")
    if status == ERR_DEPTH:
        raise DepthExceeded("comparison ran past the truncated d(1, beta)")
    if status == ERR_CAPACITY:
        raise DepthExceeded("word grew past the buffer capacity")


@dataclass
class OrbitState:
    buf: np.ndarray
    length: int
    fiber: float = 0.0

    def word(self) -> tuple[int, ...]:
        return tuple(int(d) for d in self.buf[: self.length])


class OrbitKernel:
    """Binds an observable (or none) and its base to the compiled kernels."""

    def __init__(self, obs=None, beta=None, horizon: int = 64):
        self.obs = obs
        self.beta = beta if beta is not None else obs.beta
        self.horizon = horizon
        one = self.beta.one_expansion
        self.one = np.array(one, dtype=np.int64)
        self.one_len = len(one)
        self.one_finite = bool(self.beta.one_is_finite)
        if obs is not None:
            self.table, self.breaks, self.pvals = obs.kernel_spec()
        else:
            self.table, self.breaks, self.pvals = np.empty(0), np.zeros(2), np.zeros(1)

    def state(self, word, fiber: float = 0.0, capacity: int | None = None) -> OrbitState:
        cap = capacity or len(word) + GROWTH
        buf = np.zeros(cap, dtype=np.int64)
        buf[: len(word)] = word
        return OrbitState(buf, len(word), float(fiber))

    def occupation(self, word, fiber, window, checkpoints, state: OrbitState | None = None):
        st = state or self.state(word, fiber)
        lo, hi, is_point = window.bounds()
        checkpoints = np.asarray(checkpoints, dtype=np.int64)
        counts = np.zeros(len(checkpoints), dtype=np.int64)
        length, fib, status = run_occupation(
            st.buf, st.length, st.fiber, self.one, self.one_len, self.one_finite,
            self.table, self.breaks, self.pvals, self.beta.value,
            lo, hi, is_point, checkpoints, counts, self.horizon,
        )
        raise_status(status)
        st.length, st.fiber = length, fib
        return counts, st

    def advance(self, st: OrbitState, steps: int) -> OrbitState:
        length, status = run_adic(st.buf, st.length, self.one, self.one_len, self.one_finite, steps, self.horizon)
        raise_status(status)
        st.length = length
        return st

    def blocks(self, word, n: int, r: int):
        """(K_n^r, per-block K_n values) for the point ``word``."""
        st = self.state(word)
        per = np.zeros(max(r, 1), dtype=np.int64)
        total, length, status = run_blocks(
            st.buf, st.length, self.one, self.one_len, self.one_finite, n, r, self.horizon, per
        )
        raise_status(status)
        return int(total), per[:r]
