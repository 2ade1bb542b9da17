"""Greedy digits, admissible words and the successor map for beta = 5/2."""

from fractions import Fraction

import numpy as np

from beta_adic.adic import adic_step, predecessor, successor
from beta_adic.beta_core import (
    BetaParam,
    ParryAutomaton,
    count_admissible_prefixes,
    expand,
    full_cylinder_cover,
    is_admissible,
    value_of,
)

beta = BetaParam(Fraction(5, 2))

# The expansion of 1 governs which digit strings occur at all.
print("d(1) starts", beta.one_expansion[:12])

# Exact greedy digits of 1/2 and the value they reconstruct.
exp = expand(beta, Fraction(1, 2), 8)
print("1/2 ->", exp.digits, "value of the first four:", value_of(beta, exp.digits[:4]))

# A word is allowed when every suffix stays below d(1).
for w in [(2, 2), (1, 1, 1), (2, 1, 0)]:
    print(w, "admissible" if is_admissible(w, beta) else "forbidden")

# Counting preimages: every point has this many T^n-preimages of a given tail.
aut = ParryAutomaton(beta)
print("preimages of 0 at n = 1..6:", [count_admissible_prefixes(aut, n) for n in range(1, 7)])

# Walking a few steps of the successor map from zero, and back again.
w = (0, 0, 0, 0)
for _ in range(6):
    step = adic_step(beta, w)
    print(w, "->", step.result, "n0 =", step.n0)
    w = step.result
print("one step back:", predecessor(beta, w))

# Rank-1 and rank-2 full cylinders leave a gap of 1/25.
cover = full_cylinder_cover(beta, 1)
print("full cylinders:", [c.word for c in cover.cylinders], "uncovered:", cover.uncovered)

# The successor moves Lebesgue-typical points and keeps them typical.
rng = np.random.default_rng(0)
from beta_adic.beta_core import sample_uniform_words, word_float

xs = sample_uniform_words(beta, rng, 5, 20)
print([round(word_float(beta, x), 4) for x in xs])
print([round(word_float(beta, successor(beta, x)), 4) for x in xs])
