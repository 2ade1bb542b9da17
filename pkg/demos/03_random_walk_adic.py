"""The skew product driven by the first digit: occupation sums and block counts."""

from fractions import Fraction

import numpy as np

from beta_adic._kernels import OrbitKernel
from beta_adic.beta_core import BetaParam, sample_uniform_words
from beta_adic.cocycle import SkewPoint, Window, block_occupation, first_digit, occupation_sum, tau_phi_step

beta = BetaParam(Fraction(5, 2))
d1 = first_digit(beta)

# A handful of exact skew steps: the fiber moves by the cocycle.
p = SkewPoint((1, 0, 1, 1), 0)
for _ in range(5):
    p = tau_phi_step(d1, p)
    print(p.base, p.fiber)

# Returns to the fiber 0 along one orbit, scaled by sqrt(log n) / n.
rng = np.random.default_rng(1)
w = sample_uniform_words(beta, rng, 1, 40)[0]
for n in (10**3, 10**4, 10**5):
    res = occupation_sum(d1, SkewPoint(w, 0), n, Window.point(0))
    print(n, res.count, round(res.count * np.sqrt(np.log(n)) / n, 3))

# Blocks of rank n hold about beta^n points each.
kernel = OrbitKernel(d1)
total, per = kernel.blocks(w, 8, 20)
print("K_n^r / (beta^n r) =", round(total / (2.5**8 * 20), 3))

# The occupation count over whole blocks sits between two preimage counts.
res = block_occupation(d1, w, 5, 6)
print("lower", res.lower, "count", res.count, "upper", res.upper)
