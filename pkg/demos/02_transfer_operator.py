"""Ulam approximation of the invariant density and the asymptotic variance."""

from fractions import Fraction

import numpy as np

from beta_adic.beta_core import BetaParam, parry_density
from beta_adic.cocycle import first_digit
from beta_adic.spectral import (
    MONTE_CARLO,
    aperiodicity_scan,
    build_ulam,
    invariant_density,
    sigma_squared,
    spectral_sigma2,
)

beta = BetaParam(Fraction(5, 2))
op = build_ulam(beta, 4096)

# Power iteration on the Ulam matrix against the Parry series.
est = invariant_density(op)
x = np.linspace(0.01, 0.99, 7)
print("ulam :", np.round(est(x), 4))
print("parry:", np.round(parry_density(beta, x), 4))
print("density range", est.values.min(), est.values.max())

# Variance of the first digit from the curvature of the twisted eigenvalue.
d1 = first_digit(beta)
spec = spectral_sigma2(d1, base=op)
mc = sigma_squared(d1, MONTE_CARLO, n=1000, trials=5000, seed=0)
print(f"sigma^2 spectral {spec.sigma2:.5f}, Monte Carlo {mc.sigma2:.5f} +- {mc.stderr:.5f}")

# Twisted spectral radius away from t = 0: no eigenvalue on the unit circle.
grid = np.linspace(np.pi / 64, np.pi, 64)
rep = aperiodicity_scan(d1, grid, base=build_ulam(beta, 1024))
print("aperiodicity:", rep.verdict, "max modulus", rep.max_modulus, "at t =", rep.argmax_t)
print("modulus at pi:", rep.moduli[-1])
