"""
Limit constants by regime
=========================

The regime is set by the sign of 2a + c - 1, with a = 2p - 1.  Each regime has
its own set of limit constants, all evaluated in closed form.
"""

import numpy as np

from rerw import WalkParams, regime_limits
from rerw.analytic import a_n, a_n_product, diffusive_kernel, lc_moments, lc_second_moment_published

for P in (WalkParams(0.35, 1), WalkParams(0.6, 0.5), WalkParams(0.6, 0), WalkParams(0.25, 2), WalkParams(0.9, 1, q=1.0)):
    lim = regime_limits(P).to_dict()
    shown = {k: round(v, 5) if isinstance(v, float) else v for k, v in lim.items() if v is not None}
    print(f"p={P.p:<5} c={P.c:<4} q={P.q:<4}", shown)

# a_n is a ratio of Gamma functions; the log-gamma route stays accurate where
# the defining product would need millions of factors.
P = WalkParams(0.35, 1)
for n in (10, 1000, 10**5):
    print(f"a_{n}: gamma form {a_n(P, n):.15g}   product {a_n_product(P, n):.15g}")

# The covariance kernel of the scaled path reduces to min(s, t) at p = 0.35, c = 1.
grid = [0.25, 0.5, 1.0]
print("\nkernel at p=0.35, c=1:")
print(np.array([[diffusive_kernel(P, min(s, t), max(s, t)) for t in grid] for s in grid]))

# Superdiffusive limit moments.  The published closed form of the second
# moment solves the recursion from E[Y_1^2] = 1 + 2ac + c^2, while Y_1 = +-1
# gives E[Y_1^2] = 1; the two differ unless c = 0.
Q = WalkParams(0.9, 1, q=1.0)
mean, second = lc_moments(Q)
print(f"\nE[L] = {mean:.5f}, E[L^2] = {second:.5f}, published E[L^2] = {lc_second_moment_published(Q):.5f}")
