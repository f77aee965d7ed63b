"""
Exact finite-n moments
======================

E[Y_n], E[Y_n^2], E[S_n], E[S_n Y_n] and E[S_n^2] follow a closed linear
recursion, so every finite-n moment is computed exactly.  Exhaustive
enumeration of all outcomes checks the recursion at small n.
"""

from rerw import WalkParams, joint_moments, moment_table, second_moment_Y_closed, second_moment_Y_recursive
from rerw.analytic import diffusive_variance
from rerw.enumeration import enumerated_moments

P = WalkParams(0.75, 1, q=1.0)
for n in range(1, 6):
    print(n, joint_moments(P, n), "\n ", enumerated_moments(P, n))

# The Gamma-function closed form of E[Y_n^2] against the recursion.
Q = WalkParams(0.9, 1)
print(f"\nE[Y_1000^2]: closed {second_moment_Y_closed(Q, 1000):.10g}, recursive {second_moment_Y_recursive(Q, 1000):.10g}")

# How far is n = 1e4 from the limit?  At p = 0.35, c = 1 the variance is
# within 4%; at p = 0.6, c = 0.5 the gap closes like n^(-1/15) and is still 30%.
for R in (WalkParams(0.35, 1), WalkParams(0.6, 0.5)):
    limit = diffusive_variance(R)
    for t in moment_table(R, [10**2, 10**4, 10**6]):
        print(f"p={R.p} c={R.c} n={t.n:>8d}  E[S_n^2]/n = {t.eS2 / t.n:.4f}  (limit {limit:g})")
