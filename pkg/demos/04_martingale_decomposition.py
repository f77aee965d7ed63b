"""
Martingale decomposition
========================

S_n splits into two martingales: M_n = a_n Y_n and N_n = S_n - (a/(a+c)) Y_n,
with S_n = N_n + (a/(a+c)) M_n / a_n.  Their predictable quadratic variations
are explicit; after normalisation they approach the limit matrix V.
"""

import numpy as np

from rerw import WalkParams, run
from rerw.analytic import a_sequence, limit_matrices
from rerw.martingale import (
    conditional_moment_diagnostics,
    decompose_path,
    eps_bound,
    final_state,
    increments,
    normalized_qv,
    quadratic_variations,
)
from rerw.model import make_rng

P = WalkParams(0.35, 1)
n = 10**5
traj = run(P, n, seed=5, keep_path=True)

series = decompose_path(traj)
S = np.cumsum(traj.X[1:])
print("reconstruction max abs error:", np.abs(series.reconstruct_S(P) - S).max())

qvM, qvN = quadratic_variations(traj)
v = np.cumsum(a_sequence(P, n) ** 2)
print(f"<M>_n / (K v_n) at n = {n}: {qvM[-1] / (P.K * v[-1]):.4f}  (never above 1)")
print(f"<N>_n / n: {qvN[-1] / n:.4f}")

V, _ = limit_matrices(P)
print("normalised quadratic variation:\n", normalized_qv(traj, P, n).round(4))
print("limit V:\n", V.round(4))

# Increment bounds.  |eps| <= |a + c| + 1 + c holds on every path; the tighter
# c + 2 does not (c = 2, p = 0.75 reaches 5.32 on a hand-built path).
inc = increments(traj)
print(f"\nmax |eps| {inc.max_abs_eps:.3f} <= bound {eps_bound(P):.3f}")

# One-step conditional moments from the path's final state.
hist, X, _, _ = final_state(traj)
rep = conditional_moment_diagnostics(hist, X, P, 10**6, make_rng(1))
for chk in rep["checks"]:
    print(f"{chk['name']:10s} estimate {chk['estimate']:.4f} target {chk['target']:.4f} se {chk['stderr']:.4f}")
