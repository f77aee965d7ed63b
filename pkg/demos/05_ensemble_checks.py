"""
Ensembles and limit-theorem checks
==================================

run_ensemble simulates independent replicates on their own Philox streams;
verify picks the checks of the regime and reports each with its target,
estimate, standard error and tolerance.
"""

from rerw import EnsembleSpec, WalkParams, run_ensemble, verify
from rerw.montecarlo import lil_diagnostic, report_json
from rerw.moments import com_second_moment

# Diffusive: variance, KS normality, functional covariance, QSL, centre of mass.
spec = EnsembleSpec(WalkParams(0.35, 1), 10**4, 2000, master_seed=11, time_grid=(0.25, 0.5, 1.0))
report = verify(spec)
for c in report["checks"]:
    print(("PASS " if c["pass"] else "FAIL ") + f"{c['name']:28s} {c['estimate']:.4g} vs {c['target']:.4g}")

# A miss is not automatically a bug: the exact finite-n value tells the two apart.
# The centre of mass converges slowly here; at n = 1e4 its exact variance is 0.316.
print(f"exact finite-n centre-of-mass variance: {com_second_moment(spec.params, spec.n_steps) / spec.n_steps:.4f}")

# Superdiffusive: moments of the random limit L and the Cauchy ratios.
rep = verify(EnsembleSpec(WalkParams(0.9, 1, q=1.0), 10**5, 500, master_seed=2, time_grid=(1.0,)))
print()
for c in rep["checks"]:
    if not c["name"].startswith("martingale"):
        print(("PASS " if c["pass"] else "FAIL ") + f"{c['name']:40s} {c['estimate']:.4g} vs {c['target']:.4g}")

# Critical: the LIL running maximum is a report, not a verdict.
crit = run_ensemble(EnsembleSpec(WalkParams(0.25, 2), 10**5, 200, master_seed=3))
lil = lil_diagnostic(crit)
print(f"\nLIL constant {lil['constant']:.4f}; mean running max at n = 1e5: {lil['running_max_mean'][-1]:.3f}")

# Same spec, different thread count: identical report.
small = EnsembleSpec(WalkParams(0.6, 0), 2000, 200, master_seed=5)
print("thread-independent:", report_json(verify(small, threads=1)) == report_json(verify(small, threads=4)))
