"""Ensemble runner and the statistical checks built on it.

Replicate ``r`` draws from ``make_rng(master_seed, r)``, an independent Philox
stream, and writes into row ``r`` of the result arrays, so an ensemble is the
same whatever the thread count or completion order.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import analytic
from ._engine import simulate
from .analytic import a_n, forced_regime
from .model import BACKENDS, Regime, RegimeError, WalkParams, classify_regime, make_rng
from .moments import moment_path

DEFAULT_GRID = (0.25, 0.5, 0.75, 1.0)
KS_ALPHA = 0.01
KS_ATTEMPTS = 3
Z_SE = 4.0

DEFAULT_TOLERANCES = {
    "clt_diffusive": 0.05,
    "clt_critical": 0.15,
    "functional_covariance": 0.10,
    "qsl_mean": 0.10,
    "qsl_single": 0.20,
    "com": 0.07,
    "lc_mean": 0.05,
    "lc_second_moment": 0.10,
}


@dataclass(frozen=True)
class EnsembleSpec:
    params: WalkParams
    n_steps: int
    replicates: int
    master_seed: int = 0
    time_grid: tuple = DEFAULT_GRID
    backend: str = "record"
    force_regime: Regime | None = None

    def __post_init__(self):
        if self.replicates < 2:
            raise ValueError(f"replicates must be >= 2, got {self.replicates}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown sampler backend {self.backend!r}")
        grid = tuple(sorted(set(float(s) for s in self.time_grid)))
        if not grid or grid[0] <= 0 or grid[-1] > 1:
            raise ValueError(f"grid fractions must lie in (0, 1], got {self.time_grid}")
        object.__setattr__(self, "time_grid", grid)
        if self.force_regime is not None:
            object.__setattr__(self, "force_regime", Regime(self.force_regime))

    @property
    def regime(self) -> Regime:
        return self.force_regime or classify_regime(self.params)

    def grid_indices(self) -> np.ndarray:
        """Step index of each grid point: ``floor(n s)``, or ``floor(n^s)`` at criticality."""
        n = self.n_steps
        if self.regime is Regime.CRITICAL:
            idx = [math.floor(n**s * (1 + 1e-12)) for s in self.time_grid]
        else:
            idx = [math.floor(n * s + 1e-9) for s in self.time_grid]
        return np.array([min(max(1, k), n) for k in idx], dtype=np.int64)

    def martingale_pairs(self) -> list[tuple[int, int]]:
        n = self.n_steps
        if n < 2:
            return []
        pairs = {(k, k + 1) if k < n else (n - 1, n) for k in self.grid_indices().tolist()}
        return sorted(pairs)

    def decades(self) -> list[int]:
        out = [10**j for j in range(1, 19) if 10**j < self.n_steps]
        return out + [self.n_steps]

    def checkpoints(self) -> np.ndarray:
        pts = set(self.grid_indices().tolist()) | set(self.decades()) | {1, self.n_steps}
        for k, m in self.martingale_pairs():
            pts |= {k, m}
        return np.array(sorted(pts), dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "p": self.params.p,
            "c": self.params.c,
            "q": self.params.q,
            "n_steps": int(self.n_steps),
            "replicates": int(self.replicates),
            "master_seed": int(self.master_seed),
            "time_grid": list(self.time_grid),
            "backend": self.backend,
            "force_regime": self.force_regime.value if self.force_regime else None,
        }


@dataclass
class EnsembleSummary:
    """Per-replicate observations plus the statistics derived from them.

    Rows of ``S``, ``Y`` and ``lil`` follow ``checkpoints``; rows of every array
    are replicate indices.  When ``partial`` is set only ``completed`` rows hold data.
    """

    spec: EnsembleSpec
    checkpoints: np.ndarray
    S: np.ndarray
    Y: np.ndarray
    lil: np.ndarray
    sum_S: np.ndarray
    qsl_diffusive: np.ndarray
    qsl_critical: np.ndarray
    completed: np.ndarray
    partial: bool = False
    error: str | None = None

    def __post_init__(self):
        self._col = {int(k): i for i, k in enumerate(self.checkpoints)}

    @property
    def regime(self) -> Regime:
        return self.spec.regime

    @property
    def n_completed(self) -> int:
        return int(self.completed.sum())

    def column(self, k: int, which: str = "S") -> np.ndarray:
        arr = getattr(self, which)
        return arr[self.completed, self._col[int(k)]].astype(float)

    def scale(self, k: int) -> float:
        """Normaliser of ``S_k`` for the grid statistics of this regime."""
        n = self.spec.n_steps
        if self.regime is Regime.DIFFUSIVE:
            return math.sqrt(n)
        if self.regime is Regime.CRITICAL:
            return math.sqrt(k * math.log(n))
        return k ** self.spec.params.theta

    def scaled(self, k: int) -> np.ndarray:
        return self.column(k) / self.scale(k)

    @property
    def grid_samples(self) -> np.ndarray:
        return np.column_stack([self.scaled(k) for k in self.spec.grid_indices()])

    @property
    def grid_means(self) -> np.ndarray:
        return self.grid_samples.mean(axis=0)

    @property
    def grid_variances(self) -> np.ndarray:
        return self.grid_samples.var(axis=0, ddof=1)

    @property
    def grid_variance_stderr(self) -> np.ndarray:
        return np.array([_var_and_se(x)[1] for x in self.grid_samples.T])

    @property
    def covariance(self) -> np.ndarray:
        cov = np.atleast_2d(np.cov(self.grid_samples, rowvar=False))
        return 0.5 * (cov + cov.T)

    @property
    def final_scaled(self) -> np.ndarray:
        return self.scaled(self.spec.n_steps)

    @property
    def qsl(self) -> np.ndarray:
        """Per-replicate QSL statistic for the spec's regime."""
        return np.array(
            [
                qsl_value(self.regime, self.spec.n_steps, d, c)
                for d, c in zip(self.qsl_diffusive[self.completed], self.qsl_critical[self.completed])
            ]
        )

    @property
    def com_scaled(self) -> np.ndarray:
        """``G_n / sqrt(n)`` per replicate, ``G_n = (1/n) sum_{k<=n} S_k``."""
        return self.sum_S[self.completed] / self.spec.n_steps**1.5

    def ks(self, sigma2: float) -> tuple[float, float]:
        res = _ks(self.final_scaled, sigma2)
        return float(res.statistic), float(res.pvalue)

    def lc_estimates(self) -> dict:
        z = self.final_scaled
        m, se_m = float(z.mean()), float(z.std(ddof=1) / math.sqrt(z.size))
        z2 = z * z
        return {
            "mean": m,
            "mean_stderr": se_m,
            "second_moment": float(z2.mean()),
            "second_moment_stderr": float(z2.std(ddof=1) / math.sqrt(z.size)),
        }


def _run_one(spec: EnsembleSpec, r: int, ck: np.ndarray, out: dict):
    rng = make_rng(spec.master_seed, r)
    res = simulate(spec.params, spec.n_steps, rng, ck, backend=spec.backend)
    out["S"][r] = res.S
    out["Y"][r] = res.Y
    out["lil"][r] = res.lil_max
    out["sum_S"][r] = res.sum_S
    out["qsl_diffusive"][r] = res.qsl_diffusive
    out["qsl_critical"][r] = res.qsl_critical
    out["completed"][r] = True


def run_ensemble(spec: EnsembleSpec, threads: int = 1) -> EnsembleSummary:
    """Simulate every replicate of ``spec``; ``threads`` only changes wall time."""
    ck = spec.checkpoints()
    R, K = spec.replicates, ck.size
    out = {
        "S": np.zeros((R, K), dtype=np.int64),
        "Y": np.zeros((R, K)),
        "lil": np.zeros((R, K)),
        "sum_S": np.zeros(R),
        "qsl_diffusive": np.zeros(R),
        "qsl_critical": np.zeros(R),
        "completed": np.zeros(R, dtype=bool),
    }
    error = None
    try:
        if threads <= 1:
            for r in range(R):
                _run_one(spec, r, ck, out)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [pool.submit(_run_one, spec, r, ck, out) for r in range(R)]
                for f in futures:
                    try:
                        f.result()
                    except MemoryError as exc:
                        error = f"memory exhausted: {exc}"
                        for g in futures:
                            g.cancel()
                        break
    except MemoryError as exc:
        error = f"memory exhausted: {exc}"
    return EnsembleSummary(spec=spec, checkpoints=ck, partial=error is not None, error=error, **out)


# ---------------------------------------------------------------- checks


@dataclass
class Check:
    """One verification line.

    ``tolerance`` is the allowed ``|estimate - target|``.  Threshold checks
    (KS p-values, Cauchy ratios) set ``kind`` and compare against ``target``.
    """

    name: str
    target: float
    estimate: float
    stderr: float
    tolerance: float
    passed: bool
    kind: str = field(default="band", repr=False)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "target": float(self.target),
            "estimate": float(self.estimate),
            "stderr": float(self.stderr),
            "tolerance": float(self.tolerance),
            "pass": bool(self.passed),
        }

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict} {self.name}: estimate={self.estimate:.6g} target={self.target:.6g} "
            f"stderr={self.stderr:.3g} tolerance={self.tolerance:.3g}"
        )


def band_check(name, target, estimate, stderr, rel=None, z=None) -> Check:
    """``|estimate - target| <= rel |target|`` or, with ``z``, ``<= z stderr``."""
    if rel is not None and target != 0:
        tol = rel * abs(target)
    else:
        tol = (z or Z_SE) * stderr
    return Check(name, target, estimate, stderr, tol, bool(abs(estimate - target) <= tol))


def _var_and_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    d2 = (x - x.mean()) ** 2
    return float(x.var(ddof=1)), float(d2.std(ddof=1) / math.sqrt(x.size))


def _cov_and_se(x, y) -> tuple[float, float]:
    prod = (x - x.mean()) * (y - y.mean())
    return float(prod.sum() / (x.size - 1)), float(prod.std(ddof=1) / math.sqrt(x.size))


def _ks(samples, sigma2):
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("KS test needs at least one sample")
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    return stats.kstest(samples, "norm", args=(0.0, math.sqrt(sigma2)), method="asymp")


def ks_normality(samples, sigma2: float) -> float:
    """Asymptotic p-value of the one-sample KS test against ``N(0, sigma2)``."""
    return float(_ks(samples, sigma2).pvalue)


def _gate(summary: EnsembleSummary, params: WalkParams, regime: Regime, what: str):
    got = summary.spec.force_regime or classify_regime(params)
    if got is not regime:
        raise RegimeError(f"{what} needs the {regime.value} regime, params are {got.value}")


def ks_check(summary: EnsembleSummary, sigma2: float, rerun=None, attempts: int = KS_ATTEMPTS, alpha=KS_ALPHA) -> Check:
    """KS normality of the final scaled position, with up to ``attempts`` ensembles.

    ``rerun(k)`` returns the ensemble for retry ``k`` (1-based); the check fails
    only when every attempt has p-value below ``alpha``.
    """
    current = summary
    for k in range(attempts):
        if k:
            if rerun is None:
                break
            current = rerun(k)
        _, pval = current.ks(sigma2)
        if pval > alpha:
            break
    return Check("ks_normality", alpha, pval, 0.0, 0.0, bool(pval > alpha), kind="pvalue")


def clt_check_diffusive(summary: EnsembleSummary, params: WalkParams | None = None, rel_tol=None, rerun=None) -> list[Check]:
    params = params or summary.spec.params
    _gate(summary, params, Regime.DIFFUSIVE, "clt_check_diffusive")
    with forced_regime(summary.spec.force_regime):
        target = analytic.diffusive_variance(params)
    var, se = _var_and_se(summary.final_scaled)
    rel = DEFAULT_TOLERANCES["clt_diffusive"] if rel_tol is None else rel_tol
    return [
        band_check("clt_variance_diffusive", target, var, se, rel=rel),
        ks_check(summary, target, rerun=rerun),
    ]


def clt_check_critical(summary: EnsembleSummary, params: WalkParams | None = None, rel_tol=None) -> list[Check]:
    params = params or summary.spec.params
    _gate(summary, params, Regime.CRITICAL, "clt_check_critical")
    with forced_regime(summary.spec.force_regime):
        target, _ = analytic.critical_constants(params)
    var, se = _var_and_se(summary.final_scaled)
    rel = DEFAULT_TOLERANCES["clt_critical"] if rel_tol is None else rel_tol
    return [band_check("clt_variance_critical", target, var, se, rel=rel)]


def functional_covariance_check(summary: EnsembleSummary, params: WalkParams | None = None, rel_tol=None) -> list[Check]:
    """Empirical covariance of the scaled walk on the time grid against the limit kernel."""
    params = params or summary.spec.params
    regime = summary.regime
    if regime is Regime.SUPERDIFFUSIVE:
        raise RegimeError("functional covariance check needs the diffusive or critical regime")
    grid = summary.spec.time_grid
    if len(grid) < 2:
        raise ValueError("functional covariance check needs at least two grid points")
    kernel = analytic.diffusive_kernel if regime is Regime.DIFFUSIVE else analytic.critical_kernel
    rel = DEFAULT_TOLERANCES["functional_covariance"] if rel_tol is None else rel_tol
    X = summary.grid_samples
    out = []
    with forced_regime(summary.spec.force_regime):
        for i, s in enumerate(grid):
            for j in range(i, len(grid)):
                t = grid[j]
                cov, se = _cov_and_se(X[:, i], X[:, j])
                out.append(band_check(f"covariance_{s:g}_{t:g}", kernel(params, s, t), cov, se, rel=rel))
    return out


def qsl_value(regime: Regime, n: int, sum_diffusive: float, sum_critical: float) -> float:
    if regime is Regime.DIFFUSIVE:
        if n < 2:
            raise ValueError("QSL statistic needs n >= 2 (log n = 0)")
        return sum_diffusive / math.log(n)
    if regime is Regime.CRITICAL:
        if n < 3:
            raise ValueError("critical QSL statistic needs n >= 3 (log log n > 0)")
        return sum_critical / math.log(math.log(n))
    raise RegimeError("the quadratic strong law has no superdiffusive form")


def qsl_statistic(trajectory, params: WalkParams | None = None) -> float:
    """QSL statistic of one streamed trajectory (its per-step sums are kept by the simulator)."""
    params = params or trajectory.params
    n = int(trajectory.checkpoints[-1])
    return qsl_value(classify_regime(params), n, trajectory.qsl_diffusive, trajectory.qsl_critical)


def qsl_from_path(S, params: WalkParams) -> float:
    """Same statistic from an explicit path ``S_1..S_n``; the streaming oracle."""
    S = np.asarray(S, dtype=float)
    k = np.arange(1, S.size + 1, dtype=float)
    regime = classify_regime(params)
    if regime is Regime.DIFFUSIVE:
        return qsl_value(regime, S.size, math.fsum(S * S / (k * k)), 0.0)
    lk = np.log(k[1:])
    return qsl_value(regime, S.size, 0.0, math.fsum(S[1:] ** 2 / (k[1:] * lk) ** 2))


def qsl_check(summary: EnsembleSummary, params: WalkParams | None = None, rel_mean=None, rel_single=None) -> list[Check]:
    params = params or summary.spec.params
    if summary.regime is Regime.SUPERDIFFUSIVE:
        raise RegimeError("the quadratic strong law has no superdiffusive form")
    with forced_regime(summary.spec.force_regime):
        if summary.regime is Regime.DIFFUSIVE:
            target = analytic.diffusive_variance(params)
        else:
            target, _ = analytic.critical_constants(params)
    q = summary.qsl
    rel_mean = DEFAULT_TOLERANCES["qsl_mean"] if rel_mean is None else rel_mean
    rel_single = DEFAULT_TOLERANCES["qsl_single"] if rel_single is None else rel_single
    se = float(q.std(ddof=1) / math.sqrt(q.size))
    return [
        band_check("qsl_mean", target, float(q.mean()), se, rel=rel_mean),
        band_check("qsl_single_path", target, float(q[0]), float(q.std(ddof=1)), rel=rel_single),
    ]


def lil_diagnostic(summary_or_trajectory, params: WalkParams | None = None) -> dict:
    """Running maximum of ``S_n^2 / (2 n log n log log log n)``; report only, never pass/fail."""
    obj = summary_or_trajectory
    params = params or getattr(obj, "params", None) or obj.spec.params
    regime = obj.spec.regime if isinstance(obj, EnsembleSummary) else classify_regime(params)
    if regime is not Regime.CRITICAL:
        raise RegimeError(f"LIL diagnostic needs the critical regime, params are {regime.value}")
    ck = np.asarray(obj.checkpoints)
    if ck[-1] < 16:
        raise ValueError("LIL diagnostic needs n >= 16 so that log log log n > 0")
    with forced_regime(regime):
        _, constant = analytic.critical_constants(params)
    keep = ck >= 16
    lil = obj.lil[obj.completed] if isinstance(obj, EnsembleSummary) else obj.lil_max[None, :]
    paths = lil[:, keep]
    return {
        "constant": constant,
        "checkpoints": ck[keep].tolist(),
        "running_max_path0": paths[0].tolist(),
        "running_max_mean": paths.mean(axis=0).tolist(),
        "monotone": bool(np.all(np.diff(paths, axis=1) >= 0)),
        "note": "limsup is approached on a log log log n timescale; not a pass/fail quantity",
    }


def superdiffusive_check(summary: EnsembleSummary, params: WalkParams | None = None, rel_mean=None, rel_second=None) -> list[Check]:
    params = params or summary.spec.params
    _gate(summary, params, Regime.SUPERDIFFUSIVE, "superdiffusive_check")
    with forced_regime(summary.spec.force_regime):
        lc_mean, lc_second = analytic.lc_moments(params)
    est = summary.lc_estimates()
    rel_mean = DEFAULT_TOLERANCES["lc_mean"] if rel_mean is None else rel_mean
    rel_second = DEFAULT_TOLERANCES["lc_second_moment"] if rel_second is None else rel_second
    out = [
        band_check("lc_mean", lc_mean, est["mean"], est["mean_stderr"], rel=rel_mean),
        band_check("lc_second_moment", lc_second, est["second_moment"], est["second_moment_stderr"], rel=rel_second),
    ]
    out.extend(cauchy_checks(summary))
    return out


def cauchy_differences(summary: EnsembleSummary) -> list[tuple[int, int, np.ndarray]]:
    """Per-replicate ``|Z_n - Z_m|^2`` for consecutive decade checkpoints ``m < n``."""
    dec = summary.spec.decades()
    z = {k: summary.scaled(k) for k in dec}
    return [(m, n, (z[n] - z[m]) ** 2) for m, n in zip(dec[:-1], dec[1:])]


def cauchy_checks(summary: EnsembleSummary) -> list[Check]:
    """Each mean-square Cauchy difference must be smaller than the one before.

    The estimate is the ratio of consecutive means; it passes below 1.
    """
    diffs = cauchy_differences(summary)
    out = []
    for (m0, n0, d0), (m1, n1, d1) in zip(diffs[:-1], diffs[1:]):
        r = float(d1.mean() / d0.mean())
        se = float((d1 - r * d0).std(ddof=1) / math.sqrt(d0.size) / d0.mean())
        out.append(Check(f"cauchy_ratio_{m1}_{n1}_vs_{m0}_{n0}", 1.0, r, se, 0.0, r < 1.0, kind="upper"))
    return out


def com_check(summary: EnsembleSummary, params: WalkParams | None = None, rel_tol=None) -> list[Check]:
    params = params or summary.spec.params
    _gate(summary, params, Regime.DIFFUSIVE, "com_check")
    with forced_regime(summary.spec.force_regime):
        target = analytic.com_variance(params)
    var, se = _var_and_se(summary.com_scaled)
    rel = DEFAULT_TOLERANCES["com"] if rel_tol is None else rel_tol
    return [band_check("com_variance", target, var, se, rel=rel)]


def martingale_check(summary: EnsembleSummary, params: WalkParams | None = None, z: float = Z_SE) -> list[Check]:
    """Mean one-step increments of ``M`` and ``N`` at checkpoint pairs are zero within ``z`` SE."""
    params = params or summary.spec.params
    r = params.a / (params.a + params.c)
    out = []
    for k, m in summary.spec.martingale_pairs():
        ak, am = a_n(params, k), a_n(params, m)
        Yk, Ym = summary.column(k, "Y"), summary.column(m, "Y")
        dM = am * Ym - ak * Yk
        dN = (summary.column(m) - r * Ym) - (summary.column(k) - r * Yk)
        for label, d in (("M", dM), ("N", dN)):
            se = float(d.std(ddof=1) / math.sqrt(d.size))
            if se == 0.0:
                # increment is identically zero (N when c = 0)
                out.append(Check(f"martingale_{label}_{k}", 0.0, float(d.mean()), 0.0, 0.0, bool(np.all(d == 0))))
            else:
                out.append(band_check(f"martingale_{label}_{k}", 0.0, float(d.mean()), se, z=z))
    return out


def second_moment_check(summary: EnsembleSummary, params: WalkParams | None = None, z: float = Z_SE) -> list[Check]:
    """MC mean of ``Y_k^2`` at the grid points against the exact recursion."""
    params = params or summary.spec.params
    eY2 = moment_path(params, summary.spec.n_steps)["eY2"]
    out = []
    for k in summary.spec.grid_indices():
        y2 = summary.column(k, "Y") ** 2
        se = float(y2.std(ddof=1) / math.sqrt(y2.size))
        out.append(band_check(f"second_moment_Y_{k}", float(eY2[k - 1]), float(y2.mean()), se, z=z))
    return out


# ---------------------------------------------------------------- verify


def verify(spec: EnsembleSpec, threads: int = 1, tolerances: dict | None = None) -> dict:
    """Run the check suite of the spec's regime and return the JSON-ready report."""
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    unknown = set(tol) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")
    summary = run_ensemble(spec, threads)
    regime = spec.regime
    params = spec.params

    def rerun(k):
        return run_ensemble(replace(spec, master_seed=spec.master_seed + k), threads)

    checks: list[Check] = []
    diagnostics = {}
    try:
        if regime is Regime.DIFFUSIVE:
            checks += clt_check_diffusive(summary, params, tol["clt_diffusive"], rerun=rerun)
            if len(spec.time_grid) >= 2:
                checks += functional_covariance_check(summary, params, tol["functional_covariance"])
            if spec.n_steps >= 2:
                checks += qsl_check(summary, params, tol["qsl_mean"], tol["qsl_single"])
            checks += com_check(summary, params, tol["com"])
        elif regime is Regime.CRITICAL:
            checks += clt_check_critical(summary, params, tol["clt_critical"])
            if len(spec.time_grid) >= 2:
                checks += functional_covariance_check(summary, params, tol["functional_covariance"])
            if spec.n_steps >= 3:
                checks += qsl_check(summary, params, tol["qsl_mean"], tol["qsl_single"])
            if spec.n_steps >= 16:
                diagnostics["lil"] = lil_diagnostic(summary, params)
        else:
            checks += superdiffusive_check(summary, params, tol["lc_mean"], tol["lc_second_moment"])
        checks += martingale_check(summary, params)
        checks += second_moment_check(summary, params)
    except ZeroDivisionError as exc:
        raise RegimeError(f"limit formula is singular for these parameters under the {regime.value} regime") from exc
    report = {
        "spec": spec.to_dict(),
        "regime": regime.value,
        "checks": [c.to_dict() for c in checks],
    }
    if diagnostics:
        report["diagnostics"] = diagnostics
    if summary.partial:
        report["partial"] = True
        report["error"] = summary.error
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def all_passed(report: dict) -> bool:
    return not report.get("partial") and all(c["pass"] for c in report["checks"])
