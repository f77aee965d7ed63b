"""Martingale decomposition of the walk and its diagnostics.

``M_n = a_n Y_n`` and ``N_n = S_n - a/(a+c) Y_n`` are martingales and
``S_n = N_n + a/(a+c) M_n / a_n``.  Per-step innovations are
``eps_{n+1} = Y_{n+1} - gamma_n Y_n`` and ``xi_n = (alpha_n - a) X_{beta_n}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import a_n, a_sequence, gamma_n, normalization_matrix, vn_wn
from .model import Trajectory, WalkParams, total_weight


class ConsistencyError(RuntimeError):
    """A quantity left its provable range; the dynamics are wrong somewhere."""


@dataclass
class MartingaleSeries:
    checkpoints: np.ndarray
    M: np.ndarray
    N: np.ndarray
    qvM: np.ndarray | None
    qvN: np.ndarray

    def reconstruct_S(self, params: WalkParams) -> np.ndarray:
        r = params.a / (params.a + params.c)
        return self.N + r * self.M / a_n(params, self.checkpoints)


@dataclass
class IncrementDiagnostics:
    """``eps[i]`` and ``xi[i]`` belong to time ``i + 2`` (the first recall happens at n = 2)."""

    eps: np.ndarray
    xi: np.ndarray
    eps_bound: float
    xi_bound: float

    @property
    def max_abs_eps(self) -> float:
        return float(np.abs(self.eps).max()) if self.eps.size else 0.0


def _require_path(traj: Trajectory):
    if traj.X is None or traj.beta is None:
        raise ValueError("this diagnostic needs the full step stream; run with keep_path=True")


def path_SY(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Full ``S_k`` and ``Y_k`` for ``k = 1..n`` rebuilt from the step stream."""
    _require_path(traj)
    X = traj.X[1:].astype(np.int64)
    xb = np.zeros_like(X)
    xb[1:] = traj.X[traj.beta[2:]]
    S = np.cumsum(X)
    Y = np.cumsum(X.astype(float)) + traj.params.c * np.cumsum(xb.astype(float))
    return S, Y


def step_stream(traj: Trajectory):
    """``(alpha_k, X_{beta_k})`` for ``k = 2..n``."""
    _require_path(traj)
    xb = traj.X[traj.beta[2:]].astype(np.int64)
    alpha = traj.X[2:].astype(np.int64) * xb
    return alpha, xb


def decompose(traj: Trajectory, params: WalkParams | None = None) -> MartingaleSeries:
    params = params or traj.params
    ck = traj.checkpoints
    a_ck = a_n(params, ck)
    r = params.a / (params.a + params.c)
    M = a_ck * traj.Y
    N = traj.S - r * traj.Y
    qvM = None
    if traj.X is not None:
        full_qvM, _ = quadratic_variations(traj, params)
        qvM = full_qvM[ck - 1]
    return MartingaleSeries(ck, M, N, qvM, qv_N(params, ck))


def decompose_path(traj: Trajectory, params: WalkParams | None = None) -> MartingaleSeries:
    """Decomposition at every step of a stored path."""
    params = params or traj.params
    S, Y = path_SY(traj)
    ck = np.arange(1, S.size + 1, dtype=np.int64)
    r = params.a / (params.a + params.c)
    qvM, qvN = quadratic_variations(traj, params)
    return MartingaleSeries(ck, a_sequence(params, S.size) * Y, S - r * Y, qvM, qvN)


def eps_bound(params: WalkParams) -> float:
    """Sure bound on ``|eps_k|``: ``|a + c| + 1 + c``."""
    return abs(params.a + params.c) + 1.0 + params.c


def increments(traj: Trajectory, params: WalkParams | None = None) -> IncrementDiagnostics:
    params = params or traj.params
    _, Y = path_SY(traj)
    alpha, xb = step_stream(traj)
    n = Y.size
    g = gamma_n(params, np.arange(1, n, dtype=float))
    eps = Y[1:] - g * Y[:-1]
    xi = (alpha - params.a) * xb
    # algebraic form of the same innovation
    D = total_weight(np.arange(1, n, dtype=float), params.c)
    alt = -(params.a + params.c) / D * Y[:-1] + (alpha + params.c) * xb
    eb, xb_bound = eps_bound(params), 1.0 + abs(params.a)
    tol = 1e-9 * max(1.0, float(np.abs(Y).max()))
    if not np.allclose(eps, alt, rtol=0, atol=tol):
        raise ConsistencyError("eps disagrees with (1 - gamma_n) Y_n + (alpha + c) X_beta")
    if eps.size and np.abs(eps).max() > eb + 1e-9:
        raise ConsistencyError(f"|eps| reached {np.abs(eps).max()} > {eb}")
    if xi.size and np.abs(xi).max() > xb_bound + 1e-12:
        raise ConsistencyError(f"|xi| reached {np.abs(xi).max()} > {xb_bound}")
    return IncrementDiagnostics(eps, xi.astype(float), eb, xb_bound)


def qv_N(params: WalkParams, n):
    """``<N>_n = (c / (a + c))^2 (1 - a^2) n``."""
    a, c = params.a, params.c
    return (c / (a + c)) ** 2 * (1 - a * a) * np.asarray(n, dtype=float)


def quadratic_variations(traj: Trajectory, params: WalkParams | None = None):
    """``(<M>_k, <N>_k)`` for ``k = 1..n`` along the stored path.

    ``<M>_n = K v_n - R_n`` with ``R_n = sum_{k<n} a_{k+1}^2 (gamma_k - 1)^2 Y_k^2``.
    Both follow the convention in which the first increment carries the same
    conditional variance as every later one; the true first-step variances
    differ by constants that vanish under any normalisation.
    """
    params = params or traj.params
    _, Y = path_SY(traj)
    n = Y.size
    a, c = params.a, params.c
    K = params.K
    ak = a_sequence(params, n)
    v = np.cumsum(ak * ak)
    g1 = gamma_n(params, np.arange(1, n, dtype=float)) - 1.0
    R = np.concatenate([[0.0], np.cumsum(ak[1:] ** 2 * g1 * g1 * Y[:-1] ** 2)])
    return K * v - R, qv_N(params, np.arange(1, n + 1))


def qv_matrix(traj: Trajectory, params: WalkParams | None = None, n: int | None = None) -> np.ndarray:
    """Predictable quadratic variation of ``(N_n, M_n)`` as a 2x2 matrix at time ``n``."""
    params = params or traj.params
    qvM, qvN = quadratic_variations(traj, params)
    n = n or qvM.size
    a, c = params.a, params.c
    _, w = vn_wn(params, n)
    off = w * c / (a + c) * (1 - a * a)
    return np.array([[qvN[n - 1], off], [off, qvM[n - 1]]])


def normalized_qv(traj: Trajectory, params: WalkParams | None = None, n: int | None = None) -> np.ndarray:
    """``V_n <M>_n V_n^T`` (``W_n`` at criticality), which tends to ``V`` (``W``)."""
    params = params or traj.params
    n = n or traj.n_steps
    Vn = normalization_matrix(params, n)
    return Vn @ qv_matrix(traj, params, n) @ Vn.T


def final_state(traj: Trajectory):
    """``(history, X, S_n, Y_n)`` at the end of a stored path."""
    _require_path(traj)
    S, Y = path_SY(traj)
    return traj.beta[2:].copy(), traj.X[1:].copy(), int(S[-1]), float(Y[-1])


def conditional_moment_diagnostics(
    history, X, params: WalkParams, replicates: int, rng, z: float = 4.0
) -> dict:
    """Draw ``replicates`` independent next steps from one fixed history and
    compare conditional second moments of ``eps`` and ``xi`` with their targets.

    ``history`` holds ``beta_2..beta_n`` and ``X`` holds ``X_1..X_n``.
    """
    X = np.asarray(X, dtype=np.int64)
    hist = np.asarray(history, dtype=np.int64)
    n = X.size
    if hist.size != n - 1:
        raise ValueError("history must have one entry per step after the first")
    a, c = params.a, params.c
    rho = np.ones(n)
    np.add.at(rho, hist - 1, c)
    Y = float(np.dot(rho, X))
    D = total_weight(n, c)
    # record-mixture draws, two uniforms each, then alpha
    u = rng.random((replicates, 3))
    base = (n == 1) | (u[:, 0] * D < n)
    k_base = np.minimum(1 + (u[:, 1] * n).astype(np.int64), n)
    if n > 1:
        j = np.minimum((u[:, 1] * (n - 1)).astype(np.int64), n - 2)
        k = np.where(base, k_base, hist[j])
    else:
        k = k_base
    alpha = np.where(u[:, 2] < params.p, 1, -1)
    xb = X[k - 1]
    g = 1.0 + (a + c) / D
    eps = (1.0 - g) * Y + (alpha + c) * xb
    xi = (alpha - a) * xb
    samples = {
        "xi2": (xi * xi, 1 - a * a),
        "eps_xi": (eps * xi, 1 - a * a),
        "eps2_plus": (eps * eps + (g - 1.0) ** 2 * Y * Y, params.K),
    }
    checks = []
    for name, (vals, target) in samples.items():
        est = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(replicates))
        checks.append(
            {
                "name": name,
                "target": target,
                "estimate": est,
                "stderr": se,
                "tolerance": z * se,
                "pass": bool(abs(est - target) <= z * se),
            }
        )
    return {"n": int(n), "Y_n": Y, "replicates": int(replicates), "checks": checks}
