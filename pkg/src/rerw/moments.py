"""Exact finite-n moments of ``S_n`` and ``Y_n``.

With ``D_n = (c + 1) n - c`` and ``gamma_n = 1 + (a + c) / D_n`` the step
algebra gives the closed linear system

    E[Y_{n+1}]         = gamma_n E[Y_n]
    E[Y_{n+1}^2]       = K + (2 gamma_n - 1) E[Y_n^2],          K = 1 + 2ac + c^2
    E[S_{n+1}]         = E[S_n] + (a / D_n) E[Y_n]
    E[S_{n+1} Y_{n+1}] = gamma_n E[S_n Y_n] + (a / D_n) E[Y_n^2] + 1 + ca
    E[S_{n+1}^2]       = E[S_n^2] + (2a / D_n) E[S_n Y_n] + 1

started from ``E[S_1] = E[Y_1] = 2q - 1`` and unit second moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import gammaln, poch, rgamma

from .analytic import a_n, a_sequence, log_gamma_ratio
from .model import Regime, RegimeError, WalkParams, classify_regime


@dataclass(frozen=True)
class MomentTable:
    n: int
    eY: float
    eY2: float
    eS: float
    eSY: float
    eS2: float


@njit(cache=True)
def _moment_path(a, c, q, n):
    eY = np.empty(n)
    eY2 = np.empty(n)
    eS = np.empty(n)
    eSY = np.empty(n)
    eS2 = np.empty(n)
    eY[0] = eS[0] = 2.0 * q - 1.0
    eY2[0] = eSY[0] = eS2[0] = 1.0
    K = (1.0 - a * a) + (a + c) * (a + c)
    # Kahan compensation for the two additive accumulations
    comp_S = 0.0
    comp_S2 = 0.0
    for i in range(n - 1):
        k = i + 1
        D = (c + 1.0) * k - c
        g = 1.0 + (a + c) / D
        eY[i + 1] = g * eY[i]
        eY2[i + 1] = K + (2.0 * g - 1.0) * eY2[i]
        eSY[i + 1] = g * eSY[i] + a / D * eY2[i] + 1.0 + c * a

        inc = a / D * eY[i] - comp_S
        t = eS[i] + inc
        comp_S = (t - eS[i]) - inc
        eS[i + 1] = t

        inc = 2.0 * a / D * eSY[i] + 1.0 - comp_S2
        t = eS2[i] + inc
        comp_S2 = (t - eS2[i]) - inc
        eS2[i + 1] = t
    return eY, eY2, eS, eSY, eS2


def moment_path(params: WalkParams, n: int) -> dict[str, np.ndarray]:
    """All five moments for ``k = 1..n`` (index ``k - 1``)."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    eY, eY2, eS, eSY, eS2 = _moment_path(params.a, params.c, params.q, n)
    return {"eY": eY, "eY2": eY2, "eS": eS, "eSY": eSY, "eS2": eS2}


def joint_moments(params: WalkParams, n: int) -> MomentTable:
    m = moment_path(params, n)
    return MomentTable(int(n), *(float(m[k][-1]) for k in ("eY", "eY2", "eS", "eSY", "eS2")))


def moment_table(params: WalkParams, ns) -> list[MomentTable]:
    ns = sorted(set(int(k) for k in ns))
    m = moment_path(params, ns[-1])
    return [
        MomentTable(k, *(float(m[f][k - 1]) for f in ("eY", "eY2", "eS", "eSY", "eS2")))
        for k in ns
    ]


def mean_Y(params: WalkParams, n: int) -> float:
    """``E[Y_n] = (2q - 1) / a_n``."""
    return (2.0 * params.q - 1.0) / a_n(params, n)


def second_moment_Y_recursive(params: WalkParams, n: int) -> float:
    return float(moment_path(params, n)["eY2"][-1])


def _closed_parts(params: WalkParams, n: int):
    if classify_regime(params) is Regime.CRITICAL:
        raise RegimeError(
            "closed form divides by 2a + c - 1 = 0 at criticality; use second_moment_Y_recursive"
        )
    a, c, lam = params.a, params.c, params.lam
    b = (2 * a + c) * lam
    K = params.K
    # bracket: Gamma(lam)/Gamma(b) - Gamma(n+lam)/Gamma(n+b), each scaled by Gamma(n+b)/Gamma(n-c lam)
    tail = math.exp(log_gamma_ratio(n, lam, -c * lam))
    if n + b > 0:
        # 1 / Gamma vanishes at the poles b = 0, -1, ...
        growth = math.exp(log_gamma_ratio(n, b, -c * lam) + gammaln(lam))
        head, P_n = growth * rgamma(b), growth * rgamma(1 + b)
    else:
        # strong negative memory puts n + b on a pole for n <= 2; the Pochhammer ratios stay finite
        scale = math.exp(gammaln(lam) - gammaln(n - c * lam))
        head, P_n = scale * poch(b, n), scale * poch(1 + b, n - 1)
    published = K * (head - tail) / (lam * (2 * a + c - 1))
    # P_n = prod_{k<n} (2 gamma_k - 1) = Gamma(n+b) Gamma(lam) / (Gamma(n - c lam) Gamma(1+b))
    return published, P_n, K


def second_moment_Y_closed(params: WalkParams, n: int) -> float:
    """Gamma-function closed form of ``E[Y_n^2]`` for non-critical parameters."""
    published, P_n, K = _closed_parts(params, n)
    return published - (K - 1.0) * P_n


def second_moment_Y_published(params: WalkParams, n: int) -> float:
    """The published closed form, which starts the recursion from ``E[Y_1^2] = K``."""
    return _closed_parts(params, n)[0]


def _drift_weights(params: WalkParams, n: int):
    """``a_k`` and ``h_k = a / (D_k a_k)`` for ``k = 1..n``."""
    k = np.arange(1, n + 1, dtype=float)
    ak = a_sequence(params, n)
    D = (params.c + 1.0) * k - params.c
    return ak, params.a / (D * ak)


def cross_moment_S(params: WalkParams, m: int, n: int) -> float:
    """``E[S_m S_n]`` for ``1 <= m <= n``.

    Uses ``E[S_n | F_m] = S_m + Y_m a_m sum_{k=m}^{n-1} a / (D_k a_k)``.
    """
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    mom = moment_path(params, m)
    ak, h = _drift_weights(params, n)
    drift = math.fsum(h[m - 1 : n - 1])
    return float(mom["eS2"][-1] + mom["eSY"][-1] * ak[m - 1] * drift)


def com_second_moment(params: WalkParams, n: int) -> float:
    """``E[G_n^2]`` for the centre of mass ``G_n = (1/n) sum_{k<=n} S_k``."""
    n = int(n)
    mom = moment_path(params, n)
    ak, h = _drift_weights(params, n)
    j = np.arange(1, n + 1, dtype=float)
    # T_j = sum_{k>j} (H_k - H_j) = sum_{i=j}^{n-1} (n - i) h_i
    T = np.cumsum(((n - j) * h)[::-1])[::-1]
    off = (n - j) * mom["eS2"] + mom["eSY"] * ak * T
    total = math.fsum(mom["eS2"]) + 2.0 * math.fsum(off)
    return total / (n * n)
