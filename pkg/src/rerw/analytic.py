"""Closed-form constants of the reinforced elephant walk.

Everything here is a pure function of :class:`~rerw.model.WalkParams`.
Gamma-function ratios go through :func:`log_gamma_ratio`, which stays
accurate to near machine precision for arguments up to 1e12 and beyond,
where plain ``gammaln`` differences lose six or more digits.
"""

from __future__ import annotations

import math
import warnings
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammaln

from .model import Regime, RegimeError, WalkParams, classify_regime

_ASYMPTOTIC_FROM = 64.0
_FORCED: ContextVar[Regime | None] = ContextVar("forced_regime", default=None)


def _stirling_tail(w):
    """``lgamma(w) - [(w - 1/2) log w - w + log(2 pi) / 2]`` for ``w >= 60``."""
    r = 1.0 / (w * w)
    return (1 / 12 + r * (-1 / 360 + r * (1 / 1260 + r * (-1 / 1680 + r / 1188)))) / w


def log_gamma_ratio(z, x: float, y: float):
    """``log(Gamma(z + x) / Gamma(z + y))`` for ``z + x > 0`` and ``z + y > 0``.

    Small ``z`` uses ``gammaln`` directly.  Large ``z`` expands both terms
    around ``log z`` so the dominant parts cancel analytically.
    """
    zz = np.asarray(z, dtype=float)
    if np.any(zz + x <= 0) or np.any(zz + y <= 0):
        raise ValueError("log_gamma_ratio needs positive gamma arguments")
    scalar = zz.ndim == 0
    zz = np.atleast_1d(zz)
    out = np.empty_like(zz)
    small = zz < _ASYMPTOTIC_FROM
    if small.any():
        zs = zz[small]
        out[small] = gammaln(zs + x) - gammaln(zs + y)
    if (~small).any():
        zl = zz[~small]
        out[~small] = (
            (x - y) * np.log(zl)
            + (zl + x - 0.5) * np.log1p(x / zl)
            - (zl + y - 0.5) * np.log1p(y / zl)
            - (x - y)
            + _stirling_tail(zl + x)
            - _stirling_tail(zl + y)
        )
    return float(out[0]) if scalar else out


def _warn_half(params: WalkParams):
    if params.p == 0.5:
        warnings.warn(
            "p = 1/2 reduces the walk to a simple random walk; limit constants are degenerate",
            RuntimeWarning,
            stacklevel=3,
        )


@contextmanager
def forced_regime(regime: Regime | str | None):
    """Evaluate regime-gated formulas as if the parameters were in ``regime``.

    Meant for boundary experiments; formulas may still fail where they are singular.
    """
    token = _FORCED.set(Regime(regime) if regime is not None else None)
    try:
        yield
    finally:
        _FORCED.reset(token)


def _require(params: WalkParams, regime: Regime, what: str):
    _warn_half(params)
    got = _FORCED.get() or classify_regime(params)
    if got is not regime:
        raise RegimeError(f"{what} needs the {regime.value} regime, params are {got.value}")


def gamma_n(params: WalkParams, n):
    """``gamma_n = 1 + (a + c) / ((c + 1) n - c)``."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 1):
        raise ValueError("gamma_n needs n >= 1")
    g = 1.0 + (params.a + params.c) / ((params.c + 1.0) * n - params.c)
    return float(g) if g.ndim == 0 else g


def gamma_n_ratio_form(params: WalkParams, n):
    """Same quantity in the form ``(n + a lambda) / (n - c lambda)``."""
    n = np.asarray(n, dtype=float)
    lam = params.lam
    g = (n + params.a * lam) / (n - params.c * lam)
    return float(g) if g.ndim == 0 else g


def _check_pole(params: WalkParams):
    if 1.0 + params.a * params.lam <= 0.0:
        raise ValueError(
            "a_n has a gamma pole at 1 + a*lambda = 0 (p = 0, c = 0): gamma_1 = 0"
        )


def a_n(params: WalkParams, n):
    """``a_n = prod_{k<n} 1/gamma_k``, evaluated through gamma-function ratios."""
    _check_pole(params)
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 1):
        raise ValueError("a_n needs n >= 1")
    lam = params.lam
    log_const = gammaln(1.0 + params.a * lam) - gammaln(lam)
    out = np.exp(log_gamma_ratio(n_arr, -params.c * lam, params.a * lam) + log_const)
    out = np.where(n_arr == 1, 1.0, out)  # empty product, exact
    return float(out) if np.ndim(out) == 0 else out


def a_sequence(params: WalkParams, n: int) -> np.ndarray:
    """``a_1, ..., a_n`` as an array of length ``n``."""
    return np.atleast_1d(a_n(params, np.arange(1, int(n) + 1)))


def a_n_product(params: WalkParams, n: int) -> float:
    """Direct product form of ``a_n``, used as an independent check."""
    k = np.arange(1, int(n), dtype=float)
    return float(np.prod(1.0 / gamma_n(params, k))) if n > 1 else 1.0


def a_n_limit(params: WalkParams) -> float:
    """``lim n^{(a+c) lambda} a_n = Gamma(1 + a lambda) / Gamma(lambda)``."""
    _check_pole(params)
    return math.exp(gammaln(1.0 + params.a * params.lam) - gammaln(params.lam))


def vn_wn(params: WalkParams, n: int, chunk: int = 1 << 20) -> tuple[float, float]:
    """Partial sums ``v_n = sum a_k^2`` and ``w_n = sum a_k``, compensated."""
    n = int(n)
    if n < 1:
        raise ValueError("vn_wn needs n >= 1")
    v_parts, w_parts = [], []
    for lo in range(1, n + 1, chunk):
        a = np.atleast_1d(a_n(params, np.arange(lo, min(lo + chunk, n + 1))))
        v_parts.append(math.fsum(a * a))
        w_parts.append(math.fsum(a))
    return math.fsum(v_parts), math.fsum(w_parts)


def vn_asymptotic(params: WalkParams, n: int | None = None) -> float:
    """Leading behaviour of ``v_n``.

    Diffusive: ``l * n^{1 - 2 theta}``; critical: ``C * log n``; superdiffusive:
    the finite limit ``v_inf`` (``n`` is ignored).
    """
    regime = classify_regime(params)
    C2 = a_n_limit(params) ** 2
    th = params.theta
    if regime is Regime.DIFFUSIVE:
        return C2 / (1.0 - 2.0 * th) * n ** (1.0 - 2.0 * th)
    if regime is Regime.CRITICAL:
        return C2 * math.log(n)
    return vn_limit_superdiffusive(params)


def vn_limit_superdiffusive(params: WalkParams, head: int = 1 << 20) -> float:
    """``sum_{k>=1} a_k^2`` with an Euler-Maclaurin tail beyond ``head`` terms."""
    _require(params, Regime.SUPERDIFFUSIVE, "vn_limit_superdiffusive")
    v, _ = vn_wn(params, head)
    # a_k^2 ~ C^2 k^{-2 theta} (1 + O(1/k)); tail sum from head + 1 to infinity
    e = 2.0 * params.theta
    C2 = a_n_limit(params) ** 2
    N = float(head)
    tail = C2 * (N ** (1.0 - e) / (e - 1.0) - 0.5 * N ** (-e))
    return v + tail


def diffusive_variance(params: WalkParams) -> float:
    """Limit variance of ``S_n / sqrt(n)``: ``(2ac + c - 1) / (2a + c - 1)``."""
    _require(params, Regime.DIFFUSIVE, "diffusive_variance")
    a, c = params.a, params.c
    return (2 * a * c + c - 1) / (2 * a + c - 1)


def diffusive_kernel(params: WalkParams, s: float, t: float) -> float:
    """Covariance ``E[W_s W_t]`` of the diffusive Gaussian limit, ``0 < s <= t``."""
    _require(params, Regime.DIFFUSIVE, "diffusive_kernel")
    if s <= 0:
        raise ValueError(f"kernel needs s > 0, got s={s}")
    if s > t:
        raise ValueError(f"kernel needs s <= t, got s={s}, t={t}")
    a, c = params.a, params.c
    first = a * (1 - c * c) / ((a + c) * (1 - 2 * a - c)) * s * (t / s) ** params.theta
    return first + c * (a + 1) / (a + c) * s


def com_variance(params: WalkParams) -> float:
    """Limit variance of the centre of mass ``G_n / sqrt(n)``."""
    _require(params, Regime.DIFFUSIVE, "com_variance")
    a, c = params.a, params.c
    return (2 - c * (c + 1 + 3 * c * a + 3 * a - 2 * a * a)) / (3 * (2 + c - a) * (1 - 2 * a - c))


def critical_constants(params: WalkParams) -> tuple[float, float]:
    """``(variance, lil)``; both equal ``(c - 1)^2 / (c + 1)``."""
    _require(params, Regime.CRITICAL, "critical_constants")
    c = params.c
    v = (c - 1) ** 2 / (c + 1)
    if v == 0.0:
        warnings.warn("critical point with c = 1 forces p = 1/2; constant vanishes", RuntimeWarning, stacklevel=2)
    return v, v


def critical_kernel(params: WalkParams, s: float, t: float) -> float:
    """Brownian covariance ``min(s, t) (c - 1)^2 / (c + 1)`` of the critical limit."""
    _require(params, Regime.CRITICAL, "critical_kernel")
    if s < 0 or t < 0:
        raise ValueError(f"kernel needs non-negative times, got s={s}, t={t}")
    c = params.c
    return min(s, t) * (c - 1) ** 2 / (c + 1)


def limit_Y_second_moment(params: WalkParams) -> float:
    """``lim E[Y_n^2] / n^{2 theta}`` for the walk started from ``E[Y_1^2] = 1``."""
    _require(params, Regime.SUPERDIFFUSIVE, "limit_Y_second_moment")
    a, c, lam = params.a, params.c, params.lam
    K = params.K
    b = (2 * a + c) * lam
    g = math.exp(gammaln(lam) - gammaln(b))
    # second term removes the excess K - 1 carried by a start at E[Y_1^2] = K
    return g / lam * (K / (2 * a + c - 1) - (K - 1) / (2 * a + c))


def lc_moments(params: WalkParams) -> tuple[float, float]:
    """``(E[L_c], E[L_c^2])`` for the superdiffusive limit ``L_c = lim S_n / n^theta``."""
    _require(params, Regime.SUPERDIFFUSIVE, "lc_moments")
    a, c, q, lam = params.a, params.c, params.q, params.lam
    _check_pole(params)
    ratio = a / (a + c)
    mean = ratio * (2 * q - 1) * math.exp(gammaln(lam) - gammaln(1 + a * lam))
    second = ratio * ratio * limit_Y_second_moment(params)
    return mean, second


def lc_second_moment_published(params: WalkParams) -> float:
    """The published closed form ``a^2 K Gamma(lambda) / ((a+c)^2 lambda (2a+c-1) Gamma((2a+c) lambda))``.

    It solves the second-moment recursion from ``E[Y_1^2] = K = 1 + 2ac + c^2``
    instead of 1, so it agrees with :func:`lc_moments` only at ``c = 0``.
    """
    _require(params, Regime.SUPERDIFFUSIVE, "lc_second_moment_published")
    a, c, lam = params.a, params.c, params.lam
    K = params.K
    b = (2 * a + c) * lam
    return a * a * K * math.exp(gammaln(lam) - gammaln(b)) / ((a + c) ** 2 * lam * (2 * a + c - 1))


def limit_matrices(params: WalkParams):
    """``(V, W)``: ``V`` in the diffusive regime, ``W`` in the critical one, the other ``None``."""
    _warn_half(params)
    regime = classify_regime(params)
    a, c = params.a, params.c
    if regime is Regime.DIFFUSIVE:
        off = a * c * (c + 1) * (1 + a)
        V = np.array(
            [
                [c * c * (1 - a * a), off],
                [off, a * a * params.K * (c + 1) / (1 - c - 2 * a)],
            ]
        ) / (a + c) ** 2
        return V, None
    if regime is Regime.CRITICAL:
        return None, (c - 1) ** 2 / (c + 1) * np.array([[0.0, 0.0], [0.0, 1.0]])
    raise RegimeError("limit matrices exist only in the diffusive and critical regimes")


def normalization_matrix(params: WalkParams, n: int) -> np.ndarray:
    """``V_n`` (diffusive) or ``W_n`` (critical) normalising ``(N_n, M_n)``."""
    regime = classify_regime(params)
    if regime is Regime.SUPERDIFFUSIVE:
        raise RegimeError("no matrix normalisation in the superdiffusive regime")
    scale = math.sqrt(n) if regime is Regime.DIFFUSIVE else math.sqrt(n * math.log(n))
    a, c = params.a, params.c
    return np.diag([1.0, a / (a + c) / a_n(params, n)]) / scale


@dataclass
class RegimeLimits:
    regime: Regime
    clt_variance: float | None = None
    qsl_constant: float | None = None
    lil_constant: float | None = None
    com_variance: float | None = None
    lc_mean: float | None = None
    lc_second_moment: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        return d


def regime_limits(params: WalkParams) -> RegimeLimits:
    regime = classify_regime(params)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if regime is Regime.DIFFUSIVE:
            v = diffusive_variance(params)
            return RegimeLimits(regime, clt_variance=v, qsl_constant=v, com_variance=com_variance(params))
        if regime is Regime.CRITICAL:
            v, lil = critical_constants(params)
            return RegimeLimits(regime, clt_variance=v, qsl_constant=v, lil_constant=lil)
        m, m2 = lc_moments(params)
        return RegimeLimits(regime, lc_mean=m, lc_second_moment=m2)
