"""Compiled inner loop shared by :func:`rerw.model.run` and the ensemble runner.

Uniform layout: one uniform for ``X_1``, then three per step in the order
(recall branch, recall index, alpha).  The pure-Python :func:`rerw.model.step`
consumes the same stream, so both paths agree draw for draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

CHUNK = 1 << 16
LIL_START = 16

# int state slots
_N, _S, _CK = 0, 1, 2
# float state slots
_Y, _SUMS, _QD, _QC, _LIL = 0, 1, 2, 3, 4


@njit(cache=True, nogil=True)
def _fenwick_add(tree, index, value):
    n = tree.shape[0] - 1
    j = index
    while j <= n:
        tree[j] += value
        j += j & -j


@njit(cache=True, nogil=True)
def _fenwick_find(tree, target, size):
    n = tree.shape[0] - 1
    pos = 0
    bit = 1
    while bit * 2 <= n:
        bit *= 2
    while bit > 0:
        nxt = pos + bit
        if nxt <= n and tree[nxt] <= target:
            pos = nxt
            target -= tree[nxt]
        bit //= 2
    k = pos + 1
    return k if k <= size else size


@njit(cache=True, nogil=True)
def fenwick_find_many(tree, targets, size):
    """:func:`_fenwick_find` over a batch of targets against one fixed tree."""
    out = np.empty(targets.shape[0], dtype=np.int64)
    for i in range(targets.shape[0]):
        out[i] = _fenwick_find(tree, targets[i], size)
    return out


@njit(cache=True, nogil=True)
def _start(u0, q, use_tree, X, beta, tree, istate, fstate, ck, ck_S, ck_Y, ck_L):
    x = 1 if u0 < q else -1
    X[1] = x
    beta[1] = 0
    if use_tree:
        _fenwick_add(tree, 1, 1.0)
    istate[_N] = 1
    istate[_S] = x
    fstate[_Y] = float(x)
    fstate[_SUMS] = float(x)
    fstate[_QD] = 1.0
    if ck.shape[0] > 0 and ck[0] == 1:
        ck_S[0] = x
        ck_Y[0] = float(x)
        istate[_CK] = 1


@njit(cache=True, nogil=True)
def _advance(u, n_new, p, c, use_tree, X, beta, tree, istate, fstate, ck, ck_S, ck_Y, ck_L):
    n = istate[_N]
    s = istate[_S]
    pos = istate[_CK]
    n_ck = ck.shape[0]
    next_ck = ck[pos] if pos < n_ck else -1
    y = fstate[_Y]
    sum_s = fstate[_SUMS]
    qsl_d = fstate[_QD]
    qsl_c = fstate[_QC]
    lil = fstate[_LIL]
    for i in range(n_new):
        ub = u[3 * i]
        ui = u[3 * i + 1]
        ua = u[3 * i + 2]
        total = (c + 1.0) * n - c
        if use_tree:
            k = _fenwick_find(tree, ub * total, n)
        elif n == 1 or ub * total < n:
            k = 1 + int(ui * n)
            if k > n:
                k = n
        else:
            j = int(ui * (n - 1))
            if j > n - 2:
                j = n - 2
            k = beta[2 + j]
        alpha = 1 if ua < p else -1
        xb = X[k]
        x = alpha * xb
        n += 1
        X[n] = x
        beta[n] = k
        s += x
        y += (alpha + c) * xb
        if use_tree:
            if c != 0.0:
                _fenwick_add(tree, k, c)
            _fenwick_add(tree, n, 1.0)

        fs = float(s)
        fn = float(n)
        s2 = fs * fs
        sum_s += fs
        qsl_d += s2 / (fn * fn)
        lk = math.log(fn)
        qsl_c += s2 / (fn * fn * lk * lk)
        if n >= LIL_START:
            r = s2 / (2.0 * fn * lk * math.log(math.log(lk)))
            if r > lil:
                lil = r
        if n == next_ck:
            ck_S[pos] = s
            ck_Y[pos] = y
            ck_L[pos] = lil
            pos += 1
            next_ck = ck[pos] if pos < n_ck else -1
    istate[_N] = n
    istate[_S] = s
    istate[_CK] = pos
    fstate[_Y] = y
    fstate[_SUMS] = sum_s
    fstate[_QD] = qsl_d
    fstate[_QC] = qsl_c
    fstate[_LIL] = lil


@dataclass
class SimResult:
    S: np.ndarray
    Y: np.ndarray
    lil_max: np.ndarray
    sum_S: float
    qsl_diffusive: float
    qsl_critical: float
    X: np.ndarray | None = None
    beta: np.ndarray | None = None


def simulate(params, n_steps, rng, checkpoints, backend="record", keep_path=False):
    """Run one walk of ``n_steps`` steps drawing uniforms from ``rng`` in chunks."""
    if backend not in ("record", "tree"):
        raise ValueError(f"unknown sampler backend {backend!r}")
    n_steps = int(n_steps)
    ck = np.ascontiguousarray(checkpoints, dtype=np.int64)
    use_tree = backend == "tree"
    idx_dtype = np.int32 if n_steps < 2**31 - 1 else np.int64
    X = np.zeros(n_steps + 1, dtype=np.int8)
    beta = np.zeros(n_steps + 1, dtype=idx_dtype)
    tree = np.zeros(n_steps + 1 if use_tree else 1)
    istate = np.zeros(3, dtype=np.int64)
    fstate = np.zeros(5)
    ck_S = np.zeros(ck.shape[0], dtype=np.int64)
    ck_Y = np.zeros(ck.shape[0])
    ck_L = np.zeros(ck.shape[0])
    p, c, q = params.p, params.c, params.q

    _start(rng.random(), q, use_tree, X, beta, tree, istate, fstate, ck, ck_S, ck_Y, ck_L)
    buf = np.empty(3 * CHUNK)
    remaining = n_steps - 1
    while remaining > 0:
        m = min(CHUNK, remaining)
        u = buf[: 3 * m]
        rng.random(out=u)
        _advance(u, m, p, c, use_tree, X, beta, tree, istate, fstate, ck, ck_S, ck_Y, ck_L)
        remaining -= m

    return SimResult(
        S=ck_S,
        Y=ck_Y,
        lil_max=ck_L,
        sum_S=float(fstate[_SUMS]),
        qsl_diffusive=float(fstate[_QD]),
        qsl_critical=float(fstate[_QC]),
        X=X if keep_path else None,
        beta=beta if keep_path else None,
    )
