"""Exhaustive enumeration of every (alpha, beta) outcome for short walks.

Used as an oracle: for ``n <= 6`` the full outcome tree has at most a few
thousand leaves, and each leaf's probability is exact.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from .moments import MomentTable
from .sampler import RecordMemory, TreeMemory, exact_distribution


def _law(kind: str, history: tuple, c: float) -> np.ndarray:
    if kind == "exact":
        return exact_distribution(history, c)
    if kind == "record":
        return RecordMemory(c, history).probabilities()
    if kind == "tree":
        return TreeMemory(c, history).probabilities()
    raise ValueError(f"unknown recall law {kind!r}")


def enumerate_walk(params, n: int, law: str = "exact") -> dict[tuple[int, float], float]:
    """Exact joint law of ``(S_n, Y_n)`` as ``{(S, Y): probability}``.

    ``law`` selects how the recall distribution is computed: directly from the
    weights (``"exact"``) or from a backend's own data structure.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    p, c, q = params.p, params.c, params.q
    out: dict = defaultdict(float)
    # state: (steps X_1..X_k, history beta_2..beta_k, S, Y, prob)
    frontier = [((1,), (), 1, 1.0, q), ((-1,), (), -1, -1.0, 1.0 - q)]
    for _ in range(n - 1):
        nxt = []
        for X, hist, S, Y, pr in frontier:
            if pr == 0.0:
                continue
            probs = _law(law, hist, c)
            for k, pk in enumerate(probs, start=1):
                xb = X[k - 1]
                for alpha, pa in ((1, p), (-1, 1.0 - p)):
                    w = pr * pk * pa
                    if w == 0.0:
                        continue
                    nxt.append((X + (alpha * xb,), hist + (k,), S + alpha * xb, Y + (alpha + c) * xb, w))
        frontier = nxt
    for _, _, S, Y, pr in frontier:
        if pr:
            out[(S, Y)] += pr
    return dict(out)


def enumerated_moments(params, n: int, law: str = "exact") -> MomentTable:
    dist = enumerate_walk(params, n, law)
    acc = np.zeros(5)
    for (S, Y), pr in dist.items():
        acc += pr * np.array([Y, Y * Y, S, S * Y, S * S])
    return MomentTable(int(n), *map(float, acc))
