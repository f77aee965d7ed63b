"""Memory-index samplers for the recall instant ``beta_{n+1}``.

After ``n`` steps instant ``k`` carries weight ``1 + c * #{j : beta_j = k}``
and the total weight is ``(c + 1) n - c``.  Two backends draw from that law:

* :class:`RecordMemory` keeps the flat list of past draws and samples the
  exact two-part mixture (uniform base mass ``n`` plus ``c`` per past draw)
  in O(1);
* :class:`TreeMemory` keeps per-index weights in a Fenwick tree and inverts
  the prefix sums in O(log n).

Both consume exactly two uniforms per draw.
"""

from __future__ import annotations

import numpy as np


class FenwickTree:
    """Prefix-summable array of non-negative float weights, 1-based, growable."""

    def __init__(self, capacity: int = 16):
        self._tree = np.zeros(max(int(capacity), 1) + 1)
        self._size = 0
        self._total = 0.0

    def __len__(self):
        return self._size

    @property
    def total(self) -> float:
        return self._total

    def _grow(self, need: int):
        cap = len(self._tree) - 1
        while cap < need:
            cap *= 2
        weights = [self.weight(k) for k in range(1, self._size + 1)]
        self._tree = np.zeros(cap + 1)
        size, self._size, self._total = self._size, 0, 0.0
        for k, w in enumerate(weights, 1):
            self.add(k, w)
        self._size = size

    def add(self, index: int, value: float):
        if index < 1:
            raise IndexError(index)
        if index >= len(self._tree):
            self._grow(index)
        self._size = max(self._size, index)
        self._total += value
        t = self._tree
        j = index
        n = len(t) - 1
        while j <= n:
            t[j] += value
            j += j & -j

    def prefix(self, index: int) -> float:
        t = self._tree
        s = 0.0
        j = min(index, len(t) - 1)
        while j > 0:
            s += t[j]
            j -= j & -j
        return s

    def weight(self, index: int) -> float:
        return self.prefix(index) - self.prefix(index - 1)

    def find(self, target: float) -> int:
        """Smallest index whose prefix sum exceeds ``target``."""
        t = self._tree
        n = len(t) - 1
        pos = 0
        bit = 1 << (n.bit_length() - 1)
        while bit:
            nxt = pos + bit
            if nxt <= n and t[nxt] <= target:
                pos = nxt
                target -= t[nxt]
            bit >>= 1
        return min(pos + 1, self._size)


class RecordMemory:
    """Memory as the raw list of past recalls ``beta_2, ..., beta_n``."""

    def __init__(self, c: float, history=()):
        self.c = float(c)
        validate_history(history)
        self.history = list(int(b) for b in history)

    @property
    def n(self) -> int:
        return len(self.history) + 1

    def push(self, k: int):
        self.history.append(int(k))

    def probabilities(self) -> np.ndarray:
        """Exact law of the next draw implied by the mixture."""
        n, c = self.n, self.c
        total = (c + 1.0) * n - c
        prob = np.full(n, 1.0 / total)
        if n > 1 and c > 0:
            counts = np.bincount(self.history, minlength=n + 1)[1:]
            prob += c * counts / total
        return prob


class TreeMemory:
    """Memory as a Fenwick tree of the current per-index weights."""

    def __init__(self, c: float, history=()):
        self.c = float(c)
        validate_history(history)
        self.tree = FenwickTree(max(16, len(history) + 2))
        self.tree.add(1, 1.0)
        for b in history:
            self.push(b)

    @property
    def n(self) -> int:
        return len(self.tree)

    def push(self, k: int):
        n = self.n
        if self.c:
            self.tree.add(int(k), self.c)
        self.tree.add(n + 1, 1.0)

    def probabilities(self) -> np.ndarray:
        w = np.array([self.tree.weight(k) for k in range(1, self.n + 1)])
        return w / w.sum()


def record_draw(mem: RecordMemory, rng) -> int:
    """Draw ``beta_{n+1}``: base mass ``n`` uniform on ``1..n``, else a uniform past recall."""
    u_branch, u_index = rng.random(), rng.random()
    n, c = mem.n, mem.c
    if n == 1 or u_branch * ((c + 1.0) * n - c) < n:
        return min(1 + int(u_index * n), n)
    return mem.history[min(int(u_index * (n - 1)), n - 2)]


def tree_draw(mem: TreeMemory, rng) -> int:
    """Draw ``beta_{n+1}`` by inverting the weight prefix sums.

    The second uniform is consumed and discarded so both backends advance the
    stream identically.
    """
    u, _ = rng.random(), rng.random()
    return mem.tree.find(u * mem.tree.total)


def draw_many(mem, rng, size: int) -> np.ndarray:
    """``size`` independent draws from a frozen memory, same uniforms as repeated single draws."""
    u = rng.random((int(size), 2))
    n = mem.n
    if isinstance(mem, TreeMemory):
        from ._engine import fenwick_find_many

        return fenwick_find_many(mem.tree._tree, u[:, 0] * mem.tree.total, n)
    if n == 1:
        return np.ones(int(size), dtype=np.int64)
    c = mem.c
    base = u[:, 0] * ((c + 1.0) * n - c) < n
    fresh = np.minimum(1 + (u[:, 1] * n).astype(np.int64), n)
    hist = np.asarray(mem.history, dtype=np.int64)
    recalled = hist[np.minimum((u[:, 1] * (n - 1)).astype(np.int64), n - 2)]
    return np.where(base, fresh, recalled)


def validate_history(history) -> None:
    for j, b in enumerate(history, start=2):
        if not 1 <= int(b) <= j - 1:
            raise ValueError(f"invalid history: beta_{j} = {b} is outside [1, {j - 1}]")


def exact_distribution(history, c: float) -> np.ndarray:
    """The law ``rho_n(k) / ((c + 1) n - c)`` of the next recall, computed directly."""
    validate_history(history)
    n = len(history) + 1
    rho = np.ones(n)
    for b in history:
        rho[int(b) - 1] += c
    return rho / ((c + 1.0) * n - c)
