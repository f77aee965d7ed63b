"""Parameters, regimes and the exact single-step dynamics of the reinforced elephant walk.

The walk starts with ``X_1 = +1`` with probability ``q``.  At time ``n + 1``
an instant ``beta`` in ``{1, ..., n}`` is recalled with probability
proportional to its weight, the step is ``X_{n+1} = alpha * X_beta`` where
``alpha = +1`` with probability ``p``, and the recalled instant gains weight
``c`` while the new instant enters with weight 1.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .sampler import RecordMemory, TreeMemory, record_draw, tree_draw

CRITICAL_TOL = 1e-12

BACKENDS = ("record", "tree")


class Regime(str, enum.Enum):
    DIFFUSIVE = "diffusive"
    CRITICAL = "critical"
    SUPERDIFFUSIVE = "superdiffusive"


class RegimeError(ValueError):
    """An operation was asked for a regime where it has no meaning."""


@dataclass(frozen=True)
class WalkParams:
    """Memory parameter ``p``, reinforcement ``c`` and first-step bias ``q``."""

    p: float
    c: float
    q: float = 0.5

    def __post_init__(self):
        for name in ("p", "c", "q"):
            v = getattr(self, name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
                raise ValueError(f"{name} must be a finite real number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {self.q}")
        if self.c < 0.0:
            raise ValueError(f"c must be non-negative, got {self.c}")
        # tolerance: p = 0.35, c = 0.3 leaves a + c = -5.6e-17 in binary
        if abs(self.a + self.c) <= CRITICAL_TOL:
            raise ValueError(
                f"a + c must be non-zero (p={self.p}, c={self.c} gives a + c = 0)"
            )

    @property
    def a(self) -> float:
        return 2.0 * self.p - 1.0

    @property
    def lam(self) -> float:
        return 1.0 / (self.c + 1.0)

    @property
    def theta(self) -> float:
        """Growth exponent ``(a + c) * lambda`` of ``Y_n`` and of ``1 / a_n``."""
        return (self.a + self.c) * self.lam

    @property
    def K(self) -> float:
        """``1 + 2ac + c^2``, written as ``(1 - a^2) + (a + c)^2`` to avoid cancellation near a = -1, c = 1."""
        return (1.0 - self.a * self.a) + (self.a + self.c) ** 2

    @property
    def regime(self) -> Regime:
        return classify_regime(self)


def classify_regime(params: WalkParams, tol: float = CRITICAL_TOL) -> Regime:
    """Place ``a`` relative to the critical value ``(1 - c) / 2``."""
    d = params.a - (1.0 - params.c) / 2.0
    if abs(d) <= tol:
        return Regime.CRITICAL
    return Regime.DIFFUSIVE if d < 0 else Regime.SUPERDIFFUSIVE


def total_weight(n: int, c: float) -> float:
    """Sum of memory weights after ``n`` steps, ``(c + 1) n - c``."""
    return (c + 1.0) * n - c


def make_rng(seed, *key: int) -> np.random.Generator:
    """Counter-based Philox generator for ``seed``, optionally on substream ``key``.

    ``make_rng(s, r)`` is the ``r``-th child of ``SeedSequence(s).spawn``.
    """
    if isinstance(seed, np.random.Generator):
        if key:
            raise TypeError("cannot derive a substream from a Generator")
        return seed
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key + key)
    else:
        ss = np.random.SeedSequence(seed, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class StepRecord:
    n: int
    alpha: int
    beta: int
    x: int
    S: int
    Y: float


@dataclass
class WalkState:
    params: WalkParams
    rng: np.random.Generator
    memory: RecordMemory | TreeMemory
    n: int = 1
    S: int = 0
    Y: float = 0.0
    steps: list = field(default_factory=list)

    @property
    def backend(self) -> str:
        return "tree" if isinstance(self.memory, TreeMemory) else "record"


def new_walk(params: WalkParams, seed=None, backend: str = "record") -> WalkState:
    if backend not in BACKENDS:
        raise ValueError(f"unknown sampler backend {backend!r}")
    rng = make_rng(seed)
    x1 = 1 if rng.random() < params.q else -1
    mem = RecordMemory(params.c) if backend == "record" else TreeMemory(params.c)
    return WalkState(params, rng, mem, n=1, S=x1, Y=float(x1), steps=[x1])


def step(state: WalkState) -> StepRecord:
    """Advance the walk by one step; consumes three uniforms (two for the recall)."""
    p = state.params
    if isinstance(state.memory, TreeMemory):
        k = tree_draw(state.memory, state.rng)
    else:
        k = record_draw(state.memory, state.rng)
    alpha = 1 if state.rng.random() < p.p else -1
    xb = state.steps[k - 1]
    x = alpha * xb
    state.memory.push(k)
    state.steps.append(x)
    state.n += 1
    state.S += x
    state.Y += (alpha + p.c) * xb
    return StepRecord(state.n, alpha, k, x, state.S, state.Y)


@dataclass
class Trajectory:
    """Checkpointed record of a simulated walk.

    ``X`` and ``beta`` hold the whole step stream when the run was made with
    ``keep_path=True``; ``beta[k]`` is the instant recalled at time ``k``
    (``beta[0]`` and ``beta[1]`` are unused).  The ``qsl_*``, ``sum_S`` and
    ``lil_max`` fields are streamed over every step, not only checkpoints.
    """

    params: WalkParams
    checkpoints: np.ndarray
    S: np.ndarray
    Y: np.ndarray
    seed: object
    backend: str = "record"
    sum_S: float = 0.0
    qsl_diffusive: float = 0.0
    qsl_critical: float = 0.0
    lil_max: np.ndarray | None = None
    X: np.ndarray | None = None
    beta: np.ndarray | None = None

    @property
    def n_steps(self) -> int:
        return int(self.checkpoints[-1])

    @property
    def records(self):
        return list(zip(self.checkpoints.tolist(), self.S.tolist(), self.Y.tolist()))

    def to_csv(self, sink=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "S", "Y"])
        for k, s, y in self.records:
            w.writerow([k, s, format(y, ".17g")])
        text = buf.getvalue()
        if sink is not None:
            sink.write(text)
        return text


def read_trajectory_csv(source: str | io.TextIOBase) -> list[tuple[int, int, float]]:
    if isinstance(source, str):
        source = io.StringIO(source)
    rows = list(csv.reader(source))
    if not rows or rows[0] != ["step", "S", "Y"]:
        raise ValueError("trajectory CSV must start with header 'step,S,Y'")
    return [(int(k), int(s), float(y)) for k, s, y in rows[1:]]


def log_checkpoints(n_steps: int, per_decade: int = 10) -> np.ndarray:
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    m = max(2, int(math.ceil(per_decade * math.log10(max(n_steps, 10)))) + 1)
    pts = np.unique(np.round(np.logspace(0, math.log10(n_steps), m)).astype(np.int64))
    return np.union1d(pts, [1, n_steps])


def normalize_checkpoints(checkpoints: Iterable[int] | None, n_steps: int) -> np.ndarray:
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if checkpoints is None:
        return log_checkpoints(n_steps)
    ck = np.asarray(sorted(set(int(k) for k in checkpoints)), dtype=np.int64)
    if ck.size and (ck[0] < 1 or ck[-1] > n_steps):
        raise ValueError(f"checkpoints must lie in [1, {n_steps}]")
    return np.union1d(ck, [1]).astype(np.int64)


def run(
    params: WalkParams,
    n_steps: int,
    seed=None,
    checkpoints: Sequence[int] | None = None,
    backend: str = "record",
    keep_path: bool = False,
) -> Trajectory:
    """Simulate ``n_steps`` steps and record ``(S_k, Y_k)`` at the checkpoints.

    The result is a pure function of the arguments; index 1 is always recorded.
    """
    from ._engine import simulate

    ck = normalize_checkpoints(checkpoints, n_steps)
    res = simulate(params, n_steps, make_rng(seed), ck, backend=backend, keep_path=keep_path)
    return Trajectory(
        params=params,
        checkpoints=ck,
        S=res.S,
        Y=res.Y,
        seed=seed,
        backend=backend,
        sum_S=res.sum_S,
        qsl_diffusive=res.qsl_diffusive,
        qsl_critical=res.qsl_critical,
        lil_max=res.lil_max,
        X=res.X,
        beta=res.beta,
    )
