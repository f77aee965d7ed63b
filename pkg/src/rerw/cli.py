"""``rerw`` command line: simulate, verify, table, moments, diagnose.

Data goes to standard output or ``--out``; human-readable lines go to
standard error.  Exit codes: 0 all checks pass, 1 some check fails,
2 usage, configuration or output error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import analytic, martingale, montecarlo
from .model import BACKENDS, Regime, RegimeError, WalkParams, make_rng, run
from .moments import moment_table

COMMANDS = ("simulate", "verify", "table", "moments", "diagnose")
FORMATS = ("json", "csv", "text")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad flag or config value; ``flag`` names the offender."""

    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


@dataclass(frozen=True)
class RunConfig:
    command: str
    p: float | None = None
    c: float | None = None
    q: float = 0.5
    steps: int = 10_000
    replicates: int = 1000
    seed: int = 0
    sampler: str = "record"
    grid: tuple = montecarlo.DEFAULT_GRID
    format: str | None = None
    out: str | None = None
    threads: int = 1
    force_regime: str | None = None
    tol: tuple = ()

    @property
    def params(self) -> WalkParams:
        return WalkParams(self.p, self.c, self.q)

    @property
    def output_format(self) -> str:
        if self.format:
            return self.format
        return "csv" if self.command in ("simulate", "moments") else "json"

    def to_config_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None or (f.name == "tol" and not v):
                continue
            if f.name == "grid":
                v = ",".join(repr(float(s)) for s in v)
            elif f.name == "tol":
                v = ",".join(f"{k}:{val!r}" for k, val in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


# key -> (converter, flag name)
def _float(flag):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise UsageError(flag, f"expected a number, got {text!r}") from None
        if not math.isfinite(v):
            raise UsageError(flag, f"expected a finite number, got {text!r}")
        return v

    return conv


def _int(flag, minimum):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise UsageError(flag, f"expected an integer, got {text!r}") from None
        if v < minimum:
            raise UsageError(flag, f"must be >= {minimum}, got {v}")
        return v

    return conv


def _choice(flag, options):
    def conv(text):
        if text not in options:
            raise UsageError(flag, f"must be one of {', '.join(options)}, got {text!r}")
        return text

    return conv


def _grid(text):
    try:
        vals = tuple(sorted({float(s) for s in str(text).split(",") if s.strip()}))
    except ValueError:
        raise UsageError("--grid", f"expected comma-separated fractions, got {text!r}") from None
    if not vals or vals[0] <= 0 or vals[-1] > 1:
        raise UsageError("--grid", f"fractions must lie in (0, 1], got {text!r}")
    return vals


def _tol(text):
    out = {}
    for item in str(text).split(","):
        if not item.strip():
            continue
        key, sep, val = item.replace("=", ":").partition(":")
        key = key.strip()
        if not sep or key not in montecarlo.DEFAULT_TOLERANCES:
            raise UsageError("--tol", f"expected NAME=VALUE with NAME in {sorted(montecarlo.DEFAULT_TOLERANCES)}, got {item!r}")
        out[key] = _float("--tol")(val)
    return tuple(sorted(out.items()))


CONVERTERS = {
    "command": _choice("command", COMMANDS),
    "p": _float("--p"),
    "c": _float("--c"),
    "q": _float("--q"),
    "steps": _int("--steps", 1),
    "replicates": _int("--replicates", 2),
    "seed": _int("--seed", 0),
    "sampler": _choice("--sampler", BACKENDS),
    "grid": _grid,
    "format": _choice("--format", FORMATS),
    "out": str,
    "threads": _int("--threads", 1),
    "force_regime": _choice("--force-regime", tuple(r.value for r in Regime)),
    "tol": _tol,
}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; unknown keys are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep:
            raise UsageError("--config", f"line {lineno}: expected 'key = value'")
        if key not in CONVERTERS:
            raise UsageError("--config", f"line {lineno}: unknown key {key!r}")
        out[key] = CONVERTERS[key](value)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", help="memory parameter in [0, 1]")
    common.add_argument("--c", help="reinforcement intensity >= 0")
    common.add_argument("--q", help="probability that the first step is +1")
    common.add_argument("--steps", "--n", dest="steps", help="number of steps n")
    common.add_argument("--replicates", help="ensemble size (verify) or one-step draws (diagnose)")
    common.add_argument("--seed", help="master seed")
    common.add_argument("--sampler", help="recall backend: record or tree")
    common.add_argument("--grid", help="comma-separated time fractions in (0, 1]")
    common.add_argument("--format", help="json, csv or text")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--threads", help="worker threads for ensembles")
    common.add_argument("--force-regime", dest="force_regime", help="override the regime used to pick checks")
    common.add_argument("--tol", action="append", help="tolerance override NAME=VALUE, repeatable")
    common.add_argument("--config", help="flat key = value file; flags take precedence")
    parser = argparse.ArgumentParser(prog="rerw", description="Reinforced elephant random walk toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "simulate one path and emit checkpointed (step, S, Y)",
        "verify": "run an ensemble and check the limit theorems of the regime",
        "table": "print the limit constants of the regime",
        "moments": "exact E[Y], E[Y^2], E[S], E[SY], E[S^2] at log-spaced n",
        "diagnose": "martingale diagnostics on one path and one-step conditional moments",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def parse_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    values = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError("--config", f"cannot read {ns.config}: {exc.strerror}") from None
        values.update(parse_config_text(text))
        values.pop("command", None)
    for key in CONVERTERS:
        if key == "command":
            continue
        raw = getattr(ns, key, None)
        if raw is None:
            continue
        values[key] = CONVERTERS[key](",".join(raw) if key == "tol" else raw)
    values["command"] = ns.command
    cfg = RunConfig(**values)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    if cfg.p is None:
        raise UsageError("--p", "is required")
    if cfg.c is None:
        raise UsageError("--c", "is required")
    if not 0 <= cfg.p <= 1:
        raise UsageError("--p", f"must lie in [0, 1], got {cfg.p}")
    if cfg.c < 0:
        raise UsageError("--c", f"must be >= 0, got {cfg.c}")
    if not 0 <= cfg.q <= 1:
        raise UsageError("--q", f"must lie in [0, 1], got {cfg.q}")
    try:
        cfg.params
    except ValueError as exc:
        raise UsageError("--p/--c", str(exc)) from None


# ---------------------------------------------------------------- commands


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _checks_text(checks) -> str:
    lines = []
    for c in checks:
        verdict = "PASS" if c["pass"] else "FAIL"
        lines.append(
            f"{verdict}  {c['name']}: estimate={c['estimate']:.6g} target={c['target']:.6g} "
            f"stderr={c['stderr']:.3g} tolerance={c['tolerance']:.3g}"
        )
    return "\n".join(lines) + "\n"


def _report_payload(report: dict, fmt: str) -> str:
    if fmt == "json":
        return montecarlo.report_json(report)
    if fmt == "csv":
        keys = ("name", "target", "estimate", "stderr", "tolerance", "pass")
        return _rows_csv(keys, [[c[k] for k in keys] for c in report["checks"]])
    return f"regime: {report['regime']}\n" + _checks_text(report["checks"])


def cmd_simulate(cfg: RunConfig):
    n = cfg.steps
    ck = None
    if cfg.grid != montecarlo.DEFAULT_GRID:
        ck = sorted({max(1, math.floor(n * s + 1e-9)) for s in cfg.grid})
    traj = run(cfg.params, n, seed=cfg.seed, checkpoints=ck, backend=cfg.sampler)
    fmt = cfg.output_format
    if fmt == "csv":
        payload = traj.to_csv()
    elif fmt == "json":
        payload = json.dumps(
            {
                "params": {"p": cfg.p, "c": cfg.c, "q": cfg.q},
                "seed": cfg.seed,
                "backend": cfg.sampler,
                "step": traj.checkpoints.tolist(),
                "S": traj.S.tolist(),
                "Y": traj.Y.tolist(),
                "sum_S": traj.sum_S,
            },
            indent=2,
        ) + "\n"
    else:
        payload = "".join(f"{k}\t{s}\t{y:.17g}\n" for k, s, y in traj.records)
    return payload, EXIT_OK


def cmd_verify(cfg: RunConfig):
    spec = montecarlo.EnsembleSpec(
        cfg.params,
        cfg.steps,
        cfg.replicates,
        master_seed=cfg.seed,
        time_grid=cfg.grid,
        backend=cfg.sampler,
        force_regime=cfg.force_regime,
    )
    report = montecarlo.verify(spec, threads=cfg.threads, tolerances=dict(cfg.tol))
    for c in report["checks"]:
        print(("PASS " if c["pass"] else "FAIL ") + c["name"], file=sys.stderr)
    code = EXIT_OK if montecarlo.all_passed(report) else EXIT_FAIL
    return _report_payload(report, cfg.output_format), code


def cmd_table(cfg: RunConfig):
    limits = analytic.regime_limits(cfg.params).to_dict()
    fmt = cfg.output_format
    if fmt == "json":
        return json.dumps(limits, indent=2) + "\n", EXIT_OK
    if fmt == "csv":
        return _rows_csv(["key", "value"], [[k, v] for k, v in limits.items()]), EXIT_OK
    width = max(map(len, limits))
    return "".join(f"{k:<{width}}  {v}\n" for k, v in limits.items()), EXIT_OK


def _log_ns(n: int) -> list[int]:
    out = {1, n}
    k = 1
    while k < n:
        out.update({k, 2 * k, 5 * k})
        k *= 10
    return sorted(v for v in out if v <= n)


def cmd_moments(cfg: RunConfig):
    table = moment_table(cfg.params, _log_ns(cfg.steps))
    header = ["n", "eY", "eY2", "eS", "eSY", "eS2"]
    rows = [[t.n, t.eY, t.eY2, t.eS, t.eSY, t.eS2] for t in table]
    fmt = cfg.output_format
    if fmt == "csv":
        return _rows_csv(header, rows), EXIT_OK
    if fmt == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n", EXIT_OK
    return "".join("\t".join(format(v, ".10g") if isinstance(v, float) else str(v) for v in r) + "\n" for r in rows), EXIT_OK


def diagnose(params: WalkParams, n: int, draws: int, seed: int, backend: str = "record") -> dict:
    """Martingale checks along one simulated path plus conditional-moment draws at its end."""
    traj = run(params, n, seed=seed, backend=backend, keep_path=True)
    series = martingale.decompose_path(traj, params)
    S, _ = martingale.path_SY(traj)
    rec = series.reconstruct_S(params)
    rel = float(np.max(np.abs(rec - S) / np.maximum(1.0, np.abs(S))))
    inc = martingale.increments(traj, params)
    K = params.K
    v = np.cumsum(analytic.a_sequence(params, n) ** 2)
    qv_ratio = float(np.max(series.qvM / (K * v)))
    checks = [
        montecarlo.Check("reconstruction_rel_error", 0.0, rel, 0.0, 1e-9, rel <= 1e-9),
        montecarlo.Check("qvM_over_Kv_max", 1.0, qv_ratio, 0.0, 0.0, qv_ratio <= 1.0 + 1e-12),
        montecarlo.Check("eps_abs_max", inc.eps_bound, inc.max_abs_eps, 0.0, 0.0, inc.max_abs_eps <= inc.eps_bound),
        montecarlo.Check(
            "xi_abs_max",
            inc.xi_bound,
            float(np.abs(inc.xi).max()) if inc.xi.size else 0.0,
            0.0,
            0.0,
            bool(inc.xi.size == 0 or np.abs(inc.xi).max() <= inc.xi_bound + 1e-12),
        ),
    ]
    hist, X, _, _ = martingale.final_state(traj)
    cond = martingale.conditional_moment_diagnostics(hist, X, params, draws, make_rng(seed, 1))
    report = {
        "params": {"p": params.p, "c": params.c, "q": params.q},
        "n": int(n),
        "seed": int(seed),
        "checks": [c.to_dict() for c in checks] + cond["checks"],
        "qvN_over_n": float(series.qvN[-1] / n),
        "qvM_over_v": float(series.qvM[-1] / v[-1]),
        "conditional_state": {"n": cond["n"], "Y_n": cond["Y_n"], "draws": cond["replicates"]},
    }
    try:
        report["normalized_qv"] = martingale.normalized_qv(traj, params, n).tolist()
    except RegimeError:
        pass
    return report


def cmd_diagnose(cfg: RunConfig):
    report = diagnose(cfg.params, cfg.steps, cfg.replicates, cfg.seed, cfg.sampler)
    code = EXIT_OK if all(c["pass"] for c in report["checks"]) else EXIT_FAIL
    fmt = cfg.output_format
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n", code
    if fmt == "csv":
        keys = ("name", "target", "estimate", "stderr", "tolerance", "pass")
        return _rows_csv(keys, [[c[k] for k in keys] for c in report["checks"]]), code
    return _checks_text(report["checks"]), code


HANDLERS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "table": cmd_table,
    "moments": cmd_moments,
    "diagnose": cmd_diagnose,
}


def emit(payload: str, sink: str | None) -> int:
    """Write ``payload`` to ``sink`` (a path) or standard output; 2 if the sink is unwritable."""
    if sink is None or sink == "-":
        sys.stdout.write(payload)
        sys.stdout.flush()
        return EXIT_OK
    try:
        with open(sink, "w") as fh:
            fh.write(payload)
    except OSError as exc:
        print(f"rerw: cannot write {sink}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(f"rerw: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # argparse reports its own usage errors
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        payload, code = HANDLERS[cfg.command](cfg)
    except (RegimeError, ValueError) as exc:
        print(f"rerw: {exc}", file=sys.stderr)
        return EXIT_USAGE
    written = emit(payload, cfg.out)
    return written if written != EXIT_OK else code


if __name__ == "__main__":
    sys.exit(main())
