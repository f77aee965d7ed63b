import csv
import io
import json

import pytest

from rerw import cli, montecarlo
from rerw.cli import RunConfig, UsageError, main, parse_args, parse_config_text


def test_verify_example_parses():
    cfg = parse_args("verify --p 0.35 --c 1 --steps 10000 --replicates 5000 --seed 42".split())
    assert cfg == RunConfig("verify", p=0.35, c=1.0, steps=10000, replicates=5000, seed=42)
    assert cfg.params.regime.value == "diffusive"
    assert cfg.output_format == "json"


def test_n_alias_and_repeatable_tol():
    cfg = parse_args("moments --p 0.6 --c 0.5 --n 100 --tol com=0.2 --tol qsl_mean=0.3".split())
    assert cfg.steps == 100 and dict(cfg.tol) == {"com": 0.2, "qsl_mean": 0.3}
    assert cfg.output_format == "csv"


@pytest.mark.parametrize(
    "argv, flag",
    [
        ("verify --p 1.5 --c 1", "--p"),
        ("verify --p 0.35 --c 0.3", "--p/--c"),
        ("verify --p 0.35 --c -1", "--c"),
        ("verify --p x --c 1", "--p"),
        ("verify --p 0.35 --c 1 --steps 0", "--steps"),
        ("verify --p 0.35 --c 1 --replicates 1", "--replicates"),
        ("verify --p 0.35 --c 1 --sampler urn", "--sampler"),
        ("verify --p 0.35 --c 1 --grid 0,1", "--grid"),
        ("verify --p 0.35 --c 1 --tol bogus=1", "--tol"),
        ("verify --c 1", "--p"),
    ],
)
def test_usage_errors_name_the_flag(argv, flag, capsys):
    with pytest.raises(UsageError) as err:
        parse_args(argv.split())
    assert err.value.flag == flag
    assert main(argv.split()) == 2
    assert flag in capsys.readouterr().err


def test_guard_arithmetic_accepts_nonzero_sum():
    assert parse_args("table --p 0.35 --c 0.7".split()).params.a + 0.7 == pytest.approx(0.4)


def test_argparse_errors_exit_2(capsys):
    assert main(["frobnicate"]) == 2
    assert main([]) == 2


def test_config_round_trip(tmp_path):
    cfg = parse_args("verify --p 0.6 --c 0.5 --q 0.25 --steps 300 --replicates 40 --grid 0.5,1 --tol com=0.2".split())
    path = tmp_path / "run.cfg"
    path.write_text(cfg.to_config_text())
    again = parse_args(["verify", "--config", str(path)])
    assert again == cfg


def test_config_flags_take_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# a comment\np = 0.35\nc = 1\nsteps = 50  # trailing\nseed = 7\n")
    cfg = parse_args(["simulate", "--config", str(path), "--seed", "9"])
    assert (cfg.p, cfg.c, cfg.steps, cfg.seed) == (0.35, 1.0, 50, 9)


def test_config_rejects_unknown_key_and_bad_lines(tmp_path):
    with pytest.raises(UsageError, match="unknown key"):
        parse_config_text("p = 0.3\ncolour = blue\n")
    with pytest.raises(UsageError, match="key = value"):
        parse_config_text("p 0.3\n")
    assert main(["verify", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_simulate_csv_and_json(capsys):
    assert main("simulate --p 0.75 --c 1 --steps 1000 --seed 3".split()) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["step", "S", "Y"]
    assert int(rows[-1][0]) == 1000
    assert main("simulate --p 0.75 --c 1 --steps 1000 --seed 3 --format json".split()) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["step"][-1] == 1000 and str(doc["S"][-1]) == rows[-1][1]


def test_simulate_is_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for f in (a, b):
        assert main(f"simulate --p 0.6 --c 2 --steps 5000 --seed 11 --out {f}".split()) == 0
    assert a.read_bytes() == b.read_bytes()


def test_table_json_has_lc_fields(capsys):
    assert main("table --p 0.9 --c 1 --q 1 --format json".split()) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["regime"] == "superdiffusive"
    assert doc["lc_mean"] == pytest.approx(0.88785, abs=1e-5)
    assert doc["lc_second_moment"] == pytest.approx(0.97528, abs=1e-5)
    assert main("table --p 0.9 --c 1 --format json".split()) == 0
    assert json.loads(capsys.readouterr().out)["lc_mean"] == 0.0


def test_moments_csv_columns_and_precision(capsys):
    assert main("moments --p 0.6 --c 0.5 --n 1000".split()) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["n", "eY", "eY2", "eS", "eSY", "eS2"]
    assert [int(r[0]) for r in rows[1:]] == [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000]
    # 17 significant digits round-trip the doubles
    from rerw.model import WalkParams
    from rerw.moments import joint_moments

    assert float(rows[-1][5]) == joint_moments(WalkParams(0.6, 0.5), 1000).eS2


def test_verify_exit_0_when_checks_pass(tmp_path, capsys):
    out = tmp_path / "r.json"
    # a small ensemble is far from its limits, so widen the relative bands; the exit code is under test
    loose = " ".join(f"--tol {k}=5" for k in montecarlo.DEFAULT_TOLERANCES)
    code = main(f"verify --p 0.35 --c 1 --steps 500 --replicates 200 --seed 1 --out {out} {loose}".split())
    rep = json.loads(out.read_text())
    assert code == (0 if all(c["pass"] for c in rep["checks"]) else 1)
    assert code == 0
    err = capsys.readouterr().err
    assert "PASS clt_variance_diffusive" in err


def test_verify_exit_1_with_injected_wrong_target(monkeypatch, capsys):
    monkeypatch.setattr(montecarlo.analytic, "diffusive_variance", lambda params: 50.0)
    assert main("verify --p 0.35 --c 1 --steps 500 --replicates 200 --seed 1".split()) == 1
    assert "FAIL clt_variance_diffusive" in capsys.readouterr().err


def test_unwritable_sink_exit_2(tmp_path, capsys):
    sink = tmp_path / "no" / "such" / "dir" / "out.json"
    assert main(f"table --p 0.35 --c 1 --out {sink}".split()) == 2
    assert "cannot write" in capsys.readouterr().err


def test_verify_text_and_csv_formats(capsys):
    assert main("verify --p 0.6 --c 0 --steps 300 --replicates 100 --seed 2 --format text".split()) in (0, 1)
    assert capsys.readouterr().out.startswith("regime: diffusive")
    main("verify --p 0.6 --c 0 --steps 300 --replicates 100 --seed 2 --format csv".split())
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["name", "target", "estimate", "stderr", "tolerance", "pass"]


def test_force_regime_flag(capsys):
    main("verify --p 0.3 --c 1.2 --steps 200 --replicates 20 --force-regime superdiffusive".split())
    assert json.loads(capsys.readouterr().out)["regime"] == "superdiffusive"


def test_diagnose_report(capsys):
    assert main("diagnose --p 0.35 --c 1 --steps 2000 --replicates 200000 --seed 4".split()) == 0
    rep = json.loads(capsys.readouterr().out)
    names = [c["name"] for c in rep["checks"]]
    assert names[:4] == ["reconstruction_rel_error", "qvM_over_Kv_max", "eps_abs_max", "xi_abs_max"]
    assert len(names) == 7 and all(c["pass"] for c in rep["checks"])
    assert len(rep["normalized_qv"]) == 2


def test_degenerate_runs_do_not_crash(capsys):
    assert main("verify --p 0.35 --c 1 --steps 1 --replicates 2 --grid 1".split()) in (0, 1)
    assert cli.main("table --p 0.25 --c 2 --format csv".split()) == 0
