import json

import pytest

from nadim import cli
from nadim.pipeline import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, SpecError, parse_spec, run_pipeline
from nadim.verify import example_path

LADDER_SPEC = {"ladder": {"k": [0, 1], "rho": [0.5, 0.5], "generator": {"kind": "constant", "rho": 0.5}},
               "varpi": 0.9}


def test_defaults():
    spec = parse_spec(LADDER_SPEC)
    assert spec.p_max == 8 and spec.s_max == 12 and spec.varrho == 1.0 and spec.seed == 0


@pytest.mark.parametrize("bad", [0, -0.5])
def test_varpi_must_be_positive(bad):
    with pytest.raises(SpecError) as err:
        parse_spec({**LADDER_SPEC, "varpi": bad})
    assert "varpi" in str(err.value)


def test_schema_rejects_unknown_and_missing_fields():
    with pytest.raises(SpecError):
        parse_spec({"varpi": 0.9})
    with pytest.raises(SpecError) as err:
        parse_spec({**LADDER_SPEC, "simulation": {"step": -1}})
    assert "simulation" in str(err.value)


def test_shipped_example_routes_through_delay_ladder():
    spec = parse_spec(example_path())
    assert spec.delay_system["tau"] == 1.0 and spec.ladder is None


def test_ladder_only_run():
    res = run_pipeline(parse_spec(LADDER_SPEC))
    assert res.exit_code == EXIT_OK
    assert "simulation" not in res.report
    cert = res.report["certificate"]
    assert res.report["bound"]["value"] == cert["m"] - 1


def test_unreachable_varpi_exits_2():
    res = run_pipeline(parse_spec({**LADDER_SPEC, "varpi": 0.3}))
    assert res.exit_code == EXIT_VIOLATION
    assert res.report["search"]["status"] == "failed"
    assert "rho_infinity" in res.report["search"]["diagnostic"]


def test_rescaling_applied_when_majorant_exceeds_one():
    spec = parse_spec({"delay_system": {"tau": 1.0, "d": 1, "terms": [{"A": -2.0, "sigma": 1.0}], "majorant": 2.0},
                       "varpi": 0.95, "simulation": {"horizon": 4.0, "levels": [0, 1]}})
    res = run_pipeline(spec)
    assert res.report["rescaling"]["r"] == 2.0
    assert res.report["rescaling"]["majorant_max"] <= 1 + 1e-12
    assert res.report["ladder"]["generator"]["tau"] == 2.0


def test_cli_run_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["--seed", "3", "--output-dir", str(a), "run", str(example_path())]) == EXIT_OK
    assert cli.main(["run", str(example_path()), "--seed", "3", "--output-dir", str(b)]) == EXIT_OK
    names = sorted(p.name for p in a.iterdir())
    assert names == ["bound.csv", "certificate.json", "report.json"]
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
    report = json.loads((a / "report.json").read_text())
    assert report["spec"]["seed"] == 3
    assert report["bound"]["value"] == report["certificate"]["m"] - 1


def test_cli_usage_errors(tmp_path, capsys):
    assert cli.main([]) == EXIT_USAGE
    assert cli.main(["bound"]) == EXIT_USAGE
    assert cli.main(["run", str(tmp_path / "missing.json")]) == EXIT_USAGE
    assert "file not found" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**LADDER_SPEC, "varpi": -1}))
    assert cli.main(["run", str(bad)]) == EXIT_USAGE
    assert "varpi" in capsys.readouterr().err


def test_cli_ladder_and_bound(tmp_path, capsys):
    assert cli.main(["--output-dir", str(tmp_path), "ladder", "--tau", "1", "--d", "1"]) == EXIT_OK
    ladder = json.loads((tmp_path / "ladder.json").read_text())
    assert ladder["k"][:5] == [0, 1, 2, 3, 5]
    assert cli.main(["--output-dir", str(tmp_path), "bound", str(tmp_path / "ladder.json"), "--varpi", "0.95"]) == 0
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["chi_star"] < 1
    assert cli.main(["bound", str(tmp_path / "ladder.json"), "--varpi", "0.001"]) == EXIT_VIOLATION


def test_cli_system_commands(tmp_path, capsys):
    system = str(example_path("delay_tau1_d1_system.json"))
    assert cli.main(["simulate", system, "--horizon", "1", "--step", "0.25"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,x1" and lines[-1].startswith("1.0,")
    assert cli.main(["rescale", system, "--horizon", "2"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["r"] == 1.0 and out["composition_error"] <= 1e-4
    assert cli.main(["restricted-norm", system, "--level", "2"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["within"]
    assert cli.main(["restricted-norm", system, "--samples", "5"]) == EXIT_USAGE


def test_cli_variational_convergence(tmp_path, capsys):
    logistic = tmp_path / "logistic.json"
    logistic.write_text(json.dumps({"model": "logistic-delay", "tau": 1.0}))
    assert cli.main(["variational", str(logistic), "--convergence"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["slope"] >= 0.9


def test_cli_boxdim(tmp_path, capsys):
    from nadim.boxdim import PointCloud, cantor_points

    PointCloud(cantor_points(10)).to_csv(tmp_path / "cantor.csv")
    code = cli.main(["boxdim", str(tmp_path / "cantor.csv"), "--eps-min", str(3.0**-10), "--eps-max", "0.25"])
    assert code == EXIT_OK
    fit = json.loads(capsys.readouterr().out)
    assert abs(fit["estimate"] - 0.6309) <= 0.05 and len(fit["scales"]) >= 5


def test_help_embeds_schema(capsys):
    assert cli.main(["run", "--help"]) == EXIT_OK
    assert '"varpi"' in capsys.readouterr().out
