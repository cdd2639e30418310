import csv
import json

import pytest

from thinfb.analysis.records import append_ledger
from thinfb.cli.config import ConfigError, config_hash, parse_config
from thinfb.cli.main import EXIT_FAIL, EXIT_INVALID, EXIT_OK, main


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


U_CHECK = {
    "experiment": "u-check", "grid": {"n": 1, "h": "1/64"},
    "diagnostics": [{"name": "energy"}, {"name": "weiss"}, {"name": "free_boundary"},
                    {"name": "defect", "radius": 0.5}],
    "save_field": True,
}

FLAT = {
    "experiment": "flat", "grid": {"n": 1, "h": "1/128"}, "field": "minimize",
    "boundary": {"generator": "tilted-U", "params": {"bend": 0.02}},
    "diagnostics": [{"name": "flatness", "eta": 0.5, "depth": 3}],
}


def _run(tmp_path, cfg, out="out"):
    return main(["run", _write(tmp_path, cfg), "--output-dir", str(tmp_path / out)])


def test_run_u_check(tmp_path, capsys):
    assert _run(tmp_path, U_CHECK) == EXIT_OK
    run = tmp_path / "out" / "u-check"
    rec = json.loads((run / "record.json").read_text())
    assert sorted(p.name for p in run.iterdir()) == rec["files"]
    assert {"weiss.svg", "free_boundary.svg", "field.json"} <= set(rec["files"])
    assert [d["diagnostic"] for d in rec["diagnostics"]] == ["energy", "weiss", "free_boundary",
                                                             "defect"]
    assert "u-check" in capsys.readouterr().out


def test_config_hash_in_every_artifact(tmp_path):
    assert _run(tmp_path, U_CHECK) == EXIT_OK
    h = config_hash(U_CHECK)
    run = tmp_path / "out" / "u-check"
    assert json.loads((run / "record.json").read_text())["config_hash"] == h
    assert json.loads((run / "timing.json").read_text())["config_hash"] == h
    assert h in (run / "weiss.svg").read_text()
    with open(tmp_path / "out" / "ledger.csv") as f:
        assert {r["config_hash"] for r in csv.DictReader(f)} == {h}


def test_run_is_deterministic(tmp_path):
    assert _run(tmp_path, U_CHECK, "a") == EXIT_OK
    assert _run(tmp_path, U_CHECK, "b") == EXIT_OK
    a = (tmp_path / "a" / "u-check" / "record.json").read_bytes()
    b = (tmp_path / "b" / "u-check" / "record.json").read_bytes()
    assert a == b


def test_flatness_run_writes_plot_and_depth_rows(tmp_path):
    assert _run(tmp_path, FLAT) == EXIT_OK
    assert (tmp_path / "out" / "flat" / "flatness.svg").read_text().startswith("<svg")
    with open(tmp_path / "out" / "ledger.csv") as f:
        keys = [r["key"] for r in csv.DictReader(f) if r["diagnostic"] == "flatness"]
    assert keys == ["k=0", "k=1", "k=2", "k=3", "alpha_hat"]


@pytest.mark.parametrize("patch", [
    {"grid": {"n": 1, "h": "1/3"}},
    {"grid": {"n": 1, "h": 0.3}},
    {"grid": {"n": 3, "h": 0.25}},
    {"colour": "blue"},
    {"field": "almost-minimizer"},
    {"diagnostics": [{"name": "bogus"}]},
])
def test_invalid_configs_exit_2(tmp_path, patch, capsys):
    assert _run(tmp_path, {**U_CHECK, **patch}) == EXIT_INVALID
    assert "invalid config" in capsys.readouterr().err
    assert not (tmp_path / "out" / "u-check").exists()


def test_underresolved_diagnostic_removes_partial_output(tmp_path):
    cfg = {**U_CHECK, "grid": {"n": 1, "h": "1/16"},
           "diagnostics": [{"name": "energy"}, {"name": "weiss", "radii": [0.125]}]}
    assert _run(tmp_path, cfg) == EXIT_INVALID
    assert not (tmp_path / "out" / "u-check").exists()
    assert not (tmp_path / "out" / "ledger.csv").exists()


def test_parse_config_errors_name_the_path():
    with pytest.raises(ConfigError, match="grid"):
        parse_config({"experiment": "x", "grid": {"n": 1, "h": "abc"}})
    cfg = parse_config({"experiment": "x", "grid": {"n": 1, "h": "1/8"}})
    assert cfg.grid.h == 0.125 and cfg.field == "data"


def test_global_flags_before_or_after_command(tmp_path):
    p = _write(tmp_path, U_CHECK)
    assert main(["--threads", "1", "run", p, "--output-dir", str(tmp_path / "x")]) == EXIT_OK
    assert main(["--output-dir", str(tmp_path / "y"), "run", p, "--no-deterministic"]) == EXIT_OK
    assert main(["run", p, "--threads", "0"]) == EXIT_INVALID


def test_verify_unknown_suite():
    assert main(["verify", "nope"]) == EXIT_INVALID


def test_verify_exact_suite(tmp_path, capsys):
    js = tmp_path / "v.json"
    assert main(["verify", "exact", "--json", str(js)]) == EXIT_OK
    data = json.loads(js.read_text())
    assert [r["id"] for r in data["results"]] == [5] and data["results"][0]["passed"]
    assert "all 1 criteria passed" in capsys.readouterr().out


def test_verify_energy_fails_with_wrong_lambda(capsys):
    assert main(["verify", "energy", "--lambda", "1.0"]) == EXIT_FAIL
    assert "FAILED" in capsys.readouterr().out


def test_report_empty_ledger(tmp_path, capsys):
    p = tmp_path / "ledger.csv"
    p.write_text("")
    assert main(["report", str(p)]) == EXIT_OK
    assert capsys.readouterr().out == ""
    assert main(["report", str(tmp_path / "missing.csv")]) == EXIT_INVALID


def test_report_three_runs_and_malformed(tmp_path, capsys):
    out = tmp_path / "out"
    for i, cfg in enumerate([U_CHECK, {**U_CHECK, "experiment": "u2"},
                             {**U_CHECK, "experiment": "u3", "lambda": 1.0}]):
        assert main(["run", _write(tmp_path, cfg, f"c{i}.json"), "--output-dir",
                     str(out)]) == EXIT_OK
    with open(out / "ledger.csv", "a") as f:
        f.write("broken,row\n")
    md = tmp_path / "summary.md"
    assert main(["report", str(out / "ledger.csv"), "-o", str(md)]) == EXIT_OK
    text = md.read_text()
    assert text.count("\n## u") == 3 + 0 and "## Skipped rows" in text
    assert "![weiss.svg](u2/weiss.svg)" in text
    assert "skipped 1 malformed" in capsys.readouterr().err


def test_report_groups_by_config_hash(tmp_path, capsys):
    p = tmp_path / "ledger.csv"
    append_ledger(p, [{"config_hash": "a" * 64, "experiment": "e", "key": "k", "value": 1}])
    append_ledger(p, [{"config_hash": "b" * 64, "experiment": "e", "key": "k", "value": 2}])
    assert main(["report", str(p)]) == EXIT_OK
    assert capsys.readouterr().out.count("## e (") == 2
