"""Acceptance gate: criteria 1-10 through ``thinfb verify all``, criterion 11 by a second run.

Each test prints one ``[PASS]`` / ``[FAIL]`` line, also when output capture is on.
"""

import json

import pytest

from thinfb.acceptance import CriterionResult
from thinfb.cli.main import main

IDS = list(range(1, 11))


def _verify_all(path) -> int:
    return main(["verify", "all", "--json", str(path)])


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    path = tmp_path_factory.mktemp("verify") / "all.json"
    code = _verify_all(path)
    data = json.loads(path.read_text())
    return code, path, {r["id"]: CriterionResult(**r) for r in data["results"]}


def _report(capsys, res: CriterionResult):
    with capsys.disabled():
        print(f"\n{res.line()}")
        print(f"    bound:    {res.bound}")
        print(f"    measured: {json.dumps(res.measured, sort_keys=True)[:400]}")


@pytest.mark.parametrize("cid", IDS)
def test_criterion(first_run, cid, capsys):
    _, _, results = first_run
    res = results[cid]
    _report(capsys, res)
    assert res.passed, f"criterion {cid} ({res.name}) failed: {res.measured}"


def test_verify_all_exit_code(first_run):
    code, _, results = first_run
    assert sorted(results) == IDS
    assert code == (0 if all(r.passed for r in results.values()) else 1)


def test_criterion_11_determinism(first_run, tmp_path, capsys):
    _, path, _ = first_run
    second = tmp_path / "again.json"
    _verify_all(second)
    same = path.read_bytes() == second.read_bytes()
    _report(capsys, CriterionResult(11, "verify all twice gives bit-identical JSON", "all", same,
                                    {"bytes": len(second.read_bytes())}, "identical bytes"))
    assert same
