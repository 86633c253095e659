import io
import json
import shutil
import subprocess
from pathlib import Path

import pytest

from weilcalc.cli import REPORT_SCHEMA, REPORT_VERSION, main
from weilcalc.formats import catalog_dir

DATA = catalog_dir()
GOLDEN = Path(__file__).parent / "golden"


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


# -- validate

def test_validate_pass():
    code, out, _ = run("validate", str(DATA / "am-t2.json"))
    assert code == 0
    assert out.startswith("PASS am-t2: rank 3 over 2 coordinates")


def test_validate_names_the_jacobi_triple():
    code, out, _ = run("validate", str(DATA / "controls" / "am-r3-nonclosed.json"))
    assert code == 1
    assert "FAIL" in out
    assert "Jacobi identity fails for (1,2,3)" in out


def test_validate_perturbed_structure():
    code, out, _ = run("validate", str(DATA / "controls" / "so3-space-perturbed.json"))
    assert code == 1


def test_validate_parse_error_has_position():
    path = DATA / "controls" / "malformed-expression.json"
    code, out, err = run("validate", str(path))
    assert code == 2
    assert out == ""
    assert err.startswith(f"{path}:38:13: error:")
    assert "column 6" in err


def test_validate_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "name": "x",\n  "rank": ]\n}\n')
    code, _, err = run("validate", str(path))
    assert code == 2
    assert err.startswith(f"{path}:3:")


def test_validate_missing_file(tmp_path):
    code, _, err = run("validate", str(tmp_path / "absent.json"))
    assert code == 2
    assert "error" in err


@pytest.mark.parametrize("name", ["am-r2", "coupling-t2-so3", "coupling-t3-abelian", "so3-space", "heisenberg-plane"])
def test_validate_catalog_entries(name):
    code, out, _ = run("validate", str(DATA / f"{name}.json"))
    assert code == 0, out


# -- suite

def test_suite_exit_zero():
    code, out, _ = run("suite", "weil-delta", "--seed", "7", "--samples", "1")
    assert code == 0
    assert out.rstrip().endswith("0 failed")


def test_unknown_suite_exits_two():
    code, out, err = run("suite", "no-such-suite")
    assert code == 2
    assert "unknown suite" in err
    assert out == ""


def test_unknown_corruption_exits_two():
    code, _, err = run("suite", "gauge", "--inject", "nonsense")
    assert code == 2
    assert "unknown corruption" in err


def test_missing_catalog_exits_two(monkeypatch, tmp_path):
    monkeypatch.setenv("WEILCALC_CATALOG", str(tmp_path / "missing"))
    code, _, err = run("suite", "gauge")
    assert code == 2
    assert "does not exist" in err


def test_catalog_override(monkeypatch, tmp_path):
    target = tmp_path / "catalog"
    shutil.copytree(DATA, target)
    monkeypatch.setenv("WEILCALC_CATALOG", str(target))
    code, out, _ = run("suite", "gauge", "--report", "json")
    assert code == 0
    assert out == (GOLDEN / "suite-gauge-seed0.json").read_text()


def test_json_schema():
    code, out, _ = run("suite", "gauge", "--report", "json")
    (doc,) = json.loads(out)
    assert doc["schema"] == REPORT_SCHEMA
    assert doc["version"] == REPORT_VERSION
    assert doc["seed"] == 0
    assert doc["suite"] == "gauge"
    assert set(doc) == {"schema", "version", "seed", "suite", "passed", "failed", "checks"}
    for check in doc["checks"]:
        assert set(check) <= {"id", "anchor", "status", "control", "counterexample"}
        assert check["status"] in ("pass", "fail")


def test_timing_is_opt_in():
    _, out, _ = run("suite", "gauge", "--report", "json", "--timing")
    (doc,) = json.loads(out)
    assert doc["seconds"] >= 0


@pytest.mark.parametrize("argv, golden", [
    (["suite", "gauge", "--seed", "0", "--report", "json"], "suite-gauge-seed0.json"),
    (["suite", "foliated-ym", "--seed", "3", "--report", "json"], "suite-foliated-ym-seed3.json"),
    (["suite", "primitive", "--seed", "0"], "suite-primitive-seed0.txt"),
])
def test_golden_reports(argv, golden):
    code, out, _ = run(*argv)
    assert code == 0
    assert out == (GOLDEN / golden).read_text()


def test_injected_corruption_report():
    code, out, _ = run("suite", "deformation", "--inject", "c2-sign", "--report", "json")
    assert code == 1
    assert out == (GOLDEN / "suite-deformation-c2-sign.json").read_text()
    (doc,) = json.loads(out)
    failing = [c for c in doc["checks"] if c["status"] == "fail"]
    assert failing
    assert all("gamma" in c["counterexample"] for c in failing)


def test_parallel_jobs_match_serial():
    _, serial, _ = run("suite", "all", "--samples", "1", "--report", "json")
    _, parallel, _ = run("suite", "all", "--samples", "1", "--report", "json", "--jobs", "4")
    assert serial == parallel
    assert [d["suite"] for d in json.loads(serial)] == [
        "weil-delta", "commutator", "horizontal", "curvature-bianchi", "deformation", "primitive",
        "foliated-ym", "multiplicative-ym", "gauge"]


# -- ym

SCEN = DATA / "scenarios"


@pytest.mark.parametrize("check, expected", [
    ("first", "first = 0"),
    ("second", "second = 0"),
    ("adapted", "adapted = yes"),
    ("action", "S = 0 * (2pi)^3 * sqrt(detg)"),
    ("tangent", "tangent first = 0\ntangent second = 0"),
])
def test_ym_t3_eigen(check, expected):
    code, out, _ = run("ym", str(SCEN / "t3-eigen.json"), "--check", check)
    assert code == 0
    assert out.strip() == expected


def test_ym_second_residual_with_wrong_mu():
    code, out, _ = run("ym", str(SCEN / "t3-eigen-mu2.json"), "--check", "second")
    assert code == 1
    assert out.strip() == "second = ((-1/2*cos(x1))*dx1*e1) * sqrt(detg)"


def test_ym_foliated():
    code, out, _ = run("ym", str(SCEN / "am-t2-critical.json"), "--check", "foliated")
    assert code == 0
    assert "residual = 0" in out
    code, out, _ = run("ym", str(SCEN / "am-t2-zero.json"), "--check", "foliated")
    assert code == 1


def test_ym_self_dual():
    code, out, _ = run("ym", str(SCEN / "t5-self-dual.json"), "--check", "self-dual")
    assert code == 0
    code, _, err = run("ym", str(SCEN / "t5-euclidean.json"), "--check", "self-dual")
    assert code == 1
    assert "error" in err


def test_ym_requires_check():
    code, _, err = run("ym", str(SCEN / "t3-eigen.json"))
    assert code == 2
    assert "usage error" in err


def test_ym_bad_check_name():
    code, _, _ = run("ym", str(SCEN / "t3-eigen.json"), "--check", "everything")
    assert code == 2


def test_no_command():
    code, _, _ = run()
    assert code == 2


def test_console_script():
    exe = shutil.which("weilcalc")
    assert exe is not None
    proc = subprocess.run([exe, "validate", str(DATA / "controls" / "am-r3-nonclosed.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert "Jacobi identity fails for (1,2,3)" in proc.stdout
