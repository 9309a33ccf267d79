import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import DATA, FIXTURES
from finslerlab.cli import main
from finslerlab.errors import ConfigError
from finslerlab.suite import REGISTRY, check_rng, load_config, parse_config, report_json, run_suite


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


def _config(tmp_path, **kw):
    d = {"metrics": [str(FIXTURES / "minkowski_cubic.json")], "checks": ["minkowski-flatness"]}
    d.update(kw)
    return _write(tmp_path, "cfg.json", d)


def test_flatness_suite_passes(tmp_path, capsys):
    assert main(["check", "--config", str(_config(tmp_path))]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["summary"] == {"pass": 1, "fail": 0, "error": 0, "total": 1}
    (entry,) = report["entries"]
    assert set(entry) == {"name", "fixture", "status", "worst-residual", "tolerance", "details"}


def test_zero_tolerance_fails(tmp_path, capsys):
    cfg = _config(
        tmp_path,
        metrics=[str(FIXTURES / "cubic_varying.json")],
        checks=["spray-cross-check"],
        tolerances={"spray-cross-check": 0},
    )
    assert main(["check", "--config", str(cfg)]) == 1
    (entry,) = json.loads(capsys.readouterr().out)["entries"]
    assert entry["status"] == "fail" and entry["worst-residual"] > 0


@pytest.mark.parametrize(
    "bad",
    [
        {"metrics": [], "checks": ["no-such-check"]},
        {"metrics": [], "samples": 4},
        {"metrics": [], "format": "xml"},
        {"metrics": [], "seed": -1},
        {"metrics": [], "extra": 1},
        {"metrics": ["missing.json"]},
        {"metrics": [{"x_center": [0, 0, 0]}]},
        {"metrics": [], "tolerances": {"bogus": 1}},
    ],
)
def test_config_errors_exit_2(tmp_path, bad, capsys):
    path = _write(tmp_path, "cfg.json", bad)
    assert main(["check", "--config", str(path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_malformed_json_exit_2(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("{not json")
    assert main(["check", "--config", str(p)]) == 2


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_relative_paths_and_markdown(tmp_path, capsys):
    (tmp_path / "m.json").write_text((FIXTURES / "euclidean.json").read_text())
    cfg = _write(tmp_path, "cfg.json", {"metrics": ["m.json"], "checks": ["minkowski-flatness"], "format": "md"})
    assert main(["check", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "| minkowski-flatness | m | pass |" in out


def test_seed_precedence(tmp_path, capsys, monkeypatch):
    cfg = str(_config(tmp_path, seed=5))
    main(["check", "--config", cfg])
    assert json.loads(capsys.readouterr().out)["seed"] == 5
    monkeypatch.setenv("FINSLERLAB_SEED", "17")
    main(["check", "--config", cfg])
    assert json.loads(capsys.readouterr().out)["seed"] == 17
    main(["check", "--config", cfg, "--seed", "3"])
    assert json.loads(capsys.readouterr().out)["seed"] == 3
    monkeypatch.setenv("FINSLERLAB_SEED", "abc")
    assert main(["check", "--config", cfg]) == 2


def test_report_is_byte_identical(tmp_path):
    cfg = load_config(FIXTURES / "default_suite.json")
    cfg.fixtures = [f for f in cfg.fixtures if f.name in ("cubic_varying", "conformal_sin", "proof_generic")]
    assert report_json(run_suite(cfg)) == report_json(run_suite(cfg))


def test_per_check_streams_are_independent():
    a = check_rng(1, "theorem1", "quartic").random(3)
    b = check_rng(1, "theorem1", "cubic_pq").random(3)
    c = check_rng(2, "theorem1", "quartic").random(3)
    assert not np.allclose(a, b) and not np.allclose(a, c)


def test_registry_is_complete():
    assert REGISTRY == (
        "positivity-24-27", "spray-cross-check", "minkowski-flatness", "conformal-identities-33", "inverse-41",
        "rationality-lemma-24", "theorem1", "proofchain-410-412", "case-analysis", "homothety",
    )


def test_expect_mismatch_fails(tmp_path, capsys):
    cfg = _write(
        tmp_path,
        "cfg.json",
        {"metrics": [{"path": str(FIXTURES / "proof_zero.json"), "expect": "CaseII-infeasible"}], "checks": ["case-analysis"]},
    )
    assert main(["check", "--config", str(cfg)]) == 1
    (entry,) = json.loads(capsys.readouterr().out)["entries"]
    assert entry["status"] == "fail" and entry["worst-residual"] > entry["tolerance"]


def test_error_entry(tmp_path, capsys):
    # a11 = x1 is not positive definite on half of the sampling box
    _write(
        tmp_path,
        "bad.json",
        {"dimension": 3, "type": "cubic", "a": [["x1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]], "b": ["1", "0", "0"], "p": "1", "q": "0"},
    )
    cfg = _write(tmp_path, "cfg.json", {"metrics": ["bad.json"], "checks": ["spray-cross-check"]})
    code = main(["check", "--config", str(cfg)])
    report = json.loads(capsys.readouterr().out)
    assert code == 1 and report["summary"]["error"] == 1
    (entry,) = report["entries"]
    assert entry["worst-residual"] is None and "SamplingError" in entry["details"]["error"]


# eval ---------------------------------------------------------------------------------


def test_eval_euclidean_norm(capsys):
    assert main(["eval", "--metric", str(FIXTURES / "euclidean.json"), "--x", "0,0,0", "--y", "3,4,0", "--quantity", "F"]) == 0
    assert capsys.readouterr().out == "5.00000000000\n"


def test_eval_flat_scalar_curvature(capsys):
    main(["eval", "--metric", str(FIXTURES / "minkowski_cubic.json"), "--x", "1,2,3", "--y", "1,0.2,0.1", "--quantity", "r", "--format", "json"])
    assert abs(json.loads(capsys.readouterr().out)["r"]) < 1e-12


def test_eval_spray_golden(capsys):
    gold = json.loads((DATA / "warped_spray.json").read_text())
    for case in gold["cases"]:
        x = ",".join(map(str, case["x"]))
        y = ",".join(map(str, case["y"]))
        main(["eval", "--metric", str(DATA / gold["metric"]), f"--x={x}", f"--y={y}", "--quantity", "G", "--format", "json"])
        assert np.allclose(json.loads(capsys.readouterr().out)["G"], case["G"], atol=gold["tolerance"])


def test_eval_conformal_file_and_bundle(capsys):
    main(["eval", "--metric", str(FIXTURES / "conformal_x1.json"), "--x", "0.1,0,0", "--y", "1,0.3,0.2", "--quantity", "bundle", "--format", "json"])
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {"G", "R", "Ric", "RicTensor", "r"}


@pytest.mark.parametrize("q", ["g", "ginv", "R", "Ric", "aux"])
def test_eval_text_quantities(q, capsys):
    assert main(["eval", "--metric", str(FIXTURES / "cubic_pq.json"), "--x", "0,0,0", "--y", "1,0.2,0.1", "--quantity", q]) == 0
    assert capsys.readouterr().out.strip()


def test_eval_cone_error(capsys):
    code = main(["eval", "--metric", str(FIXTURES / "minkowski_cubic.json"), "--x", "0,0,0", "--y=-1,0,0", "--quantity", "F"])
    assert code == 1 and "ConeDomainError" in capsys.readouterr().err


def test_eval_bad_inputs():
    assert main(["eval", "--metric", str(FIXTURES / "euclidean.json"), "--x", "0,0", "--y", "1,0,0", "--quantity", "F"]) == 2
    assert main(["eval", "--metric", str(FIXTURES / "euclidean.json"), "--x", "a,b,c", "--y", "1,0,0", "--quantity", "F"]) == 2
    assert main(["eval", "--metric", str(FIXTURES / "euclidean.json"), "--x", "0,0,0", "--y", "1,0,0", "--quantity", "aux"]) == 2


def test_console_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "finslerlab.cli", "check", "--config", str(_config(tmp_path)), "--format", "md"],
        capture_output=True, text=True,
    )
    assert out.returncode == 0 and "1 passed" in out.stdout
