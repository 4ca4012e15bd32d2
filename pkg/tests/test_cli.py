import csv
import json

import pytest

from halfspace_lab import verify as V
from halfspace_lab.cli import RunConfig, emit_report, main, resolve_config_path, run_config
from halfspace_lab.errors import InputError


SMALL_VERIFY = {
    "task": "verify",
    "checks": [
        {"id": "intersection", "check": "intersection", "s": 1.0,
         "corpus": {"kind": "packets", "scales": 8}},
        {"id": "intersection:negative", "check": "intersection", "s": 1.0, "space_shift": 1.0,
         "corpus": {"kind": "packets", "scales": 8},
         "negative_control": True},
    ],
    "seed": 3,
    "output": {"plots": False},
}


def _write(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


def test_config_round_trip():
    cfg = RunConfig.load("examples/verify_families.json")
    again = RunConfig.from_dict(json.loads(cfg.to_json()))
    assert again.to_json() == cfg.to_json()
    assert again == cfg


def test_bundled_config_resolution(tmp_path):
    assert resolve_config_path("examples/heat_dirichlet.json").is_file()
    with pytest.raises(InputError):
        resolve_config_path(tmp_path / "missing.json")


@pytest.mark.parametrize("bad", [
    {"task": "fly"},
    {"task": "verify", "checks": [], "extra": 1},
    {"task": "verify"},
    {"task": "norms", "norms": []},
    {"task": "build-kernel"},
    {"task": "verify", "checks": [{"id": "a", "check": "symbol"}], "tolerances": {"x": -1.0}},
])
def test_schema_rejects(bad):
    with pytest.raises(InputError):
        RunConfig.from_dict(bad)


def test_bad_config_exit_code(tmp_path, capsys):
    assert main(["verify", "--config", str(_write(tmp_path, {"task": "verify"})), "--out", str(tmp_path)]) == 3
    assert "InputError" in capsys.readouterr().err
    p = tmp_path / "broken.json"
    p.write_text("{")
    assert run_config(p).status == 3


def test_task_mismatch_exit_code(tmp_path):
    assert run_config("examples/heat_dirichlet.json", task="verify", out=tmp_path).status == 3


def test_build_kernel_exit_zero(tmp_path):
    res = run_config("examples/heat_dirichlet.json", out=tmp_path)
    assert res.status == 0
    names = {p.name for p in res.artifacts}
    assert {"kernel.csv", "kernel_summary.json", "kernel.png"} <= names


def test_cauchy_riemann_exit_two(tmp_path, capsys):
    res = run_config("examples/cauchy_riemann.json", out=tmp_path)
    assert res.status == 2
    assert res.summary["verdict"] == "fail"
    assert capsys.readouterr().err


def test_nonintegrable_weight_exit_three(tmp_path, capsys):
    res = run_config("examples/gamma_minus_one.json", out=tmp_path)
    assert res.status == 3
    assert res.summary["error"] == "NonIntegrableWeight"


def test_verify_outputs_and_determinism(tmp_path):
    cfg = _write(tmp_path, SMALL_VERIFY)
    a = run_config(cfg, out=tmp_path / "a")
    b = run_config(cfg, out=tmp_path / "b")
    assert a.status == 0 and b.status == 0
    csvs = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert csvs == ["intersection.csv", "intersection_negative.csv"]
    for name in csvs + ["summary.json"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = list(csv.reader((tmp_path / "a" / "intersection.csv").open()))
    assert rows[0] == ["claim_id", "param_json", "lhs", "rhs", "ratio"]
    assert len(rows) == 9
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    # 17 significant digits round-trip the stored doubles
    assert max(float(r[4]) for r in rows[1:]) == summary["reports"][0]["max_ratio"]
    assert all(len(r[2].replace(".", "").replace("-", "").split("e")[0].lstrip("0")) >= 15 for r in rows[1:])
    assert summary["all_as_expected"] and summary["missing_negative_controls"] == []


def test_seed_override_changes_output(tmp_path):
    d = {"task": "verify", "seed": 3, "output": {"plots": False},
         "checks": [{"id": "intersection", "check": "intersection", "s": 1.0,
                     "grid": {"space_count": 32, "time_count": 32}, "corpus": {"count": 4, "max_level": 3}}]}
    cfg = _write(tmp_path, d)
    run_config(cfg, out=tmp_path / "a")
    run_config(cfg, out=tmp_path / "b", seed=4)
    assert (tmp_path / "a" / "intersection.csv").read_bytes() != (tmp_path / "b" / "intersection.csv").read_bytes()


def test_negative_control_passing_gives_exit_two(tmp_path):
    d = json.loads(json.dumps(SMALL_VERIFY))
    d["checks"][1]["space_shift"] = 0.0
    assert run_config(_write(tmp_path, d), out=tmp_path / "o").status == 2


def test_no_samples_sentinel(tmp_path):
    rep = V.RatioReport("empty", 2.0)
    rep.add({}, 0.0, 0.0)
    out = emit_report([rep], tmp_path)
    assert [p.name for p in out] == ["NO_SAMPLES"]


def test_emit_report_with_plots(tmp_path):
    rep = V.RatioReport("trace:beta0", 5.0, "spread")
    rep.add({"index": 0}, 1.0, 2.0)
    rep.add({"index": 1}, 1.5, 2.0)
    names = {p.name for p in emit_report([rep], tmp_path, plots=True)}
    assert names == {"trace_beta0.csv", "summary.json", "trace_beta0.png"}


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "halfspace-lab" in capsys.readouterr().out
