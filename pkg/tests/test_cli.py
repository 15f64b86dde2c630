import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gmap.cli import CURVE_HEADER, RunRecord, emit_curve, main, run
from gmap.config import parse_config

FIXTURES = Path(__file__).parent / "fixtures" / "invalid"

GAUSS_1D = {"type": "gaussian", "sigma": [1.0]}
MISFIT_1D = {"type": "quadratic_misfit", "G": "identity", "y": [2.0], "noise_sd": 1.0}

# fixture -> (subcommand, field named in the message)
INVALID = {
    "sigma_zero": ("estimate-map", "measure.sigma[1]"),
    "sigma_negative": ("estimate-map", "measure.sigma[0]"),
    "missing_seed": ("estimate-map", "mc.seed"),
    "negative_seed": ("estimate-map", "mc.seed"),
    "unknown_top_field": ("estimate-map", "colour"),
    "unknown_measure_type": ("ball-prob", "measure.type"),
    "bad_norm": ("ball-prob", "measure.ambient_norm"),
    "dim_mismatch_G": ("estimate-map", "potential.G[0]"),
    "dim_mismatch_y": ("estimate-map", "potential.y"),
    "bad_schedule_factor": ("amf-track", "schedule.factor"),
    "zero_n": ("ball-prob", "mc.n"),
    "bad_output_format": ("estimate-map", "output.format"),
    "operation_mismatch": ("estimate-map", "operation"),
    "unknown_param": ("ball-prob", "params.centre"),
    "radius_nonpositive": ("ball-prob", "params.instances[0].r"),
    "center_wrong_dim": ("ball-prob", "params.instances[0].center"),
    "uniform_outside_classify": ("ball-prob", "measure.type"),
    "potential_on_uniform": ("classify-mode", "potential"),
    "noise_zero": ("estimate-map", "potential.noise_sd"),
    "string_sigma": ("estimate-map", "measure.sigma"),
    "batch_mixed_ops": ("estimate-map", "runs[1].operation"),
    "batch_empty": ("estimate-map", "runs"),
    "bad_method": ("ball-prob", "params.methods[0]"),
    "classify_csv": ("classify-mode", "output.format"),
    "not_json": ("estimate-map", "invalid JSON"),
}


def write_config(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_every_fixture_is_covered():
    assert {p.stem for p in FIXTURES.glob("*.json")} == set(INVALID)


@pytest.mark.parametrize("name", sorted(INVALID))
def test_invalid_fixture_exits_2_naming_the_field(name, capsys):
    op, field = INVALID[name]
    assert main([op, "--config", str(FIXTURES / f"{name}.json")]) == 2
    err = capsys.readouterr().err
    assert field in err


def test_zero_sigma_cites_nondegeneracy(capsys):
    main(["estimate-map", "--config", str(FIXTURES / "sigma_zero.json")])
    assert "nondegenerate" in capsys.readouterr().err


def test_missing_config_file(capsys, tmp_path):
    assert main(["estimate-map", "--config", str(tmp_path / "nope.json")]) == 2


def test_estimate_map_1d(tmp_path, capsys):
    cfg = write_config(tmp_path, {"operation": "estimate-map", "measure": GAUSS_1D,
                                  "potential": MISFIT_1D, "mc": {"seed": 0}})
    out = tmp_path / "out.json"
    assert main(["estimate-map", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["minimizer"][0] == pytest.approx(1.0, abs=1e-8)
    assert payload["normal_equations_error"] <= 1e-6
    summary = json.loads(capsys.readouterr().out)
    assert summary["output"] == str(out) and summary["seed"] == 0


def test_seed_override(tmp_path, capsys):
    cfg = write_config(tmp_path, {"operation": "estimate-map", "measure": GAUSS_1D,
                                  "potential": MISFIT_1D, "mc": {"seed": 0}})
    assert main(["estimate-map", "--config", cfg, "--seed", "17"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 17
    assert main(["estimate-map", "--config", cfg, "--seed", "-1"]) == 2


def test_same_config_same_payload_hash():
    raw = {"operation": "ball-prob", "measure": {"type": "gaussian", "sigma": [1.0, 0.5]},
           "mc": {"seed": 3, "n": 20000},
           "params": {"methods": ["direct", "importance_shift"],
                      "random": {"count": 5, "seed": 1}}}
    a, b = run(parse_config(raw), raw), run(parse_config(raw), raw)
    assert a.payload_hash == b.payload_hash and a.config_hash == b.config_hash
    raw2 = json.loads(json.dumps(raw))
    raw2["mc"]["seed"] = 4
    assert run(parse_config(raw2), raw2).payload_hash != a.payload_hash


def test_numerical_failure_exits_3(tmp_path, capsys):
    # a denominator ball with no hits makes the Anderson ratio undefined
    cfg = write_config(tmp_path, {
        "operation": "verify-anderson", "measure": GAUSS_1D, "mc": {"seed": 0, "n": 1},
        "params": {"bound": "anderson", "method": "direct",
                   "instances": [{"x": [0.5], "r": 0.05}]}})
    assert main(["verify-anderson", "--config", cfg]) == 3
    assert "undefined" in capsys.readouterr().err


def test_strict_flags_low_confidence(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "operation": "ball-prob", "measure": GAUSS_1D, "mc": {"seed": 0, "n": 1000},
        "params": {"instances": [{"center": [4.0], "r": 0.1}]}})
    assert main(["ball-prob", "--config", cfg]) == 0
    assert main(["ball-prob", "--config", cfg, "--strict"]) == 4


def test_m_property_csv_bound_column(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "operation": "m-property", "measure": GAUSS_1D, "mc": {"seed": 5, "n": 100000},
        "schedule": {"r0": 0.5, "factor": 0.5, "count": 3},
        "params": {"x": [2.0]}, "output": {"format": "csv"}})
    out = tmp_path / "curve.csv"
    assert main(["m-property", "--config", cfg, "--out", str(out)]) == 0
    raw = out.read_bytes()
    assert b"\r" not in raw
    rows = list(csv.DictReader(io.StringIO(raw.decode("utf-8"))))
    assert tuple(rows[0]) == CURVE_HEADER
    for row in rows:
        r = float(row["r"])
        assert float(row["bound"]) == pytest.approx(math.exp(-(2 - r) ** 2 / 2), rel=1e-12)
        assert row["pass"] == "true"


def test_emit_curve_empty_is_header_only(tmp_path):
    p = tmp_path / "empty.csv"
    emit_curve(RunRecord("h", "0", 0, 0.0, {"curve": []}), p)
    assert p.read_text() == "r,estimate,stderr,bound,pass\n"


finite = st.floats(allow_nan=False, allow_infinity=False)


@given(st.lists(st.tuples(finite, finite, finite, finite, st.booleans()), max_size=20))
def test_emit_curve_round_trip(tmp_path_factory, rows):
    p = tmp_path_factory.mktemp("curve") / "c.csv"
    curve = [dict(zip(CURVE_HEADER, row)) for row in rows]
    emit_curve(RunRecord("h", "0", 0, 0.0, {"curve": curve}), p)
    back = list(csv.DictReader(io.StringIO(p.read_text(encoding="utf-8"))))
    assert len(back) == len(curve)
    for orig, got in zip(curve, back):
        for key in CURVE_HEADER[:4]:
            assert float(got[key]) == orig[key]
        assert (got["pass"] == "true") == orig["pass"]


def test_emit_curve_surfaces_io_errors(tmp_path):
    with pytest.raises(OSError):
        emit_curve(RunRecord("h", "0", 0, 0.0, {"curve": []}), tmp_path / "missing" / "c.csv")


def test_console_script_runs(tmp_path):
    cfg = write_config(tmp_path, {"operation": "estimate-map", "measure": GAUSS_1D,
                                  "potential": MISFIT_1D, "mc": {"seed": 0}})
    proc = subprocess.run([sys.executable, "-m", "gmap.cli", "estimate-map", "--config", cfg],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["minimizer"][0] == pytest.approx(1.0, abs=1e-8)
