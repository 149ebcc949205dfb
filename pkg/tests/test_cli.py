import csv
import io
import json
import math
import os
import subprocess
import sys

import pytest

from twocars import barrier as bar
from twocars import cli
from twocars.barrier import Family, PieceId

from conftest import ELL_J, ORACLE


def run(capsys, *argv):
    code = cli.dispatch(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    assert code == cli.EXIT_OK
    return json.loads(out)


def test_constants_example(capsys):
    data = run_json(capsys, "constants", "--ell", "0.5")
    assert data["schema_version"] == 1
    assert data["regime"] == "small"
    assert data["theta_J"] == pytest.approx(2.343, abs=1e-3)
    assert data["ell_J"] == pytest.approx(0.671, abs=1e-3)
    assert data["theta1"] == pytest.approx(2.151, abs=1e-3)
    assert data["theta2"] == pytest.approx(2.489, abs=1e-3)
    assert data["m"] is None
    assert list(data) == ["schema_version", *cli.CONSTANT_FIELDS]


def test_reals_use_seventeen_digits(capsys):
    data = run_json(capsys, "constants", "--ell", "0.5")
    assert data["theta_J"] == ORACLE["theta_J"]
    assert cli.fmt_real(0.1) == "0.10000000000000001"


def test_classify_example(capsys):
    # B_UL^{+1} at vartheta = 1, ell = 0.5, rounded to four decimals
    data = run_json(capsys, "classify", "--ell", "0.5", "--x", "0.4597", "--y", "0.6585",
                    "--theta", "5.2832", "--delta", "1e-3")
    assert (data["matched"], data["family"], data["side"]) == (True, "UL", 1)
    assert (data["u_set"], data["v_set"]) == ([0], [1])


def test_classify_miss_and_controls_exit_code(capsys):
    data = run_json(capsys, "classify", "--ell", "0.5", "--x", "100", "--y", "100", "--theta", "1")
    assert data["matched"] is False
    code, _ = run(capsys, "controls", "--ell", "0.5", "--x", "100", "--y", "100", "--theta", "1")
    assert code == cli.EXIT_DOMAIN


def test_csv_has_header(capsys):
    code, out = run(capsys, "slice", "--ell", "0.5", "--theta", "1.0", "--n", "5", "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == cli.SLICE_FIELDS
    assert len(rows) > 5


def test_output_file(capsys, tmp_path):
    target = tmp_path / "c.json"
    code, out = run(capsys, "constants", "--ell", "1", "--out", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["regime"] == "large"


def test_output_is_deterministic(capsys):
    argv = ("slice", "--ell", "0.7", "--theta", "2.0", "--n", "40", "--format", "csv")
    assert run(capsys, *argv) == run(capsys, *argv)
    argv = ("simulate", "--ell", "0.5", "--x", "0", "--y", "0.6", "--theta", "3.1", "--policy", "fixed:0,0")
    assert run(capsys, *argv) == run(capsys, *argv)


def test_simulate_head_on(capsys):
    data = run_json(capsys, "simulate", "--ell", "0.5", "--x", "0", "--y", "0.6",
                    "--theta", str(math.pi), "--policy", "fixed:0,0")
    assert data["termination"] == "captured"
    assert data["t_end"] == pytest.approx(0.05, abs=1e-6)
    assert data["rows"][-1]["termination"] == "captured"


def test_simulate_barrier_policy(capsys):
    z = bar.eval_piece(bar.build_model(0.5), PieceId(Family.UL, 1), 1.0)
    data = run_json(capsys, "simulate", "--ell", "0.5", "--x", repr(z.x), "--y", repr(z.y),
                    "--theta", repr(z.theta), "--policy", "barrier", "--dt", "1e-3", "--tmax", "0.2")
    assert data["termination"] in ("horizon", "left_layer")
    assert len(data["rows"]) > 100


@pytest.mark.parametrize("argv,code", [
    (("slice", "--ell", "0.5"), cli.EXIT_USAGE),
    (("slice", "--ell", "0.5", "--theta", "1", "--n", "0"), cli.EXIT_USAGE),
    (("constants",), cli.EXIT_USAGE),
    (("nope", "--ell", "1"), cli.EXIT_USAGE),
    (("simulate", "--ell", "0.5", "--x", "0", "--y", "2", "--theta", "0", "--policy", "fixed:1"), cli.EXIT_USAGE),
    (("constants", "--ell", "-1"), cli.EXIT_DOMAIN),
    (("slice", "--ell", "0.5", "--theta", "0"), cli.EXIT_DOMAIN),
    (("classify", "--ell", "0.5", "--x", "0", "--y", "0.1", "--theta", "1"), cli.EXIT_DOMAIN),
    (("simulate", "--ell", "0.5", "--x", "0", "--y", "2", "--theta", "0", "--policy", "fixed:2,0"), cli.EXIT_DOMAIN),
    (("simulate", "--ell", "0.5", "--x", "9", "--y", "9", "--theta", "1"), cli.EXIT_DOMAIN),
])
def test_exit_codes(capsys, argv, code):
    assert cli.dispatch(list(argv)) == code


def test_slice_near_the_junction_radius(capsys):
    # at the rounded arguments the P, TS and TD pieces close onto the dispersal point
    data = run_json(capsys, "slice", "--ell", "0.671", "--theta", "2.343", "--n", "200")
    rows = data["rows"]
    dl = next(r for r in rows if r["piece"] == "DL")
    near = {}
    for r in rows:
        key = f"{r['piece']}{r['side']:+d}" if r["side"] else r["piece"]
        d = math.hypot(r["x"] - dl["x"], r["y"] - dl["y"])
        near[key] = min(d, near.get(key, math.inf))
    for key in ("P+1", "TS-1", "TD-1"):
        assert near[key] < 0.02
    # at the exact junction radius TD^{+1} closes on the same point
    data = run_json(capsys, "slice", "--ell", repr(ELL_J), "--theta", repr(ORACLE["theta_J"]), "--n", "200")
    rows = data["rows"]
    dl = next(r for r in rows if r["piece"] == "DL")
    td = [math.hypot(r["x"] - dl["x"], r["y"] - dl["y"]) for r in rows if (r["piece"], r["side"]) == ("TD", 1)]
    assert td and min(td) < 0.02


def test_slice_rows_classify_as_labelled(capsys):
    total = agree = 0
    for ell in ("0.3", "0.5", repr(ELL_J), "1", "1.5"):
        for theta in ("0.3", "1.0", "2.0", "2.4", "3.0", "3.5", "4.5", "5.9"):
            rows = run_json(capsys, "slice", "--ell", ell, "--theta", theta, "--n", "30")["rows"]
            for r in rows:
                got = run_json(capsys, "classify", "--ell", ell, "--x", repr(r["x"]), "--y", repr(r["y"]),
                               "--theta", repr(r["theta_slice"]), "--delta", "1e-6")
                total += 1
                agree += got["family"] == r["piece"] and (got["side"] or 0) == r["side"]
    assert agree / total >= 0.999


def test_tolerance_environment_variable():
    env = dict(os.environ, BARRIER_TOL="1e-6")
    out = subprocess.run([sys.executable, "-m", "twocars", "constants", "--ell", "0.5"],
                         capture_output=True, text=True, env=env, check=True).stdout
    data = json.loads(out)
    assert data["theta1"] == pytest.approx(ORACLE["w_0.5"], abs=1e-5)
    env["BARRIER_TOL"] = "-1"
    proc = subprocess.run([sys.executable, "-m", "twocars", "constants", "--ell", "0.5"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == cli.EXIT_DOMAIN


def test_audit_small_run(capsys):
    report = run_json(capsys, "audit", "--ell", "0.5", "--n", "5", "--seed", "1")
    assert report["passed"] is True
    assert len(report["residuals"]) == 10
    assert [o["label"] for o in report["oracle"]] == ["displacement=0.05", "displacement=0.1"]


def test_negative_reals_in_exponent_notation(capsys):
    data = run_json(capsys, "classify", "--ell", "0.5", "--x", "-4e-05", "--y", "-3", "--theta", "1")
    assert data["matched"] is False
