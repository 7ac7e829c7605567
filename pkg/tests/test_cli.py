import csv
import subprocess
import json

import pytest

from almost_contact import cli
from almost_contact.charts import FormEvaluationError

SMALL = ["--samples", "300", "--t-grid", "11"]


def run(tmp_path, *args, name="out.json"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


@pytest.mark.parametrize("model", ["torus-collar", "milnor", "product"])
def test_verify_all_models_as_expected(tmp_path, model):
    code, out = run(tmp_path, "verify", "--model", model, *SMALL)
    assert code == cli.EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["version"] == cli.REPORT_VERSION
    assert doc["config"]["model"] == model
    assert all(r["status"] in ("pass", "expected-fail") for r in doc["reports"])
    assert all(r["config_hash"] == doc["config_hash"] and r["seed"] == 7 for r in doc["reports"])


def test_report_fields(tmp_path):
    _, out = run(tmp_path, "verify", "--model", "milnor", *SMALL)
    rec = json.loads(out.read_text())["reports"][0]
    for key in ("check", "model", "params", "min", "max", "argmin", "residual", "verdict",
                "margin", "status", "expected", "seed", "config_hash"):
        assert key in rec


def test_determinism(tmp_path):
    _, a = run(tmp_path, "verify", *SMALL, name="a.json")
    _, b = run(tmp_path, "verify", *SMALL, name="b.json")
    assert a.read_bytes() == b.read_bytes()


def test_seed_changes_hash(tmp_path):
    _, a = run(tmp_path, "verify", "--model", "milnor", *SMALL, name="a.json")
    _, b = run(tmp_path, "verify", "--model", "milnor", *SMALL, "--seed", "8", name="b.json")
    assert json.loads(a.read_text())["config_hash"] != json.loads(b.read_text())["config_hash"]


def test_csv_projection(tmp_path):
    code, out = run(tmp_path, "verify", "--model", "product", *SMALL, "--format", "csv",
                    name="r.csv")
    rows = list(csv.DictReader(out.open()))
    assert code == 0 and rows and rows[0]["model"] == "product"
    assert {r["status"] for r in rows} <= {"pass", "expected-fail"}


def test_sweep_command(tmp_path):
    code, out = run(tmp_path, "sweep", *SMALL, "--omega-tilt", "0.3", "--eps-hi", "4")
    assert code == cli.EXIT_OK
    eps = json.loads(out.read_text())["sweep"]["eps_max"]
    assert 0.5 / 0.3 <= eps < 1 / 0.3


def test_sweep_failure_exit_code(tmp_path):
    code, _ = run(tmp_path, "sweep", *SMALL, "--eps-hi", "1e-9")
    assert code == cli.EXIT_SWEEP
    code, _ = run(tmp_path, "verify", *SMALL, "--sweep", "--eps-hi", "1e-9", name="v.json")
    assert code == cli.EXIT_SWEEP


def test_verify_with_sweep_uses_half_eps_max(tmp_path):
    code, out = run(tmp_path, "verify", *SMALL, "--sweep", "--eps-hi", "2", "--omega-tilt", "0.3")
    doc = json.loads(out.read_text())
    eps_max = doc["sweep"]["eps_max"]
    half = [r for r in doc["reports"] if r["check"] == "omega_0 = d alpha_0"][0]
    assert code == 0 and half["params"]["epsilon"] == pytest.approx(eps_max / 2)


def test_slice_csv(tmp_path):
    code, out = run(tmp_path, "slice", "--t", "1", "--epsilon", "0.1", name="s.csv")
    rows = list(csv.reader(out.open()))
    assert code == 0 and rows[0] == cli.SLICE_HEADER
    body = [[float(x) for x in r] for r in rows[1:]]
    for r in body:
        assert r[5] == pytest.approx(r[6], rel=1e-10, abs=1e-15)
        assert min(r[1:5]) >= -1e-10
    mid = min(body, key=lambda r: abs(r[0] - 0.5))
    # t=1, r=1/2: only the e-term survives, 2 eps^2 e^2 / r = 0.04
    assert mid[4] == pytest.approx(0.04, rel=1e-9) and mid[1] == mid[2] == mid[3] == 0.0


def test_config_file(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nmodel = milnor\nsamples = 200\nt-grid = 6\n"
                   "[profile]\ne_amplitude = 0.5\n")
    code, out = run(tmp_path, "verify", "--config", str(ini), "--seed", "3")
    cfg = json.loads(out.read_text())["config"]
    assert code == 0
    assert (cfg["model"], cfg["samples"], cfg["t_grid"], cfg["seed"]) == ("milnor", 200, 6, 3)
    assert cfg["profile"]["e_amplitude"] == 0.5


@pytest.mark.parametrize("text", ["[run]\nbogus = 1\n", "[other]\n", "[run]\nsamples = many\n",
                                  "[profile]\nzzz = 1\n", "[run]\nsweep = maybe\n"])
def test_config_errors(tmp_path, text):
    ini = tmp_path / "c.ini"
    ini.write_text(text)
    assert cli.main(["verify", "--config", str(ini)]) == cli.EXIT_CONFIG


@pytest.mark.parametrize("args", [["--samples", "0"], ["--t-grid", "1"], ["--epsilon", "-1"],
                                  ["--model", "nope"], ["--delta-n", "0.7"]])
def test_bad_flags(args):
    assert cli.main(["verify", *args]) == cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert cli.main(["verify", "--config", str(tmp_path / "none.ini")]) == cli.EXIT_CONFIG


def test_slice_and_sweep_need_torus():
    assert cli.main(["slice", "--model", "milnor"]) == cli.EXIT_CONFIG
    assert cli.main(["sweep", "--model", "product"]) == cli.EXIT_CONFIG


def test_runtime_error_names_check(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise FormEvaluationError("non-finite coefficient")

    monkeypatch.setattr(cli.V, "reeb_certificate", boom)
    code, _ = run(tmp_path, "verify", "--model", "milnor", *SMALL)
    assert code == cli.EXIT_RUNTIME
    assert "reeb certificate" in capsys.readouterr().err


def test_failing_check_exit_code(tmp_path):
    code, _ = run(tmp_path, "verify", "--model", "milnor", *SMALL, "--tol-pos", "100")
    assert code == cli.EXIT_CHECKS


def test_stdout_when_no_out(capsys):
    assert cli.main(["verify", "--model", "milnor", *SMALL]) == 0
    assert json.loads(capsys.readouterr().out)["config"]["model"] == "milnor"


def test_config_hash_is_git_blob_id(tmp_path):
    cfg = cli.RunConfig()
    blob = tmp_path / "cfg.json"
    blob.write_bytes(json.dumps(cfg.to_dict(), sort_keys=True).encode())
    try:
        out = subprocess.run(["git", "hash-object", str(blob)], capture_output=True, text=True)
    except FileNotFoundError:
        pytest.skip("git not installed")
    assert out.stdout.strip() == cfg.content_hash()


def test_slice_dr_column_support(tmp_path):
    _, out0 = run(tmp_path, "slice", "--t", "0", name="s0.csv")
    _, out1 = run(tmp_path, "slice", "--t", "1", name="s1.csv")
    rows0 = [[float(x) for x in r] for r in list(csv.reader(out0.open()))[1:]]
    rows1 = [[float(x) for x in r] for r in list(csv.reader(out1.open()))[1:]]
    assert all(r[4] == 0.0 for r in rows0)
    assert all(r[4] == 0.0 for r in rows1 if not 0.4 < r[0] < 0.6)
    assert any(r[4] > 0.0 for r in rows1)
