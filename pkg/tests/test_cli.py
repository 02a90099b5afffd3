import json

import pytest

from conewalk import cli


def run(tmp_path, *argv, config=None):
    args = list(argv)
    if config is not None:
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(config))
        args += ["--config", str(cfg)]
    return cli.main(args)


def test_validate_quadrant(tmp_path, capsys):
    out = tmp_path / "o"
    assert run(tmp_path, "validate", "--model", "srw-quadrant", "--out", str(out)) == 0
    doc = json.loads((out / "validate.json").read_text())
    assert doc["result"]["drift"] == ["0", "0"]
    assert doc["config"]["model"]["cone"]["variant"] == "orthant"
    assert doc["config"]["params"]["irreducibility_radius"] == 3


def test_bad_probability_exit_1(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"atoms": [{"step": [1], "prob": "1/2"}, {"step": [-1], "prob": "1/0"}],
                             "cone": {"variant": "halfspace", "normal": [1]}}))
    assert run(tmp_path, "validate", "--model", str(m)) == 1
    err = capsys.readouterr().err
    assert "[model]" in err and "atom 1" in err


def test_config_errors(tmp_path, capsys):
    assert run(tmp_path, "green", "--model", "srw-halfline", config={"x": [1], "ys": [[2]], "colour": 1}) == 1
    assert "unknown field 'colour'" in capsys.readouterr().err
    assert run(tmp_path, "green", "--model", "srw-halfline", config={"x": [1]}) == 1
    assert "ys" in capsys.readouterr().err
    cfg = tmp_path / "broken.json"
    cfg.write_text('{"x": [1],\n "ys": }')
    assert cli.main(["green", "--model", "srw-halfline", "--config", str(cfg)]) == 1
    assert "line 2" in capsys.readouterr().err
    assert run(tmp_path, "survival", "--model", "srw-halfline", config={"x": [1], "n_max": -3}) == 1
    assert run(tmp_path, "validate", "--model", "no-such-model") == 1


def test_module_error_tag(tmp_path, capsys):
    assert run(tmp_path, "survival", "--model", "srw-quadrant", config={"x": [0, 2], "n_max": 5}) == 1
    assert "[geometry]" in capsys.readouterr().err


def test_green_and_csv(tmp_path):
    out = tmp_path / "o"
    cfg = {"x": [1], "ys": [[1], [5]], "horizon": 20000}
    assert run(tmp_path, "green", "--model", "srw-halfline", "--out", str(out), config=cfg) == 0
    lines = (out / "green.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# cone-walk v1" and lines[1].startswith("y0,green,")
    assert abs(float(lines[3].split(",")[1]) - 2.0) < 1e-3


def test_verify_martin_quadrant(tmp_path):
    out = tmp_path / "o"
    cfg = {"x": [2, 3], "x0": [1, 1], "path": [[k, k] for k in range(10, 41, 5)], "horizon": 4000}
    assert run(tmp_path, "verify", "martin", "--model", "srw-quadrant", "--out", str(out), config=cfg) == 0
    doc = json.loads((out / "verify_martin.json").read_text())
    assert abs(doc["result"]["fitted_limit"] - 6.0) < 0.12 and doc["result"]["verdict"] == "pass"


def test_verify_failure_exit_2(tmp_path):
    # a wrong exponent leaves no plateau
    cfg = {"x": [1, 1], "sigma": [1, 0], "scales": [4, 6, 8, 10, 12, 14], "offset": [0, 1], "horizon": 1500,
           "exponent": 2.0}
    assert run(tmp_path, "verify", "boundary", "--model", "srw-quadrant", config=cfg) == 2


def test_harmonic_and_survival(tmp_path):
    out = tmp_path / "o"
    assert run(tmp_path, "harmonic", "--model", "srw-quadrant", "--out", str(out),
               config={"points": [[1, 1], [2, 3]], "schedule": [8, 16]}) == 0
    doc = json.loads((out / "harmonic.json").read_text())
    assert [round(e["limit"], 9) for e in doc["result"]["estimates"]] == [1.0, 6.0]
    assert run(tmp_path, "survival", "--model", "srw-halfline", "--out", str(out),
               config={"x": [1], "n_max": 3}) == 0
    assert json.loads((out / "survival.json").read_text())["result"]["survival"][3] == 0.375


def test_mc_deterministic_bytes(tmp_path):
    cfg = {"x": [1, 1], "y": [2, 2], "horizon": 200, "samples": 5000}
    texts = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert run(tmp_path, "mc", "green", "--model", "srw-quadrant", "--seed", "4", "--deterministic",
                   "--out", str(out), config=cfg) == 0
        texts.append((out / "mc_green.json").read_bytes())
    assert texts[0] == texts[1]
    doc = json.loads(texts[0])
    assert doc["config"]["flags"]["seed"] == 4 and doc["result"]["horizon"] == 200


def test_locale_independent_csv(tmp_path, monkeypatch):
    monkeypatch.setenv("LC_ALL", "de_DE.UTF-8")
    out = tmp_path / "o"
    assert run(tmp_path, "survival", "--model", "srw-halfline", "--out", str(out),
               config={"x": [1], "n_max": 4}) == 0
    row = (out / "survival.csv").read_text().splitlines()[4]
    assert row == "2,0.5"
