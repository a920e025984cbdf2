import csv
import io
import json
import math

import pytest

from autores import __version__
from autores.cli import COMMANDS, fmt, run

SMALL = {
    "equilibria": ["--delta", "1", "--nu", "0"],
    "bifurcation-scan": ["--n-delta", "5", "--n-nu", "3"],
    "simulate": ["--tau0", "50", "--tau-max", "300"],
    "basin": ["--tau0", "10", "--tau-max", "40", "--n-rho", "2", "--n-psi", "2",
              "--rho-min", "0.001", "--rho-max", "3.2"],
    "lyapunov-check": ["--eta0", "1000", "--eta1", "1500", "--n-samples", "500"],
    "freq-check": ["--h", "1e-4,1e-3"],
    "threshold-sweep": ["--deltas", "0.3,0.7"],
    "duffing": ["--t-max", "300"],
    "demo-es": ["--a0", "1", "--b0", "1", "--t1", "16"],
    "asymptotics": ["--n-tau", "31"],
}


def call(args, tmp_path=None):
    out = io.StringIO()
    argv = list(args) + (["--out-dir", str(tmp_path)] if tmp_path is not None else [])
    code = run(argv, stdout=out)
    return code, out.getvalue()


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith(f"# autores {__version__} command=")
    return list(csv.DictReader(lines[1:]))


def test_every_command_has_a_small_case():
    assert set(SMALL) == set(COMMANDS)


def test_equilibria_examples(tmp_path):
    code, text = call(["equilibria", "--delta", "1", "--nu", "0"], tmp_path)
    assert code == 0
    rows = read_csv(tmp_path / "equilibria.csv")
    psi = [float(r["psi0"]) for r in rows]
    assert psi == pytest.approx([0, math.pi / 3, math.pi, 5 * math.pi / 3], abs=1e-10)
    assert "OmegaPlus" in text
    for delta, nu in (("0.3", "0"), ("0", "1.0")):
        code, _ = call(["equilibria", "--delta", delta, "--nu", nu], tmp_path)
        assert code == 0
        psi = [float(r["psi0"]) for r in read_csv(tmp_path / "equilibria.csv")]
        assert psi == pytest.approx([0, math.pi], abs=1e-10)


def test_bifurcation_scan_crosses_gamma(tmp_path):
    code, _ = call(["bifurcation-scan", "--delta-min", "-1", "--delta-max", "1", "--n-delta", "9",
                    "--nu-min", "0", "--nu-max", "0", "--n-nu", "1"], tmp_path)
    assert code == 0
    rows = {float(r["delta"]): r for r in read_csv(tmp_path / "bifurcation.csv")}
    assert rows[0.5]["region"] == "GammaPlus" and rows[-0.5]["region"] == "GammaMinus"
    assert rows[0.25]["n_roots"] == "2" and rows[0.75]["n_roots"] == "4"
    assert rows[0.0]["psi0_3"] == ""


def test_simulate_verdicts(tmp_path):
    code, text = call(["simulate", "--tau0", "50", "--tau-max", "300"], tmp_path / "a")
    assert code == 0 and "verdict=Captured" in text
    v = json.loads((tmp_path / "a" / "verdict.json").read_text())
    assert v["verdict"] == "Captured" and v["psi0_locked"] == pytest.approx(math.pi)
    rows = read_csv(tmp_path / "a" / "trajectory.csv")
    assert float(rows[0]["tau"]) == 50 and float(rows[-1]["tau"]) == 300
    code, _ = call(["simulate", "--tau0", "20", "--tau-max", "80", "--rho0", "0.05",
                    "--psi0", str(math.pi / 2)], tmp_path / "b")
    assert code == 0
    assert json.loads((tmp_path / "b" / "verdict.json").read_text())["verdict"] == "Escaped"


def test_demo_es_matches_closed_form(tmp_path):
    code, _ = call(["demo-es", *SMALL["demo-es"]], tmp_path)
    assert code == 0
    rep = json.loads((tmp_path / "demo_es.json").read_text())
    assert rep["rel_err"] < 1e-6
    assert rep["a_exact"] == pytest.approx(math.exp(8) / 16)
    assert rep["max_eigenvalue"] == pytest.approx(-2 / 64)


def test_freq_check(tmp_path):
    code, _ = call(["freq-check", "--h", "1e-4"], tmp_path)
    assert code == 0
    row = read_csv(tmp_path / "frozen_frequency.csv")[0]
    assert abs(float(row["omega_num"]) - math.sqrt(2)) < 1e-3


def test_exit_codes(tmp_path):
    assert call(["equilibria", "--nu", "4"], tmp_path)[0] == 2
    assert call(["simulate", "--max-steps", "10"], tmp_path)[0] == 3
    assert call(["basin", "--tau0", "50", "--tau-max", "100"], tmp_path)[0] == 4
    assert call(["simulate", "--rel-tol", "-1"], tmp_path)[0] == 2
    assert call(["equilibria", "--workers", "0"], tmp_path)[0] == 2
    with pytest.raises(SystemExit) as exc:
        call(["equilibria", "--bogus", "1"])
    assert exc.value.code == 2


def test_malformed_config_writes_nothing(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{ not json")
    out = tmp_path / "out"
    assert call(["simulate", "--config", str(cfg)], out)[0] == 2
    assert not out.exists()


@pytest.mark.parametrize("doc", [{"model": {"lamda": 1.0}}, {"modle": {}}, {"run": {"tau0": "x"}},
                                 {"model": {"lambda": 0.0}}, {"duffing": {"eps": 0.5}}, []])
def test_invalid_configs_rejected(tmp_path, doc):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(doc))
    command = "duffing" if "duffing" in str(doc) else "simulate"
    assert call([command, "--config", str(cfg)], tmp_path / "out")[0] == 2
    assert not (tmp_path / "out").exists()


def test_dry_run_computes_nothing(tmp_path):
    code, text = call(["lyapunov-check", "--dry-run"], tmp_path / "out")
    assert code == 0 and "config ok" in text
    assert not (tmp_path / "out").exists()
    assert call(["equilibria", "--dry-run", "--nu", "9"], tmp_path / "out")[0] == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"delta": 0.3, "nu": 0.0}, "output": {"directory": str(tmp_path / "cfgdir")}}))
    assert call(["equilibria", "--config", str(cfg)])[0] == 0
    assert len(read_csv(tmp_path / "cfgdir" / "equilibria.csv")) == 2
    assert call(["equilibria", "--config", str(cfg), "--delta", "1"], tmp_path / "flag")[0] == 0
    assert len(read_csv(tmp_path / "flag" / "equilibria.csv")) == 4


def test_env_var_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("AUTORES_OUT_DIR", str(tmp_path / "env"))
    assert call(["equilibria"])[0] == 0
    assert (tmp_path / "env" / "equilibria.csv").exists()
    assert call(["equilibria"], tmp_path / "flag")[0] == 0
    assert (tmp_path / "flag" / "equilibria.csv").exists()


def test_header_echoes_parameters(tmp_path):
    call(["equilibria", "--delta", "0.7", "--nu", "0.2"], tmp_path)
    first = (tmp_path / "equilibria.csv").read_text().splitlines()[0]
    params = json.loads(first.split("params=", 1)[1])
    assert params["model"]["delta"] == 0.7 and params["model"]["nu"] == 0.2
    assert "duffing" not in params and "workers" not in first


def test_fmt():
    assert [fmt(x) for x in (None, 0.0, -0.0, True, float("nan"), 0.1, 3)] == \
        ["", "0", "0", "true", "nan", "0.1", "3"]


def test_outputs_use_lf(tmp_path):
    call(["asymptotics", "--n-tau", "5"], tmp_path)
    for f in tmp_path.iterdir():
        assert b"\r" not in f.read_bytes()


@pytest.mark.parametrize("command", sorted(SMALL))
def test_reruns_are_byte_identical_across_workers(tmp_path, command):
    a, b = tmp_path / "w1", tmp_path / "w2"
    assert call([command, *SMALL[command], "--workers", "1"], a)[0] == 0
    assert call([command, *SMALL[command], "--workers", "2"], b)[0] == 0
    names = sorted(p.name for p in a.iterdir())
    assert names and names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n
