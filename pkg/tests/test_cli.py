import json
from pathlib import Path

import pytest
import yaml

from crnlearn.cli import EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_OK, main
from crnlearn.dataset import read_dataset

NETS = Path(__file__).resolve().parents[1] / "configs" / "networks"


def write_cfg(tmp_path, name="run", **sections):
    data = {
        "version": 1,
        "network": str(NETS / "example1.yaml"),
        "simulation": {"x0": [20, 10], "horizon": 2.0, "trajectories": 6, "seed": 4},
    }
    data.update(sections)
    p = tmp_path / f"{name}.yaml"
    p.write_text(yaml.safe_dump(data))
    return p


def run(cfg, *args, out):
    return main(["--config", str(cfg), "--output", str(out), "--quiet", *args])


def test_simulate_writes_dataset(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--output", str(tmp_path / "o")]) == EXIT_OK
    text = capsys.readouterr().out
    # lexicographic channel order of the four state changes
    for vec in ("(-1, 0)", "(-1, 1)", "(0, -1)", "(1, 0)"):
        assert vec in text
    ts, names = read_dataset(tmp_path / "o" / "run.traj")
    assert len(ts) == 6 and names == ["A", "B"]


def test_simulate_is_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path)
    for out in ("a", "b"):
        assert run(cfg, "simulate", out=tmp_path / out) == EXIT_OK
    c = run(cfg, "simulate", "--workers", "3", out=tmp_path / "c")
    assert c == EXIT_OK
    a = (tmp_path / "a" / "run.traj").read_bytes()
    assert a == (tmp_path / "b" / "run.traj").read_bytes()
    assert a == (tmp_path / "c" / "run.traj").read_bytes()
    d = run(cfg, "simulate", "--seed", "5", out=tmp_path / "d")
    assert d == EXIT_OK
    assert a != (tmp_path / "d" / "run.traj").read_bytes()


def test_zero_trajectories_is_config_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path, simulation={"x0": [20, 10], "horizon": 2.0, "trajectories": 0})
    assert run(cfg, "simulate", out=tmp_path) == EXIT_CONFIG
    assert "trajectories" in capsys.readouterr().err


def test_missing_config_and_bad_workers(tmp_path):
    assert main(["simulate", "--quiet"]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(tmp_path / "none.yaml"), "--quiet"]) == EXIT_CONFIG
    cfg = write_cfg(tmp_path)
    assert run(cfg, "simulate", "--workers", "0", out=tmp_path) == EXIT_CONFIG
    assert run(cfg, "simulate", "--seed", "-3", out=tmp_path) == EXIT_CONFIG


def test_unknown_diagnostic_is_usage_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    with pytest.raises(SystemExit) as e:
        run(cfg, "diagnose", "--only", "entropy", out=tmp_path)
    assert e.value.code == 2
    assert "compensator" in capsys.readouterr().err


def test_channels_from_dataset(tmp_path):
    cfg = write_cfg(tmp_path)
    run(cfg, "simulate", out=tmp_path)
    assert main(["channels", "--dataset", str(tmp_path / "run.traj"), "--output", str(tmp_path), "--quiet"]) == EXIT_OK
    text = (tmp_path / "run.channels.txt").read_text()
    assert "6 trajectories" in text


def test_learn_rates_dataset_matches_simulation(tmp_path):
    cfg = write_cfg(tmp_path)
    run(cfg, "simulate", out=tmp_path / "sim")
    assert run(cfg, "learn-rates", "--dataset", str(tmp_path / "sim" / "run.traj"), out=tmp_path / "a") == EXIT_OK
    assert run(cfg, "learn-rates", out=tmp_path / "b") == EXIT_OK
    assert run(cfg, "learn-rates", "--workers", "2", out=tmp_path / "c") == EXIT_OK
    a = (tmp_path / "a" / "run.rates.txt").read_bytes()
    assert a == (tmp_path / "b" / "run.rates.txt").read_bytes() == (tmp_path / "c" / "run.rates.txt").read_bytes()
    payload = json.loads((tmp_path / "a" / "run.rates.json").read_text())
    assert [r["method"] for r in payload["reactions"]] == ["closed-form"] * 4


def test_learn_rates_unobserved_reaction(tmp_path):
    # A + B -> 2B cannot fire without B
    cfg = write_cfg(tmp_path, simulation={"x0": [20, 0], "horizon": 2.0, "trajectories": 3, "seed": 1})
    assert run(cfg, "learn-rates", out=tmp_path) == EXIT_OK
    payload = json.loads((tmp_path / "run.rates.json").read_text())
    k2 = payload["reactions"][1]
    assert k2["estimate"] == 0.0 and k2["no_information"]
    assert "no information" in (tmp_path / "run.rates.txt").read_text()


def small_learn(**over):
    learn = {"basis": "polynomial1", "lambda": 0.01, "solver": {"rel_tol": 1e-6, "max_iters": 20000}}
    learn.update(over)
    return learn


def test_learn_network_outputs_and_workers(tmp_path):
    cfg = write_cfg(tmp_path, learn=small_learn())
    assert run(cfg, "learn-network", out=tmp_path / "a") == EXIT_OK
    assert run(cfg, "learn-network", "--workers", "3", out=tmp_path / "b") == EXIT_OK
    a = (tmp_path / "a" / "run.coefficients.txt").read_bytes()
    assert a == (tmp_path / "b" / "run.coefficients.txt").read_bytes()
    assert (tmp_path / "a" / "run.coefficients.json").read_bytes() == (tmp_path / "b" / "run.coefficients.json").read_bytes()
    payload = json.loads((tmp_path / "a" / "run.coefficients.json").read_text())
    assert payload["basis"] == ["1", "x1", "x2"]
    assert all(ch["converged"] for ch in payload["channels"])
    assert "*" in a.decode()


def test_learn_network_not_converged(tmp_path):
    cfg = write_cfg(tmp_path, learn=small_learn(solver={"max_iters": 5}))
    assert run(cfg, "learn-network", out=tmp_path) == EXIT_NOT_CONVERGED
    assert "not converged" in (tmp_path / "run.coefficients.txt").read_text()


def test_learn_network_lambda_map_missing_channel(tmp_path, capsys):
    cfg = write_cfg(tmp_path, learn=small_learn(**{"lambda": {"-1,0": 0.1, "1,0": 0.1}}))
    assert run(cfg, "learn-network", out=tmp_path) == EXIT_CONFIG
    assert "no lambda" in capsys.readouterr().err


def test_learn_network_bad_basis(tmp_path):
    cfg = write_cfg(tmp_path, learn=small_learn(basis="cubic"))
    assert run(cfg, "learn-network", out=tmp_path) == EXIT_CONFIG


def test_diagnose_two_state(tmp_path):
    cfg = write_cfg(
        tmp_path,
        network=str(NETS / "two_state.yaml"),
        simulation={"x0": [1, 0], "horizon": 1e4, "trajectories": 1, "seed": 5},
        diagnose={"names": ["pi", "fisher"], "tolerance": 0.03},
    )
    assert run(cfg, "diagnose", out=tmp_path) == EXIT_OK
    text = (tmp_path / "run.diagnostics.txt").read_text()
    assert "pi: PASS" in text
    assert "F =" in text


def test_diagnose_normality_report(tmp_path):
    cfg = write_cfg(
        tmp_path,
        network=str(NETS / "death.yaml"),
        simulation={"x0": [50], "horizon": 200.0, "trajectories": 1, "seed": 7},
        diagnose={"names": ["normality"], "replicas": 300, "tolerance": 0.25},
    )
    assert run(cfg, "diagnose", out=tmp_path / "a") == EXIT_OK
    assert run(cfg, "diagnose", out=tmp_path / "b") == EXIT_OK
    text = (tmp_path / "a" / "run.diagnostics.txt").read_text()
    assert "inverse Fisher matrix" in text and "max diagonal deviation" in text
    assert "normality: PASS" in text
    assert text == (tmp_path / "b" / "run.diagnostics.txt").read_text()


def test_diagnose_kl_needs_probes(tmp_path):
    cfg = write_cfg(tmp_path, diagnose={"names": ["kl"]})
    assert run(cfg, "diagnose", out=tmp_path) == EXIT_CONFIG
