from pathlib import Path

import pytest
import yaml

from crnlearn.config import load_config, parse_config
from crnlearn.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def base(**over):
    data = {
        "version": 1,
        "network": "networks/example1.yaml",
        "simulation": {"x0": [20, 10], "horizon": 10.0, "trajectories": 5, "seed": 1},
    }
    data.update(over)
    return data


def parse(data):
    return parse_config(data, CONFIGS, "t")


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert cfg.name == path.stem
    assert cfg.network is not None


def test_example3_lambda_map():
    cfg = load_config(CONFIGS / "example3.yaml")
    assert cfg.learn.lam["0,-1,-1,1"] == 10.0
    assert len(cfg.learn.lam) == 6


def test_valid_minimal():
    cfg = parse(base())
    assert cfg.simulation.trajectories == 5
    assert cfg.learn.epsilon == 0.1


@pytest.mark.parametrize(
    "section,key,value",
    [
        ("simulation", "trajectories", 0),
        ("simulation", "horizon", 0.0),
        ("simulation", "horizon", -1.0),
        ("simulation", "x0", [1]),
        ("simulation", "x0", [1, -2]),
        ("simulation", "seed", -1),
    ],
)
def test_simulation_ranges(section, key, value):
    data = base()
    data[section][key] = value
    with pytest.raises(ConfigError):
        parse(data)


@pytest.mark.parametrize(
    "learn",
    [
        {"epsilon": 0},
        {"lambda": -0.1},
        {"lambda": {"1,0": -1}},
        {"solver": {"eta": 1.0}},
        {"solver": {"bogus": 1}},
        {"typo": 1},
        {"rescaling": [1, 0]},
        {"precondition": "jacobi"},
        {"pilot_iters": 0},
    ],
)
def test_learn_validation(learn):
    with pytest.raises(ConfigError):
        parse(base(learn=learn))


def test_lambda_map_keys_normalised():
    cfg = parse(base(learn={"lambda": {"-1, 0": 0.5}}))
    assert cfg.learn.lam == {"-1,0": 0.5}


def test_version_and_unknown_keys():
    with pytest.raises(ConfigError, match="version"):
        parse({**base(), "version": 2})
    with pytest.raises(ConfigError, match="unknown"):
        parse({**base(), "extra": 1})


def test_missing_files(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        parse(base(network="networks/nope.yaml"))
    with pytest.raises(ConfigError, match="does not exist"):
        parse(base(dataset="nope.traj"))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


def test_unknown_diagnostic():
    with pytest.raises(ConfigError, match="valid names"):
        parse(base(diagnose={"names": ["pi", "entropy"]}))


def test_inline_network_and_bad_yaml(tmp_path):
    net = yaml.safe_load((CONFIGS / "networks" / "death.yaml").read_text())
    cfg = parse({"version": 1, "network": net})
    assert cfg.network.n_species == 1
    p = tmp_path / "bad.yaml"
    p.write_text("version: [1\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(p)


def test_precondition_values():
    assert parse(base(learn={"precondition": True})).learn.precondition == "max"
    assert parse(base(learn={"precondition": False})).learn.precondition == "none"
    cfg = parse(base(learn={"precondition": "curvature", "pilot_iters": 500, "max_rounds": 3}))
    assert (cfg.learn.precondition, cfg.learn.pilot_iters, cfg.learn.max_rounds) == ("curvature", 500, 3)
    assert load_config(CONFIGS / "example2.yaml").learn.precondition == "curvature"
