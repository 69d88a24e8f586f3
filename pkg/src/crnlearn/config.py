"""Versioned YAML run configuration shared by all CLI subcommands."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError, CRNError
from .fista import FistaConfig
from .model import ReactionNetwork

CONFIG_VERSION = 1
DIAGNOSTICS = ("pi", "fisher", "normality", "compensator", "kl")


@dataclass
class SimulationConfig:
    x0: tuple[int, ...]
    horizon: float
    trajectories: int
    seed: int


@dataclass
class LearnConfig:
    basis: list[str] | str = "polynomial2"
    epsilon: float = 0.1
    lam: float | dict = 0.01
    precondition: str = "max"  # none | max | curvature
    pilot_iters: int = 2000
    max_rounds: int = 6
    rescaling: list[float] | None = None
    channels: list[int] | None = None  # 1-based; None means all
    solver: FistaConfig = field(default_factory=FistaConfig)


@dataclass
class DiagnoseConfig:
    names: list[str] = field(default_factory=lambda: ["pi"])
    replicas: int = 300
    probes: list[list[float]] = field(default_factory=list)
    tolerance: float | None = None


@dataclass
class RunConfig:
    name: str
    base_dir: Path
    network: ReactionNetwork | None = None
    simulation: SimulationConfig | None = None
    dataset: Path | None = None
    learn: LearnConfig = field(default_factory=LearnConfig)
    diagnose: DiagnoseConfig = field(default_factory=DiagnoseConfig)
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)


def _precondition(v) -> str:
    if isinstance(v, bool):
        return "max" if v else "none"
    if v not in ("none", "max", "curvature"):
        raise ConfigError(f"learn.precondition must be none, max or curvature (or a boolean), got {v!r}")
    return v


def _req(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing '{key}'")
    return d[key]


def _positive(v, what, allow_zero=False):
    try:
        v = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a number, got {v!r}") from None
    if not math.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        raise ConfigError(f"{what} must be {'>= 0' if allow_zero else '> 0'}, got {v}")
    return v


def _int(v, what, minimum):
    if isinstance(v, bool) or not isinstance(v, int):
        try:
            if float(v) != int(float(v)):
                raise ValueError
            v = int(float(v))
        except (TypeError, ValueError):
            raise ConfigError(f"{what} must be an integer, got {v!r}") from None
    if v < minimum:
        raise ConfigError(f"{what} must be >= {minimum}, got {v}")
    return int(v)


def _load_network(spec, base: Path) -> ReactionNetwork:
    try:
        if isinstance(spec, str):
            path = (base / spec).resolve()
            if not path.exists():
                raise ConfigError(f"network file {path} does not exist")
            return ReactionNetwork.load(path)
        if isinstance(spec, dict):
            return ReactionNetwork.from_dict(spec)
    except ConfigError:
        raise
    except (CRNError, yaml.YAMLError, OSError) as exc:
        raise ConfigError(f"bad network: {exc}") from None
    raise ConfigError("network must be a file path or an inline mapping")


def _solver(d: dict) -> FistaConfig:
    allowed = {"L0", "eta", "window", "rel_tol", "max_iters", "max_backtracks"}
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown solver keys {sorted(extra)}")
    try:
        kw = {k: (int(v) if k in ("window", "max_iters", "max_backtracks") else float(v)) for k, v in d.items()}
        return FistaConfig(**kw)
    except (CRNError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad solver settings: {exc}") from None


def _lam(v):
    if isinstance(v, dict):
        return {str(k).replace(" ", ""): _positive(x, f"lambda[{k}]", allow_zero=True) for k, x in v.items()}
    return _positive(v, "lambda", allow_zero=True)


def parse_config(data: dict, base_dir: Path, name: str) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    version = data.get("version")
    if version != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION}, got {version!r}")
    known = {"version", "name", "network", "simulation", "dataset", "learn", "diagnose", "workers"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    cfg = RunConfig(name=str(data.get("name", name)), base_dir=base_dir)
    if "network" in data:
        cfg.network = _load_network(data["network"], base_dir)
    if "simulation" in data:
        s = data["simulation"] or {}
        x0 = _req(s, "x0", "simulation")
        if not isinstance(x0, list) or any(isinstance(v, bool) or not isinstance(v, int) or v < 0 for v in x0):
            raise ConfigError(f"simulation.x0 must be a list of non-negative integers, got {x0!r}")
        cfg.simulation = SimulationConfig(
            x0=tuple(x0),
            horizon=_positive(_req(s, "horizon", "simulation"), "simulation.horizon"),
            trajectories=_int(_req(s, "trajectories", "simulation"), "simulation.trajectories", 1),
            seed=_int(s.get("seed", 0), "simulation.seed", 0),
        )
        if cfg.network is not None and len(x0) != cfg.network.n_species:
            raise ConfigError(f"x0 has {len(x0)} entries, network has {cfg.network.n_species} species")
    if "dataset" in data:
        path = (base_dir / str(data["dataset"])).resolve()
        if not path.exists():
            raise ConfigError(f"dataset {path} does not exist")
        cfg.dataset = path
    if "learn" in data:
        l = data["learn"] or {}
        extra = set(l) - {
            "basis", "epsilon", "lambda", "precondition", "pilot_iters", "max_rounds", "rescaling", "channels", "solver"
        }
        if extra:
            raise ConfigError(f"unknown learn keys {sorted(extra)}")
        chans = l.get("channels")
        cfg.learn = LearnConfig(
            basis=l.get("basis", "polynomial2"),
            epsilon=_positive(l.get("epsilon", 0.1), "learn.epsilon"),
            lam=_lam(l.get("lambda", 0.01)),
            precondition=_precondition(l.get("precondition", "max")),
            pilot_iters=_int(l.get("pilot_iters", 2000), "learn.pilot_iters", 1),
            max_rounds=_int(l.get("max_rounds", 6), "learn.max_rounds", 1),
            rescaling=[_positive(v, "learn.rescaling") for v in l["rescaling"]] if l.get("rescaling") else None,
            channels=[_int(c, "learn.channels", 1) for c in chans] if chans else None,
            solver=_solver(l.get("solver") or {}),
        )
    if "diagnose" in data:
        g = data["diagnose"] or {}
        names = g.get("names", ["pi"])
        if isinstance(names, str):
            names = [names]
        bad = [n for n in names if n not in DIAGNOSTICS]
        if bad:
            raise ConfigError(f"unknown diagnostic(s) {bad}; valid names: {', '.join(DIAGNOSTICS)}")
        cfg.diagnose = DiagnoseConfig(
            names=list(names),
            replicas=_int(g.get("replicas", 300), "diagnose.replicas", 1),
            probes=[[float(v) for v in p] for p in g.get("probes", [])],
            tolerance=float(g["tolerance"]) if "tolerance" in g else None,
        )
    if "workers" in data:
        cfg.workers = _int(data["workers"], "workers", 1)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return parse_config(data, path.parent.resolve(), path.stem)
