"""Command-line front end: simulate, channels, learn-rates, learn-network, diagnose."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .basis import BasisLibrary
from .config import DIAGNOSTICS, RunConfig, load_config
from .dataset import read_dataset, write_dataset
from .errors import ConfigError, CRNError, InvalidInputError
from .estimators import SparseLearnProblem, learn_network, learn_rates
from .likelihood import precompute
from .ssa import identify_channels, simulate_many

log = logging.getLogger("crnlearn")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NOT_CONVERGED = 0, 2, 3, 4


def fmt(v: float, digits: int = 8) -> str:
    return f"{v:.{digits}g}"


def format_matrix(m: np.ndarray, digits: int = 8) -> str:
    m = np.atleast_2d(m)
    cells = [[fmt(float(v), digits) for v in row] for row in m]
    width = max(len(c) for row in cells for c in row)
    return "\n".join("  " + " ".join(c.rjust(width) for c in row) for row in cells)


def format_table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(r[k])) for r in [header, *rows]) for k in range(len(header))]
    line = lambda r: "  ".join(str(c).rjust(w) for c, w in zip(r, widths)).rstrip()
    return "\n".join([line(header), "  ".join("-" * w for w in widths), *map(line, rows)])


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Context:
    def __init__(self, args, cfg: RunConfig):
        self.args = args
        self.cfg = cfg
        self.out = Path(args.output)
        self.quiet = args.quiet
        self.workers = args.workers if args.workers is not None else cfg.workers
        if self.workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {self.workers}")

    def say(self, text: str = "") -> None:
        if not self.quiet:
            print(text)

    def seed(self) -> int:
        if self.args.seed is not None:
            return self.args.seed
        return self.cfg.simulation.seed if self.cfg.simulation else 0

    def path(self, suffix: str) -> Path:
        return self.out / f"{self.cfg.name}{suffix}"

    def need_network(self):
        if self.cfg.network is None:
            raise ConfigError("this command needs a 'network' entry in the config")
        return self.cfg.network

    def need_simulation(self):
        if self.cfg.simulation is None:
            raise ConfigError("this command needs a 'simulation' section in the config")
        return self.cfg.simulation

    def data(self):
        """Trajectories from --dataset, the config's dataset, or a fresh simulation."""
        path = getattr(self.args, "dataset", None)
        if path is not None:
            if not Path(path).exists():
                raise ConfigError(f"dataset {path} does not exist")
            return read_dataset(path)[0]
        if self.cfg.dataset is not None:
            return read_dataset(self.cfg.dataset)[0]
        net, sim = self.need_network(), self.need_simulation()
        log.info("simulating %d trajectories to T=%g", sim.trajectories, sim.horizon)
        return simulate_many(net, sim.x0, sim.horizon, sim.trajectories, self.seed(), self.workers)

    def species(self, n: int) -> list[str]:
        if self.cfg.network is not None and self.cfg.network.n_species == n:
            return list(self.cfg.network.species_names)
        return [f"x{k + 1}" for k in range(n)]


# -- subcommands -----------------------------------------------------------------


def channel_report(ts, names) -> str:
    cs = identify_channels(ts)
    head = f"{len(ts)} trajectories, horizon {fmt(ts.horizon)}, {ts.n_events} events, {cs.n_channels} channels"
    return head + "\n" + cs.table(names) + "\n"


def cmd_simulate(ctx: Context) -> int:
    net, sim = ctx.need_network(), ctx.need_simulation()
    ts = simulate_many(net, sim.x0, sim.horizon, sim.trajectories, ctx.seed(), ctx.workers)
    dest = ctx.path(".traj")
    # write_dataset is atomic, so a failed run leaves no partial file behind
    write_dataset(dest, ts, net.species_names)
    ctx.say(channel_report(ts, list(net.species_names)))
    ctx.say(f"wrote {dest}")
    return EXIT_OK


def cmd_channels(ctx: Context) -> int:
    ts = ctx.data()
    text = channel_report(ts, ctx.species(ts.n_species))
    write_text(ctx.path(".channels.txt"), text)
    ctx.say(text)
    return EXIT_OK


def cmd_learn_rates(ctx: Context) -> int:
    net = ctx.need_network()
    ts = ctx.data()
    est = learn_rates(net, ts)
    names = list(net.species_names)
    rows = []
    for k, r in enumerate(net.reactions):
        flag = " (no information)" if est.no_information[k] else ""
        rows.append(
            [
                f"k{k + 1}",
                r.describe(names),
                ",".join(str(v) for v in r.state_change),
                est.methods[k],
                fmt(est.rates[k], 6) + flag,
                fmt(r.rate_constant, 6),
            ]
        )
    text = format_table(["rate", "reaction", "vector", "method", "estimate", "config"], rows)
    if est.notes:
        text += "\n\n" + "\n".join(f"note: {n}" for n in est.notes)
    text += "\n"
    write_text(ctx.path(".rates.txt"), text)
    payload = {
        "name": ctx.cfg.name,
        "converged": bool(est.converged),
        "reactions": [
            {
                "reaction": r.describe(names),
                "vector": list(r.state_change),
                "method": est.methods[k],
                "estimate": float(est.rates[k]),
                "no_information": bool(est.no_information[k]),
            }
            for k, r in enumerate(net.reactions)
        ],
        "notes": est.notes,
    }
    write_text(ctx.path(".rates.json"), json.dumps(payload, indent=2) + "\n")
    ctx.say(text)
    return EXIT_OK if est.converged else EXIT_NOT_CONVERGED


def build_library(spec, n_species: int, n_channels: int) -> BasisLibrary:
    if isinstance(spec, str):
        if spec in ("polynomial2", "quadratic"):
            return BasisLibrary.polynomial(n_species, n_channels, 2)
        if spec in ("polynomial1", "linear"):
            return BasisLibrary.polynomial(n_species, n_channels, 1)
        raise ConfigError(f"unknown basis '{spec}'; use polynomial1, polynomial2 or a list of descriptors")
    try:
        return BasisLibrary.loads([str(s) for s in spec], n_channels, n_species)
    except CRNError as exc:
        raise ConfigError(f"bad basis: {exc}") from None


def coefficient_table(fit, species: list[str]) -> str:
    desc = fit.library.descriptors()
    legend = ", ".join(f"x{k + 1}={s}" for k, s in enumerate(species))
    rows = []
    for ch in fit.channels:
        vec = ",".join(str(v) for v in ch.vector)
        if ch.coefficients is None:
            rows.append([str(ch.index + 1), vec, *["-"] * len(desc)])
            continue
        dom = fit.dominant(ch.index) if np.any(ch.coefficients) else -1
        cells = [fmt(float(v), 4) + ("*" if j == dom else " ") for j, v in enumerate(ch.coefficients)]
        rows.append([str(ch.index + 1), vec, *cells])
    text = format_table(["ch", "vector", *desc], rows)
    lines = [f"basis: {legend}; * marks the dominant coefficient", "", text, ""]
    for ch in fit.channels:
        r = ch.report
        status = "converged" if ch.ok else ("failed" if ch.error else "not converged")
        line = f"channel {ch.index + 1}: lambda={fmt(ch.lam, 6)} {status}"
        if r is not None:
            steps = np.asarray(r.step_sizes)
            line += f", iterations={r.iterations}"
            if "rounds" in r.extra:
                line += f" (last of {r.extra['rounds']} rounds, {r.extra['total_iterations']} in total)"
            line += f", objective={fmt(r.final_objective, 10)}, L={fmt(r.lipschitz, 6)}"
            if steps.size:
                line += f", step min/last={fmt(steps.min(), 3)}/{fmt(steps[-1], 3)}"
        if ch.error:
            line += f"; {ch.error}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def _jsonable(a):
    return None if a is None else [None if not math.isfinite(v) else float(v) for v in np.asarray(a, dtype=float)]


def cmd_learn_network(ctx: Context) -> int:
    lc = ctx.cfg.learn
    ts = ctx.data()
    cs = identify_channels(ts)
    lib = build_library(lc.basis, ts.n_species, cs.n_channels)
    prob = SparseLearnProblem(lib, lc.epsilon, lc.lam, lc.precondition, lc.rescaling, lc.pilot_iters, lc.max_rounds)
    for i, v in enumerate(cs.vectors):
        try:
            prob.lam_for(i, v)
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from None
    chans = None
    if lc.channels:
        bad = [c for c in lc.channels if c > cs.n_channels]
        if bad:
            raise ConfigError(f"learn.channels {bad} out of range; the data have {cs.n_channels} channels")
        chans = {c - 1 for c in lc.channels}
    d = precompute(ts, cs, lib)
    fit = learn_network(prob, d, lc.solver, workers=ctx.workers, channels=chans)
    species = ctx.species(ts.n_species)
    text = coefficient_table(fit, species)
    write_text(ctx.path(".coefficients.txt"), text)
    desc = lib.descriptors()
    payload = {
        "name": ctx.cfg.name,
        "basis": desc,
        "species": species,
        "epsilon": lc.epsilon,
        "preconditioner": "explicit" if lc.rescaling is not None else lc.precondition,
        "channels": [
            {
                "channel": ch.index + 1,
                "vector": list(ch.vector),
                "lambda": ch.lam,
                "coefficients": _jsonable(ch.coefficients),
                "rescaled": _jsonable(ch.rescaled),
                "scales": _jsonable(ch.scales),
                "dominant": desc[fit.dominant(ch.index)] if ch.coefficients is not None and np.any(ch.coefficients) else None,
                "converged": bool(ch.ok),
                "iterations": ch.report.iterations if ch.report else None,
                "rounds": ch.report.extra.get("rounds") if ch.report else None,
                "total_iterations": ch.report.extra.get("total_iterations", ch.report.iterations) if ch.report else None,
                "final_objective": ch.report.final_objective if ch.report else None,
                "lipschitz": ch.report.lipschitz if ch.report else None,
                "step_sizes": _jsonable(ch.report.step_sizes) if ch.report else None,
                "message": ch.report.message if ch.report else None,
                "error": ch.error,
            }
            for ch in fit.channels
        ],
    }
    write_text(ctx.path(".coefficients.json"), json.dumps(payload, indent=1) + "\n")
    ctx.say(text)
    if any(ch.error for ch in fit.channels):
        return EXIT_NUMERIC
    return EXIT_OK if fit.all_converged else EXIT_NOT_CONVERGED


def cmd_diagnose(ctx: Context) -> int:
    from . import diagnostics as dg

    net, sim = ctx.need_network(), ctx.need_simulation()
    g = ctx.cfg.diagnose
    names = [ctx.args.only] if getattr(ctx.args, "only", None) else g.names
    seed = ctx.seed()
    out = [f"diagnostics for {ctx.cfg.name}", f"seed {seed}", ""]
    verdicts = []

    def verdict(label, value):
        if g.tolerance is not None:
            ok = value <= g.tolerance
            verdicts.append(ok)
            out.append(f"{label}: {'PASS' if ok else 'FAIL'} (tolerance {fmt(100 * g.tolerance, 4)}%)")

    ts = None
    if any(n in names for n in ("pi", "fisher", "compensator", "kl")):
        ts = simulate_many(net, sim.x0, sim.horizon, sim.trajectories, seed, ctx.workers)
    for name in names:
        out.append(f"[{name}]")
        if name == "pi":
            pi = dg.empirical_pi(ts)
            out.append("state  empirical  exact")
            try:
                exact = dg.stationary_distribution(net, sim.x0)
            except InvalidInputError as exc:
                exact = None
                out.append(f"(no exact solve: {exc})")
            ex = exact.as_dict() if exact is not None else {}
            for s, w in pi.as_dict().items():
                out.append(f"{s}  {fmt(w)}  {fmt(ex[s]) if s in ex else '-'}")
            if exact is not None:
                dev = dg.pi_deviation(pi, exact)
                out.append(f"max relative deviation: {fmt(100 * dev, 4)}%")
                verdict("pi", dev)
        elif name == "fisher":
            pi = dg.empirical_pi(ts)
            basis = dg.network_basis(net)
            star = net.rate_constants[np.asarray(basis.reaction_ids)]
            F = dg.fisher_matrix(basis, star, pi)
            out.append("parameter order: " + ", ".join(f"k{k + 1}" for k in basis.reaction_ids))
            out.append("F =")
            out.append(format_matrix(F.entries))
            out.append(f"condition number: {fmt(F.condition())}")
        elif name == "normality":
            r = dg.normality_experiment(net, sim.x0, sim.horizon, g.replicas, seed, workers=ctx.workers)
            out.append(f"replicas: {g.replicas}, failures: {r.failures}")
            out.append("sample covariance of sqrt(T)(omega_hat - omega*) =")
            out.append(format_matrix(r.covariance))
            out.append("inverse Fisher matrix =")
            out.append(format_matrix(r.fisher_inverse))
            out.append("mean estimate: " + " ".join(fmt(v) for v in r.mean))
            out.append("standard error: " + " ".join(fmt(v) for v in r.std_error))
            out.append(f"condition number: {fmt(r.condition)}")
            out.append(f"max diagonal deviation: {fmt(100 * r.deviation, 4)}%")
            verdict("normality", r.deviation)
        elif name == "compensator":
            rows, within = [], []
            for t in ts:
                rec = dg.compensator_residuals(t, None, net)
                comp = rec.compensators[:, -1]
                ok = np.abs(rec.endpoint) < 4 * np.sqrt(comp)
                within.append(ok | (comp == 0))
                rows.append(rec)
            within = np.array(within)
            vecs = rows[0].vectors
            out.append("channel  vector  fraction within 4 sd")
            for k, v in enumerate(vecs):
                out.append(f"{k + 1}  {','.join(str(int(a)) for a in v)}  {fmt(within[:, k].mean())}")
            worst = float(within.mean(axis=0).min())
            out.append(f"lowest fraction: {fmt(worst)}")
            verdict("compensator", 0.0 if worst >= 0.95 else 1.0 - worst)
        elif name == "kl":
            if not g.probes:
                raise ConfigError("the kl diagnostic needs diagnose.probes")
            res = dg.kl_gap_check(net, ts, g.probes)
            out.append("probe  observed  predicted  relative error")
            for p, o, q, e in zip(g.probes, res.observed, res.predicted, res.relative_error):
                out.append(f"{' '.join(fmt(v, 6) for v in p)}  {fmt(o)}  {fmt(q)}  {fmt(100 * e, 4)}%")
            worst = float(res.relative_error.max())
            out.append(f"max relative error: {fmt(100 * worst, 4)}%")
            verdict("kl", worst)
        out.append("")
    text = "\n".join(out)
    write_text(ctx.path(".diagnostics.txt"), text)
    ctx.say(text)
    return EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "simulate trajectories and write a dataset file"),
    "channels": (cmd_channels, "list reaction channels and occurrence counts"),
    "learn-rates": (cmd_learn_rates, "estimate rate constants of a known network"),
    "learn-network": (cmd_learn_network, "learn sparse propensities in a polynomial basis"),
    "diagnose": (cmd_diagnose, "run large-time diagnostics on a toy network"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="YAML run config")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the simulation seed")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="worker count (default: all cores)")
    common.add_argument("--output", default=argparse.SUPPRESS, help="output directory (default: .)")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="no console output")
    parser = argparse.ArgumentParser(prog="crnlearn", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_, parents=[common])
        if name in ("channels", "learn-rates", "learn-network"):
            sp.add_argument("--dataset", type=Path, help="read trajectories from this file instead of simulating")
        if name == "diagnose":
            sp.add_argument("--only", choices=DIAGNOSTICS, help="run a single diagnostic")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for key, default in (("config", None), ("seed", None), ("workers", None), ("output", "."), ("quiet", False)):
        if not hasattr(args, key):
            setattr(args, key, default)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError(f"--seed must be non-negative, got {args.seed}")
        if args.config is None:
            if args.command in ("channels",) and getattr(args, "dataset", None):
                cfg = RunConfig(name=Path(args.dataset).stem, base_dir=Path.cwd())
            else:
                raise ConfigError(f"{args.command} needs --config")
        else:
            cfg = load_config(args.config)
        ctx = Context(args, cfg)
        return COMMANDS[args.command][0](ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CRNError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
