"""Run the CLI over the shipped example configs.

    python scripts/run_examples.py [--output runs] [--workers N] [name ...]

Names are config stems from configs/ (default: every example*.yaml). Each
config runs the commands that its sections support.
"""

import argparse
import sys
import time
from pathlib import Path

import yaml

from crnlearn.cli import main as cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def commands(path):
    cmds = ["simulate", "channels", "learn-rates"]
    raw = yaml.safe_load(path.read_text())
    if "learn" in raw:
        cmds.append("learn-network")
    if "diagnose" in raw:
        cmds.append("diagnose")
    return cmds


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*")
    ap.add_argument("--output", default="runs")
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args(argv)
    paths = [CONFIGS / f"{n}.yaml" for n in args.names] or sorted(CONFIGS.glob("example*.yaml"))
    worst = 0
    for path in paths:
        for cmd in commands(path):
            argv = [cmd, "--config", str(path), "--output", str(Path(args.output) / path.stem), "--quiet"]
            if args.workers:
                argv += ["--workers", str(args.workers)]
            t0 = time.perf_counter()
            code = cli(argv)
            worst = max(worst, code)
            print(f"{path.stem:28s} {cmd:14s} exit {code}  {time.perf_counter() - t0:7.1f}s", flush=True)
    return worst


if __name__ == "__main__":
    sys.exit(main())
