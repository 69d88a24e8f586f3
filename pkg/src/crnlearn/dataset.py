"""Line-oriented text container for trajectory sets.

Layout::

    # crnlearn trajectories v1
    n_species 2
    species A B
    horizon 10.0
    trajectories 100
    seed 7
    channels 4
    channel 1 -1,0 2296
    ...
    trajectory 1 events 87
    0, 0.0123, 20, 10
    1, 0.0456, 19, 10
    ...

Each body line is ``l, t_l, y_l``; line 0 carries the initial state. Holding
times use ``repr``, the shortest decimal string that round-trips exactly.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import InconsistentDataError, InvalidInputError
from .ssa import Trajectory, TrajectorySet, identify_channels

MAGIC = "# crnlearn trajectories v1"


def format_dataset(ts: TrajectorySet, species_names=None) -> str:
    cs = identify_channels(ts)
    names = list(species_names) if species_names else [f"S{k + 1}" for k in range(ts.n_species)]
    out = [
        MAGIC,
        f"n_species {ts.n_species}",
        "species " + " ".join(names),
        f"horizon {ts.horizon!r}",
        f"trajectories {len(ts)}",
        f"seed {ts.seed if ts.seed is not None else 'none'}",
        f"channels {cs.n_channels}",
    ]
    for k, (vec, count) in enumerate(zip(cs.vector_strings(), cs.counts)):
        out.append(f"channel {k + 1} {vec} {int(count)}")
    for q, traj in enumerate(ts):
        out.append(f"trajectory {q + 1} events {traj.n_events}")
        for l, (y, t) in enumerate(zip(traj.states.tolist(), traj.holding_times.tolist())):
            out.append(f"{l}, {t!r}, " + ", ".join(str(v) for v in y))
    return "\n".join(out) + "\n"


def write_dataset(path, ts: TrajectorySet, species_names=None) -> None:
    """Write atomically: a partial file never replaces a good one."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(format_dataset(ts, species_names))
    os.replace(tmp, path)


def _header_value(lines, pos, key):
    if pos >= len(lines) or not lines[pos].startswith(key + " "):
        raise InvalidInputError(f"line {pos + 1}: expected '{key} ...'")
    return lines[pos][len(key) + 1 :].strip()


def parse_dataset(text: str) -> tuple[TrajectorySet, list[str]]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise InvalidInputError("not a trajectory dataset (bad header)")
    n = int(_header_value(lines, 1, "n_species"))
    names = _header_value(lines, 2, "species").split()
    horizon = float(_header_value(lines, 3, "horizon"))
    Q = int(_header_value(lines, 4, "trajectories"))
    seed_text = _header_value(lines, 5, "seed")
    seed = None if seed_text == "none" else int(seed_text)
    K = int(_header_value(lines, 6, "channels"))
    pos = 7
    declared = []
    for _ in range(K):
        parts = _header_value(lines, pos, "channel").split()
        declared.append((tuple(int(a) for a in parts[1].split(",")), int(parts[2])))
        pos += 1
    trajs = []
    for q in range(Q):
        parts = _header_value(lines, pos, "trajectory").split()
        m = int(parts[2])
        pos += 1
        body = lines[pos : pos + m + 1]
        if len(body) != m + 1:
            raise InvalidInputError(f"trajectory {q + 1} is truncated")
        states = np.empty((m + 1, n), dtype=np.int64)
        times = np.empty(m + 1)
        for l, row in enumerate(body):
            fields = [f.strip() for f in row.split(",")]
            if len(fields) != n + 2 or int(fields[0]) != l:
                raise InvalidInputError(f"line {pos + l + 1}: malformed event line")
            times[l] = float(fields[1])
            states[l] = [int(v) for v in fields[2:]]
        pos += m + 1
        trajs.append(Trajectory(states, times, horizon))
    extra = [k for k in range(pos, len(lines)) if lines[k].strip()]
    if extra:
        raise InvalidInputError(f"line {extra[0] + 1}: unexpected content after the last trajectory")
    ts = TrajectorySet(tuple(trajs), seed=seed)
    cs = identify_channels(ts)
    found = [(tuple(int(a) for a in v), int(c)) for v, c in zip(cs.vectors, cs.counts)]
    if found != declared:
        raise InconsistentDataError("channel table in the header does not match the trajectories")
    return ts, names


def read_dataset(path) -> tuple[TrajectorySet, list[str]]:
    return parse_dataset(Path(path).read_text())
