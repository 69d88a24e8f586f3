"""Exact trajectory sampling (Gillespie direct method) and channel analysis."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InconsistentDataError, InvalidInputError, SimulationDivergedError
from .model import ReactionKind, ReactionNetwork, as_state

# uniforms are drawn in blocks; the stream is fixed by (seed, trajectory index)
_BLOCK = 4096
_PROPENSITY_LIMIT = 1e300


def trajectory_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based stream for trajectory ``index`` of a run seeded with ``seed``.

    The key is hashed from the pair, so runs with neighbouring seeds share no
    streams (``Philox(seed + index)`` would reuse all but one of them).
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``y_0..y_M`` with holding times ``t_0..t_M`` on ``[0, T]``."""

    states: np.ndarray  # (M+1, n) int64
    holding_times: np.ndarray  # (M+1,) float64
    horizon: float

    def __post_init__(self):
        states = np.array(self.states, dtype=np.int64, copy=True)
        times = np.array(self.holding_times, dtype=np.float64, copy=True)
        if states.ndim != 2 or states.shape[0] < 1:
            raise InvalidInputError("trajectory needs a (M+1, n) state array")
        if times.shape != (states.shape[0],):
            raise InvalidInputError("need one holding time per state")
        if np.any(states < 0):
            raise InvalidInputError("negative copy number in trajectory")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise InvalidInputError(f"horizon must be positive, got {self.horizon}")
        if np.any(~np.isfinite(times)) or np.any(times[:-1] <= 0) or times[-1] < 0:
            raise InvalidInputError("holding times must be positive (the last may be 0)")
        states.setflags(write=False)
        times.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "holding_times", times)
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def n_species(self) -> int:
        return self.states.shape[1]

    @property
    def n_events(self) -> int:
        return self.states.shape[0] - 1

    @property
    def initial_state(self) -> np.ndarray:
        return self.states[0]

    @property
    def final_holding_time(self) -> float:
        return float(self.holding_times[-1])

    @property
    def events(self) -> list[tuple[np.ndarray, float]]:
        """``(y_l, t_l)`` for ``l = 1..M``."""
        return [(self.states[l], float(self.holding_times[l])) for l in range(1, self.states.shape[0])]

    @property
    def jump_times(self) -> np.ndarray:
        return np.cumsum(self.holding_times[:-1])

    def jumps(self) -> np.ndarray:
        return np.diff(self.states, axis=0)

    def total_time(self) -> float:
        return math.fsum(self.holding_times)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.horizon == other.horizon
            and np.array_equal(self.states, other.states)
            and np.array_equal(self.holding_times, other.holding_times)
        )


@dataclass(frozen=True)
class TrajectorySet:
    trajectories: tuple[Trajectory, ...]
    seed: int | None = None

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        object.__setattr__(self, "trajectories", trajs)
        if not trajs:
            raise InvalidInputError("empty trajectory set")
        if len({t.n_species for t in trajs}) != 1:
            raise InvalidInputError("trajectories disagree on the number of species")
        if len({t.horizon for t in trajs}) != 1:
            raise InvalidInputError("trajectories disagree on the horizon")

    def __len__(self):
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def __getitem__(self, q):
        return self.trajectories[q]

    @property
    def horizon(self) -> float:
        return self.trajectories[0].horizon

    @property
    def n_species(self) -> int:
        return self.trajectories[0].n_species

    @property
    def n_events(self) -> int:
        return sum(t.n_events for t in self.trajectories)


def _compile(network: ReactionNetwork):
    table = []
    for r in network.reactions:
        i = r.species[0] if r.species else -1
        j = r.species[1] if len(r.species) > 1 else -1
        code = {ReactionKind.SOURCE: 0, ReactionKind.UNARY: 1, ReactionKind.BINARY_SAME: 2, ReactionKind.BINARY_MIXED: 3}[
            r.kind
        ]
        delta = [(s, v) for s, v in enumerate(r.state_change) if v]
        table.append((code, i, j, r.rate_constant, r.volume, delta))
    return table


def simulate(network: ReactionNetwork, x0, T: float, seed: int, index: int = 0, max_events: int = 50_000_000) -> Trajectory:
    """One SSA path on ``[0, T]``; the stream is ``trajectory_rng(seed, index)``."""
    x0 = as_state(x0, network.n_species)
    if not (T > 0 and math.isfinite(T)):
        raise InvalidInputError(f"horizon must be positive, got {T}")
    table = _compile(network)
    rng = trajectory_rng(seed, index)
    buf = rng.random(_BLOCK)
    pos = 0

    x = [int(v) for v in x0]
    states = [tuple(x)]
    holds: list[float] = []
    t = 0.0
    a = [0.0] * len(table)
    while True:
        total = 0.0
        for k, (code, i, j, kappa, V, _) in enumerate(table):
            if code == 0:
                ak = kappa * V
            elif code == 1:
                ak = kappa * x[i]
            elif code == 2:
                ak = kappa / V * x[i] * (x[i] - 1)
            else:
                ak = kappa / V * x[i] * x[j]
            a[k] = ak
            total += ak
        if not total < _PROPENSITY_LIMIT:
            partial = Trajectory(np.array(states), np.array(holds + [T - t if T > t else 0.0]), T)
            raise SimulationDivergedError(f"total propensity {total} out of range at t={t}", partial=partial)
        if total == 0.0:
            break
        if pos + 2 > _BLOCK:
            buf = rng.random(_BLOCK)
            pos = 0
        u = 1.0 - buf[pos]  # in (0, 1]
        tau = -math.log(u) / total
        if t + tau >= T:
            break
        r = buf[pos + 1] * total
        pos += 2
        acc = 0.0
        chosen = -1
        for k, ak in enumerate(a):
            acc += ak
            if r < acc:
                chosen = k
                break
        if chosen < 0:  # r landed on the rounding edge of the cumulative sum
            chosen = max(k for k, ak in enumerate(a) if ak > 0)
        for s, v in table[chosen][5]:
            x[s] += v
        t += tau
        holds.append(tau)
        states.append(tuple(x))
        if len(holds) > max_events:
            partial = Trajectory(np.array(states), np.array(holds + [0.0]), T)
            raise SimulationDivergedError(f"more than {max_events} events before T={T}", partial=partial)
    holds.append(T - t)
    return Trajectory(np.array(states, dtype=np.int64).reshape(len(states), network.n_species), np.array(holds), T)


def _simulate_block(args):
    network, x0, T, seed, indices = args
    return [simulate(network, x0, T, seed, q) for q in indices]


def split_blocks(n: int, workers: int) -> list[range]:
    """Contiguous, near-equal blocks of ``range(n)``; empty blocks are dropped."""
    workers = max(1, min(int(workers), max(n, 1)))
    edges = np.linspace(0, n, workers + 1).round().astype(int)
    return [range(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def simulate_many(network: ReactionNetwork, x0, T: float, Q: int, seed: int, workers: int = 1) -> TrajectorySet:
    """Q independent paths; trajectory ``q`` uses stream ``(seed, q)`` whatever ``workers`` is."""
    if int(Q) < 1:
        raise InvalidInputError(f"need at least one trajectory, got Q={Q}")
    x0 = as_state(x0, network.n_species)
    blocks = split_blocks(int(Q), workers)
    if workers <= 1 or len(blocks) == 1:
        trajs = [simulate(network, x0, T, seed, q) for q in range(int(Q))]
    else:
        with ProcessPoolExecutor(max_workers=len(blocks)) as pool:
            parts = pool.map(_simulate_block, [(network, x0, T, seed, b) for b in blocks])
            trajs = [t for part in parts for t in part]
    return TrajectorySet(tuple(trajs), seed=int(seed))


# -- channel analysis ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChannelSummary:
    """Distinct state-change vectors, lexicographically ordered, with per-event channel labels."""

    vectors: np.ndarray  # (K, n)
    counts: np.ndarray  # (K,)
    event_channel_indices: tuple[np.ndarray, ...]  # per trajectory, length M_q
    _lookup: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._lookup:
            self._lookup.update({tuple(int(a) for a in v): k for k, v in enumerate(self.vectors)})

    @property
    def n_channels(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_species(self) -> int:
        return self.vectors.shape[1]

    def index_of(self, vector) -> int:
        key = tuple(int(a) for a in vector)
        try:
            return self._lookup[key]
        except KeyError:
            raise InconsistentDataError(f"jump {key} is not one of the identified channels") from None

    def activation_indices(self, i: int, q: int = 0) -> np.ndarray:
        """Event positions ``l`` in trajectory ``q`` at which channel ``i`` fired."""
        return np.flatnonzero(self.event_channel_indices[q] == i)

    def vector_strings(self) -> list[str]:
        return [",".join(str(int(a)) for a in v) for v in self.vectors]

    def table(self, names: Sequence[str] | None = None) -> str:
        n = self.n_species
        names = list(names) if names else [f"x{k + 1}" for k in range(n)]
        head = f"{'channel':>8}  {'vector':<24}{'occurrences':>12}"
        rows = [head]
        for k in range(self.n_channels):
            vec = "(" + ", ".join(f"{int(a)}" for a in self.vectors[k]) + ")"
            rows.append(f"{k + 1:>8}  {vec:<24}{int(self.counts[k]):>12}")
        rows.append(f"{'total':>8}  {'':<24}{int(self.counts.sum()):>12}")
        return "\n".join(rows)


def identify_channels(ts: TrajectorySet | Sequence[Trajectory]) -> ChannelSummary:
    trajs = list(ts)
    if not trajs:
        raise InvalidInputError("empty trajectory set")
    n = trajs[0].n_species
    if any(t.n_species != n for t in trajs):
        raise InvalidInputError("trajectories disagree on the number of species")
    jumps = [t.jumps() for t in trajs]
    allj = np.concatenate(jumps, axis=0) if jumps else np.zeros((0, n), dtype=np.int64)
    if allj.shape[0] and np.any(np.all(allj == 0, axis=1)):
        raise InconsistentDataError("trajectory contains a jump with zero state change")
    if allj.shape[0] == 0:
        return ChannelSummary(np.zeros((0, n), dtype=np.int64), np.zeros(0, dtype=np.int64), tuple(np.zeros(0, dtype=np.int64) for _ in trajs))
    vectors, inverse, counts = np.unique(allj, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1).astype(np.int64)
    splits = np.cumsum([j.shape[0] for j in jumps])[:-1]
    labels = tuple(np.split(inverse, splits))
    return ChannelSummary(vectors.astype(np.int64), counts.astype(np.int64), labels)


@dataclass(frozen=True, eq=False)
class ChannelPath:
    """Trajectory in channel form: ``y_0``, labels ``i_0..i_{M-1}``, holding times ``t_0..t_M``."""

    initial_state: np.ndarray
    channels: np.ndarray
    holding_times: np.ndarray
    horizon: float

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(i), float(t)) for i, t in zip(self.channels, self.holding_times[:-1])]


def to_channel_representation(t: Trajectory, cs: ChannelSummary) -> ChannelPath:
    if t.n_species != cs.n_species and cs.n_channels:
        raise InvalidInputError("trajectory and channel summary disagree on species count")
    labels = np.array([cs.index_of(v) for v in t.jumps()], dtype=np.int64)
    return ChannelPath(t.initial_state.copy(), labels, t.holding_times.copy(), t.horizon)


def from_channel_representation(path: ChannelPath, cs: ChannelSummary) -> Trajectory:
    if path.channels.size and (path.channels.min() < 0 or path.channels.max() >= cs.n_channels):
        raise InconsistentDataError("channel label out of range")
    steps = cs.vectors[path.channels] if path.channels.size else np.zeros((0, path.initial_state.shape[0]), dtype=np.int64)
    states = np.vstack([path.initial_state[None, :], path.initial_state[None, :] + np.cumsum(steps, axis=0)])
    return Trajectory(states, path.holding_times, path.horizon)
