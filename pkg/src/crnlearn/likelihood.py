"""Negative log-likelihoods of fully observed trajectories.

The exact objective of channel ``i`` with coefficients ``w = omega[I_i]`` is

    -sum_k ln(phi(y_{l_k}) . w) + sum_l t_l phi(y_l) . w

and the smoothed one wraps each channel sum in ``G_eps``. Both are evaluated
trajectory by trajectory; per-trajectory partials are added with a fixed
pairwise tree so results do not depend on how trajectories are split across
workers. Dot products are written as column sums rather than BLAS calls for
the same reason.

Repeated states inside one trajectory are merged (activation rows with a
multiplicity, visited states with their total holding time); this changes
nothing mathematically and makes the smoothed path far cheaper.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import smoothing as sm
from .errors import DomainError, InvalidInputError
from .ssa import ChannelSummary, TrajectorySet, split_blocks


def tree_sum(parts: np.ndarray) -> np.ndarray:
    """Pairwise sum along axis 0 in a fixed order."""
    x = np.asarray(parts, dtype=float)
    if x.shape[0] == 0:
        return np.zeros(x.shape[1:])
    while x.shape[0] > 1:
        m = x.shape[0] // 2
        paired = x[0 : 2 * m : 2] + x[1 : 2 * m : 2]
        x = np.concatenate([paired, x[2 * m :]]) if x.shape[0] % 2 else paired
    return x[0]


def segment_sum(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Sum ``values`` over row segments ``offsets[q]:offsets[q+1]``; empty segments give 0."""
    Q = len(offsets) - 1
    out = np.zeros((Q,) + values.shape[1:])
    starts = offsets[:-1]
    nonempty = offsets[1:] > starts
    if nonempty.any():
        out[nonempty] = np.add.reduceat(values, starts[nonempty], axis=0)
    return out


def _dot(features: np.ndarray, w: np.ndarray) -> np.ndarray:
    s = np.zeros(features.shape[0])
    for j in range(features.shape[1]):
        s += features[:, j] * w[j]
    return s


@dataclass(frozen=True, eq=False)
class ChannelDesign:
    """Sufficient statistics of one channel."""

    index: int
    vector: tuple[int, ...]
    params: np.ndarray  # global indices of this channel's coefficients
    activation_features: np.ndarray  # (M_i, N_i), (trajectory, event) order
    activation_states: np.ndarray  # (M_i, n)
    activation_offsets: np.ndarray  # (Q+1,)
    act_features: np.ndarray  # merged activation rows
    act_mult: np.ndarray
    act_offsets: np.ndarray
    occ_features: np.ndarray  # basis at merged visited states, shared layout with PrecomputedDesign.occ_*
    traj_integrals: np.ndarray  # (Q, N_i): sum_l t_l phi(y_l) per trajectory
    integrals: np.ndarray  # (N_i,)

    @property
    def n_activations(self) -> int:
        return self.activation_features.shape[0]

    @property
    def n_params(self) -> int:
        return self.params.shape[0]


@dataclass(frozen=True, eq=False)
class PrecomputedDesign:
    channels: tuple[ChannelDesign, ...]
    n_params: int
    n_trajectories: int
    horizon: float
    occ_states: np.ndarray  # merged visited states, grouped by trajectory
    occ_times: np.ndarray
    occ_offsets: np.ndarray
    basis: object = None

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def scale(self) -> float:
        return 1.0 / (self.n_trajectories * self.horizon)

    def channel(self, i: int) -> ChannelDesign:
        return self.channels[i]


@dataclass(frozen=True)
class ObjectiveEval:
    value: float
    gradient: np.ndarray | None
    per_channel_values: np.ndarray


def _merge_rows(states: np.ndarray, weights: np.ndarray):
    if states.shape[0] == 0:
        return states, weights
    uniq, inv = np.unique(states, axis=0, return_inverse=True)
    return uniq, np.bincount(inv.reshape(-1), weights=weights, minlength=uniq.shape[0])


def precompute(ts: TrajectorySet, cs: ChannelSummary, basis) -> PrecomputedDesign:
    """Per-channel activation matrices and time-weighted basis integrals."""
    if basis.n_channels != cs.n_channels:
        raise InvalidInputError(f"basis has {basis.n_channels} channels, data have {cs.n_channels}")
    Q = len(ts)
    occ_s, occ_t, occ_n = [], [], []
    act = [[] for _ in range(cs.n_channels)]  # per channel: list of (raw states, merged states, mult)
    for q, traj in enumerate(ts):
        u, w = _merge_rows(traj.states, traj.holding_times)
        occ_s.append(u)
        occ_t.append(w)
        occ_n.append(u.shape[0])
        labels = cs.event_channel_indices[q]
        pre = traj.states[:-1]
        for i in range(cs.n_channels):
            rows = pre[labels == i]
            mu, mm = _merge_rows(rows, np.ones(rows.shape[0]))
            act[i].append((rows, mu, mm))
    n = ts.n_species
    occ_states = np.concatenate(occ_s).reshape(-1, n)
    occ_times = np.concatenate(occ_t)
    occ_offsets = np.concatenate([[0], np.cumsum(occ_n)]).astype(np.int64)

    shared = None
    channels = []
    for i, params in enumerate(basis.index_sets):
        if hasattr(basis, "evaluate") and shared is not None:
            occ_feat = shared
        else:
            occ_feat = basis.evaluate_channel(i, occ_states)
            if hasattr(basis, "evaluate"):
                shared = occ_feat
        raw = np.concatenate([a[0] for a in act[i]]).reshape(-1, n)
        merged = np.concatenate([a[1] for a in act[i]]).reshape(-1, n)
        mult = np.concatenate([a[2] for a in act[i]])
        raw_off = np.concatenate([[0], np.cumsum([a[0].shape[0] for a in act[i]])]).astype(np.int64)
        m_off = np.concatenate([[0], np.cumsum([a[1].shape[0] for a in act[i]])]).astype(np.int64)
        traj_int = segment_sum(occ_feat * occ_times[:, None], occ_offsets)
        channels.append(
            ChannelDesign(
                index=i,
                vector=tuple(int(a) for a in cs.vectors[i]),
                params=np.asarray(params),
                activation_features=basis.evaluate_channel(i, raw).reshape(raw.shape[0], len(params)),
                activation_states=raw,
                activation_offsets=raw_off,
                act_features=basis.evaluate_channel(i, merged).reshape(merged.shape[0], len(params)),
                act_mult=mult,
                act_offsets=m_off,
                occ_features=occ_feat,
                traj_integrals=traj_int,
                integrals=tree_sum(traj_int),
            )
        )
    return PrecomputedDesign(
        channels=tuple(channels),
        n_params=int(sum(len(p) for p in basis.index_sets)),
        n_trajectories=Q,
        horizon=ts.horizon,
        occ_states=occ_states,
        occ_times=occ_times,
        occ_offsets=occ_offsets,
        basis=basis,
    )


def _blocked(fn, Q: int, workers: int):
    """Run ``fn(lo, hi)`` over contiguous trajectory blocks and stack the per-trajectory outputs."""
    if workers <= 1:
        return fn(0, Q)
    blocks = split_blocks(Q, workers)
    if len(blocks) <= 1:
        return fn(0, Q)
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        parts = list(pool.map(lambda b: fn(b.start, b.stop), blocks))
    return tuple(np.concatenate([p[k] for p in parts]) for k in range(len(parts[0])))


def _check_positive(cd: ChannelDesign, w: np.ndarray) -> None:
    s = _dot(cd.act_features, w)
    if np.all(s > 0):
        return
    full = _dot(cd.activation_features, w)
    row = int(np.flatnonzero(~(full > 0))[0])
    raise DomainError(
        f"channel {cd.index + 1}: intensity {full[row]:.6g} <= 0 at activation row {row}",
        channel=cd.index,
        row=row,
        state=tuple(int(v) for v in cd.activation_states[row]),
    )


def channel_objective_exact(d: PrecomputedDesign, i: int, w, raw: bool = False, gradient: bool = True, workers: int = 1):
    """``(value, grad)`` of channel ``i``'s exact objective at its coefficients ``w``."""
    cd = d.channels[i]
    w = np.asarray(w, dtype=float)
    if w.shape != (cd.n_params,):
        raise InvalidInputError(f"channel {i + 1} takes {cd.n_params} coefficients, got shape {w.shape}")
    _check_positive(cd, w)

    def part(lo, hi):
        a0, a1 = cd.act_offsets[lo], cd.act_offsets[hi]
        F = cd.act_features[a0:a1]
        m = cd.act_mult[a0:a1]
        off = cd.act_offsets[lo : hi + 1] - a0
        s = _dot(F, w)
        integ = cd.traj_integrals[lo:hi]
        v = -segment_sum(m * np.log(s), off) + _dot(integ, w)
        if not gradient:
            return (v,)
        g = -segment_sum(F * (m / s)[:, None], off) + integ
        return v, g

    out = _blocked(part, d.n_trajectories, workers)
    scale = 1.0 if raw else d.scale
    value = float(tree_sum(out[0])) * scale
    return value, (tree_sum(out[1]) * scale if gradient else None)


def channel_objective_smoothed(
    d: PrecomputedDesign, i: int, w, eps: float, raw: bool = False, gradient: bool = True, workers: int = 1
):
    cd = d.channels[i]
    if not (eps > 0 and np.isfinite(eps)):
        raise InvalidInputError(f"smoothing parameter must be > 0, got {eps}")
    w = np.asarray(w, dtype=float)
    if w.shape != (cd.n_params,):
        raise InvalidInputError(f"channel {i + 1} takes {cd.n_params} coefficients, got shape {w.shape}")

    def part(lo, hi):
        a0, a1 = cd.act_offsets[lo], cd.act_offsets[hi]
        F = cd.act_features[a0:a1]
        m = cd.act_mult[a0:a1]
        aoff = cd.act_offsets[lo : hi + 1] - a0
        o0, o1 = d.occ_offsets[lo], d.occ_offsets[hi]
        E = cd.occ_features[o0:o1]
        t = d.occ_times[o0:o1]
        ooff = d.occ_offsets[lo : hi + 1] - o0
        lg, dlg = sm.ln_g_and_prime(_dot(F, w), eps)
        g, dg = sm.g_and_prime(_dot(E, w), eps)
        v = segment_sum(t * g, ooff) - segment_sum(m * lg, aoff)
        if not gradient:
            return (v,)
        grad = segment_sum(E * (t * dg)[:, None], ooff) - segment_sum(F * (m * dlg)[:, None], aoff)
        return v, grad

    out = _blocked(part, d.n_trajectories, workers)
    scale = 1.0 if raw else d.scale
    value = float(tree_sum(out[0])) * scale
    return value, (tree_sum(out[1]) * scale if gradient else None)


def _full(d: PrecomputedDesign, omega, channel_fn, **kw) -> ObjectiveEval:
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (d.n_params,):
        raise InvalidInputError(f"expected {d.n_params} coefficients, got shape {omega.shape}")
    grad = np.zeros(d.n_params)
    vals = np.zeros(d.n_channels)
    for cd in d.channels:
        v, g = channel_fn(d, cd.index, omega[cd.params], **kw)
        vals[cd.index] = v
        grad[cd.params] = g
    return ObjectiveEval(float(tree_sum(vals)) if d.n_channels else 0.0, grad, vals)


def neg_log_likelihood_exact(d: PrecomputedDesign, omega, raw: bool = False, workers: int = 1) -> ObjectiveEval:
    return _full(d, omega, channel_objective_exact, raw=raw, workers=workers)


def neg_log_likelihood_smoothed(
    d: PrecomputedDesign, omega, eps: float, raw: bool = False, workers: int = 1
) -> ObjectiveEval:
    return _full(d, omega, channel_objective_smoothed, eps=eps, raw=raw, workers=workers)


def hessian_exact(d: PrecomputedDesign, omega, raw: bool = False) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    H = np.zeros((d.n_params, d.n_params))
    for cd in d.channels:
        w = omega[cd.params]
        _check_positive(cd, w)
        F = cd.act_features
        s = _dot(F, w)
        block = (F * (cd.act_mult / s**2)[:, None]).T @ F
        H[np.ix_(cd.params, cd.params)] = block
    return H if raw else H * d.scale


def hessian_smoothed(d: PrecomputedDesign, omega, eps: float, raw: bool = False) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    H = np.zeros((d.n_params, d.n_params))
    for cd in d.channels:
        w = omega[cd.params]
        F, E = cd.act_features, cd.occ_features
        ca = -cd.act_mult * sm.ln_g_eps_double_prime(_dot(F, w), eps)
        co = d.occ_times * sm.g_eps_double_prime(_dot(E, w), eps)
        H[np.ix_(cd.params, cd.params)] = (F * ca[:, None]).T @ F + (E * co[:, None]).T @ E
    return H if raw else H * d.scale


def channel_hessian_diagonal(d: PrecomputedDesign, i: int, w, eps: float) -> np.ndarray:
    """Diagonal of channel ``i``'s unscaled smoothed Hessian at ``w``."""
    cd = d.channels[i]
    w = np.asarray(w, dtype=float)
    F, E = cd.act_features, cd.occ_features
    ca = -cd.act_mult * sm.ln_g_eps_double_prime(_dot(F, w), eps)
    co = d.occ_times * sm.g_eps_double_prime(_dot(E, w), eps)
    return (F * F * ca[:, None]).sum(axis=0) + (E * E * co[:, None]).sum(axis=0)
