"""Numerical checks of the large-time theory: occupation measures, KL rates,
Fisher information, replica normality and compensated counting processes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisLibrary, ReactionBasis
from .errors import CRNError, DomainError, InvalidInputError
from .estimators import learn_rates
from .model import ReactionNetwork, as_state
from .ssa import ChannelSummary, Trajectory, TrajectorySet, simulate

# -- occupation measure --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Occupation fractions of the visited states (rows of ``states`` in lexicographic order)."""

    states: np.ndarray
    weights: np.ndarray
    total_time: float

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(v) for v in s): float(w) for s, w in zip(self.states, self.weights)}

    def __getitem__(self, x) -> float:
        return self.as_dict().get(tuple(int(v) for v in x), 0.0)

    def expectation(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def empirical_pi(ts: TrajectorySet | Trajectory) -> EmpiricalDistribution:
    """Time spent in each state divided by ``Q * T``."""
    trajs = [ts] if isinstance(ts, Trajectory) else list(ts)
    if not trajs:
        raise InvalidInputError("empty trajectory set")
    states = np.concatenate([t.states for t in trajs])
    times = np.concatenate([t.holding_times for t in trajs])
    uniq, inv = np.unique(states, axis=0, return_inverse=True)
    occ = np.bincount(inv.reshape(-1), weights=times, minlength=uniq.shape[0])
    total = math.fsum(occ)
    if not total > 0:
        raise InvalidInputError("trajectories carry no time")
    return EmpiricalDistribution(uniq, occ / total, total)


# -- intensities and KL rates --------------------------------------------------


def channel_intensities(basis, omega, x) -> np.ndarray:
    """Per-channel ``a_i(x; omega) = sum_{j in I_i} omega_j phi_j(x)`` (no smoothing)."""
    omega = np.asarray(omega, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.array([float(basis.evaluate_channel(i, x)[0] @ omega[idx]) for i, idx in enumerate(basis.index_sets)])


def kl_waiting_rates(a_true: float, a_alt: float) -> float:
    """KL divergence between exponential waiting times with rates ``a_true`` and ``a_alt``."""
    if not (a_true > 0 and a_alt > 0):
        raise DomainError(f"total intensities must be positive, got {a_true} and {a_alt}")
    r = a_alt / a_true
    return -math.log(r) + r - 1.0


def kl_selection_rates(a_true, a_alt) -> float:
    """KL divergence between the channel-selection distributions."""
    a_true = np.asarray(a_true, dtype=float)
    a_alt = np.asarray(a_alt, dtype=float)
    if np.any(~(a_true > 0)) or np.any(~(a_alt > 0)):
        raise DomainError("channel intensities must all be positive")
    A, At = a_alt.sum(), a_true.sum()
    return float(math.log(A / At) - np.sum(a_true / At * np.log(a_alt / a_true)))


def kl_waiting(x, basis, omega_true, omega_alt) -> float:
    return kl_waiting_rates(
        float(channel_intensities(basis, omega_true, x).sum()), float(channel_intensities(basis, omega_alt, x).sum())
    )


def kl_selection(x, basis, omega_true, omega_alt) -> float:
    return kl_selection_rates(channel_intensities(basis, omega_true, x), channel_intensities(basis, omega_alt, x))


def loglik_rate_gap(basis, omega_true, omega_alt, pi: EmpiricalDistribution) -> float:
    """``-sum_x (KL_wait + KL_select) a*(x) pi(x)``, the limit of the scaled log-likelihood gap.

    Written as ``sum_x pi(x) [sum_i a*_i ln(a_i / a*_i) - (a - a*)]``, which
    equals the KL form where every intensity is positive and stays finite at
    states where channels of the true network switch off (0 ln 0 = 0).
    """
    total = 0.0
    for x, p in zip(pi.states, pi.weights):
        at = channel_intensities(basis, omega_true, x)
        aa = channel_intensities(basis, omega_alt, x)
        if np.all(at > 0) and np.all(aa > 0):
            term = -(kl_waiting_rates(at.sum(), aa.sum()) + kl_selection_rates(at, aa)) * at.sum()
        else:
            on = at > 0
            if np.any(aa[on] <= 0):
                raise DomainError(f"alternative intensity vanishes where the true one does not, at {tuple(x)}", state=tuple(x))
            term = float(np.sum(at[on] * np.log(aa[on] / at[on]))) - (aa.sum() - at.sum())
        total += p * term
    return float(total)


# -- Fisher information --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    entries: np.ndarray
    index_sets: tuple[np.ndarray, ...]

    def condition(self) -> float:
        ev = np.linalg.eigvalsh(self.entries)
        return float(ev[-1] / ev[0]) if ev[0] > 0 else math.inf

    def block(self, i: int) -> np.ndarray:
        idx = self.index_sets[i]
        return self.entries[np.ix_(idx, idx)]


def fisher_matrix(basis, omega_star, pi: EmpiricalDistribution) -> FisherMatrix:
    """``F_jj' = sum_x phi_j phi_j' / a_i(x; omega*) pi(x)`` within each channel block."""
    omega_star = np.asarray(omega_star, dtype=float)
    N = sum(len(idx) for idx in basis.index_sets)
    F = np.zeros((N, N))
    states = pi.states.astype(float)
    for i, idx in enumerate(basis.index_sets):
        phi = basis.evaluate_channel(i, states)
        a = phi @ omega_star[idx]
        active = np.any(phi != 0, axis=1) & (pi.weights > 0)
        bad = active & ~(a > 0)
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            s = tuple(int(v) for v in pi.states[k])
            raise DomainError(f"channel {i + 1}: intensity {a[k]:.6g} at state {s} with positive weight", channel=i, state=s)
        w = np.where(active, pi.weights / np.where(active, a, 1.0), 0.0)
        block = (phi * w[:, None]).T @ phi
        F[np.ix_(idx, idx)] = 0.5 * (block + block.T)  # BLAS products are not bitwise symmetric
    return FisherMatrix(F, tuple(np.asarray(idx) for idx in basis.index_sets))


def well_conditioned_subset(F: np.ndarray, limit: float = 1e10) -> np.ndarray:
    """Indices of a principal sub-block of ``F`` with condition number at most ``limit``."""
    keep = np.flatnonzero(np.diag(F) > 0)
    while keep.size:
        sub = F[np.ix_(keep, keep)]
        ev, vec = np.linalg.eigh(sub)
        if ev[0] > 0 and ev[-1] / ev[0] <= limit:
            return keep
        keep = np.delete(keep, int(np.argmax(np.abs(vec[:, 0]))))
    return keep


# -- replica normality ---------------------------------------------------------


@dataclass
class NormalityResult:
    covariance: np.ndarray  # sample covariance of sqrt(T)(omega_hat - omega*)
    fisher_inverse: np.ndarray
    deviation: float  # max relative deviation over the compared diagonal
    compared: np.ndarray  # parameter indices in the comparison
    estimates: np.ndarray
    mean: np.ndarray
    std_error: np.ndarray
    condition: float
    failures: int
    fisher: np.ndarray = field(repr=False, default=None)


def _replica(args):
    network, x0, T, seed, r = args
    return simulate(network, x0, T, seed, r)


def normality_experiment(
    network: ReactionNetwork, x0, T: float, replicas: int, seed: int, basis=None, workers: int = 1
) -> NormalityResult:
    """Simulate ``replicas`` independent paths, estimate the rates on each and
    compare the spread of ``sqrt(T)(omega_hat - omega*)`` with the inverse Fisher
    matrix built from the occupation measure pooled over all replicas."""
    if replicas < 50:
        raise InvalidInputError(f"insufficient replicas: need at least 50, got {replicas}")
    x0 = as_state(x0, network.n_species)
    omega_star = network.rate_constants
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(_replica, [(network, x0, T, seed, r) for r in range(replicas)]))
    else:
        trajs = [simulate(network, x0, T, seed, r) for r in range(replicas)]
    est, failures = [], 0
    for traj in trajs:
        try:
            res = learn_rates(network, TrajectorySet((traj,)))
        except CRNError:
            failures += 1
            continue
        if np.any(res.no_information) or not res.converged:
            failures += 1
            continue
        est.append(res.rates)
    est = np.array(est)
    pi = empirical_pi(TrajectorySet(tuple(trajs)))
    basis = basis or network_basis(network)
    # compare in the basis' parameter order
    perm = np.asarray(basis.reaction_ids)
    omega_star, est = omega_star[perm], est[:, perm]
    F = fisher_matrix(basis, omega_star, pi).entries
    keep = well_conditioned_subset(F)
    cond = float(np.linalg.cond(F)) if keep.size == F.shape[0] else math.inf
    Finv = np.full_like(F, np.nan)
    Finv[np.ix_(keep, keep)] = np.linalg.inv(F[np.ix_(keep, keep)])
    z = math.sqrt(T) * (est - omega_star)
    cov = np.atleast_2d(np.cov(z, rowvar=False, ddof=1))
    dev = float(np.max(np.abs(np.diag(cov)[keep] / np.diag(Finv)[keep] - 1.0))) if keep.size else math.nan
    mean = est.mean(axis=0)
    se = est.std(axis=0, ddof=1) / math.sqrt(est.shape[0])
    return NormalityResult(cov, Finv, dev, keep, est, mean, se, cond, failures, F)


def network_basis(network: ReactionNetwork) -> ReactionBasis:
    """Reactions grouped by state change, channels in lexicographic order."""
    vectors = sorted({r.state_change for r in network.reactions})
    return ReactionBasis.from_channels(network, vectors)


# -- compensated counting processes -------------------------------------------


@dataclass(frozen=True, eq=False)
class CountingRecord:
    vectors: np.ndarray  # (K, n)
    times: np.ndarray  # jump times followed by T
    counts: np.ndarray  # (K, len(times)) R_i(t)
    compensators: np.ndarray  # (K, len(times)) int_0^t a*_i(X(s)) ds

    @property
    def residuals(self) -> np.ndarray:
        return self.counts - self.compensators

    @property
    def endpoint(self) -> np.ndarray:
        return self.residuals[:, -1]


def compensator_residuals(t: Trajectory, cs: ChannelSummary | None, network: ReactionNetwork) -> CountingRecord:
    """``R_i(t) - int_0^t a*_i(X(s)) ds`` at every jump time and at ``T``.

    Channels are the union of the observed ones and those of the network, so a
    channel that never fired still shows its (negative) compensator.
    """
    vecs = {tuple(int(a) for a in r.state_change) for r in network.reactions}
    if cs is not None:
        vecs |= {tuple(int(a) for a in v) for v in cs.vectors}
    vectors = np.array(sorted(vecs), dtype=np.int64).reshape(-1, t.n_species)
    lookup = {tuple(v): k for k, v in enumerate(vectors.tolist())}
    K = vectors.shape[0]
    # intensity of each channel at each visited state
    a = np.zeros((t.states.shape[0], K))
    st = t.states.astype(float)
    for r in network.reactions:
        a[:, lookup[tuple(r.state_change)]] += r.rate_constant * r.basis_values(st)
    comp = np.cumsum(a * t.holding_times[:, None], axis=0).T  # value at the end of each holding interval
    jumps = t.jumps()
    counts = np.zeros((K, t.states.shape[0]))
    for l, v in enumerate(jumps):
        counts[lookup[tuple(int(x) for x in v)], l] += 1
    counts = np.cumsum(counts, axis=1)
    times = np.concatenate([t.jump_times, [t.horizon]])
    return CountingRecord(vectors, times, counts, comp)


# -- sparse normality condition ------------------------------------------------


def true_library_coefficients(network: ReactionNetwork, lib: BasisLibrary, channel_vectors) -> np.ndarray:
    """Express the mass-action propensities of ``network`` in the polynomial library."""
    from .basis import BasisFunction, BasisKind
    from .model import ReactionKind

    pos = {f: k for k, f in enumerate(lib.functions)}
    L = lib.size
    omega = np.zeros(L * len(channel_vectors))
    index = {tuple(int(a) for a in v): i for i, v in enumerate(channel_vectors)}

    def add(i, f, coef):
        if f not in pos:
            raise InvalidInputError(f"library lacks {f.descriptor()} needed by the network")
        omega[i * L + pos[f]] += coef

    for r in network.reactions:
        i = index.get(tuple(r.state_change))
        if i is None:
            continue
        k, V = r.rate_constant, r.volume
        if r.kind is ReactionKind.SOURCE:
            add(i, BasisFunction(BasisKind.CONSTANT), k * V)
        elif r.kind is ReactionKind.UNARY:
            add(i, BasisFunction(BasisKind.LINEAR, r.species), k)
        elif r.kind is ReactionKind.BINARY_SAME:
            add(i, BasisFunction(BasisKind.SQUARE, r.species), k / V)
            add(i, BasisFunction(BasisKind.LINEAR, r.species), -k / V)
        else:
            add(i, BasisFunction(BasisKind.CROSS, tuple(sorted(r.species))), k / V)
    return omega


@dataclass
class SparseConditionReport:
    satisfied: bool
    margin: float  # smallest -sum omega* phi over the strictly negative cases (the constant c); nan if none
    violations: list[tuple[int, tuple[int, ...]]]  # (channel, state)


def check_sparse_condition(lib: BasisLibrary, omega_star, states, tol: float = 0.0) -> SparseConditionReport:
    """At every state where a channel's true intensity is 0, either every basis
    function of that channel vanishes or the linear predictor is strictly negative.
    Reports the offending (channel, state) pairs and the attained margin ``c``."""
    omega_star = np.asarray(omega_star, dtype=float)
    states = np.atleast_2d(np.asarray(states))
    viol = []
    margin = math.inf
    for i, idx in enumerate(lib.index_sets):
        phi = lib.evaluate_channel(i, states.astype(float))
        lin = phi @ omega_star[idx]
        off = lin <= tol
        for k in np.flatnonzero(off):
            if not np.any(phi[k] != 0):
                continue
            if lin[k] < -tol:
                margin = min(margin, -lin[k])
            else:
                viol.append((i, tuple(int(v) for v in states[k])))
    return SparseConditionReport(not viol, margin if margin < math.inf else math.nan, viol)


# -- exact invariant distribution on finite chains -----------------------------


def reachable_states(network: ReactionNetwork, x0, max_states: int = 10_000) -> np.ndarray:
    """Breadth-first enumeration of the states reachable from ``x0``."""
    start = tuple(int(v) for v in as_state(x0, network.n_species))
    seen = {start: 0}
    order = [start]
    head = 0
    while head < len(order):
        x = order[head]
        head += 1
        a = network.propensities(np.array(x))
        for r, ak in zip(network.reactions, a):
            if ak <= 0:
                continue
            y = tuple(xi + vi for xi, vi in zip(x, r.state_change))
            if y not in seen:
                if len(order) >= max_states:
                    raise InvalidInputError(f"more than {max_states} reachable states; the chain is too large")
                seen[y] = len(order)
                order.append(y)
    return np.array(order, dtype=np.int64)


def stationary_distribution(network: ReactionNetwork, x0, max_states: int = 10_000) -> EmpiricalDistribution:
    """Solve ``pi G = 0, sum pi = 1`` on the reachable set (dense least squares)."""
    states = reachable_states(network, x0, max_states)
    index = {tuple(s): k for k, s in enumerate(states.tolist())}
    S = states.shape[0]
    G = np.zeros((S, S))
    for k, x in enumerate(states):
        for r, ak in zip(network.reactions, network.propensities(x)):
            if ak > 0:
                G[k, index[tuple(int(v) for v in x + np.asarray(r.state_change))]] += ak
                G[k, k] -= ak
    A = np.vstack([G.T, np.ones((1, S))])
    b = np.zeros(S + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    order = np.lexsort(states.T[::-1])
    return EmpiricalDistribution(states[order], pi[order] / pi.sum(), math.inf)


def pi_deviation(estimate: EmpiricalDistribution, exact: EmpiricalDistribution) -> float:
    """Largest relative error of ``estimate`` over the states where ``exact`` is positive."""
    est = estimate.as_dict()
    rel = [abs(est.get(s, 0.0) - p) / p for s, p in exact.as_dict().items() if p > 0]
    return float(max(rel))


# -- consistency of the log-likelihood gap -------------------------------------


@dataclass
class KLGapResult:
    observed: np.ndarray  # (ln L(omega) - ln L(omega*)) / (Q T) per probe
    predicted: np.ndarray  # -sum_x (KL_wait + KL_select) a*(x) pi_hat(x)
    relative_error: np.ndarray


def kl_gap_check(network: ReactionNetwork, ts: TrajectorySet, probes) -> KLGapResult:
    """Compare the scaled log-likelihood gap of each probe rate vector with its KL limit."""
    from .likelihood import neg_log_likelihood_exact, precompute
    from .ssa import identify_channels

    basis = network_basis(network)
    perm = np.asarray(basis.reaction_ids)
    cs = identify_channels(ts)
    obs_basis = ReactionBasis.from_channels(network, cs.vectors)
    operm = np.asarray(obs_basis.reaction_ids)
    d = precompute(ts, cs, obs_basis)
    pi = empirical_pi(ts)
    star = network.rate_constants
    # rates of reactions on unobserved channels enter only through their exposure
    missing = [k for k in range(len(network.reactions)) if k not in set(operm.tolist())]
    f_star = neg_log_likelihood_exact(d, star[operm]).value
    obs, pred = [], []
    for probe in probes:
        w = np.asarray(probe, dtype=float)
        if w.shape != star.shape or np.any(~(w > 0)):
            raise InvalidInputError("probe must hold one positive rate per reaction")
        gap = f_star - neg_log_likelihood_exact(d, w[operm]).value
        for k in missing:
            r = network.reactions[k]
            gap -= (w[k] - star[k]) * pi.expectation(r.basis_values(pi.states.astype(float)))
        obs.append(gap)
        pred.append(loglik_rate_gap(basis, star[perm], w[perm], pi))
    obs, pred = np.array(obs), np.array(pred)
    return KLGapResult(obs, pred, np.abs(obs - pred) / np.abs(pred))
