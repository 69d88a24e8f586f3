"""Rate estimation for known networks and sparse learning of unknown ones."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import BasisLibrary, ReactionBasis
from .errors import CRNError, DivergedError, InvalidInputError, NoInformationError
from .fista import FistaConfig, ProximalProblem, SolverReport, solve
from .likelihood import PrecomputedDesign, channel_hessian_diagonal, channel_objective_exact, channel_objective_smoothed, precompute
from .model import ReactionNetwork
from .ssa import ChannelSummary, TrajectorySet, identify_channels

RATE_FLOOR = 1e-12


# -- task 1: known structure -------------------------------------------------


@dataclass(frozen=True, eq=False)
class KnownStructureProblem:
    basis: ReactionBasis
    design: PrecomputedDesign

    @classmethod
    def build(cls, network: ReactionNetwork, ts: TrajectorySet, cs: ChannelSummary | None = None):
        cs = cs or identify_channels(ts)
        basis = ReactionBasis.from_channels(network, cs.vectors)
        return cls(basis, precompute(ts, cs, basis))


def estimate_rates_closed_form(p: KnownStructureProblem, i: int) -> float:
    """``M_i / sum_l t_l phi(y_l)`` for a channel with a single reaction."""
    cd = p.design.channels[i]
    if cd.n_params != 1:
        raise InvalidInputError(f"channel {i + 1} has {cd.n_params} reactions; closed form needs exactly one")
    denom = float(cd.integrals[0])
    if not denom > 0:
        raise NoInformationError(f"channel {i + 1}: basis function vanishes along all data")
    return cd.n_activations / denom


@dataclass
class GradientResult:
    rates: np.ndarray
    iterations: int
    converged: bool
    gradient_norm: float
    objective: float


def estimate_rates_gradient(
    p: KnownStructureProblem,
    i: int,
    step: float = 1e-3,
    init=1.0,
    tol: float = 1e-8,
    max_iters: int = 2_000_000,
    floor: float = RATE_FLOOR,
) -> GradientResult:
    """Projected gradient descent on channel ``i``'s scaled negative log-likelihood.

    Every iteration tries ``step`` first and halves it until the trial
    decreases the objective, so a too-large fixed step cannot oscillate.
    Stops when the projected gradient norm drops below ``tol``.
    """
    cd = p.design.channels[i]
    if not step > 0:
        raise InvalidInputError("step must be positive")
    w = np.broadcast_to(np.asarray(init, dtype=float), (cd.n_params,)).copy()
    if np.any(~(w > 0)):
        raise InvalidInputError("initial rates must be positive")
    if float(cd.integrals.max(initial=0.0)) <= 0:
        raise NoInformationError(f"channel {i + 1}: no exposure along the data")
    f, g = channel_objective_exact(p.design, i, w)
    for it in range(1, max_iters + 1):
        pg = np.where((w <= floor) & (g > 0), 0.0, g)
        gnorm = float(np.linalg.norm(pg))
        if gnorm < tol:
            return GradientResult(w, it - 1, True, gnorm, f)
        h = step
        while True:
            trial = np.maximum(w - h * g, floor)
            try:
                ft, gt = channel_objective_exact(p.design, i, trial)
            except CRNError:
                ft = math.inf
            slack = 16 * np.finfo(float).eps * abs(f)
            if ft < f - slack:
                break
            # below rounding the values cannot rank the points; by convexity
            # the step still descends if it stops short of the line minimum
            if ft <= f + slack and float(gt @ (trial - w)) <= 0:
                break
            h *= 0.5
            if h < 1e-300:
                raise DivergedError(f"channel {i + 1}: gradient descent cannot decrease the objective")
        if not math.isfinite(ft):
            raise DivergedError(f"channel {i + 1}: objective became non-finite")
        w, f, g = trial, ft, gt
    pg = np.where((w <= floor) & (g > 0), 0.0, g)
    return GradientResult(w, max_iters, False, float(np.linalg.norm(pg)), f)


@dataclass
class RateEstimate:
    rates: np.ndarray  # one per network reaction
    no_information: np.ndarray  # bool per reaction
    methods: list[str]
    converged: bool
    notes: list[str] = field(default_factory=list)


def learn_rates(network: ReactionNetwork, ts: TrajectorySet, cs: ChannelSummary | None = None, **gd_kw) -> RateEstimate:
    """Estimate every rate constant; the method is chosen per channel by its reaction count."""
    p = KnownStructureProblem.build(network, ts, cs)
    n = len(network.reactions)
    rates = np.zeros(n)
    noinfo = np.ones(n, dtype=bool)
    methods = ["unobserved"] * n
    notes, ok = [], True
    for i, group in enumerate(p.basis.channel_reactions):
        try:
            if len(group) == 1:
                vals, method = np.array([estimate_rates_closed_form(p, i)]), "closed-form"
            else:
                res = estimate_rates_gradient(p, i, **gd_kw)
                vals, method = res.rates, "gradient"
                ok &= res.converged
                if not res.converged:
                    notes.append(f"channel {i + 1}: gradient descent stopped at the iteration cap")
        except NoInformationError as exc:
            notes.append(str(exc))
            for k in group:
                methods[k] = "no-information"
            continue
        for k, v in zip(group, vals):
            rates[k], noinfo[k], methods[k] = v, False, method
    for k in range(n):
        if methods[k] == "unobserved":
            notes.append(f"reaction {k + 1} never fired in the data; reported as 0")
    return RateEstimate(rates, noinfo, methods, ok, notes)


# -- task 2: sparse learning --------------------------------------------------


def round_one_digit(v: float) -> float:
    return float(f"{v:.0e}") if v > 0 else 0.0


def activation_maxima(d: PrecomputedDesign) -> np.ndarray:
    """``max phi_j`` over the states at which the owning channel fired (0 if it never did)."""
    out = np.zeros(d.n_params)
    for cd in d.channels:
        if cd.act_features.shape[0]:
            out[cd.params] = cd.act_features.max(axis=0)
    return out


def build_preconditioner(d: PrecomputedDesign) -> np.ndarray:
    """``c_j``: activation maximum of ``phi_j`` rounded to one significant digit, at least 1."""
    return np.array([max(1.0, round_one_digit(v)) for v in activation_maxima(d)])


def curvature_scales(d: PrecomputedDesign, i: int, omega_i, eps: float) -> np.ndarray:
    """Square roots of the smoothed Hessian diagonal of channel ``i`` at ``omega_i``.

    Taken relative to the smallest positive entry, then rounded to one digit
    and floored at 1 like the activation-maximum rule. Directions with no
    curvature get 1.
    """
    r = np.sqrt(np.maximum(channel_hessian_diagonal(d, i, omega_i, eps), 0.0))
    pos = r[r > 0]
    if not pos.size:
        return np.ones_like(r)
    return np.array([max(1.0, round_one_digit(v)) for v in r / pos.min()])


PRECONDITIONERS = ("none", "max", "curvature")


@dataclass
class SparseLearnProblem:
    """Penalised sparse learning setup.

    ``precondition`` is ``"max"`` (activation maxima), ``"curvature"``
    (a max-rule pilot followed by warm-started rounds scaled by the local
    Hessian diagonal) or ``"none"``; booleans map to ``"max"``/``"none"``.
    Explicit ``rescaling`` overrides all of them.
    """

    library: BasisLibrary
    epsilon: float = 0.1
    lam: float | dict = 0.01
    precondition: bool | str = "max"
    rescaling: np.ndarray | None = None
    pilot_iters: int = 2000
    max_rounds: int = 6

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise InvalidInputError(f"epsilon must be > 0, got {self.epsilon}")
        if isinstance(self.precondition, bool):
            self.precondition = "max" if self.precondition else "none"
        if self.precondition not in PRECONDITIONERS:
            raise InvalidInputError(f"precondition must be one of {', '.join(PRECONDITIONERS)}")
        if self.pilot_iters < 1 or self.max_rounds < 1:
            raise InvalidInputError("pilot_iters and max_rounds must be at least 1")

    def lam_for(self, i: int, vector) -> float:
        if not isinstance(self.lam, dict):
            lam = float(self.lam)
        else:
            key = ",".join(str(int(a)) for a in vector)
            for k in (key, i + 1, str(i + 1)):
                if k in self.lam:
                    lam = float(self.lam[k])
                    break
            else:
                raise InvalidInputError(f"no lambda given for channel {i + 1} ({key})")
        if not (lam >= 0 and math.isfinite(lam)):
            raise InvalidInputError(f"lambda must be finite and >= 0, got {lam}")
        return lam


@dataclass
class ChannelFit:
    index: int
    vector: tuple[int, ...]
    lam: float
    coefficients: np.ndarray | None  # omega
    rescaled: np.ndarray | None  # omega_bar = c * omega
    scales: np.ndarray
    report: SolverReport | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.report is not None and self.report.converged


@dataclass
class NetworkFit:
    library: BasisLibrary
    epsilon: float
    channels: list[ChannelFit]
    activation_max: np.ndarray

    @property
    def omega(self) -> np.ndarray:
        L = self.library.size
        out = np.full(L * len(self.channels), np.nan)
        for ch in self.channels:
            if ch.coefficients is not None:
                out[ch.index * L : (ch.index + 1) * L] = ch.coefficients
        return out

    def dominant(self, i: int) -> int:
        """Basis position with the largest contribution ``|omega_j| * max phi_j`` in channel ``i``."""
        ch = self.channels[i]
        L = self.library.size
        weight = self.activation_max[i * L : (i + 1) * L]
        return int(np.argmax(np.abs(ch.coefficients) * np.maximum(weight, 1e-300)))

    @property
    def all_converged(self) -> bool:
        return all(ch.ok for ch in self.channels)


def solve_channel(
    d: PrecomputedDesign, i: int, eps: float, lam: float, c: np.ndarray, cfg: FistaConfig, workers: int = 1
) -> SolverReport:
    """FISTA on the rescaled variables ``omega_bar = c * omega`` of channel ``i``."""

    def smooth(wbar):
        f, g = channel_objective_smoothed(d, i, wbar / c, eps, workers=workers)
        return f, g / c

    def value(wbar):
        return channel_objective_smoothed(d, i, wbar / c, eps, gradient=False, workers=workers)[0]

    return solve(ProximalProblem(smooth, lam, c, value), cfg, n=c.shape[0])


def solve_channel_curvature(
    d: PrecomputedDesign,
    i: int,
    eps: float,
    lam: float,
    c0: np.ndarray,
    cfg: FistaConfig,
    pilot_iters: int = 2000,
    max_rounds: int = 6,
    workers: int = 1,
):
    """Curvature-rescaled FISTA rounds after a short pilot run scaled by ``c0``.

    Each round recomputes the scales at the current point and warm starts
    from it. Rounds before the last stop at ``pilot_iters``. The loop ends
    once two consecutive rounds meet the stopping rule, since a round that
    starts at a converged point with a fresh ``L`` confirms it. Returns the
    last report and its scales.
    """
    cap = min(pilot_iters, cfg.max_iters)
    rep = solve_channel(d, i, eps, lam, c0, replace(cfg, max_iters=cap), workers)
    omega = rep.x_final / c0
    total, evals, streak = rep.iterations, rep.evaluations, 0
    for r in range(max_rounds):
        c = curvature_scales(d, i, omega, eps)
        last = r == max_rounds - 1
        rc = replace(cfg, x0=c * omega, max_iters=cfg.max_iters if last else cap)
        rep = solve_channel(d, i, eps, lam, c, rc, workers)
        omega = rep.x_final / c
        total += rep.iterations
        evals += rep.evaluations
        streak = streak + 1 if rep.converged else 0
        if streak == 2:
            break
    rep.extra.update(rounds=r + 1, total_iterations=total, total_evaluations=evals)
    return rep, c


def learn_network(
    p: SparseLearnProblem, d: PrecomputedDesign, cfg: FistaConfig | None = None, workers: int = 1, channels=None
) -> NetworkFit:
    cfg = cfg or FistaConfig()
    maxima = activation_maxima(d)
    if p.rescaling is not None:
        c_all = np.asarray(p.rescaling, dtype=float)
        if c_all.shape != (d.n_params,) or np.any(~(c_all > 0)):
            raise InvalidInputError("rescaling constants must be positive, one per parameter")
    elif p.precondition != "none":
        c_all = build_preconditioner(d)
    else:
        c_all = np.ones(d.n_params)
    fits = []
    for cd in d.channels:
        if channels is not None and cd.index not in channels:
            continue
        lam = p.lam_for(cd.index, cd.vector)
        c = c_all[cd.params]
        try:
            if p.precondition == "curvature" and p.rescaling is None:
                rep, c = solve_channel_curvature(
                    d, cd.index, p.epsilon, lam, c, cfg, p.pilot_iters, p.max_rounds, workers
                )
            else:
                rep = solve_channel(d, cd.index, p.epsilon, lam, c, cfg, workers)
            fits.append(ChannelFit(cd.index, cd.vector, lam, rep.x_final / c, rep.x_final.copy(), c, rep))
        except CRNError as exc:
            rep = getattr(exc, "report", None)
            fits.append(ChannelFit(cd.index, cd.vector, lam, None, None, c, rep, error=f"{type(exc).__name__}: {exc}"))
    return NetworkFit(p.library, p.epsilon, fits, maxima)


def subgradient_residual(d: PrecomputedDesign, i: int, omega_i, eps: float, lam: float, scales=None) -> float:
    """Worst violation of the optimality inclusion ``grad_j in -(lam / c_j) d|x_j|``.

    Measured in the solver's variables ``x = c * omega`` (``c = 1`` when
    ``scales`` is None) on the 1/(QT)-scaled objective; 0 at an exact optimum.
    """
    w = np.asarray(omega_i, dtype=float)
    c = np.ones_like(w) if scales is None else np.asarray(scales, dtype=float)
    _, g = channel_objective_smoothed(d, i, w, eps)
    g, thr = g / c, lam / c
    zero = w == 0
    r_zero = np.maximum(np.abs(g[zero]) - thr[zero], 0.0)
    r_nz = np.abs(g[~zero] + np.sign(w[~zero]) * thr[~zero])
    return float(max(r_zero.max(initial=0.0), r_nz.max(initial=0.0)))
