"""FISTA with backtracking for ``f(x) + lam * sum_j |x_j| / c_j``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DivergedError, InvalidInputError, InvalidStartError


def shrinkage(x, alpha):
    """Soft threshold ``max(|x| - alpha, 0) * sign(x)``."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha < 0):
        raise InvalidInputError("threshold must be non-negative")
    xa = np.asarray(x, dtype=float)
    out = np.maximum(np.abs(xa) - alpha, 0.0) * np.sign(xa)
    return out.item() if np.ndim(out) == 0 else out


def prox_step(y, grad, L: float, lam: float, c=1.0) -> np.ndarray:
    """Minimiser of the quadratic model ``Q_L(., y)``: a gradient step then per-coordinate shrinkage."""
    if not L > 0:
        raise InvalidInputError(f"L must be positive, got {L}")
    y = np.asarray(y, dtype=float)
    step = y - np.asarray(grad, dtype=float) / L
    return np.asarray(shrinkage(step, lam / (L * np.asarray(c, dtype=float))), dtype=float).reshape(y.shape)


@dataclass
class ProximalProblem:
    """``smooth(x) -> (f, grad)``; ``value(x) -> f`` is used for backtracking trials if given."""

    smooth: Callable[[np.ndarray], tuple[float, np.ndarray]]
    lam: float = 0.0
    weights: np.ndarray | float = 1.0
    value: Callable[[np.ndarray], float] | None = None

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise InvalidInputError(f"lambda must be finite and >= 0, got {self.lam}")
        c = np.asarray(self.weights, dtype=float)
        if np.any(~(c > 0)) or np.any(~np.isfinite(c)):
            raise InvalidInputError("penalty weights must be positive and finite")
        self.weights = c

    def f(self, x) -> float:
        if self.value is not None:
            return float(self.value(x))
        return float(self.smooth(x)[0])

    def penalty(self, x) -> float:
        return float(self.lam * np.sum(np.abs(x) / self.weights))


@dataclass
class FistaConfig:
    L0: float = 1.0
    eta: float = 2.0
    x0: np.ndarray | None = None
    window: int = 20
    rel_tol: float = 5e-8
    max_iters: int = 500_000
    max_backtracks: int = 200

    def __post_init__(self):
        if not self.L0 > 0:
            raise InvalidInputError("L0 must be positive")
        if not self.eta > 1:
            raise InvalidInputError("eta must exceed 1")
        if self.window < 2:
            raise InvalidInputError("window must be at least 2")
        if not self.rel_tol > 0:
            raise InvalidInputError("rel_tol must be positive")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be at least 1")


@dataclass
class SolverReport:
    x_final: np.ndarray
    objective_trace: np.ndarray
    step_sizes: np.ndarray
    converged: bool
    iterations: int
    lipschitz: float
    evaluations: int = 0
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def final_objective(self) -> float:
        return float(self.objective_trace[-1]) if len(self.objective_trace) else math.nan

    @property
    def mean_step(self) -> float:
        return float(np.mean(self.step_sizes)) if len(self.step_sizes) else math.nan


def window_converged(trace, window: int, rel_tol: float) -> bool:
    if len(trace) < window:
        return False
    tail = trace[-window:]
    lo, hi = min(tail), max(tail)
    return (hi - lo) / max(abs(lo), 1e-30) < rel_tol


def solve(p: ProximalProblem, cfg: FistaConfig | None = None, n: int | None = None) -> SolverReport:
    cfg = cfg or FistaConfig()
    if cfg.x0 is not None:
        x0 = np.array(cfg.x0, dtype=float)
    elif n is not None:
        x0 = np.zeros(n)
    else:
        w = np.asarray(p.weights)
        if w.ndim == 0:
            raise InvalidInputError("give x0 or the problem dimension")
        x0 = np.zeros(w.shape[0])
    c = np.broadcast_to(p.weights, x0.shape)

    f0 = p.f(x0)
    if not math.isfinite(f0):
        raise InvalidStartError(f"smooth objective is {f0} at the starting point")

    x_prev = x0.copy()
    y = x0.copy()
    t = 1.0
    L = float(cfg.L0)
    trace: list[float] = []
    steps: list[float] = []
    evals = 1
    slack_factor = 16 * np.finfo(float).eps

    def report(converged, message):
        return SolverReport(
            x_final=x_prev.copy(),
            objective_trace=np.array(trace),
            step_sizes=np.array(steps),
            converged=converged,
            iterations=len(trace),
            lipschitz=L,
            evaluations=evals,
            message=message,
        )

    for _ in range(cfg.max_iters):
        fy, gy = p.smooth(y)
        evals += 1
        if not (math.isfinite(fy) and np.all(np.isfinite(gy))):
            raise DivergedError("smooth objective or gradient became non-finite", report=report(False, "diverged"))
        Lbar = L
        for trial in range(cfg.max_backtracks + 1):
            z = prox_step(y, gy, Lbar, p.lam, c)
            fz = p.f(z)
            evals += 1
            d = z - y
            bound = fy + float(d @ gy) + 0.5 * Lbar * float(d @ d)
            if math.isfinite(fz) and fz <= bound + slack_factor * abs(fy):
                break
            Lbar *= cfg.eta
        else:
            raise DivergedError(
                f"no step passed the majorisation test after {cfg.max_backtracks} backtracks",
                report=report(False, "backtracking failed"),
            )
        L = Lbar
        trace.append(fz + p.penalty(z))
        steps.append(1.0 / L)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = z + ((t - 1.0) / t_next) * (z - x_prev)
        x_prev = z
        t = t_next
        if window_converged(trace, cfg.window, cfg.rel_tol):
            return report(True, "stopping rule satisfied")
    return report(False, f"iteration cap {cfg.max_iters} reached")
