"""Softplus smoothing ``G_eps(x) = eps * ln(1 + exp(x / eps))`` and derivatives.

Everything here is vectorised over ``x`` and evaluated in a shifted form so
that arguments with ``|x / eps|`` in the thousands neither overflow nor lose
the logarithm to ``-inf``.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

# below this u = x/eps the log1p(e^u) based pieces switch to series in e^u
_SERIES_CUTOFF = -2.5
_SERIES_TERMS = 40


def _check_eps(eps: float, allow_zero: bool) -> float:
    eps = float(eps)
    if not np.isfinite(eps) or eps < 0 or (eps == 0 and not allow_zero):
        raise InvalidInputError(f"smoothing parameter must be {'>= 0' if allow_zero else '> 0'}, got {eps}")
    return eps


def _out(values, like):
    return values.item() if np.ndim(like) == 0 else values


def softplus(u):
    """``ln(1 + e^u)`` without overflow."""
    u = np.asarray(u, dtype=float)
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


def log_sigmoid(u):
    """``ln(e^u / (1 + e^u))``."""
    return -softplus(-np.asarray(u, dtype=float))


def log_softplus(u):
    """``ln ln(1 + e^u)``, finite for every finite ``u``.

    For very negative ``u`` the value is ``u + ln(1 - e^u/2 + e^{2u}/3 - ...)``.
    """
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    low = u < _SERIES_CUTOFF
    hi = ~low
    out[hi] = np.log(softplus(u[hi]))
    if low.any():
        s = np.exp(u[low])
        out[low] = u[low] + np.log(_log1p_over_s(s))
    return out


def _log1p_over_s(s):
    # log1p(s)/s = sum_k (-s)^k / (k+1), valid for 0 <= s < 1
    acc = np.zeros_like(s)
    for k in range(_SERIES_TERMS - 1, -1, -1):
        acc = 1.0 / (k + 1) - s * acc
    return acc


def g_eps(x, eps: float):
    """Smoothed ``max(x, 0)``; ``eps = 0`` returns the hinge itself."""
    eps = _check_eps(eps, allow_zero=True)
    xa = np.asarray(x, dtype=float)
    if eps == 0.0:
        return _out(np.maximum(xa, 0.0), x)
    return _out(eps * softplus(xa / eps), x)


def g_eps_prime(x, eps: float):
    eps = _check_eps(eps, allow_zero=False)
    xa = np.asarray(x, dtype=float)
    return _out(np.exp(log_sigmoid(xa / eps)), x)


def g_eps_double_prime(x, eps: float):
    eps = _check_eps(eps, allow_zero=False)
    u = np.asarray(x, dtype=float) / eps
    return _out(np.exp(log_sigmoid(u) + log_sigmoid(-u)) / eps, x)


def ln_g_eps(x, eps: float):
    """``ln G_eps(x)``; behaves like ``ln eps + x/eps`` for very negative x."""
    eps = _check_eps(eps, allow_zero=False)
    xa = np.asarray(x, dtype=float)
    return _out(np.log(eps) + log_softplus(xa / eps), x)


def ln_g_eps_prime(x, eps: float):
    """``G_eps'(x) / G_eps(x)``."""
    eps = _check_eps(eps, allow_zero=False)
    u = np.asarray(x, dtype=float) / eps
    return _out(np.exp(log_sigmoid(u) - log_softplus(u)) / eps, x)


def ln_g_eps_double_prime(x, eps: float):
    """Second derivative of ``ln G_eps``, always negative.

    Equal to ``sigma(1-sigma)/sp * (1 - e^u/sp) / eps^2`` with ``sp = ln(1+e^u)``;
    the bracket comes from a series for ``u`` below the cutoff, where the
    direct difference cancels.
    """
    eps = _check_eps(eps, allow_zero=False)
    u = np.asarray(x, dtype=float) / eps
    lsp = log_softplus(u)
    ls_pos, ls_neg = log_sigmoid(u), log_sigmoid(-u)
    out = np.empty_like(u)
    low = u < _SERIES_CUTOFF
    hi = ~low
    # G''/G - (G'/G)^2, no cancellation trouble away from the far left tail
    out[hi] = np.exp(ls_pos[hi] + ls_neg[hi] - lsp[hi]) - np.exp(2.0 * (ls_pos[hi] - lsp[hi]))
    if low.any():
        s = np.exp(u[low])
        q = _log1p_over_s(s)  # sp / s
        # 1 - s/sp = (q - 1)/q with q - 1 = -s * sum_k (-s)^k/(k+2)
        acc = np.zeros_like(s)
        for k in range(_SERIES_TERMS - 1, -1, -1):
            acc = 1.0 / (k + 2) - s * acc
        pref = np.exp(ls_pos[low] + ls_neg[low] - lsp[low])
        out[low] = pref * (-s * acc / q)
    return _out(out / eps**2, x)


# fused forms for the likelihood hot path: one exp/log1p pass per call

_FAR_LEFT = -30.0  # below this, ln ln(1+e^u) = u and sigma/softplus = 1 - e^u/2 to double precision


def g_and_prime(x: np.ndarray, eps: float):
    """``(G_eps(x), G_eps'(x))`` for an array ``x``."""
    u = x / eps
    e = np.exp(-np.abs(u))
    g = eps * (np.maximum(u, 0.0) + np.log1p(e))
    inv = 1.0 / (1.0 + e)
    return g, np.where(u >= 0, inv, e * inv)


def ln_g_and_prime(x: np.ndarray, eps: float):
    """``(ln G_eps(x), G_eps'(x) / G_eps(x))`` for an array ``x``."""
    u = x / eps
    e = np.exp(-np.abs(u))
    sp = np.maximum(u, 0.0) + np.log1p(e)
    inv = 1.0 / (1.0 + e)
    sig = np.where(u >= 0, inv, e * inv)
    left = u < _FAR_LEFT
    with np.errstate(divide="ignore", invalid="ignore"):
        lsp = np.where(left, u, np.log(sp))
        ratio = np.where(left, 1.0 - 0.5 * e, sig / sp)
    return np.log(eps) + lsp, ratio / eps
