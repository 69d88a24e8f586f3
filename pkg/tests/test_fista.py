import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crnlearn.errors import DivergedError, InvalidInputError, InvalidStartError
from crnlearn.fista import FistaConfig, ProximalProblem, prox_step, shrinkage, solve, window_converged

reals = st.floats(-1e6, 1e6, allow_nan=False)
alphas = st.floats(0, 1e3)


@pytest.mark.parametrize("x,a,out", [(1.2, 0.5, 0.7), (-0.3, 0.5, 0.0), (-2.0, 0.5, -1.5)])
def test_shrinkage_examples(x, a, out):
    assert shrinkage(x, a) == pytest.approx(out, abs=1e-15)


def test_shrinkage_negative_threshold():
    with pytest.raises(InvalidInputError):
        shrinkage(1.0, -0.1)


@given(reals, alphas)
def test_shrinkage_properties(x, a):
    s = shrinkage(x, a)
    assert abs(s) <= abs(x)
    assert s == 0 or math.copysign(1, s) == math.copysign(1, x)
    assert shrinkage(-x, a) == -s
    # the prox of a|.| satisfies x - s in a * subdifferential of |s|
    r = x - s
    if s != 0:
        assert r == pytest.approx(math.copysign(a, s), rel=1e-9, abs=1e-9)
    else:
        assert abs(r) <= a + 1e-12


@given(reals, reals, alphas)
def test_shrinkage_nonexpansive(x, y, a):
    assert abs(shrinkage(x, a) - shrinkage(y, a)) <= abs(x - y) + 1e-9


def test_prox_plain_gradient_step():
    y, g = np.array([1.0, -2.0]), np.array([0.5, 0.25])
    np.testing.assert_allclose(prox_step(y, g, 4.0, 0.0), y - g / 4.0)


def test_prox_shrinks_by_one():
    np.testing.assert_allclose(prox_step(np.array([2.0, -0.5]), np.zeros(2), 1.0, 1.0, 1.0), [1.0, 0.0])


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.5, 5), st.floats(0, 3), st.floats(0.5, 3))
def test_prox_matches_grid(y, g, L, lam, c):
    grid = np.linspace(-12, 12, 240_001)
    Q = g * (grid - y) + 0.5 * L * (grid - y) ** 2 + lam * np.abs(grid) / c
    best = grid[np.argmin(Q)]
    assert abs(prox_step(np.array([y]), np.array([g]), L, lam, c)[0] - best) <= 1e-4 + 1e-12


def quad(b):
    b = np.asarray(b, dtype=float)
    return lambda x: (0.5 * float(np.sum((x - b) ** 2)), x - b)


def test_quadratic_exact_minimiser():
    b = np.array([1.5, -2.0, 0.25])
    rep = solve(ProximalProblem(quad(b)), FistaConfig(rel_tol=1e-15, max_iters=200, window=5), n=3)
    assert np.max(np.abs(rep.x_final - b)) < 1e-10
    assert rep.final_objective < 1e-12
    assert rep.iterations <= 200


def test_lasso_toy():
    rep = solve(ProximalProblem(quad([3.0]), lam=1.0), FistaConfig(rel_tol=1e-14, window=5), n=1)
    assert abs(rep.x_final[0] - 2.0) < 1e-8


@given(st.floats(-10, 10), st.floats(0, 5), st.floats(0.5, 4))
def test_weighted_lasso_closed_form(b, lam, c):
    rep = solve(ProximalProblem(quad([b]), lam=lam, weights=np.array([c])), FistaConfig(rel_tol=1e-14, window=5, max_iters=2000), n=1)
    assert rep.x_final[0] == pytest.approx(shrinkage(b, lam / c), abs=1e-7)


def test_lipschitz_never_decreases_and_objective_reported():
    A = np.array([[10.0, 1.0], [1.0, 0.2]])
    b = np.array([1.0, -1.0])
    f = lambda x: (0.5 * float(x @ A @ x) - float(b @ x), A @ x - b)
    rep = solve(ProximalProblem(f, lam=0.1), FistaConfig(L0=0.01, rel_tol=1e-12), n=2)
    steps = np.asarray(rep.step_sizes)
    assert np.all(np.diff(steps) <= 0)
    assert rep.lipschitz >= np.linalg.eigvalsh(A).max() / 2.0
    assert rep.converged


def test_lasso_matches_scipy_oracle():
    from scipy.optimize import minimize

    rng = np.random.default_rng(0)
    A = rng.normal(size=(30, 8))
    b = rng.normal(size=30)
    lam = 2.0
    f = lambda x: (0.5 * float(np.sum((A @ x - b) ** 2)), A.T @ (A @ x - b))
    rep = solve(ProximalProblem(f, lam=lam), FistaConfig(rel_tol=1e-15, window=10, max_iters=20000), n=8)

    def split(z):
        x = z[:8] - z[8:]
        v, g = f(x)
        return v + lam * z.sum(), np.concatenate([g + lam, -g + lam])

    r = minimize(split, np.zeros(16), jac=True, method="L-BFGS-B", bounds=[(0, None)] * 16, options=dict(ftol=1e-15, gtol=1e-12))
    ref = r.x[:8] - r.x[8:]
    np.testing.assert_allclose(rep.x_final, ref, atol=1e-6)


def test_invalid_start():
    f = lambda x: (math.inf, np.zeros_like(x))
    with pytest.raises(InvalidStartError):
        solve(ProximalProblem(f), n=1)


def test_divergence_reported():
    # the smooth part becomes nan away from 0, so backtracking can never succeed
    f = lambda x: (0.0 if np.all(x == 0) else math.nan, np.ones_like(x))
    with pytest.raises(DivergedError) as info:
        solve(ProximalProblem(f), FistaConfig(max_backtracks=20), n=1)
    assert info.value.report is not None


def test_iteration_cap():
    f = quad([1.0, 2.0])
    rep = solve(ProximalProblem(f), FistaConfig(max_iters=3, rel_tol=1e-16), n=2)
    assert not rep.converged and rep.iterations == 3


@pytest.mark.parametrize(
    "kw", [dict(L0=0.0), dict(eta=1.0), dict(window=1), dict(rel_tol=0.0), dict(max_iters=0)]
)
def test_config_validation(kw):
    with pytest.raises(InvalidInputError):
        FistaConfig(**kw)


def test_window_rule():
    assert not window_converged([1.0, 1.0], 3, 1e-8)
    assert window_converged([5.0, 1.0, 1.0, 1.0], 3, 1e-8)
    assert not window_converged([1.0, 1.1, 1.0], 3, 1e-8)
