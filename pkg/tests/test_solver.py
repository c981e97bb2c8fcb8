from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from chbiot.errors import ConfigurationError, LinearSolverError, NewtonConvergenceError, NewtonDivergenceError
from chbiot.solver import SolverConfig, linear_solve, newton_solve


class Sys:
    def __init__(self, A, b, ordering=None):
        self.matrix, self.rhs, self.ordering = sp.csr_matrix(A), np.asarray(b, float), ordering


@pytest.mark.parametrize("method", ["direct", "iterative"])
def test_identity(method):
    b = np.arange(5.0) - 2
    x = linear_solve(Sys(sp.identity(5), b), SolverConfig(linear_method=method))
    assert np.allclose(x, b, rtol=0, atol=1e-14)


def test_poisson_against_dense_oracle():
    h = 0.25
    A = np.diag([2.0] * 3) - np.diag([1.0] * 2, 1) - np.diag([1.0] * 2, -1)
    A /= h * h
    b = np.ones(3)
    oracle = np.linalg.solve(A, b)
    assert np.allclose(oracle, [0.09375, 0.125, 0.09375], atol=1e-15)
    x = linear_solve(Sys(A, b))
    assert np.abs(x - oracle).max() <= 1e-12


def test_singular_raises():
    A = sp.csr_matrix(np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 3.0]]))
    with pytest.raises(LinearSolverError):
        linear_solve(Sys(A, np.ones(3)))


def test_nonsquare_raises():
    with pytest.raises(LinearSolverError):
        linear_solve(Sys(np.ones((2, 3)), np.ones(2)))


def test_residual_contract_and_info():
    rng = np.random.default_rng(0)
    A = sp.random(200, 200, density=0.03, random_state=1) + 10 * sp.identity(200)
    b = rng.normal(size=200)
    info = {}
    x = linear_solve(Sys(A, b, ordering=rng.permutation(200)), SolverConfig(), info)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)
    assert info["residual"] <= 1e-10 * np.linalg.norm(b) and info["iterations"] >= 1


def test_zero_rhs():
    x = linear_solve(Sys(sp.identity(4) * 3, np.zeros(4)))
    assert np.all(x == 0.0)


def test_newton_sequence():
    oracle = [Fraction(3)]
    for _ in range(4):
        x = oracle[-1]
        oracle.append(x - (x * x - 4) / (2 * x))
    assert oracle[1] == Fraction(13, 6)
    cfg = SolverConfig(newton_abs_tol=1e-12)
    x, rep = newton_solve(lambda x: x**2 - 4, lambda x: sp.csr_matrix([[2 * x[0]]]), [3.0], cfg)
    assert x[0] == pytest.approx(2.0, abs=1e-15)
    iterates = 3.0 - np.cumsum(rep.increment_norms)
    for k in range(3):
        assert iterates[k] == pytest.approx(float(oracle[k + 1]), rel=1e-14)
    inc = rep.increment_norms
    # quadratic decay: e_{k+1} ~ e_k^2 / (2 x)
    for k in range(1, 3):
        assert inc[k + 1] <= inc[k] ** 2
    assert rep.converged and len(rep.increment_norms) == rep.newton_iters


def test_newton_root_start_one_iteration():
    x, rep = newton_solve(lambda x: x**2 - 4, lambda x: sp.csr_matrix([[2 * x[0]]]), [2.0])
    assert rep.newton_iters == 1 and rep.increment_norms[0] <= 1e-6


def test_newton_nan_diverges():
    with pytest.raises(NewtonDivergenceError):
        newton_solve(lambda x: np.full(1, np.nan), lambda x: sp.identity(1), [1.0])


def test_newton_max_iter():
    with pytest.raises(NewtonConvergenceError) as info:
        newton_solve(lambda x: np.exp(x) - 0.5 + 0 * x, lambda x: sp.csr_matrix([[np.exp(x[0])]]), [40.0],
                     SolverConfig(newton_max_iter=3))
    assert info.value.report.newton_iters == 3
    assert all(np.isfinite(info.value.report.increment_norms))


def test_newton_deterministic():
    def f(x):
        return np.array([x[0] ** 3 + x[1] - 1, x[1] ** 3 - x[0] + 1])

    def J(x):
        return sp.csr_matrix([[3 * x[0] ** 2, 1.0], [-1.0, 3 * x[1] ** 2]])

    a, _ = newton_solve(f, J, [0.5, 0.5])
    b, _ = newton_solve(f, J, [0.5, 0.5])
    assert np.array_equal(a, b)
    assert np.abs(f(a)).max() <= 1e-10


@pytest.mark.parametrize("kw", [{"newton_abs_tol": 0.0}, {"newton_max_iter": 0}, {"linear_rel_tol": -1.0},
                                {"linear_method": "magic"}, {"damping": 0.0}])
def test_config_validation(kw):
    with pytest.raises(ConfigurationError):
        SolverConfig(**kw)
