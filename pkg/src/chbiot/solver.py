"""Sparse linear solves and Newton iteration with convergence bookkeeping."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConfigurationError,
    LinearSolverError,
    NewtonConvergenceError,
    NewtonDivergenceError,
)

DIRECT_LIMIT = 200_000
ABS_FLOOR = 1e-14  # residual bound when b is zero or round-off sized


@dataclass(frozen=True)
class SolverConfig:
    newton_abs_tol: float = 1e-6
    newton_max_iter: int = 25
    linear_rel_tol: float = 1e-10
    linear_max_iter: int = 1000
    linear_method: str = "auto"  # "direct", "iterative" or "auto"
    damping: float = 1.0

    def __post_init__(self):
        for name in ("newton_abs_tol", "linear_rel_tol"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigurationError(f"{name} must be > 0, got {v}")
        for name in ("newton_max_iter", "linear_max_iter"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigurationError(f"{name} must be an integer >= 1, got {v}")
        if self.linear_method not in ("direct", "iterative", "auto"):
            raise ConfigurationError(f"unknown linear_method {self.linear_method!r}")
        if not 0 < self.damping <= 1:
            raise ConfigurationError(f"damping must lie in (0, 1], got {self.damping}")


@dataclass
class SolveReport:
    newton_iters: int = 0
    increment_norms: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    linear_iters: list = field(default_factory=list)
    linear_residuals: list = field(default_factory=list)
    wall_time: float = 0.0
    converged: bool = False


def _residual_ok(A, x, b, rel_tol):
    r = np.linalg.norm(A @ x - b)
    nb = np.linalg.norm(b)
    bound = max(rel_tol * nb, ABS_FLOOR)
    return r, r <= bound


def linear_solve(system, config: SolverConfig | None = None, info=None):
    """Solve ``system.matrix @ x = system.rhs``.

    Enforces ``||A x - b|| <= max(linear_rel_tol * ||b||, 1e-14)``, i.e. the
    absolute floor applies when ``b`` is zero or round-off sized; a direct solve that misses the bound gets up to three
    steps of iterative refinement before giving up.

    ``info``, if given, is a dict that receives ``iterations`` and
    ``residual``.
    """
    config = config or SolverConfig()
    A = sp.csr_matrix(system.matrix)
    b = np.asarray(system.rhs, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.size:
        raise LinearSolverError(f"incompatible system: matrix {A.shape}, rhs {b.shape}")
    method = config.linear_method
    if method == "auto":
        method = "direct" if A.shape[0] < DIRECT_LIMIT else "iterative"
    history = []
    if method == "direct":
        ordering = getattr(system, "ordering", None)
        result = None
        if ordering is not None:
            result = _direct(A, b, config, history, ordering)
        if result is None:
            result = _direct(A, b, config, history, None)
        if result is None:
            raise LinearSolverError(f"residual {history[-1]:.3e} above tolerance", history)
        x, iterations = result
    else:
        x, iterations = _krylov(A, b, config, history)
        r, ok = _residual_ok(A, x, b, config.linear_rel_tol)
        if not ok:
            raise LinearSolverError(f"GMRES stalled at residual {r:.3e}", history)
    if info is not None:
        info["iterations"] = iterations
        info["residual"] = history[-1] if history else 0.0
    return x


class _PermutedLU:
    """Static-pivoting LU in a supplied symmetric ordering."""

    def __init__(self, A, perm):
        self.perm = np.asarray(perm)
        B = A[self.perm][:, self.perm].tocsc()
        self.lu = spla.splu(
            B, permc_spec="NATURAL", diag_pivot_thresh=0.0, options={"SymmetricMode": True}
        )

    def solve(self, b):
        x = np.empty_like(b)
        x[self.perm] = self.lu.solve(b[self.perm])
        return x


def _direct(A, b, config, history, ordering):
    """Factor and solve with up to three refinement steps; None if the bound is missed."""
    try:
        lu = _PermutedLU(A, ordering) if ordering is not None else spla.splu(A.tocsc())
    except RuntimeError as exc:
        if ordering is not None:
            return None
        raise LinearSolverError(f"factorization failed: {exc}") from exc
    x = lu.solve(b)
    for k in range(4):
        if not np.all(np.isfinite(x)):
            if ordering is not None:
                return None
            raise LinearSolverError("non-finite solution", history)
        r, ok = _residual_ok(A, x, b, config.linear_rel_tol)
        history.append(r)
        if ok:
            return x, k + 1
        x = x + lu.solve(b - A @ x)
    return None


def _krylov(A, b, config, history):
    try:
        ilu = spla.spilu(A.tocsc(), drop_tol=1e-5, fill_factor=20)
    except RuntimeError as exc:
        raise LinearSolverError(f"incomplete factorization failed: {exc}") from exc
    M = spla.LinearOperator(A.shape, ilu.solve)
    count = [0]

    def callback(res):
        count[0] += 1
        history.append(float(res))

    x, status = spla.gmres(
        A, b, M=M, rtol=config.linear_rel_tol, atol=0.0, restart=100,
        maxiter=config.linear_max_iter, callback=callback, callback_type="pr_norm",
    )
    if status != 0:
        raise LinearSolverError(f"GMRES did not converge (status {status})", history)
    return x, count[0]


def newton_solve(residual_fn, jacobian_fn, x0, config: SolverConfig | None = None):
    """Newton iteration stopped on the max-norm of the increment.

    ``jacobian_fn(x)`` may return a sparse matrix or an object with a
    ``matrix`` attribute.  Returns ``(x, report)``.
    """
    config = config or SolverConfig()
    report = SolveReport()
    start = time.perf_counter()
    x = np.array(x0, dtype=float, copy=True)
    for k in range(config.newton_max_iter):
        r = np.asarray(residual_fn(x), dtype=float)
        rnorm = float(np.max(np.abs(r))) if r.size else 0.0
        report.residual_norms.append(rnorm)
        if not np.isfinite(rnorm):
            report.wall_time = time.perf_counter() - start
            raise NewtonDivergenceError(f"non-finite residual at iteration {k}", report)
        J = jacobian_fn(x)
        info = {}
        try:
            dx = linear_solve(
                _System(getattr(J, "matrix", J), -r, getattr(J, "ordering", None)), config, info
            )
        except LinearSolverError:
            report.wall_time = time.perf_counter() - start
            raise
        x = x + config.damping * dx
        norm = float(np.max(np.abs(dx))) if dx.size else 0.0
        report.newton_iters = k + 1
        report.increment_norms.append(norm)
        report.linear_iters.append(info.get("iterations", 0))
        report.linear_residuals.append(info.get("residual", 0.0))
        if not np.isfinite(norm):
            report.wall_time = time.perf_counter() - start
            raise NewtonDivergenceError(f"non-finite increment at iteration {k}", report)
        if norm <= config.newton_abs_tol:
            report.converged = True
            report.wall_time = time.perf_counter() - start
            return x, report
    report.wall_time = time.perf_counter() - start
    raise NewtonConvergenceError(
        f"no convergence in {config.newton_max_iter} iterations "
        f"(last increment {report.increment_norms[-1]:.3e})",
        report,
    )


@dataclass
class _System:
    matrix: object
    rhs: np.ndarray
    ordering: object = None
