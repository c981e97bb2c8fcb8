"""Fast invariant checks behind ``chbiot selftest``."""
from __future__ import annotations

import math

import numpy as np

from .assembly import (
    BoundaryConditions,
    TimeScheme,
    integrate_nodal,
    jacobian_ch,
    residual_ch,
    step,
)
from .diagnostics import WIDTH_FACTOR, tanh_profile, width_from_samples
from .grid import Grid, GridSpec, reference_shape
from .model import (
    MaterialParams,
    SourceConfig,
    State,
    double_well,
    double_well_prime,
    dphi_elastic,
    dphi_fluid,
    elastic_energy_density,
    fluid_energy_density,
)


def random_pointwise_states(rng, n):
    """Random phases away from the clamp kinks, O(1) strains and fluid contents."""
    phi = rng.uniform(0.05, 0.95, n)
    A = rng.normal(scale=0.3, size=(n, 2, 2))
    strain = 0.5 * (A + np.swapaxes(A, 1, 2))
    theta = rng.normal(scale=0.5, size=n)
    div_u = rng.normal(scale=0.5, size=n)
    params = MaterialParams(
        xi=0.1, G0=rng.uniform(1, 100), G1=rng.uniform(1, 100), lam0=rng.uniform(0, 20),
        lam1=rng.uniform(0, 20), M0=rng.uniform(0.5, 2), M1=rng.uniform(0.5, 2),
        alpha0=rng.uniform(0.5, 1), alpha1=rng.uniform(0.5, 1),
    )
    return phi, strain, theta, div_u, params


def variational_derivative_error(n=1000, seed=0, h=1e-6):
    """Worst relative gap between analytic and central-difference phi-derivatives."""
    rng = np.random.default_rng(seed)
    phi, strain, theta, div_u, params = random_pointwise_states(rng, n)
    fd_e = (elastic_energy_density(phi + h, strain, params)
            - elastic_energy_density(phi - h, strain, params)) / (2 * h)
    fd_f = (fluid_energy_density(phi + h, theta, div_u, params)
            - fluid_energy_density(phi - h, theta, div_u, params)) / (2 * h)
    an_e = dphi_elastic(phi, strain, params)
    an_f = dphi_fluid(phi, theta, div_u, params)

    def rel(a, b):
        return np.abs(a - b) / np.maximum(np.abs(b), 1.0)

    return float(rel(an_e, fd_e).max()), float(rel(an_f, fd_f).max())


def random_ch_state(n=8, seed=1):
    grid = Grid(GridSpec(n, n))
    rng = np.random.default_rng(seed)
    N = grid.num_nodes
    state = State.from_arrays(
        grid, rng.uniform(0.1, 0.9, N), rng.normal(size=N), rng.normal(scale=0.05, size=2 * N),
        rng.normal(scale=0.1, size=N), rng.normal(scale=0.1, size=N),
    )
    old = state.with_arrays(phi=rng.uniform(0.1, 0.9, N))
    return state, old


def jacobian_fd_error(n=8, seed=1, eps=1e-7, dt=1e-3):
    """Relative error of the CH Jacobian against a central directional difference."""
    state, old = random_ch_state(n, seed)
    params, sources = MaterialParams(), SourceConfig()
    N = state.grid.num_nodes
    rng = np.random.default_rng(seed + 100)
    v = rng.normal(size=2 * N)
    x = np.concatenate([state.phi.values, state.mu.values])

    def res(z):
        return residual_ch(state.with_arrays(phi=z[:N], mu=z[N:]), old, params, sources, dt)

    fd = (res(x + eps * v) - res(x - eps * v)) / (2 * eps)
    J = jacobian_ch(state, old, params, sources, dt).matrix
    return float(np.linalg.norm(J @ v - fd) / np.linalg.norm(fd))


def conservation_drift(steps=5, n=12):
    grid = Grid(GridSpec(n, n))
    x, y = grid.coords[:, 0], grid.coords[:, 1]
    phi = 0.5 + 0.3 * np.cos(math.pi * x) * np.cos(math.pi * y)
    theta = 0.2 + 0.1 * np.sin(math.pi * x)
    state = State.from_arrays(grid, phi, theta=theta)
    params = MaterialParams(ell=0.2)
    phi0 = integrate_nodal(grid, state.phi.values)
    th0 = integrate_nodal(grid, state.theta.values)
    worst_phi = worst_th = 0.0
    for _ in range(steps):
        state, _ = step(state, params, SourceConfig(), BoundaryConditions.no_flux(), TimeScheme())
        worst_phi = max(worst_phi, abs(integrate_nodal(grid, state.phi.values) - phi0) / abs(phi0))
        worst_th = max(worst_th, abs(integrate_nodal(grid, state.theta.values) - th0) / abs(th0))
    return worst_phi, worst_th


def checks():
    """Yield ``(name, passed, detail)`` for each invariant."""
    rng = np.random.default_rng(0)
    xi = rng.uniform(-1, 1, (100, 2))
    N, _ = reference_shape(xi)
    err = float(np.abs(N.sum(axis=1) - 1).max())
    yield "partition of unity", err <= 1e-14, f"max error {err:.2e}"

    grid = Grid(GridSpec(5, 7, 0.0, 0.0, 1.0, 2.0))
    lin = lambda x, y: 0.3 + 1.7 * x - 0.6 * y  # noqa: E731
    vals = grid.at_quadrature(lin(grid.coords[:, 0], grid.coords[:, 1]))
    pts = grid.at_quadrature(grid.coords)
    err = float(np.abs(vals - lin(pts[..., 0], pts[..., 1])).max())
    yield "linear reproduction", err <= 1e-13, f"max error {err:.2e}"

    p = rng.uniform(-0.5, 1.5, 100)
    h = 1e-6
    err = float(np.abs((double_well(p + h) - double_well(p - h)) / (2 * h) - double_well_prime(p)).max())
    yield "double-well derivative", err <= 1e-9, f"max error {err:.2e}"

    e_el, e_fl = variational_derivative_error()
    yield "variational derivatives", max(e_el, e_fl) <= 1e-6, f"elastic {e_el:.2e}, fluid {e_fl:.2e}"

    err = jacobian_fd_error()
    yield "Cahn-Hilliard Jacobian", err <= 1e-5, f"relative error {err:.2e}"

    worst = 0.0
    xs = np.linspace(0.0, 1.0, 2_000_001)
    for ell in (0.1, 0.05, 0.025):
        w = width_from_samples(xs, tanh_profile(xs - 0.5, ell))
        worst = max(worst, abs(w / ell - WIDTH_FACTOR))
    yield "width scaling", worst <= 1e-9, f"max deviation {worst:.2e}"

    d_phi, d_th = conservation_drift()
    yield "mass conservation", max(d_phi, d_th) <= 1e-10, f"phi {d_phi:.2e}, theta {d_th:.2e}"


def run_selftest(out=print) -> bool:
    ok = True
    for name, passed, detail in checks():
        out(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok &= passed
    return ok
