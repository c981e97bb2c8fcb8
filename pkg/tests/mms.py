"""Manufactured Biot solution with a frozen, smoothly varying phase field.

The exact fields and the matching sources are derived symbolically, so
this oracle shares nothing with the assembly code beyond the PDE itself.
"""
import numpy as np
import sympy as sym

from chbiot.assembly import BoundaryConditions, solve_biot
from chbiot.grid import Grid, GridSpec
from chbiot.model import MaterialParams, SourceConfig, State

X, Y = sym.symbols("x y")
PARAMS = MaterialParams(G0=10.0, G1=1.0, lam0=5.0, lam1=0.5, M0=2.0, M1=1.0,
                        kappa0=1.0, kappa1=0.1, alpha0=1.0, alpha1=0.6, xi=0.1)
DT = 1.0


def _smoothstep(q0, q1, phi):
    return q0 + phi**2 * (3 - 2 * phi) * (q1 - q0)


def build():
    P = PARAMS
    phi = sym.Rational(1, 2) + sym.Rational(3, 10) * sym.sin(sym.pi * X) * sym.cos(sym.pi * Y)
    ux = sym.Rational(1, 10) * sym.sin(sym.pi * X) * sym.sin(sym.pi * Y)
    uy = sym.Rational(1, 20) * sym.sin(2 * sym.pi * X) * sym.sin(sym.pi * Y)
    # p = 1 on the left, -1 on the right, zero normal flux top and bottom
    p = sym.cos(sym.pi * X) + X * (1 - X) * sym.cos(sym.pi * Y)
    G, lam, M, kappa, alpha = (
        _smoothstep(a, b, phi)
        for a, b in ((P.G0, P.G1), (P.lam0, P.lam1), (P.M0, P.M1), (P.kappa0, P.kappa1), (P.alpha0, P.alpha1))
    )
    div_u = sym.diff(ux, X) + sym.diff(uy, Y)
    theta = p / M + alpha * div_u
    eps = sym.Matrix([[sym.diff(ux, X), (sym.diff(ux, Y) + sym.diff(uy, X)) / 2],
                      [(sym.diff(ux, Y) + sym.diff(uy, X)) / 2, sym.diff(uy, Y)]])
    e = eps - P.xi * (phi - P.phi_ref) * sym.eye(2)
    sigma = 2 * G * e + lam * e.trace() * sym.eye(2) - alpha * p * sym.eye(2)
    f = [-(sym.diff(sigma[i, 0], X) + sym.diff(sigma[i, 1], Y)) for i in range(2)]
    # steady state: theta_old = theta
    S_f = -(sym.diff(kappa * sym.diff(p, X), X) + sym.diff(kappa * sym.diff(p, Y), Y))
    names = dict(phi=phi, ux=ux, uy=uy, p=p, theta=theta, fx=f[0], fy=f[1], S_f=S_f)
    return {k: sym.lambdify((X, Y), v, "numpy") for k, v in names.items()}


FUNCS = build()


def _ev(name, x, y):
    return np.broadcast_to(np.asarray(FUNCS[name](x, y), dtype=float), x.shape)


def solve(n):
    grid = Grid(GridSpec(n, n))
    x, y = grid.coords[:, 0], grid.coords[:, 1]
    ev = lambda k: _ev(k, x, y)  # noqa: E731
    old = State.from_arrays(grid, ev("phi"), theta=ev("theta"))
    sources = SourceConfig(f=np.column_stack([ev("fx"), ev("fy")]), S_f=ev("S_f"))
    bcs = BoundaryConditions(True, 1.0, -1.0)
    return solve_biot(old, old, PARAMS, sources, DT, bcs)


def l2_errors(state, order=3):
    """L2 errors of (u, p, theta) using a higher-order quadrature."""
    grid = state.grid
    pts = grid.at_quadrature(grid.coords, order)
    x, y = pts[..., 0], pts[..., 1]
    u_h = grid.at_quadrature(state.u.components, order)
    err_u = (u_h[..., 0] - _ev("ux", x, y)) ** 2 + (u_h[..., 1] - _ev("uy", x, y)) ** 2
    err_p = (grid.at_quadrature(state.p.values, order) - _ev("p", x, y)) ** 2
    err_t = (grid.at_quadrature(state.theta.values, order) - _ev("theta", x, y)) ** 2
    return tuple(np.sqrt(grid.integrate(e, order)) for e in (err_u, err_p, err_t))
