"""Finite element residuals and Jacobians for the coupled system.

The unknowns are split into two blocks that are solved in alternation:

* the Cahn-Hilliard block ``(phi, mu)``, nonlinear, ordered ``[phi | mu]``;
* the Biot block ``(u, p, theta)``, linear for frozen ``phi``, ordered
  ``[u (interleaved) | p | theta]``.

Time derivatives use backward Euler.  The phase-field coupling loads
(the phi-derivatives of the elastic and hydraulic energies) are evaluated
with the displacement and fluid content currently stored in ``state_new``,
i.e. the latest Biot iterate of the step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ContractError, SolverError, StepFailure
from .grid import Field, Grid
from .model import (
    MaterialParams,
    SourceConfig,
    State,
    check_states,
    coefficients,
    d2phi_elastic,
    d2phi_fluid,
    double_well_prime,
    double_well_second,
    dphi_elastic,
    dphi_fluid,
    strain_from_gradient,
)
from .solver import SolveReport, SolverConfig, linear_solve, newton_solve

QUAD_ORDER = 2


@dataclass(frozen=True)
class TimeScheme:
    dt: float = 1e-3
    coupling_sweeps: int = 2

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        if int(self.coupling_sweeps) != self.coupling_sweeps or self.coupling_sweeps < 1:
            raise ConfigurationError(f"coupling_sweeps must be >= 1, got {self.coupling_sweeps}")


@dataclass(frozen=True)
class BoundaryConditions:
    """Boundary data of the Biot block.

    ``p_left``/``p_right`` set Dirichlet pressures; ``None`` makes that side
    no-flux.  Top and bottom are always no-flux for the pressure, and phi/mu
    carry natural (no-flux) conditions on every side.
    """

    u_dirichlet: bool = True
    p_left: float | None = 1.0
    p_right: float | None = 0.0

    def __post_init__(self):
        for name in ("p_left", "p_right"):
            v = getattr(self, name)
            if v is not None and not np.isfinite(v):
                raise ConfigurationError(f"{name} must be finite, got {v}")

    @classmethod
    def no_flux(cls):
        return cls(u_dirichlet=True, p_left=None, p_right=None)


@dataclass
class DofMap:
    """Global index of each (node, component) pair of one block."""

    num_nodes: int
    components: tuple  # names, in block order
    offsets: dict
    strides: dict

    def index(self, component, nodes):
        return self.offsets[component] + self.strides[component] * np.asarray(nodes)

    @property
    def size(self):
        return sum(2 if c == "u" else 1 for c in self.components) * self.num_nodes


@dataclass
class DiscreteSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    ordering: np.ndarray | None = None  # fill-reducing symmetric permutation


def ch_dofmap(num_nodes):
    return DofMap(num_nodes, ("phi", "mu"), {"phi": 0, "mu": num_nodes}, {"phi": 1, "mu": 1})


def biot_dofmap(num_nodes):
    return DofMap(
        num_nodes,
        ("u", "p", "theta"),
        {"u": 0, "ux": 0, "uy": 1, "p": 2 * num_nodes, "theta": 3 * num_nodes},
        {"u": 2, "ux": 2, "uy": 2, "p": 1, "theta": 1},
    )


# -- element tables ---------------------------------------------------------

class _Tables:
    """Per-grid element arrays, independent of the state."""

    def __init__(self, grid: Grid, order: int):
        el = grid.element(order)
        self.w = el.weights
        self.N = el.N
        self.dN = el.dN
        nq = len(self.w)
        self.mass = np.einsum("qa,qb->qab", el.N, el.N)
        self.stiff = np.einsum("qak,qbk->qab", el.dN, el.dN)
        # strain of the vector basis function N_a e_i, local dof A = 2a + i
        E = np.zeros((nq, 8, 2, 2))
        for a in range(4):
            for i in range(2):
                g = np.zeros((nq, 2, 2))
                g[:, i, :] = el.dN[:, a, :]
                E[:, 2 * a + i] = 0.5 * (g + np.swapaxes(g, 1, 2))
        self.E = E
        self.div = E[:, :, 0, 0] + E[:, :, 1, 1]
        self.EE = np.einsum("qAij,qBij->qAB", E, E)
        self.DD = np.einsum("qA,qB->qAB", self.div, self.div)
        self.DN = np.einsum("qA,qb->qAb", self.div, el.N)
        # vector basis values: Nv[q, A, i]
        Nv = np.zeros((nq, 8, 2))
        for a in range(4):
            for i in range(2):
                Nv[:, 2 * a + i, i] = el.N[:, a]
        self.Nv = Nv

        cells = grid.cells
        n = grid.num_nodes
        self.ch_dofs = np.hstack([cells, n + cells])
        u_dofs = np.stack([2 * cells, 2 * cells + 1], axis=-1).reshape(len(cells), 8)
        self.biot_dofs = np.hstack([u_dofs, 2 * n + cells, 3 * n + cells])
        self.u_dofs = u_dofs


@lru_cache(maxsize=16)
def _tables(grid: Grid, order: int) -> _Tables:
    return _Tables(grid, order)


def _assemble_matrix(dofs, element_mats, size):
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    A = sp.coo_matrix((element_mats.ravel(), (rows, cols)), shape=(size, size))
    return A.tocsr()


def _assemble_vector(dofs, element_vecs, size):
    return np.bincount(dofs.ravel(), weights=element_vecs.ravel(), minlength=size)


def _apply_constraints(A, idx):
    """Replace rows ``idx`` of ``A`` by unit rows."""
    if len(idx) == 0:
        return A.tocsr()
    mask = np.ones(A.shape[0])
    mask[idx] = 0.0
    unit = np.zeros(A.shape[0])
    unit[idx] = 1.0
    A = sp.diags(mask) @ A + sp.diags(unit)
    A = A.tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def _nodal(value, grid, ncomp=1):
    """Broadcast a constant or per-node source to an (N,) or (N, 2) array."""
    arr = np.asarray(value.values if isinstance(value, Field) else value, dtype=float)
    shape = (grid.num_nodes,) if ncomp == 1 else (grid.num_nodes, ncomp)
    if arr.size == 1 or arr.shape == (ncomp,):
        return np.broadcast_to(arr.reshape(-1) if ncomp > 1 else arr.reshape(()), shape)
    return arr.reshape(shape)


def _phi_values(phi, grid):
    if isinstance(phi, Field):
        grid.check_same(phi.grid)
        return phi.values
    arr = np.asarray(phi, dtype=float)
    if arr.shape != (grid.num_nodes,):
        raise ContractError("phi_frozen must be a nodal field on the same grid")
    return arr


# -- Cahn-Hilliard block ----------------------------------------------------

def _ch_quadrature(state_new, params, order):
    grid = state_new.grid
    phi_q = grid.at_quadrature(state_new.phi.values, order)
    grad_u = grid.grad_at_quadrature(state_new.u.components, order)  # (c, q, 2, 2)
    strain = strain_from_gradient(grad_u)
    div_u = strain[..., 0, 0] + strain[..., 1, 1]
    theta_q = grid.at_quadrature(state_new.theta.values, order)
    return phi_q, strain, div_u, theta_q


def residual_ch(state_new, state_old, params: MaterialParams, sources: SourceConfig, dt,
                order=QUAD_ORDER):
    """Weak residual of the phase-field and chemical-potential equations.

    Returns a vector ordered ``[phi rows | mu rows]``.
    """
    check_states(state_new, state_old)
    grid = state_new.grid
    t = _tables(grid, order)
    n = grid.num_nodes
    phi_q, strain, div_u, theta_q = _ch_quadrature(state_new, params, order)
    dphi_q = grid.at_quadrature(state_new.phi.values - state_old.phi.values, order)
    R_q = grid.at_quadrature(_nodal(sources.R, grid), order)
    gphi = grid.grad_at_quadrature(state_new.phi.values, order)
    gmu = grid.grad_at_quadrature(state_new.mu.values, order)
    mu_q = grid.at_quadrature(state_new.mu.values, order)

    w = t.w
    g, ell = params.gamma, params.ell
    r_phi = np.einsum("q,cq,qa->ca", w, dphi_q / dt - R_q, t.N) + np.einsum(
        "q,cqk,qak->ca", w, params.mobility * gmu, t.dN
    )
    load = (g / ell) * double_well_prime(phi_q) + dphi_elastic(phi_q, strain, params) + dphi_fluid(
        phi_q, theta_q, div_u, params
    )
    r_mu = np.einsum("q,cq,qa->ca", w, mu_q - load, t.N) - np.einsum(
        "q,cqk,qak->ca", w, g * ell * gphi, t.dN
    )
    return _assemble_vector(t.ch_dofs, np.hstack([r_phi, r_mu]), 2 * n)


def jacobian_ch(state_new, state_old, params: MaterialParams, sources: SourceConfig, dt,
                order=QUAD_ORDER) -> DiscreteSystem:
    """Exact derivative of :func:`residual_ch` with respect to ``(phi, mu)``.

    The right-hand side of the returned system is ``-residual``.
    """
    check_states(state_new, state_old)
    grid = state_new.grid
    t = _tables(grid, order)
    n = grid.num_nodes
    phi_q, strain, div_u, theta_q = _ch_quadrature(state_new, params, order)
    g, ell = params.gamma, params.ell
    w = t.w
    nc = grid.num_cells
    react = (g / ell) * double_well_second(phi_q) + d2phi_elastic(phi_q, strain, params) + d2phi_fluid(
        phi_q, theta_q, div_u, params
    )
    K = np.einsum("q,qab->ab", w, t.stiff)
    Mloc = np.einsum("q,qab->ab", w, t.mass)
    el = np.zeros((nc, 8, 8))
    el[:, :4, :4] = Mloc / dt
    el[:, :4, 4:] = params.mobility * K
    el[:, 4:, 4:] = Mloc
    el[:, 4:, :4] = -g * ell * K - np.einsum("q,cq,qab->cab", w, react, t.mass)
    A = _assemble_matrix(t.ch_dofs, el, 2 * n)
    rhs = -residual_ch(state_new, state_old, params, sources, dt, order)
    order = grid.dissection_order
    return DiscreteSystem(A, rhs, ch_dofmap(n), ordering=np.column_stack([order, n + order]).ravel())


# -- Biot block -------------------------------------------------------------

def biot_constraints(grid: Grid, bcs: BoundaryConditions):
    """Constrained global indices of the Biot block and their prescribed values."""
    n = grid.num_nodes
    idx, vals = [], []
    if bcs.u_dirichlet:
        b = grid.boundary_nodes
        idx += [2 * b, 2 * b + 1]
        vals += [np.zeros(2 * len(b))]
    pnodes = {}
    # left/right order fixes the corner values deterministically
    if bcs.p_right is not None:
        for node in grid.boundary["right"]:
            pnodes[int(node)] = bcs.p_right
    if bcs.p_left is not None:
        for node in grid.boundary["left"]:
            pnodes[int(node)] = bcs.p_left
    if pnodes:
        nodes = np.array(sorted(pnodes))
        idx.append(2 * n + nodes)
        vals.append(np.array([pnodes[k] for k in nodes]))
    if not idx:
        return np.zeros(0, dtype=int), np.zeros(0)
    return np.concatenate(idx), np.concatenate(vals)


def biot_system(state_old, params: MaterialParams, sources: SourceConfig, dt, phi_frozen,
                bcs: BoundaryConditions, order=QUAD_ORDER) -> DiscreteSystem:
    """Linear system ``A x = b`` for ``x = [u | p | theta]`` at frozen ``phi``.

    Dirichlet rows are replaced by unit rows carrying the prescribed value.
    """
    grid = state_old.grid
    t = _tables(grid, order)
    n = grid.num_nodes
    phi = _phi_values(phi_frozen, grid)
    phi_q = grid.at_quadrature(phi, order)
    G, lam, M, kappa, alpha = coefficients(phi_q, params)
    w = t.w
    nc = grid.num_cells

    el = np.zeros((nc, 16, 16))
    el[:, :8, :8] = np.einsum("q,cq,qAB->cAB", w, 2.0 * G, t.EE) + np.einsum(
        "q,cq,qAB->cAB", w, lam, t.DD
    )
    el[:, :8, 8:12] = -np.einsum("q,cq,qAb->cAb", w, alpha, t.DN)
    el[:, 8:12, 8:12] = np.einsum("q,cq,qab->cab", w, kappa, t.stiff)
    el[:, 8:12, 12:] = np.einsum("q,qab->ab", w, t.mass) / dt
    el[:, 12:, 8:12] = np.einsum("q,qab->ab", w, t.mass)
    el[:, 12:, 12:] = -np.einsum("q,cq,qab->cab", w, M, t.mass)
    el[:, 12:, :8] = np.einsum("q,cq,qbA->cbA", w, M * alpha, np.swapaxes(t.DN, 1, 2))

    s = params.xi * (phi_q - params.phi_ref)
    f_q = grid.at_quadrature(_nodal(sources.f, grid, 2), order)  # (c, q, 2)
    b_u = np.einsum("q,cq,qA->cA", w, (2.0 * G + 2.0 * lam) * s, t.div) + np.einsum(
        "q,cqi,qAi->cA", w, f_q, t.Nv
    )
    theta_old_q = grid.at_quadrature(state_old.theta.values, order)
    S_q = grid.at_quadrature(_nodal(sources.S_f, grid), order)
    b_p = np.einsum("q,cq,qa->ca", w, theta_old_q / dt + S_q, t.N)
    b_el = np.hstack([b_u, b_p, np.zeros((nc, 4))])

    size = 4 * n
    A = _assemble_matrix(t.biot_dofs, el, size)
    b = _assemble_vector(t.biot_dofs, b_el, size)
    idx, vals = biot_constraints(grid, bcs)
    A = _apply_constraints(A, idx)
    b[idx] = vals
    order = grid.dissection_order
    perm = np.column_stack([2 * order, 2 * order + 1, 2 * n + order, 3 * n + order]).ravel()
    return DiscreteSystem(A, b, biot_dofmap(n), idx, ordering=perm)


def biot_vector(state) -> np.ndarray:
    return np.concatenate([state.u.values, state.p.values, state.theta.values])


def split_biot(x, num_nodes):
    n = num_nodes
    return x[: 2 * n], x[2 * n: 3 * n], x[3 * n:]


def residual_biot(state_new, state_old, params, sources, dt, phi_frozen, bcs=None,
                  order=QUAD_ORDER):
    """Residual of momentum, fluid-mass and closure equations, ordered ``[u | p | theta]``.

    Constrained rows hold ``value - prescribed``.
    """
    check_states(state_new, state_old)
    bcs = BoundaryConditions() if bcs is None else bcs
    system = biot_system(state_old, params, sources, dt, phi_frozen, bcs, order)
    return system.matrix @ biot_vector(state_new) - system.rhs


def jacobian_biot(state_new, state_old, params, sources, dt, phi_frozen, bcs=None,
                  order=QUAD_ORDER) -> DiscreteSystem:
    """The Biot block is linear; its Jacobian is the system matrix."""
    check_states(state_new, state_old)
    bcs = BoundaryConditions() if bcs is None else bcs
    system = biot_system(state_old, params, sources, dt, phi_frozen, bcs, order)
    system.rhs = system.rhs - system.matrix @ biot_vector(state_new)
    return system


def integrate_nodal(grid: Grid, values, order=QUAD_ORDER) -> float:
    return grid.integrate(grid.at_quadrature(values, order), order)


# -- time step --------------------------------------------------------------

@dataclass
class StepReport:
    """Newton logs of one time step, one entry per coupling sweep."""

    sweeps: list = field(default_factory=list)
    biot_residuals: list = field(default_factory=list)

    @property
    def newton_iters(self) -> int:
        return sum(r.newton_iters for r in self.sweeps)

    @property
    def max_sweep_iters(self) -> int:
        return max((r.newton_iters for r in self.sweeps), default=0)


def solve_ch(state, state_old, params, sources, dt, config=None, order=QUAD_ORDER):
    """Newton solve of the Cahn-Hilliard block with (u, p, theta) held at ``state``."""
    n = state.grid.num_nodes

    def unpack(x):
        return state.with_arrays(phi=x[:n], mu=x[n:])

    x0 = np.concatenate([state.phi.values, state.mu.values])
    x, report = newton_solve(
        lambda x: residual_ch(unpack(x), state_old, params, sources, dt, order),
        lambda x: jacobian_ch(unpack(x), state_old, params, sources, dt, order),
        x0,
        config,
    )
    return unpack(x), report


def solve_biot(state, state_old, params, sources, dt, bcs, config=None, order=QUAD_ORDER,
               info=None):
    """Linear Biot solve with phi frozen at ``state.phi``."""
    system = biot_system(state_old, params, sources, dt, state.phi, bcs, order)
    x = linear_solve(system, config, info)
    u, p, theta = split_biot(x, state.grid.num_nodes)
    return state.with_arrays(u=u, p=p, theta=theta)


def step(state_old, params: MaterialParams, sources: SourceConfig, bcs: BoundaryConditions,
         scheme: TimeScheme, config: SolverConfig | None = None, order=QUAD_ORDER):
    """Advance one time step by staggered Cahn-Hilliard / Biot sweeps.

    Each sweep solves the Cahn-Hilliard block by Newton with the current
    Biot iterate frozen, then the linear Biot block with phi frozen at the
    new iterate.  Returns ``(state_new, StepReport)``.
    """
    if not state_old.is_finite():
        raise ContractError("state_old contains non-finite values")
    config = config or SolverConfig()
    report = StepReport()
    current = state_old
    for sweep in range(scheme.coupling_sweeps):
        try:
            current, rep = solve_ch(current, state_old, params, sources, scheme.dt, config, order)
            report.sweeps.append(rep)
            info = {}
            current = solve_biot(current, state_old, params, sources, scheme.dt, bcs, config,
                                 order, info)
            report.biot_residuals.append(info.get("residual", 0.0))
        except SolverError as exc:
            log = report.sweeps + [getattr(exc, "report", None)]
            raise StepFailure(f"sweep {sweep + 1}: {exc}", log=log, cause=exc) from exc
    return current, report
