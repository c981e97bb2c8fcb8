"""Interface geometry, energy ledger and sharp-interface residuals.

Conventions: the interface normal ``n`` points from phase 0 into phase 1,
the ``+`` side of every jump is the phase-1 side, and the mean curvature
``H`` is positive for a disk of phase 1 (``H = -div(grad phi / |grad phi|)``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DiagnosticError, OutOfDomainError
from .grid import Field, sample_line
from .model import (
    MaterialParams,
    State,
    coefficients,
    elastic_energy_density,
    fluid_energy_density,
    interface_energy,
    stiffness_apply,
    strain_from_gradient,
    swelling,
)

WIDTH_FACTOR = 2.0 * math.sqrt(2.0) * math.atanh(0.8)  # width_19 / ell of the tanh profile
GT_COEFFICIENT = 1.0 / (3.0 * math.sqrt(2.0))
SAMPLES_PER_CELL = 16


def default_offset(ell):
    """Probe offset where the equilibrium profile is within 1% of a pure phase."""
    return math.sqrt(2.0) * ell * math.atanh(0.98)


def tanh_profile(r, ell):
    return 0.5 * (1.0 + np.tanh(np.asarray(r) / (math.sqrt(2.0) * ell)))


# -- scan-line geometry -----------------------------------------------------

def _samples(phi: Field, y, n=None):
    if n is None:
        n = SAMPLES_PER_CELL * phi.grid.nx + 1
    return sample_line(phi, y, n)


def _crossings(xs, values, level):
    below = values < level
    idx = np.nonzero(below[:-1] != below[1:])[0]
    d0 = values[idx] - level
    d1 = values[idx + 1] - level
    return xs[idx] + d0 / (d0 - d1) * (xs[idx + 1] - xs[idx])


def _single_crossing(xs, values, level):
    found = _crossings(xs, values, level)
    if len(found) != 1:
        raise DiagnosticError(f"expected one crossing of phi = {level}, found {len(found)}")
    return float(found[0])


def locate_interface(phi: Field, y, n=None) -> float:
    """x position where the cross-section at height ``y`` crosses 0.5."""
    xs, values = _samples(phi, y, n)
    return _single_crossing(xs, values, 0.5)


def width_from_samples(xs, values) -> float:
    """Distance between the 0.1 and 0.9 crossings of a sampled profile."""
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    return abs(_single_crossing(xs, values, 0.9) - _single_crossing(xs, values, 0.1))


def interface_width(phi: Field, y, n=None) -> float:
    """Distance between the 0.1 and 0.9 crossings on the scan line."""
    return width_from_samples(*_samples(phi, y, n))


def profile_fit(phi: Field, y, ell, n=None) -> float:
    """RMS deviation of the cross-section from the equilibrium tanh profile.

    The profile is centred at the measured 0.5 crossing and oriented so
    that phase 1 lies on the side where phi is larger.
    """
    xs, values = _samples(phi, y, n)
    x_half = _single_crossing(xs, values, 0.5)
    sign = 1.0 if values[-1] >= values[0] else -1.0
    exact = tanh_profile(sign * (xs - x_half), ell)
    length = xs[-1] - xs[0]
    return float(math.sqrt(np.trapezoid((values - exact) ** 2, xs) / length))


# -- curvature --------------------------------------------------------------

def _unit_normal_field(phi: Field):
    grad = phi.grid.nodal_gradient(phi.values)
    norm = np.linalg.norm(grad, axis=-1)
    safe = np.where(norm > 1e-12, norm, 1.0)
    return grad, np.where(norm[:, None] > 1e-12, grad / safe[:, None], 0.0)


def curvature_at_interface(phi: Field, point) -> float:
    """Mean curvature from the level-set formula with nodal gradient recovery."""
    grid = phi.grid
    pt = np.asarray(point, dtype=float).reshape(1, 2)
    grad, unit = _unit_normal_field(phi)
    g = grid.evaluate(grad, pt)[0]
    if np.linalg.norm(g) <= 1e-8:
        raise DiagnosticError("phase-field gradient vanishes at the evaluation point")
    jac = grid.nodal_gradient(unit)  # (N, 2, 2): d n_i / d x_j
    div = jac[:, 0, 0] + jac[:, 1, 1]
    return float(-grid.evaluate(div, pt)[0])


def interface_normal(phi: Field, point):
    g = phi.grid.evaluate(phi.grid.nodal_gradient(phi.values), np.reshape(point, (1, 2)))[0]
    norm = np.linalg.norm(g)
    if norm <= 1e-8:
        raise DiagnosticError("phase-field gradient vanishes at the evaluation point")
    return g / norm


# -- reports ----------------------------------------------------------------

@dataclass
class InterfaceReport:
    x_half: float
    width_19: float
    profile_l2: float
    y: float
    normal: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))
    v_n: float = 0.0
    H: float = 0.0


@dataclass
class EnergyBreakdown:
    e_interface: float
    e_elastic: float
    e_fluid: float
    e_total: float


@dataclass
class SideTrace:
    """One-sided values on the ``phase`` side of the interface."""

    phase: int
    grad_u: np.ndarray  # grad_u[i, j] = d u_i / d x_j
    p: float
    theta: float
    u: np.ndarray = field(default_factory=lambda: np.zeros(2))
    grad_p: np.ndarray = field(default_factory=lambda: np.zeros(2))
    grad_mu: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def strain(self):
        return strain_from_gradient(np.asarray(self.grad_u, dtype=float))

    @property
    def div_u(self):
        return float(self.grad_u[0][0] + self.grad_u[1][1])


@dataclass
class InterfaceTraces:
    plus: SideTrace
    minus: SideTrace
    normal: np.ndarray

    def swapped(self):
        return InterfaceTraces(self.minus, self.plus, self.normal)


@dataclass
class JumpReport:
    jump_p: float
    jump_u: float
    jump_normal_stress: float
    flux_balance_residual: float
    flow_balance_residual: float
    gibbs_thomson_residual: float
    x_half: float = float("nan")
    v_n: float = 0.0
    H: float = 0.0
    mu_interface: float = 0.0
    offset: float = 0.0
    probes: tuple = ()


def _side_stress(side: SideTrace, params: MaterialParams):
    """Total stress ``C_i (eps - T_i) - alpha_i p I`` on one side."""
    phase = float(side.phase)
    e = side.strain - swelling(phase, params)
    alpha = coefficients(phase, params)[4]
    return stiffness_apply(phase, e, params) - alpha * side.p * np.eye(2), e


def _side_energy(side: SideTrace, params: MaterialParams):
    phase = float(side.phase)
    return float(
        elastic_energy_density(phase, side.strain, params)
        + fluid_energy_density(phase, side.theta, side.div_u, params)
    )


def normal_stress(side: SideTrace, params: MaterialParams, normal):
    sigma, _ = _side_stress(side, params)
    return sigma @ np.asarray(normal, dtype=float)


def gibbs_thomson_rhs(traces: InterfaceTraces, params: MaterialParams, H) -> float:
    """Interfacial chemical potential predicted by the generalized Gibbs-Thomson law.

    Curvature term plus the jumps of the stored energy, of
    ``grad_u n . sigma n`` and of ``p theta``, each taken ``plus - minus``.
    """
    n = np.asarray(traces.normal, dtype=float)

    def side_terms(side):
        sigma, _ = _side_stress(side, params)
        work = float((np.asarray(side.grad_u, dtype=float) @ n) @ (sigma @ n))
        return _side_energy(side, params), work, side.p * side.theta

    ep, wp, ptp = side_terms(traces.plus)
    em, wm, ptm = side_terms(traces.minus)
    return params.gamma * H * GT_COEFFICIENT + (ep - em) - (wp - wm) - (ptp - ptm)


def energy_breakdown(state: State, params: MaterialParams, order=2) -> EnergyBreakdown:
    grid = state.grid
    phi_q = grid.at_quadrature(state.phi.values, order)
    strain = strain_from_gradient(grid.grad_at_quadrature(state.u.components, order))
    div_u = strain[..., 0, 0] + strain[..., 1, 1]
    theta_q = grid.at_quadrature(state.theta.values, order)
    e_int = interface_energy(state.phi, params, order)
    e_el = grid.integrate(elastic_energy_density(phi_q, strain, params), order)
    e_fl = grid.integrate(fluid_energy_density(phi_q, theta_q, div_u, params), order)
    return EnergyBreakdown(e_int, e_el, e_fl, e_int + e_el + e_fl)


def _traces_at(state: State, point, phase):
    grid = state.grid
    pt = np.reshape(point, (1, 2))
    u = grid.evaluate(state.u.components, pt)[0]
    grad_u = grid.evaluate(grid.nodal_gradient(state.u.components), pt)[0]
    return SideTrace(
        phase=phase,
        grad_u=grad_u,
        p=float(grid.evaluate(state.p.values, pt)[0]),
        theta=float(grid.evaluate(state.theta.values, pt)[0]),
        u=u,
        grad_p=grid.evaluate(grid.nodal_gradient(state.p.values), pt)[0],
        grad_mu=grid.evaluate(grid.nodal_gradient(state.mu.values), pt)[0],
    )


def interface_traces(state: State, y, offset=None, ell=None, x_half=None):
    """Probe the state on both sides of the interface crossing of line ``y``.

    Returns ``(traces, probes)`` where probes are the (minus, plus) points.
    """
    grid = state.grid
    if x_half is None:
        x_half = locate_interface(state.phi, y)
    if offset is None:
        if ell is None:
            raise DiagnosticError("need either offset or ell")
        offset = default_offset(ell)
    xs, values = _samples(state.phi, y)
    orient = 1.0 if values[-1] >= values[0] else -1.0
    plus = np.array([x_half + orient * offset, y])
    minus = np.array([x_half - orient * offset, y])
    s = grid.spec
    for pt in (plus, minus):
        if not (s.x0 <= pt[0] <= s.x1):
            raise OutOfDomainError(
                f"probe at x = {pt[0]:.4g} (offset {offset:.4g}) lies outside the domain"
            )
    normal = interface_normal(state.phi, [x_half, y])
    traces = InterfaceTraces(_traces_at(state, plus, 1), _traces_at(state, minus, 0), normal)
    return traces, (minus, plus)


def jump_residuals(state_new: State, state_old: State, params: MaterialParams, dt, y,
                   offset=None) -> JumpReport:
    """Residuals of the interfacial conditions of the sharp-interface limit.

    ``v_n`` is the scan-line displacement of the 0.5 crossing between the
    two states, divided by ``dt`` and projected on the normal.
    """
    offset = default_offset(params.ell) if offset is None else float(offset)
    x_new = locate_interface(state_new.phi, y)
    x_old = locate_interface(state_old.phi, y)
    traces, probes = interface_traces(state_new, y, offset=offset, x_half=x_new)
    plus, minus = traces.plus, traces.minus
    n = traces.normal
    v_n = (x_new - x_old) / dt * n[0]

    _, _, _, kappa_p, _ = coefficients(1.0, params)
    _, _, _, kappa_m, _ = coefficients(0.0, params)
    stress_jump = normal_stress(plus, params, n) - normal_stress(minus, params, n)
    flux = v_n + params.mobility * float(np.dot(plus.grad_mu - minus.grad_mu, n))
    flow = v_n * (plus.theta - minus.theta) + float(
        np.dot(kappa_p * plus.grad_p - kappa_m * minus.grad_p, n)
    )
    point = np.array([x_new, y])
    H = curvature_at_interface(state_new.phi, point)
    mu_i = float(state_new.grid.evaluate(state_new.mu.values, point.reshape(1, 2))[0])
    gt = mu_i - gibbs_thomson_rhs(traces, params, H)
    return JumpReport(
        jump_p=abs(plus.p - minus.p),
        jump_u=float(np.linalg.norm(plus.u - minus.u)),
        jump_normal_stress=float(np.linalg.norm(stress_jump)),
        flux_balance_residual=abs(flux),
        flow_balance_residual=abs(flow),
        gibbs_thomson_residual=abs(gt),
        x_half=x_new,
        v_n=float(v_n),
        H=H,
        mu_interface=mu_i,
        offset=offset,
        probes=probes,
    )


def interface_report(state: State, params: MaterialParams, y, state_old=None, dt=None):
    phi = state.phi
    x_half = locate_interface(phi, y)
    normal = interface_normal(phi, [x_half, y])
    v_n = 0.0
    if state_old is not None and dt:
        v_n = (x_half - locate_interface(state_old.phi, y)) / dt * normal[0]
    return InterfaceReport(
        x_half=x_half,
        width_19=interface_width(phi, y),
        profile_l2=profile_fit(phi, y, params.ell),
        y=y,
        normal=normal,
        v_n=float(v_n),
        H=curvature_at_interface(phi, [x_half, y]),
    )
