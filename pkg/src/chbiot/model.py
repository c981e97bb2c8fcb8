"""Constitutive laws of the Cahn-Hilliard-Biot system.

Everything here is a pure, numpy-vectorised function of pointwise state.
Tensors are arrays with trailing shape ``(2, 2)``; scalars broadcast.
Phase 0 is the stiff, permeable material and phase 1 the soft,
low-permeability one (defaults below).
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import ConfigurationError, ContractError
from .grid import Field, Grid, VectorField

_POSITIVE = ("gamma", "ell", "mobility", "G0", "G1", "M0", "M1", "kappa0", "kappa1")
_NONNEGATIVE = ("lam0", "lam1")


@dataclass(frozen=True)
class MaterialParams:
    """Physical coefficients; defaults are the reference experiment values."""

    gamma: float = 1.0
    ell: float = 0.1
    mobility: float = 1.0
    xi: float = 0.1
    phi_ref: float = 0.5
    G0: float = 100.0
    G1: float = 1.0
    lam0: float = 20.0
    lam1: float = 0.1
    M0: float = 1.0
    M1: float = 1.0
    kappa0: float = 1.0
    kappa1: float = 0.01
    alpha0: float = 1.0
    alpha1: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value):
                raise ConfigurationError(f"{f.name} must be finite, got {value!r}")
        for name in _POSITIVE:
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in _NONNEGATIVE:
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0, got {getattr(self, name)}")

    def replace(self, **changes) -> "MaterialParams":
        return replace(self, **changes)

    def uncoupled(self) -> "MaterialParams":
        """Same parameters with every phase coupling switched off.

        Phase-1 values are copied onto phase 0 and the swelling is removed,
        so the elastic and hydraulic energies no longer depend on phi.
        """
        return replace(
            self, xi=0.0, G0=self.G1, lam0=self.lam1, M0=self.M1,
            kappa0=self.kappa1, alpha0=self.alpha1,
        )


@dataclass(frozen=True)
class SourceConfig:
    """Right-hand sides: reaction ``R``, body force ``f`` and fluid source ``S_f``.

    Each entry is a constant or a per-node array (``f`` may be a 2-vector or
    an ``(N, 2)`` array).
    """

    R: object = 0.0
    f: object = (0.0, 0.0)
    S_f: object = 0.0

    def __post_init__(self):
        for name in ("R", "f", "S_f"):
            if not np.all(np.isfinite(np.asarray(getattr(self, name), dtype=float))):
                raise ConfigurationError(f"source {name} has non-finite values")


@dataclass(frozen=True, eq=False)
class State:
    """The five unknowns at one time level."""

    phi: Field
    mu: Field
    u: VectorField
    p: Field
    theta: Field

    def __post_init__(self):
        grid = self.phi.grid
        for item in (self.mu, self.u, self.p, self.theta):
            grid.check_same(item.grid)

    @property
    def grid(self) -> Grid:
        return self.phi.grid

    @classmethod
    def from_arrays(cls, grid, phi, mu=None, u=None, p=None, theta=None):
        n = grid.num_nodes
        zeros = np.zeros(n)
        return cls(
            Field(grid, phi),
            Field(grid, zeros if mu is None else mu),
            VectorField(grid, np.zeros(2 * n) if u is None else u),
            Field(grid, zeros if p is None else p),
            Field(grid, zeros if theta is None else theta),
        )

    def with_arrays(self, **arrays) -> "State":
        """Copy with some components replaced by raw arrays."""
        current = {
            "phi": self.phi.values, "mu": self.mu.values, "u": self.u.values,
            "p": self.p.values, "theta": self.theta.values,
        }
        current.update(arrays)
        return State.from_arrays(self.grid, **current)

    def is_finite(self) -> bool:
        return all(f.is_finite() for f in (self.phi, self.mu, self.u, self.p, self.theta))


# -- double well ------------------------------------------------------------

def double_well(phi):
    phi = np.asarray(phi, dtype=float)
    return phi**2 * (1.0 - phi) ** 2


def double_well_prime(phi):
    phi = np.asarray(phi, dtype=float)
    return 2.0 * phi * (1.0 - phi) * (1.0 - 2.0 * phi)


def double_well_second(phi):
    phi = np.asarray(phi, dtype=float)
    return 2.0 - 12.0 * phi + 12.0 * phi**2


# -- phase interpolation ----------------------------------------------------
# smoothstep on phi clamped to [0, 1]

def interp(phi, q0, q1):
    s = np.clip(phi, 0.0, 1.0)
    return q0 + s * s * (3.0 - 2.0 * s) * (q1 - q0)


def d_interp(phi, q0, q1):
    phi = np.asarray(phi, dtype=float)
    inside = (phi > 0.0) & (phi < 1.0)
    return np.where(inside, 6.0 * phi * (1.0 - phi), 0.0) * (q1 - q0)


def d2_interp(phi, q0, q1):
    phi = np.asarray(phi, dtype=float)
    inside = (phi > 0.0) & (phi < 1.0)
    return np.where(inside, 6.0 - 12.0 * phi, 0.0) * (q1 - q0)


def coefficients(phi, params: MaterialParams, derivative: int = 0):
    """Interpolated ``(G, lam, M, kappa, alpha)`` or their phi-derivatives."""
    fn = (interp, d_interp, d2_interp)[derivative]
    p = params
    return (
        fn(phi, p.G0, p.G1),
        fn(phi, p.lam0, p.lam1),
        fn(phi, p.M0, p.M1),
        fn(phi, p.kappa0, p.kappa1),
        fn(phi, p.alpha0, p.alpha1),
    )


# -- tensors ----------------------------------------------------------------

_I = np.eye(2)


def _trace(A):
    return A[..., 0, 0] + A[..., 1, 1]


def _ddot(A, B):
    return np.einsum("...ij,...ij->...", A, B)


def swelling(phi, params: MaterialParams):
    """Eigenstrain ``xi (phi - phi_ref) I``."""
    s = params.xi * (np.asarray(phi, dtype=float) - params.phi_ref)
    return s[..., None, None] * _I


def _isotropic(G, lam, A):
    A = np.asarray(A, dtype=float)
    G = np.asarray(G, dtype=float)[..., None, None]
    lam = np.asarray(lam, dtype=float)[..., None, None]
    return 2.0 * G * A + lam * _trace(A)[..., None, None] * _I


def stiffness_apply(phi, A, params: MaterialParams, derivative: int = 0):
    """Isotropic stiffness ``2 G A + lam tr(A) I`` with phase-interpolated moduli.

    ``derivative=1`` applies the phi-derivative of the stiffness tensor
    instead, ``derivative=2`` the second derivative.
    """
    fn = (interp, d_interp, d2_interp)[derivative]
    return _isotropic(fn(phi, params.G0, params.G1), fn(phi, params.lam0, params.lam1), A)


def elastic_energy_density(phi, strain, params: MaterialParams):
    e = np.asarray(strain, dtype=float) - swelling(phi, params)
    return 0.5 * _ddot(e, stiffness_apply(phi, e, params))


def fluid_energy_density(phi, theta, div_u, params: MaterialParams):
    M = interp(phi, params.M0, params.M1)
    alpha = interp(phi, params.alpha0, params.alpha1)
    return 0.5 * M * (theta - alpha * div_u) ** 2


def dphi_elastic(phi, strain, params: MaterialParams):
    e = np.asarray(strain, dtype=float) - swelling(phi, params)
    dT = params.xi * _I
    return -_ddot(dT, stiffness_apply(phi, e, params)) + 0.5 * _ddot(
        e, stiffness_apply(phi, e, params, derivative=1)
    )


def dphi_fluid(phi, theta, div_u, params: MaterialParams):
    M = interp(phi, params.M0, params.M1)
    dM = d_interp(phi, params.M0, params.M1)
    alpha = interp(phi, params.alpha0, params.alpha1)
    dalpha = d_interp(phi, params.alpha0, params.alpha1)
    s = theta - alpha * div_u
    return 0.5 * dM * s**2 - M * s * dalpha * div_u


def d2phi_elastic(phi, strain, params: MaterialParams):
    """Second phi-derivative of the elastic energy density (Newton Jacobian)."""
    e = np.asarray(strain, dtype=float) - swelling(phi, params)
    xi = params.xi
    return (
        xi**2 * _ddot(_I, stiffness_apply(phi, np.broadcast_to(_I, e.shape), params))
        - 2.0 * xi * _trace(stiffness_apply(phi, e, params, derivative=1))
        + 0.5 * _ddot(e, stiffness_apply(phi, e, params, derivative=2))
    )


def d2phi_fluid(phi, theta, div_u, params: MaterialParams):
    M, dM, d2M = (f(phi, params.M0, params.M1) for f in (interp, d_interp, d2_interp))
    a, da, d2a = (f(phi, params.alpha0, params.alpha1) for f in (interp, d_interp, d2_interp))
    s = theta - a * div_u
    return (
        0.5 * d2M * s**2
        - 2.0 * dM * da * s * div_u
        + M * da**2 * div_u**2
        - M * d2a * s * div_u
    )


def interface_energy(phi_field: Field, params: MaterialParams, order: int = 2) -> float:
    """Ginzburg-Landau energy ``gamma * int (ell/2 |grad phi|^2 + Psi(phi)/ell)``."""
    grid = phi_field.grid
    phi_q = grid.at_quadrature(phi_field.values, order)
    grad_q = grid.grad_at_quadrature(phi_field.values, order)
    density = 0.5 * params.ell * np.sum(grad_q**2, axis=-1) + double_well(phi_q) / params.ell
    return params.gamma * grid.integrate(density, order)


def strain_from_gradient(grad_u):
    """Symmetric part of a displacement gradient ``(..., 2, 2)``, ``grad_u[..., i, j] = du_i/dx_j``."""
    return 0.5 * (grad_u + np.swapaxes(grad_u, -1, -2))


def check_states(*states):
    grid = states[0].grid
    for s in states[1:]:
        if not isinstance(s, State):
            raise ContractError("expected State instances")
        grid.check_same(s.grid)
