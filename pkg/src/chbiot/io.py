"""Run configuration parsing and result serialisation.

Config grammar: one ``key = value`` per line, ``#`` starts a comment,
blank lines are ignored.  Omitted keys take the reference-experiment
defaults; when ``nx``/``ny`` are omitted the mesh size follows
``h = sqrt(ell) / 3.2``.
"""
from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import get_type_hints

import numpy as np

from .assembly import BoundaryConditions, TimeScheme
from .errors import ConfigParseError, ConfigurationError
from .grid import GridSpec, sample_line
from .model import MaterialParams, SourceConfig
from .solver import SolverConfig

SCENARIOS = ("paper_halfspace", "ch_relax_1d", "ch_disk", "custom")

CROSS_SECTION_HEADER = "x,phi,mu,ux,uy,p,theta"
TIMESERIES_HEADER = (
    "t,e_total,e_interface,e_elastic,e_fluid,x_half,width_19,profile_l2,"
    "jump_p,jump_u,jump_stress,flux_res,flow_res,gt_res,newton_iters"
)


@dataclass(frozen=True)
class RunConfig:
    # material
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
    # grid; None means derived from ell
    nx: int | None = None
    ny: int | None = None
    x0: float = 0.0
    y0: float = 0.0
    x1: float = 1.0
    y1: float = 1.0
    # time
    dt: float = 1e-3
    coupling_sweeps: int = 2
    t_final: float = 0.1
    output_every: int = 10
    # solver
    newton_abs_tol: float = 1e-6
    newton_max_iter: int = 25
    linear_rel_tol: float = 1e-10
    linear_max_iter: int = 1000
    linear_method: str = "auto"
    damping: float = 1.0
    # boundary conditions
    u_dirichlet: bool = True
    p_left: float | None = 1.0
    p_right: float | None = 0.0
    # sources
    R: float = 0.0
    S_f: float = 0.0
    f_x: float = 0.0
    f_y: float = 0.0
    # scenario
    scenario: str = "paper_halfspace"
    disk_r0: float = 0.25
    layer_x: float = 0.5
    scan_y: float | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if not (np.isfinite(self.t_final) and self.t_final >= 0):
            raise ConfigurationError(f"t_final must be >= 0, got {self.t_final}")
        if int(self.output_every) != self.output_every or self.output_every < 1:
            raise ConfigurationError(f"output_every must be >= 1, got {self.output_every}")
        for name in ("nx", "ny"):
            v = getattr(self, name)
            if v is not None and (int(v) != v or v < 2):
                raise ConfigurationError(f"{name} must be an integer >= 2, got {v}")
        self.params()
        self.grid_spec()
        self.scheme()
        self.solver_config()
        self.bcs()
        self.sources()

    # -- views onto the module-level types --------------------------------

    def params(self) -> MaterialParams:
        return MaterialParams(**{f.name: getattr(self, f.name) for f in fields(MaterialParams)})

    @property
    def h(self) -> float:
        """Default mesh size tied to the interface width."""
        return math.sqrt(self.ell) / 3.2

    def grid_spec(self) -> GridSpec:
        nx = self.nx if self.nx is not None else math.ceil((self.x1 - self.x0) / self.h - 1e-9)
        ny = self.ny if self.ny is not None else math.ceil((self.y1 - self.y0) / self.h - 1e-9)
        return GridSpec(max(nx, 2), max(ny, 2), self.x0, self.y0, self.x1, self.y1)

    def scheme(self) -> TimeScheme:
        return TimeScheme(self.dt, self.coupling_sweeps)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            self.newton_abs_tol, self.newton_max_iter, self.linear_rel_tol,
            self.linear_max_iter, self.linear_method, self.damping,
        )

    def bcs(self) -> BoundaryConditions:
        return BoundaryConditions(self.u_dirichlet, self.p_left, self.p_right)

    def sources(self) -> SourceConfig:
        return SourceConfig(R=self.R, f=(self.f_x, self.f_y), S_f=self.S_f)

    @property
    def num_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def line_y(self) -> float:
        return 0.5 * (self.y0 + self.y1) if self.scan_y is None else self.scan_y

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def to_text(self) -> str:
        """Serialise every non-default key; reparsing gives an equal config."""
        default = RunConfig()
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value != getattr(default, f.name):
                lines.append(f"{f.name} = {_format(value)}")
        return "\n".join(lines) + ("\n" if lines else "")


_HINTS = get_type_hints(RunConfig)


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(name, raw):
    hint = str(_HINTS[name])
    text = raw.strip()
    if "None" in hint and text.lower() == "none":
        return None
    if "bool" in hint:
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected true/false, got {text!r}")
    if "int" in hint:
        value = float(text)
        if not value.is_integer():
            raise ValueError(f"expected an integer, got {text!r}")
        return int(value)
    if "float" in hint:
        return float(text)
    if (text.startswith('"') and text.endswith('"')) or (text.startswith("'") and text.endswith("'")):
        text = text[1:-1]
    return text


def parse_config(text: str) -> RunConfig:
    """Parse and validate a flat ``key = value`` config."""
    known = {f.name for f in fields(RunConfig)}
    values, lines = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigParseError(f"expected 'key = value', got {body!r}", lineno)
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in known:
            raise ConfigParseError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigParseError(f"duplicate key {key!r}", lineno)
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ConfigParseError(f"{key}: {exc}", lineno) from None
        lines[key] = lineno
    # attribute single-key invariant violations to their line
    for key, value in values.items():
        try:
            RunConfig(**{key: value})
        except ConfigurationError as exc:
            raise ConfigParseError(str(exc), lines[key]) from None
    try:
        return RunConfig(**values)
    except ConfigurationError as exc:
        raise ConfigParseError(str(exc), max(lines.values(), default=None)) from None


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# -- writers ----------------------------------------------------------------

def _g17(x):
    return format(float(x), ".17g")


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_cross_section(state, y, n, path):
    """CSV of every field sampled at ``n`` points along the line ``y``."""
    xs, phi = sample_line(state.phi, y, n)
    _, mu = sample_line(state.mu, y, n)
    _, u = sample_line(state.u, y, n)
    _, p = sample_line(state.p, y, n)
    _, theta = sample_line(state.theta, y, n)
    rows = [CROSS_SECTION_HEADER]
    for k in range(n):
        rows.append(",".join(_g17(v) for v in (xs[k], phi[k], mu[k], u[k, 0], u[k, 1], p[k], theta[k])))
    _write_lines(path, rows)


def read_csv(path):
    """Read one of the artifact's CSV files into ``(header, float array)``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        data = [[float(v) for v in line.rstrip("\n").split(",")] for line in fh if line.strip()]
    return header, np.array(data, dtype=float).reshape(-1, len(header))


def write_vtk(state, path, title="chbiot snapshot"):
    """Legacy ASCII VTK, STRUCTURED_POINTS, nodal scalars and displacement."""
    spec = state.grid.spec
    npts = spec.num_nodes
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {spec.nx + 1} {spec.ny + 1} 1",
        f"ORIGIN {_g17(spec.x0)} {_g17(spec.y0)} 0",
        f"SPACING {_g17(spec.hx)} {_g17(spec.hy)} 1",
        f"POINT_DATA {npts}",
    ]
    for name, values in (("phi", state.phi.values), ("mu", state.mu.values),
                         ("p", state.p.values), ("theta", state.theta.values)):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [_g17(v) for v in values]
    lines.append("VECTORS displacement double")
    lines += [f"{_g17(ux)} {_g17(uy)} 0" for ux, uy in state.u.components]
    _write_lines(path, lines)


@dataclass
class TimeseriesRecord:
    t: float
    e_total: float = math.nan
    e_interface: float = math.nan
    e_elastic: float = math.nan
    e_fluid: float = math.nan
    x_half: float = math.nan
    width_19: float = math.nan
    profile_l2: float = math.nan
    jump_p: float = math.nan
    jump_u: float = math.nan
    jump_stress: float = math.nan
    flux_res: float = math.nan
    flow_res: float = math.nan
    gt_res: float = math.nan
    newton_iters: int = 0

    @classmethod
    def from_reports(cls, t, energy=None, interface=None, jumps=None, newton_iters=0):
        rec = cls(t=t, newton_iters=int(newton_iters))
        if energy is not None:
            rec.e_total, rec.e_interface = energy.e_total, energy.e_interface
            rec.e_elastic, rec.e_fluid = energy.e_elastic, energy.e_fluid
        if interface is not None:
            rec.x_half, rec.width_19 = interface.x_half, interface.width_19
            rec.profile_l2 = interface.profile_l2
        if jumps is not None:
            rec.jump_p, rec.jump_u = jumps.jump_p, jumps.jump_u
            rec.jump_stress = jumps.jump_normal_stress
            rec.flux_res = jumps.flux_balance_residual
            rec.flow_res = jumps.flow_balance_residual
            rec.gt_res = jumps.gibbs_thomson_residual
        return rec


def write_timeseries(records, path):
    rows = [TIMESERIES_HEADER]
    keys = TIMESERIES_HEADER.split(",")
    for rec in records:
        d = asdict(rec) if not isinstance(rec, dict) else rec
        rows.append(",".join(str(int(d[k])) if k == "newton_iters" else _g17(d[k]) for k in keys))
    _write_lines(path, rows)


def write_table(path, header, rows):
    """Small helper for the sweep outputs: numbers at full precision, strings verbatim."""
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(v if isinstance(v, str) else _g17(v) for v in row))
    _write_lines(path, out)


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory {path!r} is not writable")
