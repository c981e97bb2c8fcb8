"""Experiment drivers: single runs, interface-width sweeps and the disk benchmark."""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .assembly import BoundaryConditions, TimeScheme, step
from .diagnostics import (
    GT_COEFFICIENT,
    curvature_at_interface,
    energy_breakdown,
    interface_report,
    jump_residuals,
    tanh_profile,
)
from .errors import ConfigurationError, DiagnosticError, SolverError, StepFailure
from .grid import Grid, sample_line
from .io import (
    RunConfig,
    TimeseriesRecord,
    ensure_dir,
    write_cross_section,
    write_table,
    write_timeseries,
    write_vtk,
)
from .model import SourceConfig, State

log = logging.getLogger(__name__)

CROSS_SECTION_SAMPLES = 201
DISK_STEPS = 10


@dataclass
class Setup:
    """Everything needed to time-step one scenario."""

    grid: Grid
    state: State
    params: object
    sources: SourceConfig
    bcs: BoundaryConditions
    scheme: TimeScheme


def build_scenario(config: RunConfig, scenario=None) -> Setup:
    """Initial state and effective parameters of a named scenario.

    ``paper_halfspace`` and ``custom`` put phase 0 left and phase 1 right of
    ``x = layer_x`` (0.5 by default) with the configured coupling.  The
    ``ch_*`` scenarios switch the coupling off: ``ch_relax_1d`` starts from
    the same step, ``ch_disk`` from a tanh disk of phase 1 with radius
    ``disk_r0`` centred in the domain.
    """
    name = scenario or config.scenario
    grid = Grid(config.grid_spec())
    x, y = grid.coords[:, 0], grid.coords[:, 1]
    params = config.params()
    sources = config.sources()
    bcs = config.bcs()
    if name in ("paper_halfspace", "custom", "ch_relax_1d"):
        phi = (x > config.layer_x).astype(float)
    elif name == "ch_disk":
        xc = 0.5 * (config.x0 + config.x1)
        yc = 0.5 * (config.y0 + config.y1)
        phi = tanh_profile(config.disk_r0 - np.hypot(x - xc, y - yc), config.ell)
    else:
        raise ConfigurationError(f"unknown scenario {name!r}")
    if name.startswith("ch_"):
        params = params.uncoupled()
        sources = SourceConfig()
        bcs = BoundaryConditions.no_flux()
    return Setup(grid, State.from_arrays(grid, phi), params, sources, bcs, config.scheme())


def snapshot_record(t, state, prev, params, dt, y, newton_iters=0):
    """Diagnostics of one snapshot; quantities that cannot be measured are NaN."""
    energy = energy_breakdown(state, params)
    try:
        iface = interface_report(state, params, y)
    except (DiagnosticError, ValueError):
        iface = None
    try:
        jumps = jump_residuals(state, prev, params, dt, y)
    except (DiagnosticError, ValueError):
        jumps = None
    return TimeseriesRecord.from_reports(t, energy, iface, jumps, newton_iters)


@dataclass
class RunResult:
    exit_status: int
    state: State
    records: list = field(default_factory=list)
    step_reports: list = field(default_factory=list)
    failure_step: int | None = None
    message: str = ""


def run(config: RunConfig, scenario=None, out_dir=None, write_snapshots=True) -> RunResult:
    """Time-step a scenario to ``t_final``, writing artifacts to ``out_dir``.

    Exit status 0 on completion, 3 on solver failure (partial outputs kept).
    """
    if out_dir is not None:
        ensure_dir(out_dir)
    setup = build_scenario(config, scenario)
    state, params, dt = setup.state, setup.params, config.dt
    y = config.line_y
    every = config.output_every
    records = [snapshot_record(0.0, state, state, params, dt, y)]
    step_reports = []

    def emit(k, st):
        if out_dir is None or not write_snapshots:
            return
        write_cross_section(st, y, CROSS_SECTION_SAMPLES, os.path.join(out_dir, f"cross_section_{k:06d}.csv"))
        write_vtk(st, os.path.join(out_dir, f"snapshot_{k:06d}.vtk"))

    emit(0, state)
    result = RunResult(0, state, records, step_reports)
    for k in range(1, config.num_steps + 1):
        try:
            new, rep = step(state, params, setup.sources, setup.bcs, setup.scheme,
                            config.solver_config())
        except StepFailure as exc:
            log.error("step %d failed: %s", k, exc)
            result.exit_status, result.failure_step, result.message = 3, k, str(exc)
            break
        step_reports.append(rep)
        if k % every == 0:
            records.append(snapshot_record(k * dt, new, state, params, dt, y, rep.newton_iters))
            emit(k, new)
        state = new
        result.state = state
    if out_dir is not None:
        write_timeseries(records, os.path.join(out_dir, "timeseries.csv"))
        if result.exit_status == 0:
            write_cross_section(state, y, CROSS_SECTION_SAMPLES, os.path.join(out_dir, "cross_section_final.csv"))
    return result


@dataclass
class SweepRow:
    ell: float
    x_half: float = math.nan
    width_19: float = math.nan
    jump_p: float = math.nan
    jump_u: float = math.nan
    status: str = "ok"
    h: float = math.nan


def sweep(config: RunConfig, ell_list, out_dir=None):
    """Run the half-space scenario for each interface width.

    The mesh size is re-derived from each ``ell``.  Writes
    ``sweep_cross_sections.csv`` and ``sweep_summary.csv``.  Returns
    ``(rows, final_states)``; a failing member is flagged, not fatal.
    """
    ells = [float(e) for e in ell_list]
    if not ells:
        raise ConfigurationError("ell list is empty")
    if any(b >= a for a, b in zip(ells, ells[1:])):
        raise ConfigurationError(f"ell list must be strictly descending, got {ells}")
    if out_dir is not None:
        ensure_dir(out_dir)
    rows, states = [], []
    y = config.line_y
    for ell in ells:
        cfg = config.replace(ell=ell, nx=None, ny=None, scenario="paper_halfspace")
        member_dir = None if out_dir is None else os.path.join(out_dir, f"ell_{ell:g}")
        row = SweepRow(ell=ell, h=cfg.grid_spec().hx)
        try:
            res = run(cfg, "paper_halfspace", member_dir, write_snapshots=False)
        except (SolverError, ConfigurationError) as exc:
            row.status = f"failed: {exc}".replace(",", ";")
            rows.append(row)
            states.append(None)
            continue
        states.append(res.state)
        if res.exit_status != 0:
            row.status = f"failed at step {res.failure_step}"
        rec = snapshot_record(cfg.num_steps * cfg.dt, res.state, res.state, cfg.params(), cfg.dt, y)
        row.x_half, row.width_19 = rec.x_half, rec.width_19
        row.jump_p, row.jump_u = rec.jump_p, rec.jump_u
        rows.append(row)
    if out_dir is not None:
        xs = np.linspace(config.x0, config.x1, CROSS_SECTION_SAMPLES)
        cols = [xs]
        for st in states:
            cols.append(sample_line(st.phi, y, CROSS_SECTION_SAMPLES)[1] if st is not None
                        else np.full_like(xs, math.nan))
        header = ["x"] + [f"phi_ell_{e:g}" for e in ells]
        write_table(os.path.join(out_dir, "sweep_cross_sections.csv"), header, np.column_stack(cols))
        write_table(
            os.path.join(out_dir, "sweep_summary.csv"),
            ["ell", "h", "x_half", "width_19", "jump_p", "jump_u", "status"],
            [[r.ell, r.h, r.x_half, r.width_19, r.jump_p, r.jump_u, r.status] for r in rows],
        )
    return rows, states


@dataclass
class DiskReport:
    r0: float
    radius: float
    H: float
    H_levelset: float
    mu_measured: float
    mu_target: float
    ratio: float
    steps: int


def _ray_radius(phi, center, angle, rmax):
    grid = phi.grid
    rs = np.linspace(0.0, rmax, 2001)
    pts = center + rs[:, None] * np.array([math.cos(angle), math.sin(angle)])
    vals = grid.evaluate(phi.values, pts)
    below = vals < 0.5
    idx = np.nonzero(below[:-1] != below[1:])[0]
    if len(idx) != 1:
        raise DiagnosticError(f"ray at angle {angle:.3f} crosses phi = 0.5 {len(idx)} times")
    j = idx[0]
    return rs[j] + (vals[j] - 0.5) / (vals[j] - vals[j + 1]) * (rs[j + 1] - rs[j])


def bench_disk(config: RunConfig, r0=None, out_dir=None, steps=DISK_STEPS, n_probes=16) -> DiskReport:
    """Measure the curvature contribution to the interfacial chemical potential.

    A tanh disk of phase 1 is relaxed for a few steps with all couplings
    off; the mean of ``mu`` on the measured interface circle is compared
    with ``gamma H / (3 sqrt 2)``, ``H = 1 / radius``.  Without explicit
    ``nx``/``ny`` the mesh uses ``h = ell / 3``.
    """
    r0 = config.disk_r0 if r0 is None else float(r0)
    half = 0.5 * min(config.x1 - config.x0, config.y1 - config.y0)
    if not 2 * config.ell < r0 < half - 2 * config.ell:
        raise ConfigurationError(
            f"disk radius {r0} not resolvable: need {2 * config.ell:g} < r0 < {half - 2 * config.ell:g}"
        )
    cfg = config.replace(scenario="ch_disk", disk_r0=r0, coupling_sweeps=1)
    if config.nx is None and config.ny is None:
        n = math.ceil(2 * half / (config.ell / 3.0))
        cfg = cfg.replace(nx=n, ny=n)
    setup = build_scenario(cfg)
    state = setup.state
    for _ in range(steps):
        state, _ = step(state, setup.params, setup.sources, setup.bcs, setup.scheme, cfg.solver_config())
    center = np.array([0.5 * (cfg.x0 + cfg.x1), 0.5 * (cfg.y0 + cfg.y1)])
    angles = np.linspace(0.0, 2 * math.pi, n_probes, endpoint=False)
    radii = np.array([_ray_radius(state.phi, center, a, half) for a in angles])
    radius = float(radii.mean())
    probes = center + radii[:, None] * np.column_stack([np.cos(angles), np.sin(angles)])
    mu = float(np.mean(setup.grid.evaluate(state.mu.values, probes)))
    H = 1.0 / radius
    H_ls = float(np.mean([curvature_at_interface(state.phi, p) for p in probes]))
    target = cfg.gamma * H * GT_COEFFICIENT
    report = DiskReport(r0, radius, H, H_ls, mu, target, abs(mu) / target, steps)
    if out_dir is not None:
        ensure_dir(out_dir)
        write_table(
            os.path.join(out_dir, "bench_disk.csv"),
            ["r0", "radius", "H", "H_levelset", "mu_measured", "mu_target", "ratio", "steps"],
            [[report.r0, report.radius, report.H, report.H_levelset, report.mu_measured,
              report.mu_target, report.ratio, float(report.steps)]],
        )
    return report
