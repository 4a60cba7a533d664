"""Orchestration: build initial data, run, audit, persist, sweep."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import auditor
from .auditor import AuditReport, CheckResult
from .config import FIELD_AUDITS, RecipeConfig, RunConfig, SnapshotSource
from .datagen import make_angular_ic, make_velocity_ic
from .integrator import BlowUpError, EnergyLedger, Trajectory, simulate
from .rhs import State
from .snapshot import atomic_write_bytes, read_vector_fields, write_snapshot
from .spectral import GridSpec, VectorField, l2_norm, set_threads

log = logging.getLogger(__name__)

LEDGER_FILE = "ledger.csv"
REPORT_FILE = "audit.json"
IC_FILE = "ic.mpsf"
SNAPSHOT_DIR = "snapshots"


def _ic_field(src, grid: GridSpec, base_dir: Path, angular: bool) -> VectorField:
    if isinstance(src, SnapshotSource):
        path = Path(src.snapshot)
        if not path.is_absolute():
            path = base_dir / path
        fields = read_vector_fields(path, grid.dealias_fraction)
        if src.field >= len(fields):
            raise ValueError(f"{path} holds {len(fields)} vector fields, asked for #{src.field}")
        f = fields[src.field]
        if f.grid.n != grid.n or f.grid.box_length != grid.box_length:
            raise ValueError(f"{path} was written on a different grid")
        return VectorField(grid, f.coeffs)
    recipe = src.recipe()
    if recipe is None:
        return VectorField.zeros(grid)
    return make_angular_ic(recipe, grid) if angular else make_velocity_ic(recipe, grid)


def build_initial_data(cfg: RunConfig, base_dir: Path | str = ".") -> tuple[VectorField, VectorField]:
    grid = cfg.grid.spec()
    base_dir = Path(base_dir)
    return _ic_field(cfg.ic_u, grid, base_dir, False), _ic_field(cfg.ic_w, grid, base_dir, True)


def apply_seed_override(cfg: RunConfig, seed: int) -> RunConfig:
    changes = {}
    if isinstance(cfg.ic_u, RecipeConfig):
        changes["ic_u"] = {"seed": seed}
    if isinstance(cfg.ic_w, RecipeConfig):
        changes["ic_w"] = {"seed": seed + 1}
    return cfg.with_updates(**changes)


# -- audits -------------------------------------------------------------------------------


def _opt(a, key, default):
    return float(a.options.get(key, default))


def _balance_check(name, res, scale, tol):
    worst = float(np.max(np.abs(res))) if len(res) else 0.0
    rel = worst / scale if scale > 0 else worst
    return CheckResult(name, "pass" if rel <= tol else "fail", rel, tol, "max |residual| / initial energy")


def run_audits(
    cfg: RunConfig,
    traj: Trajectory,
    states: list[State] | None,
    estimate: auditor.ExistenceEstimate | None = None,
) -> AuditReport:
    """Evaluate every configured audit once, in configuration order."""
    report = AuditReport()
    led = traj.ledger
    p = traj.params
    for a in cfg.audits:
        tol = a.tol()
        name = a.name
        if name in FIELD_AUDITS and not states:
            report.add(CheckResult(name, "skipped", None, tol, "no snapshots available"))
            continue
        if name.startswith("l2_balance_") or name.startswith("fractional_balance_"):
            which = name.rsplit("_", 1)[1]
            fn = auditor.l2_balance_residual if name.startswith("l2") else auditor.fractional_balance_residual
            col = {
                ("l2", "velocity"): "u_L2",
                ("l2", "angular"): "w_L2",
                ("fr", "velocity"): "frac_u_energy",
                ("fr", "angular"): "frac_w_energy",
            }[(name[:2], which)]
            e0 = led.column(col)[0]
            scale = e0**2 if col.endswith("L2") else e0
            report.add(_balance_check(name, fn(traj, which), scale, tol))
        elif name == "divergence_free":
            worst = float(led.column("div_u_rel").max())
            report.add(CheckResult(name, "pass" if worst <= tol else "fail", worst, tol, "max |div u| / |u|"))
        elif name == "gronwall":
            t = led.column("t")
            alpha = led.column("u_H_tau") ** 2 + led.column("w_H_sigma") ** 2
            if len(t) < 2 or alpha[0] == 0:
                report.add(CheckResult(name, "inapplicable", None, tol, "degenerate alpha"))
                continue
            b_default = (2 * p.tau + 1) / (2 * p.tau - 1) if p.tau > 0.5 else 1.0
            prob = auditor.GronwallProblem(
                A=_opt(a, "A", alpha[0]),
                B=_opt(a, "B", 1.0),
                b=_opt(a, "b", b_default),
                T1=_opt(a, "T1", t[-1]),
                t=t,
                alpha=alpha,
            )
            res = auditor.gronwall_check(prob)
            report.add(
                CheckResult(
                    name,
                    res.status,
                    res.max_alpha,
                    res.bound,
                    f"T0={res.T0:.17g} hypothesis_margin={res.hypothesis_margin:.6g}",
                )
            )
        elif name == "uniform_bound":
            T0 = a.options.get("T0")
            c = auditor.uniform_bound_constant(traj, T0)
            report.add(CheckResult(name, "report-only", c, None, "degenerate" if c is None else "empirical C"))
        elif name == "existence_time":
            if estimate is None or estimate.T_E is None:
                report.add(CheckResult(name, "report-only", None, None, "not admissible"))
            else:
                t_end = float(led.column("t")[-1])
                flag = "t_end<=T_E" if t_end <= estimate.T_E else "t_end>T_E"
                report.add(CheckResult(name, "report-only", estimate.T_E, None, flag))
        elif name == "viscosity_absorption":
            try:
                ratio = auditor.viscosity_absorption_report(traj)
            except ValueError as err:
                report.add(CheckResult(name, "inapplicable", None, None, str(err)))
            else:
                report.add(CheckResult(name, "report-only", ratio, None, f"mu*nu={p.mu * p.nu:.17g}"))
        elif name == "duality_pairing":
            s = _opt(a, "s", 0.7)
            worst = math.inf
            for st in states:
                m = auditor.duality_pairing_check(st.w, st.u, 1 - p.tau + s, p.tau - s)
                worst = min(worst, m.margin / m.scale if m.scale else 0.0)
            report.add(CheckResult(name, "pass" if worst >= -tol else "fail", worst, tol, "min margin / scale"))
        elif name == "interpolation":
            s1, s2, th = _opt(a, "s1", p.tau), _opt(a, "s2", p.tau + 1), _opt(a, "theta", 0.5)
            worst = math.inf
            for st in states:
                m = auditor.interpolation_check(st.u, s1, s2, th)
                worst = min(worst, m.margin / m.scale if m.scale else 0.0)
            report.add(CheckResult(name, "pass" if worst >= -tol else "fail", worst, tol, "min margin / scale"))
        elif name == "product_law":
            s1, s2 = _opt(a, "s1", 1.0), _opt(a, "s2", 0.3)
            ratios = [auditor.product_law_report(st.u, st.u, s1, s2) for st in states]
            report.add(CheckResult(name, "report-only", max(ratios), None, auditor.summarize(ratios)))
        else:  # pragma: no cover - names are validated by the config schema
            raise ValueError(name)
    return report


# -- single run ---------------------------------------------------------------------------


@dataclass
class RunResult:
    config: RunConfig
    trajectory: Trajectory | None
    report: AuditReport | None
    estimate: auditor.ExistenceEstimate | None
    t_end: float
    blew_up: bool = False
    failure: str = ""
    out_dir: Path | None = None

    @property
    def exit_code(self) -> int:
        if self.blew_up:
            return 3
        if self.report is not None and not self.report.passed:
            return 1
        return 0


def estimate_existence_time(cfg: RunConfig, u0: VectorField, w0: VectorField) -> auditor.ExistenceEstimate:
    p = cfg.params.spec()
    return auditor.existence_time(u0, w0, p, cfg.C1, cfg.eps0, cfg.te_small_data)


def run(cfg: RunConfig, out_dir: Path | str | None = None, base_dir: Path | str = ".", write: bool = True) -> RunResult:
    """Simulate one configuration; ValueError signals a configuration problem."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    grid = cfg.grid.spec()
    params = cfg.params.spec()
    u0, w0 = build_initial_data(cfg, base_dir)
    est = estimate_existence_time(cfg, u0, w0)
    t_end = cfg.step.t_end
    if cfg.clip_to_existence_time and est.T_E is not None:
        t_end = min(t_end, est.T_E)
    policy = cfg.step.spec(t_end)

    def save(step, state):
        if write:
            write_snapshot(out / SNAPSHOT_DIR / f"snap_{step:06d}.mpsf", [state.u, state.w])

    result = RunResult(cfg, None, None, est, t_end, out_dir=out)
    try:
        traj = simulate(u0, w0, params, policy, on_snapshot=save)
    except BlowUpError as err:
        result.blew_up = True
        result.failure = str(err)
        traj = err.trajectory
    result.trajectory = traj
    if traj is not None:
        states = [s for _, s in traj.snapshots]
        result.report = run_audits(cfg, traj, states, est)
        if write:
            atomic_write_bytes(out / LEDGER_FILE, traj.ledger.to_csv().encode())
            atomic_write_bytes(out / REPORT_FILE, result.report.to_json().encode())
    log.info("run finished: t_end=%g grid=%d blow-up=%s", t_end, grid.n, result.blew_up)
    return result


def generate_ic(cfg: RunConfig, out_dir: Path | str | None = None, base_dir: Path | str = ".") -> Path:
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    u0, w0 = build_initial_data(cfg, base_dir)
    path = out / IC_FILE
    write_snapshot(path, [u0, w0])
    return path


def load_snapshot_states(out_dir: Path | str, grid: GridSpec) -> list[State]:
    states = []
    for path in sorted((Path(out_dir) / SNAPSHOT_DIR).glob("snap_*.mpsf")):
        u, w = read_vector_fields(path, grid.dealias_fraction)[:2]
        states.append(State(VectorField(grid, u.coeffs), VectorField(grid, w.coeffs)))
    return states


def audit_offline(
    cfg: RunConfig,
    ledger_path: Path | str,
    out_dir: Path | str | None = None,
    base_dir: Path | str = ".",
) -> AuditReport:
    """Re-run the configured audits on a stored ledger and its sibling snapshots.

    T_E is recomputed from the configured initial data; when that data is no
    longer available the first snapshot stands in for it.
    """
    ledger_path = Path(ledger_path)
    led = EnergyLedger.from_csv(ledger_path.read_text())
    traj = Trajectory(cfg.params.spec(), led)
    grid = cfg.grid.spec()
    states = load_snapshot_states(ledger_path.parent, grid)
    est = None
    try:
        u0, w0 = build_initial_data(cfg, base_dir)
    except (ValueError, OSError):
        u0, w0 = (states[0].u, states[0].w) if states else (None, None)
    if u0 is not None:
        try:
            est = auditor.existence_time(u0, w0, traj.params, cfg.C1, cfg.eps0, cfg.te_small_data)
        except ValueError:
            pass
    report = run_audits(cfg, traj, states, est)
    out = Path(out_dir) if out_dir is not None else ledger_path.parent
    atomic_write_bytes(out / REPORT_FILE, report.to_json().encode())
    return report


def export_plot(ledger_path: Path | str, out_path: Path | str | None = None) -> Path:
    """Whitespace-separated columns (one per ledger column) with a '#' header line."""
    ledger_path = Path(ledger_path)
    led = EnergyLedger.from_csv(ledger_path.read_text())
    out = Path(out_path) if out_path is not None else ledger_path.with_suffix(".dat")
    lines = ["# " + " ".join(led.columns)]
    lines += [" ".join(repr(x) for x in row) for row in led.rows]
    atomic_write_bytes(out, ("\n".join(lines) + "\n").encode())
    return out


# -- sweeps --------------------------------------------------------------------------------

SWEEP_AXES = ("eps", "grid", "muv")


def sweep_config(cfg: RunConfig, axis: str, value: float) -> RunConfig:
    if axis == "eps":
        return cfg.with_updates(params={"eps": float(value)})
    if axis == "grid":
        if int(value) != value:
            raise ValueError("grid sweep values must be integers")
        return cfg.with_updates(grid={"n": int(value)})
    if axis == "muv":
        if not value > 0:
            raise ValueError("mu*nu must be positive")
        root = math.sqrt(value)
        return cfg.with_updates(params={"mu": root, "nu": root})
    raise ValueError(f"unknown sweep axis {axis!r}")


def _run_one(args):
    cfg, out_dir, base_dir, threads = args
    set_threads(threads)
    res = run(cfg, out_dir, base_dir)
    # snapshots are needed for trajectory differences only
    return res


def space_time_difference(a: Trajectory, b: Trajectory, T0: float | None = None) -> float:
    """(int_0^T0 |u_a - u_b|^2 + |w_a - w_b|^2 dt)^(1/2) over shared snapshot times."""
    ta = np.array([t for t, _ in a.snapshots])
    tb = np.array([t for t, _ in b.snapshots])
    if len(ta) != len(tb) or not np.allclose(ta, tb, rtol=0, atol=1e-12):
        raise ValueError("trajectories have different snapshot times")
    keep = ta <= (ta[-1] if T0 is None else T0) * (1 + 1e-12)
    vals = []
    for (_, sa), (_, sb) in zip(a.snapshots, b.snapshots):
        if sa.grid != sb.grid:
            raise ValueError("trajectories live on different grids")
        vals.append(l2_norm(sa.u - sb.u) ** 2 + l2_norm(sa.w - sb.w) ** 2)
    vals = np.array(vals)[keep]
    t = ta[keep]
    return float(math.sqrt(np.sum(0.5 * np.diff(t) * (vals[1:] + vals[:-1]))))


@dataclass
class SweepResult:
    axis: str
    values: list[float]
    runs: list[RunResult]
    table: list[dict] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        codes = [r.exit_code for r in self.runs]
        if 3 in codes:
            return 3
        return 1 if 1 in codes else 0

    def to_csv(self) -> str:
        cols = list(self.table[0]) if self.table else ["value"]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in self.table:
            w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()


def _default_snapshot_stride(cfg: RunConfig) -> RunConfig:
    if cfg.step.snapshot_stride or cfg.step.dt == "auto":
        return cfg
    nsteps = max(1, round(cfg.step.t_end / cfg.step.dt))
    return cfg.with_updates(step={"snapshot_stride": max(1, nsteps // 20)})


def sweep(
    cfg: RunConfig,
    axis: str,
    values: list[float],
    out_dir: Path | str | None = None,
    base_dir: Path | str = ".",
    threads: int = 1,
) -> SweepResult:
    """Run one configuration per value (in parallel when threads > 1) and compare."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}")
    if not values:
        raise ValueError("sweep needs at least one value")
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    if axis == "eps" and len(values) > 1:
        if cfg.step.dt == "auto":
            raise ValueError("eps sweeps need a fixed dt so trajectories share time levels")
        cfg = _default_snapshot_stride(cfg)
    cfgs = [sweep_config(cfg, axis, v) for v in values]
    dirs = [out if len(values) == 1 else out / f"{axis}_{v:g}" for v in values]
    jobs = [(c, d, base_dir, 1) for c, d in zip(cfgs, dirs)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [run(c, d, base_dir) for c, d in zip(cfgs, dirs)]

    table = []
    prev = None
    for v, r in zip(values, runs):
        traj = r.trajectory
        led = traj.ledger if traj is not None else None
        row = {
            "value": float(v),
            "exit_code": r.exit_code,
            "t_end": r.t_end,
            "T_E": r.estimate.T_E if r.estimate else None,
            "final_u_L2": float(led.column("u_L2")[-1]) if led is not None else None,
            "final_w_H_sigma": float(led.column("w_H_sigma")[-1]) if led is not None else None,
            "uniform_bound_C": auditor.uniform_bound_constant(traj) if traj is not None else None,
        }
        if axis == "eps":
            row["diff_to_previous"] = (
                space_time_difference(prev.trajectory, traj) if prev is not None and not r.blew_up else None
            )
        if axis == "muv":
            try:
                row["absorption_ratio"] = auditor.viscosity_absorption_report(traj)
            except ValueError:
                row["absorption_ratio"] = None
        table.append(row)
        prev = r
    result = SweepResult(axis, [float(v) for v in values], runs, table)
    if len(values) > 1:
        atomic_write_bytes(out / f"sweep_{axis}.csv", result.to_csv().encode())
    return result


def resolve_threads(cli_value: int | None) -> int:
    if cli_value is not None:
        return cli_value
    env = os.environ.get("MPS_THREADS")
    return int(env) if env else 1
