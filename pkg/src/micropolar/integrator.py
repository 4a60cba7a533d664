"""Time stepping of the mollified system and the energy ledger.

The linear parts are integrated exactly per Fourier mode:

* velocity: exp(-nu |k|^2 h)
* angular velocity: exp(h M(k)) with M(k) = -(mu |k|^2 + 1) I - k k^T, i.e.
  exp(-(mu |k|^2 + 1) h) * [I + (exp(-|k|^2 h) - 1) khat khat^T]

Advection and the two curl couplings are explicit (two-stage integrating
factor Heun scheme, second order).
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Union

import numpy as np

from .rhs import State, SystemParams, advection
from .spectral import (
    GridSpec,
    VectorField,
    curl,
    dealias,
    divergence,
    leray_project,
    mollify,
    multiplier_symbol,
    wavenumber_squared,
    wavevectors,
    _tables,
)

log = logging.getLogger(__name__)


class BlowUpError(RuntimeError):
    """Non-finite values appeared; ``trajectory`` holds everything up to ``t``."""

    def __init__(self, t: float, trajectory: "Trajectory | None" = None):
        super().__init__(f"non-finite state at t={t:.6g}")
        self.t = t
        self.trajectory = trajectory


@dataclass(frozen=True)
class StepPolicy:
    t_end: float
    dt: Union[float, Literal["auto"]] = "auto"
    cfl_safety: float = 0.5
    ledger_stride: int = 1
    snapshot_stride: int = 0
    dt_max: float = 1e-2

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ValueError("dt must be positive or 'auto'")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.ledger_stride < 1 or self.snapshot_stride < 0:
            raise ValueError("strides must be positive (snapshot_stride may be 0)")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")


# -- linear propagators ------------------------------------------------------


def velocity_propagator(grid: GridSpec, nu: float, h: float) -> np.ndarray:
    return np.exp(-nu * h * wavenumber_squared(grid))


def apply_angular_propagator(w: np.ndarray, grid: GridSpec, mu: float, h: float) -> np.ndarray:
    k = wavevectors(grid)
    k2 = wavenumber_squared(grid)
    khat = k / np.sqrt(_tables(grid)[4])
    par = np.sum(khat * w, axis=0)
    out = w + (np.exp(-k2 * h) - 1.0) * khat * par
    return np.exp(-(mu * k2 + 1.0) * h) * out


# -- explicit terms ------------------------------------------------------------


@dataclass
class ExplicitTerms:
    adv_u: VectorField  # dealiased div(v (x) u)
    adv_w: VectorField  # dealiased div(v (x) w)
    nl_u: VectorField  # -P adv_u + 1/2 curl w
    nl_w: VectorField  # -adv_w + 1/2 curl u


def explicit_terms(s: State, p: SystemParams) -> ExplicitTerms:
    v = mollify(s.u, p.eps)
    adv_u = advection(v, s.u)
    adv_w = advection(v, s.w)
    nl_u = leray_project(-adv_u) + 0.5 * curl(s.w)
    nl_w = -adv_w + 0.5 * curl(s.u)
    return ExplicitTerms(adv_u, adv_w, nl_u, nl_w)


def _finalize_velocity(u: np.ndarray, grid: GridSpec) -> VectorField:
    out = dealias(leray_project(VectorField(grid, u)))
    out.coeffs[:, 0, 0, 0] = 0.0
    return out


def _advance(s: State, p: SystemParams, h: float, terms0: ExplicitTerms) -> State:
    grid = s.grid
    eu = velocity_propagator(grid, p.nu, h)

    u_pred = eu * (s.u.coeffs + h * terms0.nl_u.coeffs)
    w_pred = apply_angular_propagator(s.w.coeffs + h * terms0.nl_w.coeffs, grid, p.mu, h)
    pred = State(_finalize_velocity(u_pred, grid), dealias(VectorField(grid, w_pred)), s.t + h)
    terms1 = explicit_terms(pred, p)

    u_new = eu * (s.u.coeffs + 0.5 * h * terms0.nl_u.coeffs) + 0.5 * h * terms1.nl_u.coeffs
    w_new = apply_angular_propagator(s.w.coeffs + 0.5 * h * terms0.nl_w.coeffs, grid, p.mu, h)
    w_new = w_new + 0.5 * h * terms1.nl_w.coeffs
    out = State(_finalize_velocity(u_new, grid), dealias(VectorField(grid, w_new)), s.t + h)
    if not (np.all(np.isfinite(out.u.coeffs)) and np.all(np.isfinite(out.w.coeffs))):
        raise BlowUpError(out.t)
    return out


def imex_step(s: State, p: SystemParams, dt: float) -> State:
    """Advance one step of size dt."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return _advance(s, p, dt, explicit_terms(s, p))


def prepare_initial_state(u0: VectorField, w0: VectorField, p: SystemParams) -> State:
    """Project and dealias u0; mollify and dealias w0 (w_eps(0) = w0 * theta_eps)."""
    if u0.grid != w0.grid:
        raise ValueError("u0 and w0 must share one grid")
    u = _finalize_velocity(u0.coeffs, u0.grid)
    w = dealias(mollify(w0, p.eps))
    return State(u, w, 0.0)


def cfl_dt(s: State, p: SystemParams, policy: StepPolicy) -> float:
    vmax = float(np.sqrt(np.sum(mollify(s.u, p.eps).to_physical() ** 2, axis=0)).max())
    if vmax == 0:
        return policy.dt_max
    return min(policy.dt_max, policy.cfl_safety * s.grid.dx / vmax)


# -- ledger ---------------------------------------------------------------------

# instantaneous quantities; names starting with "rate_" are integrated in time
DIAGNOSTIC_COLUMNS = [
    "u_L2",
    "w_L2",
    "u_H_tau",
    "u_Hdot_tau",
    "u_Hdot_tau1",
    "w_H_sigma",
    "w_H_sigma1",
    "w_Hdot_sigma1",
    "div_u_rel",
    "frac_u_energy",
    "frac_w_energy",
    "rate_grad_u",
    "rate_grad_w",
    "rate_w_l2",
    "rate_div_w",
    "rate_curlw_u",
    "rate_curlu_w",
    "rate_frac_u_diss",
    "rate_frac_u_adv",
    "rate_frac_u_press",
    "rate_frac_u_coupling",
    "rate_frac_w_grad",
    "rate_frac_w_l2",
    "rate_frac_w_div",
    "rate_frac_w_adv",
    "rate_frac_w_coupling",
    "rate_u_Hdot_tau1_sq",
    "rate_w_H_sigma1_sq",
    "rate_w_Hdot_sigma1_sq",
]
RATE_COLUMNS = [c for c in DIAGNOSTIC_COLUMNS if c.startswith("rate_")]
CUMULATIVE_COLUMNS = ["cum_" + c[len("rate_") :] for c in RATE_COLUMNS]
RESIDUAL_COLUMNS = ["res_l2_u", "res_l2_w", "res_frac_u", "res_frac_w"]
LEDGER_COLUMNS = ["t", "step", "dt"] + DIAGNOSTIC_COLUMNS + CUMULATIVE_COLUMNS + RESIDUAL_COLUMNS


class LedgerSchemaError(ValueError):
    pass


class EnergyLedger:
    """Column store of ledger rows with CSV round-trip (values written with repr)."""

    def __init__(self, columns: list[str] | None = None):
        self.columns = list(columns or LEDGER_COLUMNS)
        self.rows: list[list[float]] = []

    def __len__(self):
        return len(self.rows)

    def append(self, row: dict) -> None:
        missing = [c for c in self.columns if c not in row]
        if missing:
            raise LedgerSchemaError(f"row lacks columns {missing}")
        self.rows.append([float(row[c]) for c in self.columns])

    def column(self, name: str) -> np.ndarray:
        try:
            i = self.columns.index(name)
        except ValueError:
            raise LedgerSchemaError(f"ledger has no column {name!r}") from None
        return np.array([r[i] for r in self.rows], dtype=float)

    def require(self, *names: str) -> None:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise LedgerSchemaError(f"ledger lacks columns {missing}")
        if not self.rows:
            raise LedgerSchemaError("ledger is empty")

    def set_column(self, name: str, values) -> None:
        i = self.columns.index(name)
        for r, v in zip(self.rows, values):
            r[i] = float(v)

    def row(self, i: int) -> dict:
        return dict(zip(self.columns, self.rows[i]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([repr(x) for x in r])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EnergyLedger":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise LedgerSchemaError("empty ledger file") from None
        led = cls(header)
        for r in reader:
            if len(r) != len(header):
                raise LedgerSchemaError("ragged ledger row")
            led.rows.append([float(x) for x in r])
        return led


def diagnostics(s: State, p: SystemParams, terms: ExplicitTerms) -> dict:
    """Instantaneous norms and flux densities of one state."""
    grid = s.grid
    u, w = s.u.coeffs, s.w.coeffs
    k2 = wavenumber_squared(grid)
    au2 = np.abs(u) ** 2
    aw2 = np.abs(w) ** 2
    su = au2.sum(axis=0)
    sw = aw2.sum(axis=0)

    def wsum(weight, a):
        return float(np.sum(weight * a))

    def pair(a, b, weight=1.0):
        return float(np.real(np.sum(weight * a * np.conj(b))))

    d_tau2 = multiplier_symbol(grid, 2 * p.tau, "homogeneous")
    l_sig2 = multiplier_symbol(grid, 2 * p.sigma, "inhomogeneous")
    h_tau2 = multiplier_symbol(grid, 2 * p.tau, "inhomogeneous")
    d_sig12 = multiplier_symbol(grid, 2 * (p.sigma + 1), "homogeneous")

    curl_w = curl(s.w).coeffs
    curl_u = curl(s.u).coeffs
    div_w = divergence(s.w).coeffs
    adv_u = terms.adv_u.coeffs
    grad_p = leray_project(terms.adv_u).coeffs - adv_u
    adv_w = terms.adv_w.coeffs

    u_l2 = math.sqrt(su.sum())
    div_u = math.sqrt(float(np.sum(np.abs(divergence(s.u).coeffs) ** 2)))
    return {
        "u_L2": u_l2,
        "w_L2": math.sqrt(sw.sum()),
        "u_H_tau": math.sqrt(wsum(h_tau2, su)),
        "u_Hdot_tau": math.sqrt(wsum(d_tau2, su)),
        "u_Hdot_tau1": math.sqrt(wsum(d_tau2 * k2, su)),
        "w_H_sigma": math.sqrt(wsum(l_sig2, sw)),
        "w_H_sigma1": math.sqrt(wsum(l_sig2 * (1 + k2), sw)),
        "w_Hdot_sigma1": math.sqrt(wsum(d_sig12, sw)),
        "div_u_rel": div_u / u_l2 if u_l2 > 0 else 0.0,
        "frac_u_energy": wsum(d_tau2, su),
        "frac_w_energy": wsum(l_sig2, sw),
        "rate_grad_u": wsum(k2, su),
        "rate_grad_w": wsum(k2, sw),
        "rate_w_l2": float(sw.sum()),
        "rate_div_w": float(np.sum(np.abs(div_w) ** 2)),
        "rate_curlw_u": pair(curl_w, u),
        "rate_curlu_w": pair(curl_u, w),
        "rate_frac_u_diss": wsum(d_tau2 * k2, su),
        "rate_frac_u_adv": pair(adv_u, u, d_tau2),
        "rate_frac_u_press": pair(grad_p, u, d_tau2),
        "rate_frac_u_coupling": pair(curl_w, u, d_tau2),
        "rate_frac_w_grad": wsum(l_sig2 * k2, sw),
        "rate_frac_w_l2": wsum(l_sig2, sw),
        "rate_frac_w_div": wsum(l_sig2, np.abs(div_w) ** 2),
        "rate_frac_w_adv": pair(adv_w, w, l_sig2),
        "rate_frac_w_coupling": pair(curl_u, w, l_sig2),
        "rate_u_Hdot_tau1_sq": wsum(d_tau2 * k2, su),
        "rate_w_H_sigma1_sq": wsum(l_sig2 * (1 + k2), sw),
        "rate_w_Hdot_sigma1_sq": wsum(d_sig12, sw),
    }


@dataclass
class Trajectory:
    params: SystemParams
    ledger: EnergyLedger = field(default_factory=EnergyLedger)
    snapshots: list[tuple[float, State]] = field(default_factory=list)


@np.errstate(over="ignore", invalid="ignore")
def simulate(
    u0: VectorField,
    w0: VectorField,
    params: SystemParams,
    policy: StepPolicy,
    on_snapshot: Callable[[int, State], None] | None = None,
) -> Trajectory:
    """Integrate from (u0, w0) to policy.t_end and return the trajectory.

    Overflow is not reported as a floating-point warning; any non-finite
    state or diagnostic raises BlowUpError instead.

    ``on_snapshot(step, state)`` is called for every stored snapshot, e.g. to
    write it to disk.  On blow-up a BlowUpError carrying the partial
    trajectory is raised.
    """
    from .auditor import fill_residual_columns

    s = prepare_initial_state(u0, w0, params)
    traj = Trajectory(params)
    ledger = traj.ledger
    cum = dict.fromkeys(CUMULATIVE_COLUMNS, 0.0)

    def keep_snapshot(step, state):
        traj.snapshots.append((state.t, state.copy()))
        if on_snapshot is not None:
            on_snapshot(step, state)

    def record(step, state, dt, diag):
        row = {"t": state.t, "step": step, "dt": dt, **diag, **cum}
        row.update(dict.fromkeys(RESIDUAL_COLUMNS, 0.0))
        ledger.append(row)

    terms = explicit_terms(s, params)
    diag = diagnostics(s, params, terms)
    record(0, s, 0.0, diag)
    keep_snapshot(0, s)

    fixed = policy.dt != "auto"
    nsteps_fixed = max(1, int(math.ceil(policy.t_end / policy.dt - 1e-9))) if fixed else None
    step = 0
    while True:
        if fixed:
            if step >= nsteps_fixed:
                break
            t_next = min(policy.t_end, (step + 1) * policy.dt)
            h = t_next - s.t
        else:
            if s.t >= policy.t_end * (1 - 1e-12):
                break
            h = min(cfl_dt(s, params, policy), policy.t_end - s.t)
            t_next = s.t + h
        try:
            s_new = _advance(s, params, h, terms)
            s_new.t = t_next
            terms = explicit_terms(s_new, params)
            diag_new = diagnostics(s_new, params, terms)
            if not all(math.isfinite(v) for v in diag_new.values()):
                raise BlowUpError(t_next)
        except BlowUpError as err:
            fill_residual_columns(traj)
            err.trajectory = traj
            raise
        step += 1
        for c, r in zip(CUMULATIVE_COLUMNS, RATE_COLUMNS):
            cum[c] += 0.5 * h * (diag[r] + diag_new[r])
        s, diag = s_new, diag_new
        last = (fixed and step >= nsteps_fixed) or (not fixed and s.t >= policy.t_end * (1 - 1e-12))
        if step % policy.ledger_stride == 0 or last:
            record(step, s, h, diag)
        if last or (policy.snapshot_stride and step % policy.snapshot_stride == 0):
            keep_snapshot(step, s)
    fill_residual_columns(traj)
    log.debug("simulate: %d steps to t=%.6g", step, s.t)
    return traj
