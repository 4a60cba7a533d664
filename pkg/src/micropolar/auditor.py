"""Numerical checks of energy balances, Sobolev inequalities, the Gronwall
lemma and the existence-time formula.

Ledger-based checks read the columns written by :mod:`micropolar.integrator`;
field-based checks take spectral fields directly.  Every inequality is
evaluated as a literal margin (right side minus left side) so that a
negative value is a violation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .rhs import SystemParams, in_viscous_window
from .spectral import (
    Field,
    SpectralField,
    VectorField,
    curl,
    multiplier_symbol,
    pointwise_product,
    sobolev_norm,
)

Which = Literal["velocity", "angular"]
Status = Literal["pass", "fail", "report-only", "inapplicable", "skipped"]


# -- energy balances -------------------------------------------------------------


def _col(traj, name):
    return traj.ledger.column(name)


def l2_balance_residual(traj, which: Which) -> np.ndarray:
    """Residual of the integrated L2 balance at every ledger row.

    velocity: |u(t)|^2 + 2 nu int |grad u|^2 - |u(0)|^2 - int <curl w, u>
    angular:  |w(t)|^2 + 2 int (mu |grad w|^2 + |w|^2 + |div w|^2) - |w(0)|^2 - int <curl u, w>
    """
    p = traj.params
    led = traj.ledger
    if which == "velocity":
        led.require("u_L2", "cum_grad_u", "cum_curlw_u")
        e = _col(traj, "u_L2") ** 2
        return e + 2 * p.nu * _col(traj, "cum_grad_u") - e[0] - _col(traj, "cum_curlw_u")
    if which == "angular":
        led.require("w_L2", "cum_grad_w", "cum_w_l2", "cum_div_w", "cum_curlu_w")
        e = _col(traj, "w_L2") ** 2
        diss = p.mu * _col(traj, "cum_grad_w") + _col(traj, "cum_w_l2") + _col(traj, "cum_div_w")
        return e + 2 * diss - e[0] - _col(traj, "cum_curlu_w")
    raise ValueError(f"unknown balance {which!r}")


def fractional_balance_residual(traj, which: Which) -> np.ndarray:
    """Residual of the integrated fractional balance (D^tau for u, L^sigma for w)."""
    p = traj.params
    led = traj.ledger
    if which == "velocity":
        led.require(
            "frac_u_energy",
            "cum_frac_u_diss",
            "cum_frac_u_adv",
            "cum_frac_u_press",
            "cum_frac_u_coupling",
        )
        e = _col(traj, "frac_u_energy")
        return (
            e
            - e[0]
            + 2 * p.nu * _col(traj, "cum_frac_u_diss")
            + 2 * _col(traj, "cum_frac_u_adv")
            + 2 * _col(traj, "cum_frac_u_press")
            - _col(traj, "cum_frac_u_coupling")
        )
    if which == "angular":
        led.require(
            "frac_w_energy",
            "cum_frac_w_grad",
            "cum_frac_w_l2",
            "cum_frac_w_div",
            "cum_frac_w_adv",
            "cum_frac_w_coupling",
        )
        e = _col(traj, "frac_w_energy")
        diss = p.mu * _col(traj, "cum_frac_w_grad") + _col(traj, "cum_frac_w_l2") + _col(traj, "cum_frac_w_div")
        return e - e[0] + 2 * diss + 2 * _col(traj, "cum_frac_w_adv") - _col(traj, "cum_frac_w_coupling")
    raise ValueError(f"unknown balance {which!r}")


def fill_residual_columns(traj) -> None:
    led = traj.ledger
    if not len(led):
        return
    led.set_column("res_l2_u", l2_balance_residual(traj, "velocity"))
    led.set_column("res_l2_w", l2_balance_residual(traj, "angular"))
    led.set_column("res_frac_u", fractional_balance_residual(traj, "velocity"))
    led.set_column("res_frac_w", fractional_balance_residual(traj, "angular"))


# -- primitive inequalities --------------------------------------------------------


def _homogeneous_norm(f: Field, s: float) -> float:
    # zero mode dropped, so no mean-free requirement on f
    m2 = multiplier_symbol(f.grid, 2 * s, "homogeneous")
    return float(np.sqrt(np.sum(m2 * np.abs(f.coeffs) ** 2)))


@dataclass(frozen=True)
class Margin:
    margin: float
    scale: float

    def ok(self, rtol: float = 1e-12) -> bool:
        return self.margin >= -rtol * self.scale


def duality_pairing_check(w: VectorField, u: VectorField, a: float, b: float, order: float = 0.0) -> Margin:
    """margin = |w|_{H^a} |u|_{H^b} - <D^r curl w, D^r u> (homogeneous norms).

    With r = ``order`` the split must satisfy a + b = 1 + 2r (one derivative
    from the curl plus the two fractional weights).
    """
    if not math.isclose(a + b, 1 + 2 * order, rel_tol=0, abs_tol=1e-12):
        raise ValueError(f"exponent split a + b = {a + b} must equal {1 + 2 * order}")
    weight = multiplier_symbol(u.grid, 2 * order, "homogeneous") if order else 1.0
    c = curl(w).coeffs
    pairing = float(np.real(np.sum(weight * c * np.conj(u.coeffs))))
    product = _homogeneous_norm(w, a) * _homogeneous_norm(u, b)
    return Margin(product - pairing, product)


def interpolation_check(f: Field, s1: float, s2: float, theta: float, kind: str = "homogeneous") -> Margin:
    """margin = |f|_{s1}^theta |f|_{s2}^(1-theta) - |f|_{theta s1 + (1-theta) s2}."""
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    if kind == "homogeneous":
        norm = lambda s: _homogeneous_norm(f, s)  # noqa: E731
    else:
        norm = lambda s: sobolev_norm(f, s, "inhomogeneous")  # noqa: E731
    n1, n2 = norm(s1), norm(s2)
    mid = norm(theta * s1 + (1 - theta) * s2)
    bound = n1**theta * n2 ** (1 - theta)
    return Margin(bound - mid, max(bound, mid))


@dataclass(frozen=True)
class YoungBound:
    c_delta: float
    lhs: float
    rhs: float
    margin: float
    y_star: float  # maximiser of x*y - delta*y^q for this x

    def ok(self, rtol: float = 1e-12) -> bool:
        return self.margin >= -rtol * max(self.lhs, self.rhs)


def young_constant(delta: float, p: float, q: float) -> float:
    """Optimal C with x y <= C x^p + delta y^q for all x, y >= 0."""
    return (delta * q) ** (-p / q) / p


def young_split(x: float, y: float, delta: float, p: float, q: float) -> YoungBound:
    if not (p > 1 and q > 1) or not math.isclose(1 / p + 1 / q, 1.0, rel_tol=1e-12):
        raise ValueError("need conjugate exponents p, q > 1 with 1/p + 1/q = 1")
    if x < 0 or y < 0 or not delta > 0:
        raise ValueError("need x, y >= 0 and delta > 0")
    c = young_constant(delta, p, q)
    lhs = x * y
    rhs = c * x**p + delta * y**q
    y_star = (x / (delta * q)) ** (1 / (q - 1))
    return YoungBound(c, lhs, rhs, rhs - lhs, y_star)


def _tensor_product_norm(f: Field, g: Field, s: float) -> float:
    fs = [f] if isinstance(f, SpectralField) else [f.component(i) for i in range(3)]
    gs = [g] if isinstance(g, SpectralField) else [g.component(i) for i in range(3)]
    total = 0.0
    for a in fs:
        for b in gs:
            total += _homogeneous_norm(pointwise_product(a, b), s) ** 2
    return math.sqrt(total)


def product_law_report(f: Field, g: Field, s1: float, s2: float) -> float:
    """|f g|_{H^(s1+s2-3/2)} / (|f|_{H^s1} |g|_{H^s2}), homogeneous norms.

    Vector arguments use the tensor product f (x) g.  Report only.
    """
    if not (s1 < 1.5 and s2 < 1.5 and s1 + s2 > 0):
        raise ValueError("product law needs s1, s2 < 3/2 and s1 + s2 > 0")
    denom = _homogeneous_norm(f, s1) * _homogeneous_norm(g, s2)
    if denom == 0:
        return 0.0
    return _tensor_product_norm(f, g, s1 + s2 - 1.5) / denom


# -- Gronwall lemma ----------------------------------------------------------------


@dataclass
class GronwallProblem:
    A: float
    B: float
    b: float
    T1: float
    t: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        if not (self.A > 0 and self.B > 0 and self.T1 > 0):
            raise ValueError("A, B and T1 must be positive")
        if self.b < 1:
            raise ValueError("b must be >= 1")
        if self.t.shape != self.alpha.shape or self.t.ndim != 1 or len(self.t) < 2:
            raise ValueError("t and alpha must be matching 1-D samples")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if np.any(self.alpha < 0):
            raise ValueError("alpha must be non-negative")


@dataclass(frozen=True)
class GronwallResult:
    status: Status
    T0: float
    bound: float
    max_alpha: float
    hypothesis_margin: float


def gronwall_horizon(A: float, B: float, b: float, T1: float) -> tuple[float, float]:
    """(T0, bound): alpha <= bound on [0, T0]."""
    if b == 1:
        return 1 / (4 * B), 2 * A
    t0 = 1 / (3**b * B * (A ** (b - 1) + (B * T1) ** (b - 1)))
    return min(T1, t0), 3 * A


def gronwall_check(prob: GronwallProblem, hyp_rtol: float = 1e-9) -> GronwallResult:
    """Check the hypothesis by trapezoidal quadrature, then the pointwise bound."""
    t, a = prob.t, prob.alpha
    integrand = a + a**prob.b
    integral = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (integrand[1:] + integrand[:-1]))])
    rhs = prob.A + prob.B * integral
    hyp = rhs - a
    hyp_margin = float(np.min(hyp / np.maximum(rhs, 1.0)))
    T0, bound = gronwall_horizon(prob.A, prob.B, prob.b, prob.T1)
    inside = t <= T0 * (1 + 1e-12)
    max_alpha = float(a[inside].max())
    if hyp_margin < -hyp_rtol:
        return GronwallResult("inapplicable", T0, bound, max_alpha, hyp_margin)
    status = "pass" if max_alpha <= bound else "fail"
    return GronwallResult(status, T0, bound, max_alpha, hyp_margin)


# -- existence time ------------------------------------------------------------------


@dataclass(frozen=True)
class ExistenceEstimate:
    C1: float
    tau: float
    sigma: float
    u0_norm: float
    w0_norm: float
    T_E: float | None
    branch: Literal["formula", "small-data"]
    admissible: bool = True


def existence_time_formula(C1: float, tau: float, u0_norm: float, w0_norm: float) -> float:
    """T_E = C1 (1 + |u0|_{Hdot^tau} + |w0|_{H^sigma})^(-2 / (2 tau - 1))."""
    if not tau > 0.5:
        raise ValueError("the explicit formula needs tau > 1/2")
    if not C1 > 0:
        raise ValueError("C1 must be positive")
    return C1 * (1.0 + u0_norm + w0_norm) ** (-2.0 / (2 * tau - 1))


def existence_time(
    u0: VectorField,
    w0: VectorField,
    p: SystemParams,
    C1: float,
    eps0: float | None = None,
    te_small_data: float | None = None,
) -> ExistenceEstimate:
    tau, sigma = p.tau, p.sigma
    if tau < 0.5:
        raise ValueError(f"tau = {tau} < 1/2 is not covered")
    w0_norm = sobolev_norm(w0, sigma, "inhomogeneous")
    if tau > 0.5:
        u0_norm = sobolev_norm(u0, tau, "homogeneous")
        return ExistenceEstimate(C1, tau, sigma, u0_norm, w0_norm, existence_time_formula(C1, tau, u0_norm, w0_norm), "formula")
    if eps0 is None or te_small_data is None:
        raise ValueError("tau = 1/2 needs eps0 and te_small_data")
    u0_norm = sobolev_norm(u0, 0.5, "inhomogeneous")
    ok = u0_norm + w0_norm < eps0
    return ExistenceEstimate(C1, tau, sigma, u0_norm, w0_norm, te_small_data if ok else None, "small-data", ok)


# -- ledger-level estimates -------------------------------------------------------------


def uniform_bound_constant(traj, T0: float | None = None, initial: float | None = None) -> float | None:
    """Smallest C with sup(|u|^2_{H^tau} + |w|^2_{H^sigma}) + int_0^T0 (|u|^2_{Hdot^(tau+1)}
    + |w|^2_{H^(sigma+1)}) <= C (|u0|^2_{H^tau} + |w0|^2_{H^sigma}).

    ``initial`` overrides the denominator, e.g. with the norms of the
    unmollified data; by default the first ledger row is used.  Returns None
    when the denominator vanishes (0/0).
    """
    led = traj.ledger
    led.require("t", "u_H_tau", "w_H_sigma", "cum_u_Hdot_tau1_sq", "cum_w_H_sigma1_sq")
    t = led.column("t")
    keep = t <= (t[-1] if T0 is None else T0) * (1 + 1e-12)
    energy = led.column("u_H_tau") ** 2 + led.column("w_H_sigma") ** 2
    last = np.flatnonzero(keep)[-1]
    dissipated = led.column("cum_u_Hdot_tau1_sq")[last] + led.column("cum_w_H_sigma1_sq")[last]
    denom = energy[0] if initial is None else initial
    if denom == 0:
        return None
    return float((energy[keep].max() + dissipated) / denom)


def viscosity_absorption_report(traj) -> float:
    """|int <D^tau curl w, D^tau u>| / ((mu nu)^(1/2) (int |w|^2_{Hdot^(sigma+1)})^(1/2)
    (int |u|^2_{Hdot^(tau+1)})^(1/2)) at the final ledger row; needs sigma = tau - 1."""
    p = traj.params
    if not in_viscous_window(p.tau, p.sigma):
        raise ValueError("absorption report needs sigma = tau - 1 with 1/2 <= tau < 3/2")
    led = traj.ledger
    led.require("cum_frac_u_coupling", "cum_w_Hdot_sigma1_sq", "cum_u_Hdot_tau1_sq")
    flux = abs(led.column("cum_frac_u_coupling")[-1])
    denom = math.sqrt(p.mu * p.nu) * math.sqrt(
        led.column("cum_w_Hdot_sigma1_sq")[-1] * led.column("cum_u_Hdot_tau1_sq")[-1]
    )
    if flux == 0:
        return 0.0
    return flux / denom


# -- report ------------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    status: Status
    value: float | None
    tolerance: float | None = None
    detail: str = ""


@dataclass
class AuditReport:
    checks: list[CheckResult] = field(default_factory=list)

    SCHEMA = "micropolar.audit-report"
    SCHEMA_VERSION = 1

    def add(self, result: CheckResult) -> None:
        if any(c.name == result.name for c in self.checks):
            raise ValueError(f"duplicate check {result.name!r}")
        self.checks.append(result)

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def to_json(self) -> str:
        lines = [
            "{",
            f'  "schema": {_jstr(self.SCHEMA)},',
            f'  "schema_version": {self.SCHEMA_VERSION},',
            f'  "all_passed": {"true" if self.passed else "false"},',
            '  "checks": [',
        ]
        items = []
        for c in self.checks:
            items.append(
                "    {"
                f'"name": {_jstr(c.name)}, '
                f'"status": {_jstr(c.status)}, '
                f'"value": {_jnum(c.value)}, '
                f'"tolerance": {_jnum(c.tolerance)}, '
                f'"detail": {_jstr(c.detail)}'
                "}"
            )
        lines.append(",\n".join(items))
        lines += ["  ]", "}"]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AuditReport":
        import json

        doc = json.loads(text)
        if doc.get("schema") != cls.SCHEMA or doc.get("schema_version") != cls.SCHEMA_VERSION:
            raise ValueError("not an audit report of a supported version")
        return cls([CheckResult(**c) for c in doc["checks"]])


def _jstr(s: str) -> str:
    import json

    return json.dumps(s)


def _jnum(x: float | None) -> str:
    if x is None or not math.isfinite(x):
        return "null"
    return format(float(x), ".17g")


def summarize(values: Sequence[float]) -> str:
    a = np.asarray(values, dtype=float)
    return f"min={a.min():.6g} max={a.max():.6g}"
