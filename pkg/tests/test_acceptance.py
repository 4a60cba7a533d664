"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s``; the verdicts are also
repeated in the terminal summary.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from micropolar import runner
from micropolar.auditor import (
    GronwallProblem,
    duality_pairing_check,
    existence_time,
    existence_time_formula,
    gronwall_check,
    interpolation_check,
    uniform_bound_constant,
    young_split,
)
from micropolar.config import parse_config
from micropolar.datagen import ICRecipe, make_angular_ic, make_velocity_ic
from micropolar.integrator import StepPolicy, simulate
from micropolar.rhs import SystemParams, pressure
from micropolar.spectral import (
    GridSpec,
    SobolevIndex,
    SpectralField,
    VectorField,
    curl,
    dealias,
    divergence,
    fractional_multiplier,
    gradient,
    inner,
    l2_norm,
    leray_project,
    single_mode,
    sobolev_norm,
)

from conftest import random_scalar, random_solenoidal, random_vector

SMOOTH_T_END = 0.1


def smooth_data(n):
    g = GridSpec(n)
    u0 = make_velocity_ic(ICRecipe(kind="taylor-green", target_index=SobolevIndex(0.0), amplitude=0.5), g)
    w0 = make_angular_ic(ICRecipe(kind="random-spectrum", target_index=SobolevIndex(2.0), amplitude=1.0, seed=7), g)
    return u0, w0


@pytest.fixture(scope="module")
def smooth_runs():
    """Smooth-data runs at n=32 to t=0.1 for dt = 1e-3 and 5e-4, plus a tau=0 twin."""
    u0, w0 = smooth_data(32)
    p = SystemParams(tau=1.0, sigma=0.2, eps=0.1)
    runs = {dt: simulate(u0, w0, p, StepPolicy(SMOOTH_T_END, dt=dt)) for dt in (1e-3, 5e-4)}
    with pytest.warns(UserWarning):
        p0 = SystemParams(tau=0.0, sigma=0.0, eps=0.1)
    runs["tau0"] = simulate(u0, w0, p0, StepPolicy(SMOOTH_T_END, dt=1e-3))
    return runs


def worst(traj, column, scale_column, squared):
    led = traj.ledger
    e0 = led.column(scale_column)[0]
    scale = e0**2 if squared else e0
    return float(np.abs(led.column(column)).max() / scale)


def test_criterion_01_spectral_identities(acceptance):
    t0 = time.perf_counter()
    g = GridSpec(32)
    worst_err = dict.fromkeys(["parseval", "semigroup", "div_curl", "curl_grad", "leray", "cross_pairing"], 0.0)
    for seed in range(100):
        rng = np.random.default_rng(seed)
        values = rng.standard_normal(g.shape)
        f = SpectralField.from_physical(g, values)
        worst_err["parseval"] = max(worst_err["parseval"], abs(np.mean(values**2) - l2_norm(f) ** 2) / np.mean(values**2))

        h = random_scalar(g, rng)
        s1, s2 = rng.uniform(-2, 2, size=2)
        lhs = fractional_multiplier(fractional_multiplier(h, s2), s1).coeffs
        rhs = fractional_multiplier(h, s1 + s2).coeffs
        worst_err["semigroup"] = max(worst_err["semigroup"], np.abs(lhs - rhs).max() / np.abs(rhs).max())

        u, w = random_vector(g, rng), random_vector(g, rng)
        h2 = sobolev_norm(w, SobolevIndex(2, "homogeneous"))
        worst_err["div_curl"] = max(worst_err["div_curl"], l2_norm(divergence(curl(w))) / h2)
        worst_err["curl_grad"] = max(
            worst_err["curl_grad"], l2_norm(curl(gradient(h))) / sobolev_norm(h, SobolevIndex(2, "homogeneous"))
        )
        pu = leray_project(u)
        worst_err["leray"] = max(worst_err["leray"], l2_norm(leray_project(pu) - pu) / l2_norm(pu))
        a, b = inner(curl(u), w), inner(curl(w), u)
        scale = sobolev_norm(u, SobolevIndex(1, "homogeneous")) * l2_norm(w)
        worst_err["cross_pairing"] = max(worst_err["cross_pairing"], abs(a - b) / scale)
    elapsed = time.perf_counter() - t0
    ok = max(worst_err.values()) <= 1e-12 and elapsed < 60
    detail = ", ".join(f"{k}={v:.1e}" for k, v in worst_err.items()) + f"; {elapsed:.1f}s (tol 1e-12, <60s)"
    assert acceptance.record(1, ok, detail)


def test_criterion_02_pressure_poisson(acceptance):
    g = GridSpec(32)
    k = np.stack(np.meshgrid(*[np.fft.fftfreq(g.n, 1 / g.n)] * 3, indexing="ij"))
    k2 = (k**2).sum(0)
    worst_rel = 0.0
    for seed in range(10):
        u = random_solenoidal(g, np.random.default_rng(seed))
        up = np.fft.ifftn(u.coeffs, axes=(1, 2, 3)).real * g.n**3
        source = np.zeros(g.shape, dtype=complex)
        for i in range(3):
            for j in range(3):
                source += -k[i] * k[j] * np.fft.fftn(up[i] * up[j]) / g.n**3
        source = dealias(SpectralField(g, source)).coeffs
        residual = k2 * pressure(u).coeffs - source
        worst_rel = max(worst_rel, np.abs(residual).max() / np.abs(source).max())
    assert acceptance.record(2, worst_rel <= 1e-12, f"max relative residual {worst_rel:.2e} (tol 1e-12)")


def test_criterion_03_l2_balances(acceptance, smooth_runs):
    coarse, fine = smooth_runs[1e-3], smooth_runs[5e-4]
    r_u = worst(coarse, "res_l2_u", "u_L2", True)
    r_w = worst(coarse, "res_l2_w", "w_L2", True)
    ratio_u = r_u / worst(fine, "res_l2_u", "u_L2", True)
    ratio_w = r_w / worst(fine, "res_l2_w", "w_L2", True)
    ok = max(r_u, r_w) <= 1e-5 and all(3.5 <= r <= 4.5 for r in (ratio_u, ratio_w))
    detail = f"residual u={r_u:.2e} w={r_w:.2e} (tol 1e-5); halving ratio u={ratio_u:.3f} w={ratio_w:.3f} (3.5-4.5)"
    assert acceptance.record(3, ok, detail)


def test_criterion_04_fractional_balances(acceptance, smooth_runs):
    coarse, fine, tau0 = smooth_runs[1e-3], smooth_runs[5e-4], smooth_runs["tau0"]
    r_u = worst(coarse, "res_frac_u", "frac_u_energy", False)
    r_w = worst(coarse, "res_frac_w", "frac_w_energy", False)
    ratio_u = r_u / worst(fine, "res_frac_u", "frac_u_energy", False)
    ratio_w = r_w / worst(fine, "res_frac_w", "frac_w_energy", False)
    e_u = coarse.ledger.column("u_L2")[0] ** 2
    e_w = coarse.ledger.column("w_L2")[0] ** 2
    cross_u = np.abs(tau0.ledger.column("res_frac_u") - coarse.ledger.column("res_l2_u")).max() / e_u
    cross_w = np.abs(tau0.ledger.column("res_frac_w") - coarse.ledger.column("res_l2_w")).max() / e_w
    ok = (
        max(r_u, r_w) <= 1e-5
        and all(3.5 <= r <= 4.5 for r in (ratio_u, ratio_w))
        and max(cross_u, cross_w) <= 1e-12
    )
    detail = (
        f"residual u={r_u:.2e} w={r_w:.2e} (tol 1e-5); ratio u={ratio_u:.3f} w={ratio_w:.3f}; "
        f"tau=0 vs L2 u={cross_u:.1e} w={cross_w:.1e} (tol 1e-12)"
    )
    assert acceptance.record(4, ok, detail)


def _aligned_single_mode(g, rng, a):
    """One-mode (w, u) pair on which the duality pairing is an equality."""
    while True:
        k = rng.integers(-4, 5, size=3)
        if k.any():
            break
    trial = rng.standard_normal(3)
    c = np.cross(k, trial) * (rng.standard_normal() + 1j * rng.standard_normal())
    uk = rng.uniform(0.1, 2) * 1j * np.cross(k, c)
    w, u = VectorField.zeros(g), VectorField.zeros(g)
    i = tuple(int(x) % g.n for x in k)
    j = tuple(int(-x) % g.n for x in k)
    for comp in range(3):
        w.coeffs[(comp,) + i], w.coeffs[(comp,) + j] = c[comp], np.conj(c[comp])
        u.coeffs[(comp,) + i], u.coeffs[(comp,) + j] = uk[comp], np.conj(uk[comp])
    return w, u, k


def test_criterion_05_inequality_suite(acceptance):
    rng = np.random.default_rng(5)
    g = GridSpec(16)
    worst_random = {"duality": math.inf, "interpolation": math.inf, "young": math.inf}
    for _ in range(1000):
        tau = rng.uniform(0.5, 1.5)
        s = rng.uniform(-0.5, 1.0)
        order = 0.0 if rng.random() < 0.5 else tau
        u, w = random_solenoidal(g, rng), random_vector(g, rng)
        a = 1 - tau + s + order
        m = duality_pairing_check(w, u, a, 1 + 2 * order - a, order)
        worst_random["duality"] = min(worst_random["duality"], m.margin / m.scale)

        sigma = rng.uniform(tau - 1, 1.5)
        s1, s2 = sorted(rng.uniform(sigma - 1, sigma + 1.5, size=2))
        kind = "homogeneous" if rng.random() < 0.5 else "inhomogeneous"
        m = interpolation_check(w, s1, s2, rng.uniform(0, 1), kind)
        worst_random["interpolation"] = min(worst_random["interpolation"], m.margin / m.scale)

        p = rng.uniform(1.05, 8)
        q = p / (p - 1)
        x, y = np.exp(rng.normal(0, 2, size=2))
        r = young_split(x, y, float(np.exp(rng.normal(0, 1.5))), p, q)
        worst_random["young"] = min(worst_random["young"], r.margin / max(r.lhs, r.rhs))

    worst_equal = {"duality": 0.0, "interpolation": 0.0, "young": 0.0}
    for _ in range(100):
        a = rng.uniform(-1, 2)
        w, u, k = _aligned_single_mode(g, rng, a)
        m = duality_pairing_check(w, u, a, 1 - a)
        worst_equal["duality"] = max(worst_equal["duality"], abs(m.margin) / m.scale)
        f = single_mode(g, tuple(k), complex(*rng.standard_normal(2)))
        m = interpolation_check(f, rng.uniform(-1, 0.5), rng.uniform(0.5, 2.5), rng.uniform(0, 1))
        worst_equal["interpolation"] = max(worst_equal["interpolation"], abs(m.margin) / m.scale)
        p = rng.uniform(1.05, 8)
        q = p / (p - 1)
        x, delta = float(np.exp(rng.normal())), float(np.exp(rng.normal()))
        y = young_split(x, 1.0, delta, p, q).y_star
        r = young_split(x, y, delta, p, q)
        worst_equal["young"] = max(worst_equal["young"], abs(r.margin) / max(r.lhs, r.rhs))
    ok = min(worst_random.values()) >= -1e-12 and max(worst_equal.values()) <= 1e-12
    detail = (
        "min margin/scale " + ", ".join(f"{k}={v:.1e}" for k, v in worst_random.items())
        + " (>= -1e-12); equality |margin|/scale "
        + ", ".join(f"{k}={v:.1e}" for k, v in worst_equal.items())
        + " (<= 1e-12)"
    )
    assert acceptance.record(5, ok, detail)


def test_criterion_06_gronwall(acceptance):
    rng = np.random.default_rng(6)
    statuses = []
    worst_ratio = 0.0
    for _ in range(200):
        A, B = np.exp(rng.uniform(-5, 5)), np.exp(rng.uniform(-4, 4))
        t = np.linspace(0, 1 / (4 * B), 500)
        res = gronwall_check(GronwallProblem(A, B, 1.0, 1.0, t, A * np.exp(B * t)))
        statuses.append(res.status)
        worst_ratio = max(worst_ratio, res.max_alpha / A)
    sweep_ok = all(s == "pass" for s in statuses)

    T0_expected = 1 / 18
    sol = solve_ivp(lambda t, a: a + a**2, (0, T0_expected), [1.0], rtol=1e-12, atol=1e-14, dense_output=True)
    t = np.linspace(0, T0_expected, 2001)
    res = gronwall_check(GronwallProblem(1.0, 1.0, 2.0, 1.0, t, sol.sol(t)[0]))
    ode_ok = res.status == "pass" and math.isclose(res.T0, T0_expected, rel_tol=1e-15)
    detail = (
        f"b=1 sweep 200/200 pass={sweep_ok}, max alpha/A={worst_ratio:.4f} (e^0.25={math.exp(0.25):.4f} < 2); "
        f"b=2 ODE status={res.status}, T0={res.T0:.12f} (1/18), max alpha={res.max_alpha:.4f} <= 3"
    )
    assert acceptance.record(6, sweep_ok and ode_ok, detail)


def test_criterion_07_existence_time(acceptance):
    g = GridSpec(16)
    z = VectorField.zeros(g)
    zero = existence_time(z, z, SystemParams(), C1=2.75).T_E
    quarter = existence_time_formula(1.0, 1.0, 0.3, 0.7)
    rng = np.random.default_rng(7)
    violations = 0
    for _ in range(1000):
        C1 = np.exp(rng.uniform(-3, 3))
        tau = rng.uniform(0.51, 1.49)
        a, b = np.exp(rng.uniform(-4, 3, size=2))
        d = np.exp(rng.uniform(-4, 1))
        base = existence_time_formula(C1, tau, a, b)
        violations += not existence_time_formula(C1, tau, a + d, b) < base
        violations += not existence_time_formula(C1, tau, a, b + d) < base
        violations += not existence_time_formula(C1 * (1 + d), tau, a, b) > base
    ok = zero == 2.75 and quarter == 0.25 and violations == 0
    detail = f"zero data T_E={zero!r} (=C1 2.75); T_E={quarter!r} (0.25); monotonicity violations {violations}/3000"
    assert acceptance.record(7, ok, detail)


def test_criterion_08_negative_regularity(acceptance):
    t_start = time.perf_counter()
    sigma, tau = -0.4, 0.55
    recipe_w = ICRecipe(kind="random-spectrum", target_index=SobolevIndex(sigma), amplitude=0.05, seed=12)
    recipe_u = ICRecipe(kind="random-spectrum", target_index=SobolevIndex(tau), amplitude=0.05, seed=11)
    hs, l2 = [], []
    for n in (32, 64, 128):
        w0 = make_angular_ic(recipe_w, GridSpec(n))
        hs.append(sobolev_norm(w0, SobolevIndex(sigma)) / recipe_w.amplitude)
        l2.append(sobolev_norm(w0, SobolevIndex(0.0)))
    growth = [l2[i + 1] / l2[i] for i in range(2)]
    data_ok = all(abs(h - 1) <= 0.02 for h in hs) and all(r >= 1.2 for r in growth)

    p = SystemParams(nu=1.0, mu=1.0, eps=0.1, tau=tau, sigma=sigma)
    constants = []
    for n in (32, 48):
        g = GridSpec(n)
        u0, w0 = make_velocity_ic(recipe_u, g), make_angular_ic(recipe_w, g)
        T = min(0.05, existence_time(u0, w0, p, C1=1.0).T_E)
        traj = simulate(u0, w0, p, StepPolicy(T, dt=min(1e-3, T / 10)))
        initial = sobolev_norm(u0, SobolevIndex(tau)) ** 2 + sobolev_norm(w0, SobolevIndex(sigma)) ** 2
        constants.append(uniform_bound_constant(traj, initial=initial))
    spread = abs(constants[1] - constants[0]) / min(constants)
    elapsed = time.perf_counter() - t_start
    ok = data_ok and spread <= 0.25 and elapsed < 1800
    detail = (
        f"|w0|_H^-0.4/amp={', '.join(f'{h:.4f}' for h in hs)} (+-2%); L2 growth {growth[0]:.3f}, {growth[1]:.3f} "
        f"(>=1.2); C(n=32)={constants[0]:.4f} C(n=48)={constants[1]:.4f} spread {spread:.1%} (<=25%); {elapsed:.0f}s"
    )
    assert acceptance.record(8, ok, detail)


def _sweep_config(**params):
    doc = {
        "grid": {"n": 32},
        "params": {"nu": 1.0, "mu": 1.0, "eps": 0.1, "tau": 1.0, "sigma": 0.2, **params},
        "step": {"t_end": SMOOTH_T_END, "dt": 2e-3, "snapshot_stride": 5},
        "ic_u": {"kind": "taylor-green", "s": 0.0, "amplitude": 0.5},
        "ic_w": {"kind": "random-spectrum", "s": 2.0, "amplitude": 1.0, "seed": 7},
    }
    return parse_config(json.dumps(doc))


def test_criterion_09_eps_refinement(acceptance, tmp_path):
    res = runner.sweep(_sweep_config(), "eps", [0.2, 0.1, 0.05], tmp_path, threads=3)
    diffs = [row["diff_to_previous"] for row in res.table[1:]]
    ok = res.exit_code == 0 and diffs[1] < diffs[0]
    detail = f"|traj(0.2)-traj(0.1)|={diffs[0]:.4e} > |traj(0.1)-traj(0.05)|={diffs[1]:.4e}: {diffs[1] < diffs[0]}"
    assert acceptance.record(9, ok, detail)


def test_criterion_10_viscosity_absorption(acceptance, tmp_path):
    res = runner.sweep(_sweep_config(sigma=0.0), "muv", [1.0, 4.0, 16.0], tmp_path, threads=3)
    ratios = [row["absorption_ratio"] for row in res.table]
    ok = res.exit_code == 0 and all(r is not None for r in ratios) and ratios[1] <= ratios[0] and ratios[2] <= ratios[1]
    detail = "absorption ratio at mu*nu=1,4,16: " + ", ".join(f"{r:.4e}" for r in ratios) + " (nonincreasing)"
    assert acceptance.record(10, ok, detail)
