"""Right-hand sides of the mollified micropolar system.

    du/dt = nu Lap u - div(v (x) u) - grad p + 1/2 curl w,      div u = 0
    dw/dt = mu Lap w - div(v (x) w) + 1/2 curl u - w + grad(div w)

with v the Gaussian-mollified velocity and p = sum_ij R_i R_j (v_i u_j).
nu = mu = 1 gives the unscaled system.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .spectral import (
    SpectralField,
    VectorField,
    curl,
    dealias,
    divergence,
    gradient,
    laplacian,
    leray_project,
    mollify,
    tensor_divergence,
    wavevectors,
    _tables,
)


class ParameterWindowWarning(UserWarning):
    """(tau, sigma) lies outside every regime the existence results cover."""


def in_main_window(tau: float, sigma: float) -> bool:
    return 0.5 < tau < 1.5 and tau - 1 < sigma < 1.5


def in_critical_window(tau: float, sigma: float) -> bool:
    return tau == 0.5 and -0.5 < sigma < 1.5


def in_viscous_window(tau: float, sigma: float, tol: float = 1e-12) -> bool:
    return 0.5 <= tau < 1.5 and abs(sigma - (tau - 1)) <= tol


@dataclass(frozen=True)
class SystemParams:
    nu: float = 1.0
    mu: float = 1.0
    eps: float = 0.0
    tau: float = 1.0
    sigma: float = 0.2

    def __post_init__(self):
        if not self.nu > 0 or not self.mu > 0:
            raise ValueError("viscosities nu and mu must be positive")
        if not self.eps >= 0:
            raise ValueError("eps must be non-negative")
        for name in ("nu", "mu", "eps", "tau", "sigma"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.regime():
            warnings.warn(
                f"(tau, sigma) = ({self.tau}, {self.sigma}) is outside the covered regimes",
                ParameterWindowWarning,
                stacklevel=3,
            )

    def regime(self) -> str | None:
        """'main', 'critical' or 'viscous' when (tau, sigma) is covered, else None."""
        if in_viscous_window(self.tau, self.sigma):
            return "viscous"
        if in_main_window(self.tau, self.sigma):
            return "main"
        if in_critical_window(self.tau, self.sigma):
            return "critical"
        return None


@dataclass
class State:
    u: VectorField
    w: VectorField
    t: float = 0.0

    @property
    def grid(self):
        return self.u.grid

    def copy(self) -> "State":
        return State(self.u.copy(), self.w.copy(), self.t)


def pressure(u: VectorField, eps: float = 0.0) -> SpectralField:
    """p = sum_ij R_i R_j (v_i u_j), i.e. p(k) = -k_i k_j (v_i u_j)(k) / |k|^2."""
    grid = u.grid
    v = mollify(u, eps)
    vp = v.to_physical()
    up = u.to_physical()
    k = wavevectors(grid)
    k2 = _tables(grid)[4]
    total = np.zeros(grid.shape, dtype=np.complex128)
    for i in range(3):
        for j in range(i, 3):
            if i == j:
                pair = vp[i] * up[j]
            else:
                pair = vp[i] * up[j] + vp[j] * up[i]
            ph = SpectralField.from_physical(grid, pair)
            total -= k[i] * k[j] * ph.coeffs
    total /= k2
    total[0, 0, 0] = 0.0
    return dealias(SpectralField(grid, total))


def advection(v: VectorField, f: VectorField) -> VectorField:
    """Dealiased div(v (x) f), equal to (v.grad) f when div v = 0."""
    return tensor_divergence(v, f)


def nonlinear_velocity(s: State, p: SystemParams, v: VectorField | None = None) -> VectorField:
    """Explicit part of the velocity equation: -P div(v (x) u) + 1/2 curl w."""
    if v is None:
        v = mollify(s.u, p.eps)
    return leray_project(-advection(v, s.u)) + 0.5 * curl(s.w)


def nonlinear_angular(s: State, p: SystemParams, v: VectorField | None = None) -> VectorField:
    """Explicit part of the angular equation: -div(v (x) w) + 1/2 curl u."""
    if v is None:
        v = mollify(s.u, p.eps)
    return -advection(v, s.w) + 0.5 * curl(s.u)


def linear_velocity(u: VectorField, p: SystemParams) -> VectorField:
    return p.nu * laplacian(u)


def linear_angular(w: VectorField, p: SystemParams) -> VectorField:
    return p.mu * laplacian(w) - w + gradient(divergence(w))


def rhs_velocity(s: State, p: SystemParams) -> VectorField:
    return linear_velocity(s.u, p) + nonlinear_velocity(s, p)


def rhs_angular(s: State, p: SystemParams) -> VectorField:
    return linear_angular(s.w, p) + nonlinear_angular(s, p)
