"""Initial data with prescribed Sobolev regularity.

Random spectra are drawn shell by shell in the Chebyshev radius max|k_i|, so
a given lattice mode receives the same random number on every grid that
contains it.  Refining the grid therefore only adds modes; it never
redraws the ones already present.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .spectral import (
    GridSpec,
    SobolevIndex,
    VectorField,
    dealias,
    dealias_mask,
    lattice_indices,
    leray_project,
    sobolev_norm,
    wavenumber_squared,
)

ICKind = Literal["single-mode", "beltrami", "taylor-green", "random-spectrum"]
IC_KINDS = ("single-mode", "beltrami", "taylor-green", "random-spectrum")


@dataclass(frozen=True)
class ICRecipe:
    kind: ICKind = "random-spectrum"
    target_index: SobolevIndex = SobolevIndex(0.0)
    amplitude: float = 1.0
    spectral_slope_delta: float = 0.01
    seed: int = 0
    mode: tuple[int, int, int] = (1, 0, 0)

    def __post_init__(self):
        if self.kind not in IC_KINDS:
            raise ValueError(f"unknown IC kind {self.kind!r}")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        if not self.spectral_slope_delta > 0:
            raise ValueError("spectral_slope_delta must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not any(self.mode):
            raise ValueError("mode must be a nonzero lattice vector")


def _shell_ordered_gaussians(grid: GridSpec, seed: int) -> np.ndarray:
    """Complex unit Gaussians, shape (3, n, n, n), on the dealiased band."""
    ki = lattice_indices(grid).astype(np.int64)
    mask = dealias_mask(grid)
    pts = ki[:, mask]
    radius = np.abs(pts).max(axis=0)
    order = np.lexsort((pts[2], pts[1], pts[0], radius))
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((len(order), 3, 2))
    vals = np.empty((3, pts.shape[1]), dtype=np.complex128)
    vals[:, order] = (draws[..., 0] + 1j * draws[..., 1]).T / math.sqrt(2)
    out = np.zeros((3,) + grid.shape, dtype=np.complex128)
    out[:, mask] = vals
    # Hermitian pairing: c(k) <- (c(k) + conj(c(-k))) / sqrt(2)
    partner = np.roll(np.flip(out, axis=(1, 2, 3)), 1, axis=(1, 2, 3))
    out = (out + np.conj(partner)) / math.sqrt(2)
    out[:, 0, 0, 0] = 0.0
    return out


def _random_spectrum(r: ICRecipe, grid: GridSpec) -> VectorField:
    c = _shell_ordered_gaussians(grid, r.seed)
    k2 = wavenumber_squared(grid).copy()
    k2[0, 0, 0] = 1.0
    slope = r.target_index.s + 1.5 + r.spectral_slope_delta
    return VectorField(grid, c * k2 ** (-slope / 2))


def _physical_coords(grid: GridSpec):
    x = np.arange(grid.n) * grid.dx
    return np.meshgrid(x, x, x, indexing="ij")


def _taylor_green(grid: GridSpec) -> VectorField:
    X, Y, Z = (grid.scale * a for a in _physical_coords(grid))
    u = np.stack([np.sin(X) * np.cos(Y) * np.cos(Z), -np.cos(X) * np.sin(Y) * np.cos(Z), np.zeros_like(X)])
    return VectorField.from_physical(grid, u)


def _beltrami(grid: GridSpec, mode) -> VectorField:
    """u_b = sin(k.x), u_c = cos(k.x) for an axis-aligned k along axis a; curl u = |k| u sign(k_a)."""
    nz = [i for i, m in enumerate(mode) if m]
    if len(nz) != 1:
        raise ValueError("beltrami mode must be axis-aligned")
    a = nz[0]
    b, c = (a + 1) % 3, (a + 2) % 3
    coords = _physical_coords(grid)
    phase = mode[a] * grid.scale * coords[a]
    u = np.zeros((3,) + grid.shape)
    u[b] = np.sin(phase)
    u[c] = np.cos(phase)
    return VectorField.from_physical(grid, u)


def _single_mode(grid: GridSpec, mode, solenoidal: bool) -> VectorField:
    k = np.asarray(mode, dtype=float)
    if solenoidal:
        trial = np.eye(3)[np.argmin(np.abs(k))]
        e = np.cross(k, trial)
        e /= np.linalg.norm(e)
    else:
        e = np.array([1.0, 1.0, 1.0]) / math.sqrt(3)
    c = np.zeros((3,) + grid.shape, dtype=np.complex128)
    n = grid.n
    i = tuple(int(m) % n for m in mode)
    j = tuple(int(-m) % n for m in mode)
    for comp in range(3):
        c[(comp,) + i] = e[comp] / math.sqrt(2)
        c[(comp,) + j] = e[comp] / math.sqrt(2)
    return VectorField(grid, c)


def _base(r: ICRecipe, grid: GridSpec, solenoidal: bool) -> VectorField:
    if r.kind == "random-spectrum":
        return _random_spectrum(r, grid)
    if r.kind == "taylor-green":
        return _taylor_green(grid)
    if r.kind == "beltrami":
        return _beltrami(grid, r.mode)
    return _single_mode(grid, r.mode, solenoidal)


def _normalize(f: VectorField, r: ICRecipe) -> VectorField:
    norm = sobolev_norm(f, r.target_index)
    if norm == 0:
        raise ValueError("recipe produced a zero field on this grid")
    return f * (r.amplitude / norm)


def make_velocity_ic(r: ICRecipe, grid: GridSpec) -> VectorField:
    """Mean-free, divergence-free velocity with |u|_{target} = amplitude."""
    u = dealias(leray_project(_base(r, grid, solenoidal=True)))
    u.coeffs[:, 0, 0, 0] = 0.0
    return _normalize(u, r)


def make_angular_ic(r: ICRecipe, grid: GridSpec) -> VectorField:
    """Angular velocity with |w|_{target} = amplitude; no solenoidal constraint."""
    w = dealias(_base(r, grid, solenoidal=False))
    return _normalize(w, r)
