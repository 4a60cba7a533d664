"""Fourier-side calculus on the periodic box [0, L)^3.

Conventions used everywhere in the package:

* A real field is stored by its full complex coefficient array ``coeffs`` of
  shape ``(n, n, n)`` in FFT index order, with
  ``f(x) = sum_k coeffs[k] * exp(i k.x)``.
* All integrals are box averages, ``<f, g> = |T|^-1 \\int f g dx``, so
  Parseval holds with unit weight: ``<f, f> = sum_k |coeffs[k]|^2``.  A
  coefficient of modulus ``a`` on a single wavenumber has L2 norm ``a``.
* Homogeneous weights ``|k|^s`` drop the zero mode, inhomogeneous weights
  are ``(1 + |k|^2)^(s/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Union

import numpy as np
import scipy.fft

Kind = Literal["homogeneous", "inhomogeneous"]

_workers = 1


def set_threads(n: int) -> None:
    """Set the number of FFT worker threads (results do not depend on it)."""
    global _workers
    if n < 1:
        raise ValueError("thread count must be positive")
    _workers = int(n)


@dataclass(frozen=True)
class GridSpec:
    n: int
    box_length: float = 2 * math.pi
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 4, got {self.n}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def scale(self) -> float:
        """Physical wavenumber of lattice index 1."""
        return 2 * math.pi / self.box_length


@lru_cache(maxsize=16)
def _tables(grid: GridSpec):
    idx = np.fft.fftfreq(grid.n, 1.0 / grid.n)
    ki = np.stack(np.meshgrid(idx, idx, idx, indexing="ij"))
    kvec = ki * grid.scale
    k2 = np.sum(kvec**2, axis=0)
    kmax = grid.dealias_fraction * grid.n / 2
    mask = np.all(np.abs(ki) < kmax, axis=0)
    k2_safe = k2.copy()
    k2_safe[0, 0, 0] = 1.0
    for a in (ki, kvec, k2, mask, k2_safe):
        a.flags.writeable = False
    return ki, kvec, k2, mask, k2_safe


def lattice_indices(grid: GridSpec) -> np.ndarray:
    """Integer lattice index of every coefficient, shape (3, n, n, n)."""
    return _tables(grid)[0]


def wavevectors(grid: GridSpec) -> np.ndarray:
    """Physical wavevector of every coefficient, shape (3, n, n, n)."""
    return _tables(grid)[1]


def wavenumber_squared(grid: GridSpec) -> np.ndarray:
    return _tables(grid)[2]


def dealias_mask(grid: GridSpec) -> np.ndarray:
    """Boolean mask of retained modes: |k_i| < dealias_fraction * n / 2 per axis."""
    return _tables(grid)[3]


def _half_to_full(h: np.ndarray, n: int) -> np.ndarray:
    """Rebuild the full coefficient array from the rfft half (last axis 0..n/2)."""
    full = np.empty(h.shape[:-1] + (n,), dtype=np.complex128)
    full[..., : n // 2 + 1] = h
    tail = h[..., n // 2 - 1 : 0 : -1]
    tail = np.roll(np.flip(tail, axis=(-3, -2)), 1, axis=(-3, -2))
    np.conjugate(tail, out=full[..., n // 2 + 1 :])
    return full


def forward(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Coefficients of real samples over the last three axes."""
    h = scipy.fft.rfftn(values, axes=(-3, -2, -1), workers=_workers)
    return _half_to_full(h, grid.n) / grid.n**3


def inverse(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Real samples of Hermitian coefficients over the last three axes."""
    n = grid.n
    return scipy.fft.irfftn(coeffs[..., : n // 2 + 1] * n**3, s=grid.shape, axes=(-3, -2, -1), workers=_workers)


class _Field:
    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: GridSpec, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != self._shape(grid):
            raise ValueError(f"coefficient shape {coeffs.shape} does not match grid n={grid.n}")
        self.grid = grid
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, grid: GridSpec):
        return cls(grid, np.zeros(cls._shape(grid), dtype=np.complex128))

    def copy(self):
        return type(self)(self.grid, self.coeffs.copy())

    def _wrap(self, coeffs):
        return type(self)(self.grid, coeffs)

    def _other(self, other):
        if isinstance(other, _Field):
            if other.grid != self.grid or type(other) is not type(self):
                raise ValueError("fields live on different grids or have different ranks")
            return other.coeffs
        return NotImplemented

    def __add__(self, other):
        c = self._other(other)
        return NotImplemented if c is NotImplemented else self._wrap(self.coeffs + c)

    def __sub__(self, other):
        c = self._other(other)
        return NotImplemented if c is NotImplemented else self._wrap(self.coeffs - c)

    def __mul__(self, scalar):
        if isinstance(scalar, _Field):
            return NotImplemented
        return self._wrap(self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self._wrap(self.coeffs / scalar)

    def __neg__(self):
        return self._wrap(-self.coeffs)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.grid.n}, L={self.grid.box_length:g})"


class SpectralField(_Field):
    """Coefficients of one real scalar field."""

    __slots__ = ()

    @staticmethod
    def _shape(grid):
        return grid.shape

    @classmethod
    def from_physical(cls, grid: GridSpec, values: np.ndarray) -> "SpectralField":
        return cls(grid, forward(values, grid))

    def to_physical(self) -> np.ndarray:
        return inverse(self.coeffs, self.grid)


class VectorField(_Field):
    """Three scalar components on a shared grid; ``coeffs`` has shape (3, n, n, n)."""

    __slots__ = ()

    @staticmethod
    def _shape(grid):
        return (3,) + grid.shape

    @classmethod
    def from_components(cls, x: SpectralField, y: SpectralField, z: SpectralField) -> "VectorField":
        if not x.grid == y.grid == z.grid:
            raise ValueError("components must share one grid")
        return cls(x.grid, np.stack([x.coeffs, y.coeffs, z.coeffs]))

    @classmethod
    def from_physical(cls, grid: GridSpec, values: np.ndarray) -> "VectorField":
        return cls(grid, forward(values, grid))

    def to_physical(self) -> np.ndarray:
        return inverse(self.coeffs, self.grid)

    def component(self, i: int) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[i])

    @property
    def x(self) -> SpectralField:
        return self.component(0)

    @property
    def y(self) -> SpectralField:
        return self.component(1)

    @property
    def z(self) -> SpectralField:
        return self.component(2)


Field = Union[SpectralField, VectorField]


@dataclass(frozen=True)
class SobolevIndex:
    s: float
    kind: Kind = "inhomogeneous"

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise ValueError("Sobolev index must be finite")
        if self.kind not in ("homogeneous", "inhomogeneous"):
            raise ValueError(f"unknown Sobolev kind {self.kind!r}")


def _mean_scale(f: Field) -> tuple[float, float]:
    c = f.coeffs
    zero = np.abs(c[..., 0, 0, 0]).max()
    return float(zero), float(np.sqrt(np.sum(np.abs(c) ** 2)))


def _check_mean_free(f: Field, s: float, kind: str) -> None:
    if kind == "homogeneous" and s < 0:
        zero, scale = _mean_scale(f)
        if zero > 1e-14 * scale:
            raise ValueError("homogeneous index s < 0 needs a mean-free field")


def multiplier_symbol(grid: GridSpec, s: float, kind: Kind) -> np.ndarray:
    """Weight m(k) of D^s (homogeneous) or L^s (inhomogeneous); zero mode of D^s is 0."""
    k2 = wavenumber_squared(grid)
    if kind == "inhomogeneous":
        return (1.0 + k2) ** (s / 2)
    if kind != "homogeneous":
        raise ValueError(f"unknown Sobolev kind {kind!r}")
    m = _tables(grid)[4] ** (s / 2)
    m[0, 0, 0] = 0.0
    return m


def fractional_multiplier(f: Field, s: float, kind: Kind = "homogeneous") -> Field:
    """Apply D^s = (-Laplacian)^(s/2) or L^s = (I - Laplacian)^(s/2)."""
    _check_mean_free(f, s, kind)
    return f._wrap(f.coeffs * multiplier_symbol(f.grid, s, kind))


def riesz(f: SpectralField, axis: int) -> SpectralField:
    """Riesz transform with symbol -i k_axis / |k|; the zero mode goes to 0."""
    g = f.grid
    sym = -1j * wavevectors(g)[axis] / np.sqrt(_tables(g)[4])
    return SpectralField(g, f.coeffs * sym)


def gradient(f: SpectralField) -> VectorField:
    return VectorField(f.grid, 1j * wavevectors(f.grid) * f.coeffs)


def divergence(u: VectorField) -> SpectralField:
    return SpectralField(u.grid, np.sum(1j * wavevectors(u.grid) * u.coeffs, axis=0))


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def curl(u: VectorField) -> VectorField:
    return VectorField(u.grid, _cross(1j * wavevectors(u.grid), u.coeffs))


def laplacian(f: Field) -> Field:
    return f._wrap(-wavenumber_squared(f.grid) * f.coeffs)


def leray_project(u: VectorField) -> VectorField:
    """Remove the gradient part: u(k) - k (k.u(k)) / |k|^2; the zero mode passes through."""
    k = wavevectors(u.grid)
    kdotu = np.sum(k * u.coeffs, axis=0) / _tables(u.grid)[4]
    return VectorField(u.grid, u.coeffs - k * kdotu)


def mollify(f: Field, eps: float) -> Field:
    """Gaussian mollifier exp(-eps^2 |k|^2 / 2); eps = 0 is the identity."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0:
        return f.copy()
    return f._wrap(f.coeffs * np.exp(-0.5 * eps**2 * wavenumber_squared(f.grid)))


def dealias(f: Field) -> Field:
    return f._wrap(np.where(dealias_mask(f.grid), f.coeffs, 0))


def pointwise_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Dealiased product f*g computed in physical space."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    h = SpectralField.from_physical(f.grid, f.to_physical() * g.to_physical())
    return dealias(h)


def tensor_divergence(v: VectorField, u: VectorField) -> VectorField:
    """Dealiased div(v (x) u), whose j-th component is d_i (v_i u_j).

    Physical components are transformed once; only the nine products go back.
    """
    grid = u.grid
    vp = v.to_physical()
    up = u.to_physical()
    prod = vp[:, None] * up[None, :]
    half = grid.n // 2 + 1
    ph = scipy.fft.rfftn(prod, axes=(-3, -2, -1), workers=_workers)
    ph *= dealias_mask(grid)[..., :half] / grid.n**3
    k = wavevectors(grid)[..., :half]
    div = np.einsum("i...,ij...->j...", 1j * k, ph)
    return VectorField(grid, _half_to_full(div, grid.n))


def inner(f: Field, g: Field) -> float:
    """Box-averaged L2 pairing <f, g> of two real fields."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    return float(np.real(np.vdot(g.coeffs, f.coeffs)))


def sobolev_norm(f: Field, idx: SobolevIndex | float, kind: Kind | None = None) -> float:
    """(sum_k m(k)^2 |f(k)|^2)^(1/2); vector fields sum their components."""
    if not isinstance(idx, SobolevIndex):
        idx = SobolevIndex(float(idx), kind or "inhomogeneous")
    _check_mean_free(f, idx.s, idx.kind)
    m2 = multiplier_symbol(f.grid, 2 * idx.s, idx.kind)
    return float(np.sqrt(np.sum(m2 * np.abs(f.coeffs) ** 2)))


def l2_norm(f: Field) -> float:
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))


def divergence_norm(u: VectorField) -> float:
    return l2_norm(divergence(u))


def hermitian_defect(f: Field) -> float:
    """max |c(-k) - conj(c(k))|; zero for an exactly real field."""
    c = f.coeffs
    flipped = np.roll(np.flip(c, axis=(-3, -2, -1)), 1, axis=(-3, -2, -1))
    return float(np.abs(flipped - np.conj(c)).max())


def single_mode(grid: GridSpec, k: tuple[int, int, int], amplitude: complex = 1.0) -> SpectralField:
    """Real field amplitude*e^{ik.x} + c.c.; coefficient ``amplitude`` at k, conjugate at -k."""
    c = np.zeros(grid.shape, dtype=np.complex128)
    n = grid.n
    i = tuple(int(x) % n for x in k)
    j = tuple(int(-x) % n for x in k)
    if i == j:
        c[i] = amplitude.real if isinstance(amplitude, complex) else amplitude
    else:
        c[i] = amplitude
        c[j] = np.conj(amplitude)
    return SpectralField(grid, c)
