"""Periodic grids, complex fields, and the discrete Fourier transform pair.

The computational domain is the torus [-L, L)^dim sampled on N points per
axis (N a power of two).  The transform convention is

    uhat(xi) = integral exp(-i xi . x) u(x) dx,

approximated by the midpoint rule with weight h^dim, so that a physical
field of unit L2 norm satisfies ||uhat||^2 = (2 pi)^dim on the frequency
lattice {k * dxi : k in [-N/2, N/2)} with dxi = pi / L.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Tuple

import numpy as np
from scipy import fft as sfft

from .errors import GridMismatchError, SpaceTagError

PHYSICAL = "physical"
FOURIER = "fourier"

__all__ = [
    "GridSpec",
    "Field",
    "as_physical_field",
    "as_fourier_field",
    "forward_transform",
    "inverse_transform",
    "to_fourier",
    "to_physical",
    "l2_norm",
    "inner",
    "boundary_mass_fraction",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [-L, L)^dim.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1, 2 or 3.
    L : float
        Half-width of the box.
    N : int
        Samples per axis; must be a power of two.

    Derived quantities: spacing ``h = 2 L / N``, frequency spacing
    ``dxi = pi / L`` and Nyquist frequency ``xi_max = pi / h``.
    """

    dim: int
    L: float
    N: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.L <= 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if self.N < 2 or (self.N & (self.N - 1)) != 0:
            raise ValueError(f"N must be a power of two >= 2, got {self.N}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def dxi(self) -> float:
        return np.pi / self.L

    @property
    def xi_max(self) -> float:
        return np.pi / self.h

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @cached_property
    def x_axis(self) -> np.ndarray:
        """Physical coordinates along one axis, -L, -L+h, ..., L-h."""
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def xi_axis(self) -> np.ndarray:
        """Frequency lattice along one axis in FFT storage order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.h)

    def _radii(self, axis: np.ndarray) -> np.ndarray:
        if self.dim == 1:
            return np.abs(axis)
        grids = np.meshgrid(*([axis] * self.dim), indexing="ij")
        return np.sqrt(sum(g**2 for g in grids))

    @cached_property
    def x_norm(self) -> np.ndarray:
        """|x| on the full grid."""
        return self._radii(self.x_axis)

    @cached_property
    def xi_norm(self) -> np.ndarray:
        """|xi| on the full frequency lattice (FFT storage order)."""
        return self._radii(self.xi_axis)

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(i xi L) per axis is (-1)^k in storage order; the tensor
        # product collapses to a parity sign on the index sum.

        p = np.where(np.arange(self.N) % 2 == 0, 1.0, -1.0)
        out = p
        for _ in range(self.dim - 1):
            out = np.multiply.outer(out, p)
        return out

    def coords(self) -> Tuple[np.ndarray, ...]:
        """Meshgrid coordinate arrays (x_1, ..., x_dim)."""
        if self.dim == 1:
            return (self.x_axis,)
        return tuple(np.meshgrid(*([self.x_axis] * self.dim), indexing="ij"))

    def freq_coords(self) -> Tuple[np.ndarray, ...]:
        if self.dim == 1:
            return (self.xi_axis,)
        return tuple(np.meshgrid(*([self.xi_axis] * self.dim), indexing="ij"))


@dataclass(frozen=True)
class Field:
    """A complex scalar field together with its representation tag.

    ``space_tag`` is either "physical" (values on the spatial grid) or
    "fourier" (values on the frequency lattice in FFT storage order).
    Treat instances as immutable; operations return new fields.
    """

    grid: GridSpec
    values: np.ndarray
    space_tag: str

    def __post_init__(self):
        if self.space_tag not in (PHYSICAL, FOURIER):
            raise SpaceTagError(f"unknown space tag {self.space_tag!r}")
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.iscomplexobj(self.values):
            object.__setattr__(self, "values", self.values.astype(np.complex128))

    def with_values(self, values: np.ndarray) -> "Field":
        return replace(self, values=values)

    def norm(self) -> float:
        return l2_norm(self)


def _require_same_grid(a: Field, b: Field):
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")


def as_physical_field(grid: GridSpec, values: np.ndarray) -> Field:
    return Field(grid, np.asarray(values), PHYSICAL)


def as_fourier_field(grid: GridSpec, values: np.ndarray) -> Field:
    return Field(grid, np.asarray(values), FOURIER)


def forward_transform(u: Field) -> Field:
    """Physical -> Fourier, midpoint approximation of the integral transform."""
    if u.space_tag != PHYSICAL:
        raise SpaceTagError("forward_transform expects a physical-space field")
    g = u.grid
    vals = sfft.fftn(u.values) * (g.cell_volume * g._phase)
    return Field(g, vals, FOURIER)


def inverse_transform(v: Field) -> Field:
    """Fourier -> physical; exact inverse of :func:`forward_transform`."""
    if v.space_tag != FOURIER:
        raise SpaceTagError("inverse_transform expects a fourier-space field")
    g = v.grid
    vals = sfft.ifftn(v.values * g._phase) / g.cell_volume
    return Field(g, vals, PHYSICAL)


def to_fourier(u: Field) -> Field:
    return u if u.space_tag == FOURIER else forward_transform(u)


def to_physical(u: Field) -> Field:
    return u if u.space_tag == PHYSICAL else inverse_transform(u)


def l2_norm(u: Field) -> float:
    """Space-tag aware L2 norm; equal in both representations (Plancherel)."""
    g = u.grid
    s = float(np.sum(np.abs(u.values) ** 2))
    if u.space_tag == PHYSICAL:
        return np.sqrt(g.cell_volume * s)
    return np.sqrt(s * (g.dxi / (2.0 * np.pi)) ** g.dim)


def inner(u: Field, v: Field) -> complex:
    """Sesquilinear pairing <u, v> = integral u conj(v) dx (physical weight)."""
    _require_same_grid(u, v)
    if u.space_tag != v.space_tag:
        raise SpaceTagError("pairing requires matching space tags")
    g = u.grid
    s = complex(np.sum(u.values * np.conj(v.values)))
    if u.space_tag == PHYSICAL:
        return g.cell_volume * s
    return s * (g.dxi**g.dim) / (2.0 * np.pi) ** g.dim


def boundary_mass_fraction(u: Field) -> float:
    """Fraction of the squared L2 mass within one cell of the box edge.

    The torus wraps, so mass parked at |x_i| ~ L belongs to both ends at
    once; evolution routines use this to warn when a state has drifted into
    its own periodic image.
    """
    w = to_physical(u)
    g = w.grid
    edge = np.zeros(g.shape, dtype=bool)
    near = np.abs(g.x_axis) >= g.L - g.h
    for ax in range(g.dim):
        shape = [1] * g.dim
        shape[ax] = g.N
        edge |= near.reshape(shape)
    total = float(np.sum(np.abs(w.values) ** 2))
    if total == 0.0:
        return 0.0
    return float(np.sum(np.abs(w.values[edge]) ** 2) / total)
