"""Dyadic annulus decomposition and the associated solution-space norms.

The grid is split into annuli X_j = {R_{j-1} < |x| <= R_j} with R_0 = 0
and R_j = 2^(j-1).  Cells with |x| = R_j exactly go to the inner annulus;
the single cell at the origin belongs to no annulus (the decomposition
covers 0 < |x| only) and never contributes to the norms below:

* summed norm     b(u)     = sum_j R_j^(1/2) ||u||_{L2(X_j)}
* dual sup norm   bstar(v) = max_j R_j^(-1/2) ||v||_{L2(X_j)}
* smoothed dual   bsstar(v, s) = bstar of (I - Laplace)^(s/2) v

These satisfy bstar <= L2 <= b cell by cell, and the duality bound
|<v, u>| <= bstar(v) b(u), both of which are exercised by the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from .errors import NyquistError, SpaceTagError
from .grid import PHYSICAL, Field, GridSpec, inner, to_fourier
from .multipliers import bessel_potential

__all__ = [
    "DyadicLayout",
    "b_norm",
    "bstar_norm",
    "bsstar_norm",
    "weighted_b_norm",
    "weighted_bstar_norm",
    "saturating_weight",
    "power_weight",
    "ShellSpec",
    "shell_trace",
    "trace_norm",
]


@dataclass(frozen=True)
class DyadicLayout:
    """Assignment of grid cells to dyadic annuli."""

    grid: GridSpec

    @cached_property
    def ids(self) -> np.ndarray:
        """Annulus index j >= 1 per grid cell; 0 marks the excluded origin."""
        r = self.grid.x_norm
        with np.errstate(divide="ignore"):
            j = np.where(r <= 1.0, 1, np.ceil(np.log2(np.maximum(r, 1e-300))).astype(int) + 1)
        return np.where(r == 0.0, 0, j)

    @cached_property
    def j_max(self) -> int:
        return int(self.ids.max())

    def radius(self, j: int) -> float:
        """Outer radius R_j = 2^(j-1)."""
        if j < 1:
            raise ValueError("annulus index starts at 1")
        return 2.0 ** (j - 1)

    @cached_property
    def radii(self) -> np.ndarray:
        return 2.0 ** (np.arange(1, self.j_max + 1) - 1.0)

    def annulus_mask(self, j: int) -> np.ndarray:
        return self.ids == j

    def annulus_l2(self, u: Field) -> np.ndarray:
        """L2 norm of u restricted to each annulus, index 0 <-> j=1."""
        if u.grid != self.grid:
            raise ValueError("field grid does not match layout grid")
        if u.space_tag != PHYSICAL:
            raise SpaceTagError("annulus norms act on physical-space fields")
        w = np.abs(u.values.ravel()) ** 2
        sums = np.bincount(self.ids.ravel(), weights=w, minlength=self.j_max + 1)[1:]
        return np.sqrt(self.grid.cell_volume * sums)


def b_norm(u: Field, layout: DyadicLayout) -> float:
    pieces = layout.annulus_l2(u)
    return float(np.sum(np.sqrt(layout.radii) * pieces))


def bstar_norm(u: Field, layout: DyadicLayout) -> float:
    pieces = layout.annulus_l2(u)
    return float(np.max(pieces / np.sqrt(layout.radii)))


def bsstar_norm(u: Field, layout: DyadicLayout, s: float) -> float:
    """Dual norm after s orders of Bessel roughening; s = 0 gives bstar."""
    if s < 0:
        raise ValueError("smoothing order must be >= 0")
    return bstar_norm(bessel_potential(s, u), layout)


def power_weight(r: float) -> Callable[[np.ndarray], np.ndarray]:
    """Pure power radial weight (1 + |x|)^r."""
    return lambda t: (1.0 + t) ** r


def saturating_weight(r: float, eps: float) -> Callable[[np.ndarray], np.ndarray]:
    """Weight (1+t)^r (1+eps t)^(-r): grows like t^r then levels off near t ~ 1/eps.

    For every eps in (0, 1] the logarithmic slope stays below r, which is
    the admissible growth rate for dual-norm resolvent bounds at order
    r = s + 1/2.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    return lambda t: (1.0 + t) ** r * (1.0 + eps * t) ** (-r)


def _weighted(u: Field, weight: Callable[[np.ndarray], np.ndarray]) -> Field:
    w = weight(u.grid.x_norm)
    return u.with_values(u.values * w)


def weighted_b_norm(u: Field, layout: DyadicLayout, weight) -> float:
    return b_norm(_weighted(u, weight), layout)


def weighted_bstar_norm(u: Field, layout: DyadicLayout, weight) -> float:
    return bstar_norm(_weighted(u, weight), layout)


# ---------------------------------------------------------------------------
# Characteristic shell |xi|^s = lambda


@dataclass(frozen=True)
class ShellSpec:
    """Quadrature nodes on the sphere |xi| = lambda^(1/s).

    dim 1: the two points +-rho.  dim 2: trapezoid rule in angle.
    dim 3: product of Gauss-Legendre in the polar cosine and trapezoid in
    azimuth.  Weights sum to the surface measure (2, 2 pi rho, 4 pi rho^2).
    """

    grid: GridSpec
    s: float
    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("shell energy must be positive")
        if self.rho >= self.grid.xi_max:
            raise NyquistError(
                f"shell radius {self.rho:.4g} outside the resolvable band "
                f"(xi_max = {self.grid.xi_max:.4g})"
            )

    @property
    def rho(self) -> float:
        return self.lam ** (1.0 / self.s)

    @property
    def surface_measure(self) -> float:
        rho = self.rho
        return {1: 2.0, 2: 2.0 * np.pi * rho, 3: 4.0 * np.pi * rho**2}[self.grid.dim]

    @property
    def gradient_speed(self) -> float:
        """|d/d rho of rho^s| on the shell, the coarea density factor."""
        return self.s * self.rho ** (self.s - 1.0)

    @cached_property
    def nodes_weights(self):
        """(nodes, weights): nodes shaped (n, dim)."""
        rho = self.rho
        g = self.grid
        if g.dim == 1:
            nodes = np.array([[rho], [-rho]])
            weights = np.array([1.0, 1.0])
            return nodes, weights
        n_ang = max(8, 4 * int(np.ceil(rho / g.dxi)))
        theta = 2.0 * np.pi * np.arange(n_ang) / n_ang
        if g.dim == 2:
            nodes = rho * np.stack([np.cos(theta), np.sin(theta)], axis=1)
            weights = np.full(n_ang, 2.0 * np.pi * rho / n_ang)
            return nodes, weights
        n_pol = max(8, 2 * int(np.ceil(rho / g.dxi)))
        mu, wmu = np.polynomial.legendre.leggauss(n_pol)
        st = np.sqrt(1.0 - mu**2)
        nodes = []
        weights = []
        for m, w, s_t in zip(mu, wmu, st):
            nodes.append(
                rho * np.stack([s_t * np.cos(theta), s_t * np.sin(theta), np.full(n_ang, m)], axis=1)
            )
            weights.append(np.full(n_ang, rho**2 * w * 2.0 * np.pi / n_ang))
        return np.concatenate(nodes), np.concatenate(weights)


def shell_trace(fhat: Field, shell: ShellSpec) -> np.ndarray:
    """Interpolate a fourier-space field onto the shell nodes.

    1-D uses a cubic spline along the frequency axis; higher dimensions use
    multilinear interpolation.  Accuracy is checked against refined grids in
    the tests rather than asserted here.
    """
    if fhat.space_tag != "fourier":
        raise SpaceTagError("shell_trace expects a fourier-space field")
    if fhat.grid != shell.grid:
        raise ValueError("field grid does not match shell grid")
    g = fhat.grid
    axis = np.fft.fftshift(g.xi_axis)
    vals = np.fft.fftshift(fhat.values)
    nodes, _ = shell.nodes_weights
    if g.dim == 1:
        spline = CubicSpline(axis, vals)
        return spline(nodes[:, 0])
    interp = RegularGridInterpolator(
        (axis,) * g.dim, vals, method="linear", bounds_error=False, fill_value=0.0
    )
    return interp(nodes)


def trace_norm(values: np.ndarray, shell: ShellSpec) -> float:
    """L2 norm over the shell of trace values from :func:`shell_trace`."""
    _, weights = shell.nodes_weights
    return float(np.sqrt(np.sum(weights * np.abs(values) ** 2)))


def pair_trace(fv: np.ndarray, gv: np.ndarray, shell: ShellSpec) -> complex:
    """Surface integral of f conj(g) over the shell."""
    _, weights = shell.nodes_weights
    return complex(np.sum(weights * fv * np.conj(gv)))
