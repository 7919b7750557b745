"""Fourier multiplier operators evaluated on the frequency lattice.

Supported symbols: the fractional kinetic symbol |xi|^s, Bessel weights
(1+|xi|^2)^(tau/2), free propagator phases exp(-i t |xi|^s), resolvent
symbols (|xi|^s - z)^(-1), smooth dyadic frequency blocks, and arbitrary
user callables of |xi|.

The dyadic blocks use a fixed smooth bump Phi supported in
{6/7 <= |xi| <= 2}, equal to 1 on {1 <= |xi| <= 12/7}, built from the
standard exp(-1/t) ramp, so that the scaled copies Phi(2^-j xi) together
with the low block sum to 1 at every lattice frequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NyquistError, SingularSymbolError
from .grid import FOURIER, Field, GridSpec, to_fourier, to_physical

__all__ = [
    "MultiplierSpec",
    "symbol_on_grid",
    "apply_multiplier",
    "bessel_potential",
    "fractional_laplacian",
    "free_propagate",
    "lp_block",
    "lp_block_count",
    "smooth_step",
]


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity ramp: 0 for t <= 0, 1 for t >= 1, exp(-1/t) based between."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    out[t >= 1.0] = 1.0
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    with np.errstate(divide="ignore", over="ignore"):
        a = np.exp(-1.0 / tm)
        b = np.exp(-1.0 / (1.0 - tm))
    out[mid] = a / (a + b)
    return out


def _ramp(t: np.ndarray) -> np.ndarray:
    # rises 0 -> 1 across [6/7, 1]
    return smooth_step(7.0 * np.asarray(t, dtype=float) - 6.0)


def lp_bump(t: np.ndarray) -> np.ndarray:
    """The dyadic bump Phi as a function of |xi|."""
    t = np.asarray(t, dtype=float)
    return _ramp(t) - _ramp(t / 2.0)


def lp_low_symbol(t: np.ndarray) -> np.ndarray:
    """Low-frequency companion block; equals 1 for |xi| <= 12/7, 0 beyond 2."""
    return 1.0 - _ramp(np.asarray(t, dtype=float) / 2.0)


def lp_block_count(grid: GridSpec) -> int:
    """Number of dyadic blocks (j = 1..count) needed to cover the lattice.

    Together with the low block (j = 0) the partition sums to 1 at every
    lattice frequency.
    """
    xi_top = grid.xi_max * np.sqrt(grid.dim)
    return max(1, int(np.ceil(np.log2(7.0 * xi_top / 6.0))))


@dataclass(frozen=True)
class MultiplierSpec:
    """Declarative description of a diagonal Fourier operator."""

    kind: str
    s: Optional[float] = None
    tau: Optional[float] = None
    t: Optional[float] = None
    z: Optional[complex] = None
    j: Optional[int] = None
    fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    @staticmethod
    def frac_laplacian(s: float) -> "MultiplierSpec":
        if s <= 0:
            raise ValueError("order s must be positive")
        return MultiplierSpec(kind="frac_laplacian", s=s)

    @staticmethod
    def bessel(tau: float) -> "MultiplierSpec":
        return MultiplierSpec(kind="bessel", tau=tau)

    @staticmethod
    def free_phase(s: float, t: float) -> "MultiplierSpec":
        if s <= 0:
            raise ValueError("order s must be positive")
        return MultiplierSpec(kind="free_phase", s=s, t=t)

    @staticmethod
    def resolvent(s: float, z: complex) -> "MultiplierSpec":
        if s <= 0:
            raise ValueError("order s must be positive")
        return MultiplierSpec(kind="resolvent", s=s, z=complex(z))

    @staticmethod
    def lp_block(j: int) -> "MultiplierSpec":
        if j < 0:
            raise ValueError("block index must be >= 0 (0 is the low block)")
        return MultiplierSpec(kind="lp_block", j=j)

    @staticmethod
    def custom(fn: Callable[[np.ndarray], np.ndarray]) -> "MultiplierSpec":
        return MultiplierSpec(kind="custom", fn=fn)


def symbol_on_grid(m: MultiplierSpec, grid: GridSpec) -> np.ndarray:
    """Evaluate the symbol pointwise on the frequency lattice."""
    r = grid.xi_norm
    if m.kind == "frac_laplacian":
        return r**m.s
    if m.kind == "bessel":
        return (1.0 + r**2) ** (m.tau / 2.0)
    if m.kind == "free_phase":
        return np.exp(-1j * m.t * r**m.s)
    if m.kind == "resolvent":
        z = m.z
        if z.imag == 0.0:
            lam = z.real
            if lam > 0.0 and lam ** (1.0 / m.s) <= grid.xi_max * np.sqrt(grid.dim):
                raise SingularSymbolError(
                    "resolvent at real energy with the characteristic shell "
                    "inside the lattice; use a nonzero imaginary part"
                )
        return 1.0 / (r**m.s - z)
    if m.kind == "lp_block":
        if m.j == 0:
            return lp_low_symbol(r)
        return lp_bump(r / 2.0**m.j)
    if m.kind == "custom":
        return np.asarray(m.fn(r))
    raise ValueError(f"unknown multiplier kind {m.kind!r}")


def apply_multiplier(m: MultiplierSpec, u: Field) -> Field:
    """Apply the diagonal operator; output keeps the input's space tag.

    Fourier-space inputs are multiplied in place (no transforms), so
    compositions of multipliers commute exactly there.
    """
    sym = symbol_on_grid(m, u.grid)
    if u.space_tag == FOURIER:
        return u.with_values(u.values * sym)
    v = to_fourier(u)
    return to_physical(v.with_values(v.values * sym))


def fractional_laplacian(s: float, u: Field) -> Field:
    return apply_multiplier(MultiplierSpec.frac_laplacian(s), u)


def bessel_potential(tau: float, u: Field) -> Field:
    """Apply (I - Laplace)^(tau/2); tau < 0 smooths, tau > 0 roughens."""
    return apply_multiplier(MultiplierSpec.bessel(tau), u)


def free_propagate(s: float, t: float, u: Field) -> Field:
    """Apply the free unitary group at time t for the symbol |xi|^s."""
    return apply_multiplier(MultiplierSpec.free_phase(s, t), u)


def lp_block(j: int, u: Field, grid_blocks: Optional[int] = None) -> Field:
    """Project onto dyadic frequency block j (j = 0 is the low block)."""
    count = grid_blocks if grid_blocks is not None else lp_block_count(u.grid)
    if j > count:
        raise NyquistError(f"block {j} exceeds the lattice cover ({count} blocks)")
    return apply_multiplier(MultiplierSpec.lp_block(j), u)
