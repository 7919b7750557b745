"""Exception types shared across the package.

Guard failures carry a short machine-readable ``guard`` name so batch
drivers can report which runtime check tripped.
"""

from __future__ import annotations


class FracscatError(Exception):
    """Base class for all package-specific errors."""


class GridMismatchError(FracscatError, ValueError):
    """Two fields (or a field and an operator) live on different grids."""


class SpaceTagError(FracscatError, ValueError):
    """A field arrived in the wrong representation (physical vs fourier)."""


class GuardError(FracscatError, RuntimeError):
    """A numerical guard tripped; ``guard`` names the check."""

    def __init__(self, guard: str, message: str):
        self.guard = guard
        super().__init__(f"guard '{guard}': {message}")


class NyquistError(GuardError):
    """Requested feature sits outside the resolvable frequency range."""

    def __init__(self, message: str):
        super().__init__("nyquist", message)


class TorusWrapError(GuardError):
    """A propagation time would let the state wrap around the torus."""

    def __init__(self, message: str):
        super().__init__("torus_wrap", message)


class StabilityError(GuardError):
    """Step-size guard for the split-step propagator."""

    def __init__(self, message: str):
        super().__init__("splitstep_stability", message)


class SingularSymbolError(GuardError):
    """A multiplier symbol has a pole on the frequency lattice."""

    def __init__(self, message: str):
        super().__init__("singular_symbol", message)


class SolverConvergenceError(FracscatError, RuntimeError):
    """An iterative solve failed to reach the requested residual."""
