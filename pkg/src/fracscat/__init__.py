"""Numerical laboratory for scattering theory of (-Laplace)^{s/2} + V.

The package builds everything on a periodic grid large enough that the
torus is invisible at the tolerances of interest, with runtime guards
(Nyquist, torus wrap, split-step stability, level-spacing floors) that
refuse to produce numbers once a lattice artifact would contaminate
them.  See the README for the module tour and the demos directory for
worked experiments.
"""

__version__ = "0.1.0"

from .dynamics import (
    DEFAULT_SCATTERING_BANDS,
    CookProfile,
    DriftReport,
    ScatteringRecord,
    WavePacket,
    band_packet,
    born_term,
    cook_profile,
    drift_probe_packet,
    free_evolve,
    full_evolve,
    gaussian_packet,
    localization_check,
    localization_decay,
    nonexistence_drift,
    scattering_band,
    wave_operator_estimate,
)
from .eigen import (
    DecayReport,
    EigenResult,
    ScanReport,
    SminScan,
    apply_hamiltonian,
    birman_schwinger_roots,
    birman_schwinger_top,
    characterization_pair,
    characterization_residual,
    decay_profile,
    dense_hamiltonian,
    eigen_solve,
    lambda_scan,
    singular_value_scan,
)
from .errors import (
    FracscatError,
    GridMismatchError,
    GuardError,
    NyquistError,
    SingularSymbolError,
    SolverConvergenceError,
    SpaceTagError,
    StabilityError,
    TorusWrapError,
)
from .grid import (
    FOURIER,
    PHYSICAL,
    Field,
    GridSpec,
    as_fourier_field,
    as_physical_field,
    boundary_mass_fraction,
    forward_transform,
    inner,
    inverse_transform,
    l2_norm,
    to_fourier,
    to_physical,
)
from .multipliers import (
    MultiplierSpec,
    apply_multiplier,
    bessel_potential,
    fractional_laplacian,
    free_propagate,
    lp_block,
    lp_block_count,
    lp_bump,
    lp_low_symbol,
    smooth_step,
    symbol_on_grid,
)
from .potentials import (
    EpsRule,
    PotentialSpec,
    ShortRangeReport,
    TailThresholds,
    annulus_M,
    choose_p,
    evaluate_potential,
    offdiag_block_norm,
    series_proxy_verdict,
    shortrange_series,
    tail_fit,
)
from .resolvent import (
    CompletenessReport,
    DistortedTrace,
    LapReport,
    StoneReport,
    WeightedLapReport,
    completeness_check,
    default_lap_battery,
    distorted_trace,
    eps_zero_weights,
    fredholm_boundary,
    fredholm_matrix,
    fredholm_solve,
    free_resolvent_apply,
    full_resolvent_apply,
    integrated_density_mass,
    lap_sweep,
    spacing_scaled_ladder,
    spectral_density,
    stone_jump_residual,
    weighted_lap_check,
)
from .spaces import (
    DyadicLayout,
    ShellSpec,
    b_norm,
    bstar_norm,
    bsstar_norm,
    pair_trace,
    power_weight,
    saturating_weight,
    shell_trace,
    trace_norm,
    weighted_b_norm,
    weighted_bstar_norm,
)

__all__ = [name for name in dir() if not name.startswith("_")]
