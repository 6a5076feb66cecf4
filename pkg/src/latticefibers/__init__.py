"""Fiber Hamiltonians of two particles on Z^d: band data, discrete spectrum
and the finite/infinite dichotomy at degenerate quasi-momenta."""
from .assembly import (
    FiberOperator,
    LatticeBox,
    MirrorResult,
    assemble,
    assemble_friedrichs,
    dump_operator,
    gauge_shift,
    momentum_grid,
    stagger_signs,
    staggering_mirror,
)
from .birman_schwinger import BSOperator, bs_count, bs_matrix
from .dispersion import (
    BandParams,
    MassPair,
    QuasiMomentum,
    SandwichResult,
    band_params,
    dispersion_value,
    epsilon,
    mu,
    reduce_angle,
    sandwich_check,
)
from .errors import (
    ConvergenceError,
    DecompositionError,
    DegenerateThresholdError,
    DimensionMismatchError,
    HypothesisUncertifiedError,
    LatticeFibersError,
    NoClosedFormError,
    UndecidableSupportError,
)
from .fibers import (
    DichotomyVerdict,
    FiberFamily,
    classify_dichotomy,
    decompose,
    fiber_bound_states,
    fiber_spectrum,
    predicted_counts,
    rank_one_bound_state,
    verify_block_structure,
)
from .greens import lattice_green
from .potential import (
    BoundaryClass,
    DecayCertificate,
    ExpLineRule,
    HypothesisCertificate,
    Potential,
    StripSpec,
    appendix_potential,
    classify_quasimomentum,
    containment_radius,
    hypothesis_certificate,
    in_strip,
    restrict_to_fiber,
    support_escapes_strips,
)
from .spectral import (
    ConvergenceVerdict,
    SpectrumResult,
    convergence_study,
    count_beyond,
    count_discrete,
    eigenvalues,
    extremal_eigenvalues,
)

__version__ = "0.1.0"
