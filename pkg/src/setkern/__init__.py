"""Positive definite kernels indexed by measurable sets over a finite weighted space.

The library realizes such kernels as inner products in the weighted L2 space
(factorization through a positive operator and its square root), builds Green
kernels of reversible transient Markov chains, and samples the associated
mean-zero Gaussian fields to test stochastic-integral second moments.
"""

from .errors import (
    AbsoluteContinuityError,
    ConfigError,
    DomainError,
    InconsistencyError,
    InvalidBasisError,
    InvalidChainError,
    InvalidCovarianceError,
    InvalidMapError,
    InvalidOperatorError,
    InvalidSetError,
    NotPositiveError,
    NotTransientError,
    OrderingError,
    SetKernError,
    UnsupportedFunctionError,
    VerificationError,
)
from .factorization import (
    AbsoluteContinuityReport,
    DensityReport,
    Factorization,
    RkhsElement,
    b_range_dimension,
    build_T,
    check_absolute_continuity,
    coisometry_b_star,
    export_factorization,
    isometry_b,
    onb_factorization,
    radon_nikodym_density,
    realize,
    reverse_direction,
    sqrt_T,
    verify_pushforward,
    write_factorization,
)
from .field import (
    FieldSampler,
    ItoResult,
    build_sampler,
    cross_moment_check,
    ito_integral,
    ito_isometry_check,
    projection_second_moment,
    refinement_sweep,
)
from .kernels import (
    GramMatrix,
    SetKernel,
    check_positive_definite,
    counting_kernel,
    gram,
    operator_kernel,
    rank_one_kernel,
    schwarz_check,
    wiener_kernel,
)
from .markov import (
    GreenData,
    MarkovChain,
    check_reversibility,
    check_transient,
    contractivity_check,
    green,
    green_kernel,
    green_root,
    k_from_green,
    reversibility_defect,
    spectral_gap,
)
from .measure import (
    MeasurableSet,
    MeasureSpace,
    Partition,
    SimpleFunction,
    is_partition,
    is_refinement,
)

__version__ = "0.1.0"
