"""Numerical laboratory for random (Steinhaus) sequences in the unit disk."""

__version__ = "0.1.0"

from .geometry import (  # noqa: E402
    BoundaryArc,
    DiskError,
    DiskPoint,
    DyadicAnnulus,
    StolzAngle,
    annulus_index,
    blaschke_factor,
    harmonic_measure,
    log_inv_rho,
    pseudo_distance,
    stolz_contains,
)
from .sequences import (  # noqa: E402
    ProfileError,
    RadiusProfile,
    SequenceSample,
    blaschke_sum,
    dyadic_counts,
    parse_profile,
    sample_sequence,
)
from .blaschke import (  # noqa: E402
    PhiLambdaTable,
    checkpoint_sums,
    criterion_sum,
    naftalevic_sup,
    phi_lambda,
    separation,
)
from .majorants import (  # noqa: E402
    DiscreteMeasure,
    StepFunction,
    alpha_lambda_check,
    balayage,
    build_psi,
    certify_majorant,
    poisson_extension_step,
    poisson_kernel,
    poisson_lq_norm,
)
from .stochastic import (  # noqa: E402
    EstimatorResult,
    LemmaVerdict,
    cochran_check,
    criterion_distribution,
    diagonal_bound_check,
    expect_logp_rho,
    offdiagonal_bound_check,
    rosenthal_check,
)
from .criteria import (  # noqa: E402
    CriterionReport,
    StolzCoverReport,
    carleson_counterexample,
    evaluate_criteria,
    stolz_cover_greedy,
)
