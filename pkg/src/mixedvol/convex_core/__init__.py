from .bodies import (
    BodyFormatError,
    ConvexBody,
    DegenerateBodyError,
    DimensionMismatchError,
    affine_rank,
    body_from_dict,
    cross_polytope,
    cube,
    dump_body,
    load_body,
    minkowski_sum,
    polytope_volume_exact,
    segment,
    shipped_bodies,
    simplex,
)
from .legendre import (
    LegendreDual,
    LegendreError,
    LegendreResult,
    NewtonDivergence,
    NewtonNonConvergence,
    conjugate,
    legendre_transform,
)
from .potentials import (
    CustomPotential,
    GradientMapReport,
    LogSumExp,
    Potential,
    Quadratic,
    ScaledPotential,
    SumPotential,
    body_potential,
    evaluate,
    gradient_map_check,
    lse_potential,
    quadratic,
)
