"""Spectral geometry of shrinking spiral domains.

Geometry of spiral-shaped planar regions in Fermi coordinates, upper bounds
on Riesz means of Dirichlet Laplacian eigenvalues, Weyl-type counting for
horns, and a finite-difference eigensolver used to check the bounds.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AssumptionViolation,
    ConfigError,
    DomainError,
    GeometryError,
    MissedEigenvalueError,
    NotSimpleError,
    NumericalError,
    RangeError,
    SpiralError,
)
from .profiles import Family, SpiralProfile  # noqa: E402
from .geometry import (  # noqa: E402
    Classification,
    GeometryCache,
    SyntheticGeometry,
    arc_length,
    classify,
    curvature_theta,
    distance_to_curve,
    effective_potential,
    fermi_point,
    arc_derivatives,
    find_s0,
    s0_index,
    normal_width_theta,
    width,
)
from .bound import (  # noqa: E402
    BoundParams,
    BoundReport,
    Mode,
    ThresholdVariant,
    asymptotic_bound,
    c1_constant,
    c2_term,
    constant_ratio,
    evaluate,
    lower_bound_example,
    lt_constant_1,
    lt_constant_2,
    moment_bound,
    multi_arm_bound,
    small_sigma_bound,
    sup_W,
    threshold_set,
    width_integral,
)
from .horn import HornProfile, count_lower_estimate, weyl_horn_count  # noqa: E402
from .fd import (  # noqa: E402
    EigenResult,
    Rectangle,
    SpiralDomain,
    assemble,
    build_mask,
    eigenvalues_below,
    extrapolate,
    inertia_count,
    moment,
    moment_with_budget,
    solve_region,
)
