"""Chart-based Riemannian geometry for almost-product manifolds.

Metrics, distributions and maps are given as exact expression trees over a
coordinate box.  Curvature, structure tensors (second fundamental forms,
integrability tensors, mean curvature vectors) and the mixed scalar
curvature are evaluated pointwise from exact derivatives, and a set of
integral-formula identities is checked numerically on a catalog of
scenarios.
"""
from .almost_product import (
    AdaptedFrame,
    AlmostProduct,
    DistributionSpec,
    StructurePackage,
    adapted_frame,
    nabla_P_norm_sq,
    partial_divergence,
    projectors,
    structure,
    structure_tensors,
)
from .catalog import ExpectedFact, Scenario, build, list_scenarios
from .errors import (
    BallOutsideDomain,
    ConsistencyError,
    DegenerateDistribution,
    DegeneratePlane,
    DomainGuardViolated,
    ExprSyntaxError,
    GateFailed,
    GeometryError,
    InvalidConfig,
    NonClosedChart,
    NotASubmersion,
    NotTotallyGeodesic,
    NotUmbilical,
    SingularJacobian,
    SingularMetric,
    UnknownScenario,
    WrongRank,
)
from .geometry import (
    Chart,
    MetricField,
    VectorField,
    christoffel,
    curvature,
    divergence,
    scalar_calculus,
    sectional,
)
from .identities import (
    Conventions,
    IdentityResidual,
    codim1_residual,
    conformal_residual,
    conformal_scalar_curvature,
    fiber_integrand,
    fiber_residual,
    horizontal_conformal_residual,
    hypothesis_report,
    mixed_P_residual,
    projective_residual,
    resolve_conventions,
    resolved_conventions,
    umbilical_residual,
    walczak_residual,
)
from .maps import (
    MapClassification,
    SmoothMap,
    classify_submersion,
    compose,
    conformal_factor,
    jacobian_kernel,
    kernel_distribution,
    projective_psi,
    pullback_metric,
)
from .quadrature import GridSpec, green_check, integrate, karp_quotient, l1_norm
from .runner import RunConfig, run

__version__ = "0.1.0"
