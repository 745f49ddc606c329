"""heatcert: heat kernels on weighted graphs and numerical certificates
for relative compactness of potential perturbations."""

from .graph import (
    Exhaustion,
    Measure,
    WeightedGraph,
    build_exhaustion,
    load_graph,
    lq_norm,
    make_graph,
    validate_graph,
    weak_vanishing_profile,
)
from .bundle import (
    EndomorphismField,
    HermitianBundle,
    Section,
    UnitaryConnection,
    decompose_potential,
    endo_norm,
    gram_schmidt_frame,
    pointwise_norm,
    trivialize,
    untrivialize,
)
from .operators import (
    OperatorMatrix,
    add_potential,
    assemble_covariant,
    assemble_laplacian,
    dirichlet_restriction,
    form_bound,
    multiplication_operator,
    quadratic_form,
    resolvent,
)
from .heat import (
    DEFAULT_TIMES,
    HeatKernel,
    kernel_from_semigroup,
    minimal_kernel,
    semigroup,
    verify_axioms,
    verify_rho_bound,
)
from .control import (
    ControlPair,
    F2Family,
    bakry_emery_factor,
    check_integrability,
    combine_additive,
    fit_control,
)
from .compactness import (
    CompactnessReport,
    LedgerRow,
    PotentialDecomposition,
    certify_compactness,
    check_2a_bound,
    check_2to2_bound,
    check_domination,
    check_hs_bound,
    check_resolvent_bound,
    check_resolvent_laplace,
    laplace_weight_integral,
    resolvent_via_laplace,
)

__version__ = "0.1.0"
SCHEMA_VERSION = 1
