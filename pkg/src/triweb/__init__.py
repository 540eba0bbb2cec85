"""Planar 3-webs from closed-form first integrals.

Represent a web by three first integrals, trace its leaves numerically,
measure the curvature deciding parallelizability, run the formula-free
hexagon-closure oracle, and verify explicit linearizations end to end.
"""

from .analysis import (
    CurvatureSample,
    HexagonFigure,
    ParallelizabilityReport,
    blaschke_curvature,
    curvature_grid,
    hexagon_defect,
    parallelizability_report,
)
from .errors import (
    ConfigError,
    EvalDomainError,
    HexagonError,
    NormalFormError,
    ParseError,
    TraceError,
    TriwebError,
)
from .expr import Expr, eval_value, parse, to_text
from .jets import Jet3
from .kernels import (
    BACKEND_ENV,
    HAVE_NUMBA,
    compile_expr,
    default_backend,
    eval_jet3,
    gradient,
)
from .transform import (
    DiffeoReport,
    PlaneMap,
    apply_map,
    diffeo_report,
    identity_map,
    jacobian_det,
    linearizing_map,
    push_polyline,
)
from .verify import (
    LinearityReport,
    LinearizationReport,
    LineFormulaCheck,
    collinearity_residual,
    diagonal_seeds,
    foliation_linearity,
    verify_family,
    verify_linearization,
    verify_map,
)
from .web import (
    BUILTIN_WEB_NAMES,
    Domain,
    Foliation,
    GeneralPositionReport,
    LeafPolyline,
    ThreeWeb,
    builtin_web,
    family_web,
    general_position_report,
    trace_leaf,
    walk_on_leaf,
)

__version__ = "0.1.0"
