from .dual import (
    DUAL_ROUTES,
    DualEvolved,
    DualSolution,
    DualSolutionRequest,
    dual_solution_B,
    dual_solution_additive,
    dual_solution_direct,
    dual_solution_kary,
    dual_solution_second_order,
    dual_value,
    evolved_observable,
    reduced_cumulant_solution_dual,
)
from .state import (
    StateRoutes,
    StateSolutionRequest,
    StateSolutionResult,
    compare_state_routes,
    liouville_oracle,
    reduced_cumulant_solution,
    reduced_cumulant_solution_state,
    state_solution_F,
)
from .collision import CollisionKernelSpec, collision_operator_state, collision_term
from .iteration import IterationSeriesResult, TimeQuadrature, iteration_series_state
from .checks import (
    DualityReport,
    GeneratorDomainError,
    GeneratorReport,
    NormCheckReport,
    cumulant_action,
    cumulant_norm_check,
    duality_check,
    generator_consistency,
    number_conservation,
    semigroup_check,
    semigroup_gap,
)
