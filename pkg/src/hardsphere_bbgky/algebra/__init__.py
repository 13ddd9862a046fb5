from .symbols import FormalSum, IntegralityError, OperatorSymbol, SymbolKind
from .sequences import OperatorSequence, exp_star, ln_star, star_product
from .cumulants import (
    collapsed_second_order,
    dual_cumulant,
    reduced_cumulant,
    reduced_cumulant_subsets,
    second_order_reduction,
    state_cumulant,
)
from .verification import IdentityReport, verify_algebra, verify_cluster_inversion
