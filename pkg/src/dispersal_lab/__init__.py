"""Colony growth with catastrophes and uniform dispersal on trees."""
from .analytics import (
    BoundsReport,
    FixedPointResult,
    ProcessParams,
    Survival,
    classify_survival,
    compare_dispersal,
    critical_p_bracket,
    expected_colonies_bounds,
    expected_colonies_exact,
    extinction_time_bounds_fulltree,
    extinction_time_mean,
    process_params,
    reach_cdf_bounds,
    reach_cdf_exact,
    reach_limit_cdf,
    smallest_fixed_point,
    survival_prob_bounds,
    survival_prob_exact,
    survival_prob_limit,
)
from .dispersal import DispersalVariant, Graph, OffspringLaw, Variant, offspring_law
from .errors import ConvergenceError, DomainError, PreconditionError
from .laws import PoissonBinomialLaw, SurvivorLaw, TabulatedLaw, point_mass
from .simulator import SimConfig, SimOutcome, Status, estimate, run_replica

__version__ = "0.1.0"
