"""Markets for binary public decisions: model, reduction, solvers, dynamics."""

from .checkers import (
    Condition,
    EquilibriumReport,
    UnsupportedClass,
    check_delta_eq,
    check_delta_pme,
    check_ime,
    check_lindahl,
    check_me,
    check_pme,
    side_prices_from_pme,
)
from .demand import DemandRequest, UnboundedDemand, demand, demand_reduced
from .expansion import (
    FisherInstance,
    Pairwise,
    Plain,
    ReductionRecord,
    lift_bundle,
    outcome_from_reduced_equilibrium,
    project_bundle,
    project_prices,
    reduce_instance,
)
from .experiments import (
    EXPERIMENT_TAGS,
    ExperimentReport,
    random_pdm,
    run_inefficiency_experiment,
)
from .model import (
    CES,
    CobbDouglas,
    Leontief,
    Linear,
    NestedLeontief,
    Outcome,
    PdmInstance,
    PerGood,
    PerIssue,
    Personalized,
    UtilitySpec,
    WelfareFunction,
    agent_utilities,
    build_phi,
    evaluate_utility,
    midpoint_outcome,
    nash_welfare,
    public_bundle,
    welfare,
)
from .serialize import (
    fisher_from_dict,
    fisher_to_dict,
    instance_from_dict,
    instance_to_dict,
    pdm_from_dict,
    pdm_to_dict,
    prices_from_dict,
    prices_to_dict,
    solve_result_to_dict,
    utility_from_dict,
    utility_to_dict,
)
from .solver import (
    SolveResult,
    brute_force_max_welfare,
    linear_closed_form_prices,
    solve_fisher_eg,
    solve_pdm_nash,
)
from .tatonnement import (
    TatonnementConfig,
    TatonnementTrace,
    dual_gradient,
    eg_dual_value,
    run_fisher_tatonnement,
    run_lifted_tatonnement,
)

__version__ = "0.1.0"

__all__ = [
    "CES",
    "CobbDouglas",
    "Condition",
    "DemandRequest",
    "EXPERIMENT_TAGS",
    "EquilibriumReport",
    "ExperimentReport",
    "FisherInstance",
    "Leontief",
    "Linear",
    "NestedLeontief",
    "Outcome",
    "Pairwise",
    "PdmInstance",
    "PerGood",
    "PerIssue",
    "Personalized",
    "Plain",
    "ReductionRecord",
    "SolveResult",
    "TatonnementConfig",
    "TatonnementTrace",
    "UnboundedDemand",
    "UnsupportedClass",
    "UtilitySpec",
    "WelfareFunction",
    "agent_utilities",
    "brute_force_max_welfare",
    "build_phi",
    "check_delta_eq",
    "check_delta_pme",
    "check_ime",
    "check_lindahl",
    "check_me",
    "check_pme",
    "demand",
    "demand_reduced",
    "dual_gradient",
    "eg_dual_value",
    "evaluate_utility",
    "fisher_from_dict",
    "fisher_to_dict",
    "instance_from_dict",
    "instance_to_dict",
    "lift_bundle",
    "linear_closed_form_prices",
    "midpoint_outcome",
    "nash_welfare",
    "outcome_from_reduced_equilibrium",
    "pdm_from_dict",
    "pdm_to_dict",
    "prices_from_dict",
    "prices_to_dict",
    "project_bundle",
    "project_prices",
    "public_bundle",
    "random_pdm",
    "reduce_instance",
    "run_fisher_tatonnement",
    "run_inefficiency_experiment",
    "run_lifted_tatonnement",
    "side_prices_from_pme",
    "solve_fisher_eg",
    "solve_pdm_nash",
    "solve_result_to_dict",
    "utility_from_dict",
    "utility_to_dict",
    "welfare",
]
