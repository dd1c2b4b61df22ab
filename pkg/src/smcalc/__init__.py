"""Symmetric integration against Fourier-series stochastic measures."""

from .calculus import (
    FIELDS,
    Antiderivative,
    RuleCheck,
    ScalarField2,
    antiderivative_eval,
    chain_rule_rhs,
    field_by_name,
    validate_field,
    verify_chain_rule,
    verify_substitution_rule,
)
from .counterexamples import (
    Oscillator1Certificate,
    Oscillator2Certificate,
    construct_oscillator1,
    construct_oscillator2,
    diagonal_S,
    f_of_eps,
    parseval_check,
    quadratic_variation_mc,
    verify_oscillator1,
    verify_oscillator2,
)
from .errors import BudgetExceeded, ContractError, DomainError, FlowBlowUp, NumericError
from .integration import (
    ConvergenceReport,
    Partition,
    boundedness_quantile,
    dyadic_partition,
    stieltjes_integral,
    strong_variation_estimate,
    sum_squared_increments,
    symmetric_integral,
    symmetric_sum,
    uniform_partition,
)
from .measure import (
    CoefficientProfile,
    FourierSM,
    HolderFit,
    RademacherSequence,
    SampledPath,
    TruncationPolicy,
    holder_diagnostic,
    measure_of_interval,
    sample_path,
)
from .sde import (
    Drift,
    FlowTable,
    SDESolution,
    Sigma,
    build_flow,
    check_inverse_pde,
    drift_by_name,
    invert_flow,
    sigma_by_name,
    solve_sde,
    verify_solution_identity,
)

__version__ = "0.1.0"
