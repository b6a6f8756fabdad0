"""Battery-limited energy-harvesting link analysis.

Computes the maximum throughput of an energy-harvesting transmitter under
online power control, the exact capacity threshold below which the greedy
policy is optimal, four closed-form or envelope bounds on that threshold,
and seeded simulations verifying the policies and scaling laws.
"""

from .analysis import CurveRow, SweepRow, asymptotic_sweep, curves
from .bellman import (
    BellmanSolution,
    bellman_residual,
    phi_semi_derivatives,
    phi_value,
    solve,
)
from .distributions import (
    Bernoulli,
    EnergyDistribution,
    Exponential,
    FiniteDiscrete,
    Geometric,
    Poisson,
    Rayleigh,
    Uniform,
    parse_distribution,
)
from .errors import ConvergenceError, DomainError, GreedyAlwaysOptimalError
from .reward import (
    AwgnReward,
    LinearReward,
    RewardFunction,
    TabulatedReward,
    deriv_lower_convex_env,
    deriv_upper_concave_env,
)
from .sim import (
    AdmissibilityError,
    CustomPolicy,
    GreedyPolicy,
    ModifiedGreedyPolicy,
    PolicyComparison,
    SimulationResult,
    SolutionPolicy,
    compare_policies,
    modified_greedy_step,
    simulate,
)
from .threshold import (
    ThresholdReport,
    bernoulli_reference,
    bound_lower,
    bound_upper,
    c_star,
    c_star_continuous_awgn,
    c_star_discrete_exact,
    greedy_throughput,
    rayleigh_a_star,
    semi_bounds_awgn,
    threshold_margin,
    threshold_report,
    throughput_upper,
)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "AwgnReward",
    "BellmanSolution",
    "Bernoulli",
    "ConvergenceError",
    "CurveRow",
    "CustomPolicy",
    "DomainError",
    "EnergyDistribution",
    "Exponential",
    "FiniteDiscrete",
    "Geometric",
    "GreedyAlwaysOptimalError",
    "GreedyPolicy",
    "LinearReward",
    "ModifiedGreedyPolicy",
    "Poisson",
    "PolicyComparison",
    "Rayleigh",
    "RewardFunction",
    "SimulationResult",
    "SolutionPolicy",
    "SweepRow",
    "TabulatedReward",
    "ThresholdReport",
    "Uniform",
    "asymptotic_sweep",
    "bellman_residual",
    "bernoulli_reference",
    "bound_lower",
    "bound_upper",
    "c_star",
    "c_star_continuous_awgn",
    "c_star_discrete_exact",
    "compare_policies",
    "curves",
    "deriv_lower_convex_env",
    "deriv_upper_concave_env",
    "greedy_throughput",
    "modified_greedy_step",
    "parse_distribution",
    "phi_semi_derivatives",
    "phi_value",
    "rayleigh_a_star",
    "semi_bounds_awgn",
    "simulate",
    "solve",
    "threshold_margin",
    "threshold_report",
    "throughput_upper",
]
