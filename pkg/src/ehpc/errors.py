"""Exception types shared across the package."""


class DomainError(ValueError):
    """Raised when an argument lies outside an operation's domain."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative numerical routine fails to converge."""


class GreedyAlwaysOptimalError(Exception):
    """Signal that the reward derivative is constant on the support.

    In that case the greedy lower bound and the Jensen upper bound on the
    maximum throughput coincide for every capacity, so no finite
    greedy-optimality threshold exists.
    """
