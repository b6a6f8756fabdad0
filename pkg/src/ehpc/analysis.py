"""Curve generation and asymptotic mean sweeps.

``curves`` reproduces throughput-versus-capacity data (optimal gain from
the Bellman solver sandwiched between the greedy and Jensen curves), and
``asymptotic_sweep`` tracks how the greedy-optimality threshold scales with
the arrival mean against each family's reference function.  Sweeps rely on
the cheap exact characterizations (atom walk, continuous root) rather than
the Bellman solver, which would be infeasible at large means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bellman, threshold
from .distributions import (
    EnergyDistribution,
    Exponential,
    Geometric,
    Poisson,
    Rayleigh,
    Uniform,
)
from .errors import ConvergenceError, DomainError
from .reward import AwgnReward, RewardFunction

SWEEP_FAMILIES = ("geometric", "poisson", "uniform", "exponential", "rayleigh")


@dataclass(frozen=True)
class CurveRow:
    c: float
    gamma_star: float
    gamma_greedy: float
    gamma_upper: float
    error: str | None = None


def curves(
    d: EnergyDistribution,
    r: RewardFunction,
    c_min: float,
    c_max: float,
    points: int,
    grid_n: int = 256,
    tol: float = 1e-8,
) -> list[CurveRow]:
    """Rows of (c, gamma*, greedy bound, Jensen bound) over a capacity grid.

    A capacity where the solver fails yields a row with NaN gain and the
    error message attached instead of aborting the whole sweep.
    """
    if not (0.0 < c_min <= c_max):
        raise DomainError("need 0 < c_min <= c_max")
    if c_min == c_max:
        cs = [c_min]
    else:
        if points < 2:
            raise DomainError("need at least two points")
        cs = np.linspace(c_min, c_max, points).tolist()
    rows = []
    for c in cs:
        lower = threshold.greedy_throughput(d, r, c)
        upper = threshold.throughput_upper(d, r, c)
        try:
            gain = bellman.solve(d, r, c, grid_n=grid_n, tol=tol).gain
            rows.append(CurveRow(c, gain, lower, upper))
        except (DomainError, ConvergenceError) as exc:
            rows.append(CurveRow(c, math.nan, lower, upper, error=str(exc)))
    return rows


@dataclass(frozen=True)
class SweepRow:
    mu: float
    c_star: float
    psi: float
    ratio: float


def distribution_for_mean(family: str, mu: float) -> EnergyDistribution:
    """The family member with mean mu."""
    if family == "geometric":
        return Geometric(1.0 / (1.0 + mu))
    if family == "poisson":
        return Poisson(mu)
    if family == "uniform":
        return Uniform(2.0 * mu)
    if family == "exponential":
        return Exponential(1.0 / mu)
    if family == "rayleigh":
        return Rayleigh(2.0 * mu * mu / math.pi)
    raise DomainError(f"unknown family {family!r}")


def reference_scaling(family: str, regime: str, mu: float) -> float:
    """psi(mu): the limit shape of c* in the given regime."""
    if regime == "small":
        if family in ("geometric", "poisson"):
            return mu
        if family == "uniform":
            return 2.0 * mu
        if family == "exponential":
            return -mu * math.log(mu)
        if family == "rayleigh":
            return 2.0 / math.sqrt(math.pi) * mu * math.sqrt(-math.log(mu))
    elif regime == "large":
        if family in ("geometric", "exponential"):
            return mu / math.log(mu)
        if family == "poisson":
            return mu
        if family == "uniform":
            return 2.0 * mu / math.log(mu)
        if family == "rayleigh":
            return threshold.rayleigh_a_star() * mu
    raise DomainError(f"unknown family/regime {family!r}/{regime!r}")


def sweep_threshold(family: str, mu: float) -> float:
    """c* for the family member with mean mu, via the exact characterization."""
    d = distribution_for_mean(family, mu)
    if d.is_discrete:
        return threshold.c_star_discrete_exact(d, AwgnReward())
    return threshold.c_star_continuous_awgn(d)


def asymptotic_sweep(family: str, regime: str, mu_values) -> list[SweepRow]:
    """Threshold-to-reference ratios over a sorted grid of means.

    The small regime accepts means in (0, 1] (the log-factor reference
    functions vanish at mu = 1, which is rejected), the large regime means
    >= 10.
    """
    if family not in SWEEP_FAMILIES:
        raise DomainError(f"unknown family {family!r}")
    if regime not in ("small", "large"):
        raise DomainError(f"regime must be 'small' or 'large', not {regime!r}")
    mus = [float(m) for m in mu_values]
    if not mus or any(b <= a for a, b in zip(mus, mus[1:])):
        raise DomainError("mu values must be strictly increasing")
    for mu in mus:
        if regime == "small" and not 0.0 < mu <= 1.0:
            raise DomainError(f"small-regime mean {mu!r} outside (0, 1]")
        if regime == "large" and mu < 10.0:
            raise DomainError(f"large-regime mean {mu!r} below 10")
    rows = []
    for mu in mus:
        psi = reference_scaling(family, regime, mu)
        if not psi > 0.0:
            raise DomainError(f"reference scaling vanishes at mu={mu!r}")
        cs = sweep_threshold(family, mu)
        rows.append(SweepRow(mu=mu, c_star=cs, psi=psi, ratio=cs / psi))
    return rows


# -- deterministic CSV ---------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def rows_to_csv(columns, rows) -> str:
    """CSV with 12-significant-digit floats, LF endings, fixed column order."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def curves_csv(rows: list[CurveRow]) -> str:
    return rows_to_csv(
        ("c", "gamma_star", "gamma_greedy", "gamma_upper"),
        ((r.c, r.gamma_star, r.gamma_greedy, r.gamma_upper) for r in rows),
    )


def sweep_csv(rows: list[SweepRow]) -> str:
    return rows_to_csv(
        ("mu", "c_star", "psi", "ratio"),
        ((r.mu, r.c_star, r.psi, r.ratio) for r in rows),
    )
