"""Greedy-optimality threshold c*, its four bounds, and throughput curves.

The greedy policy (consume the whole battery every slot) is throughput
optimal exactly for capacities c with

    r'(c) >= rho(c) * E[r'(X) | X < c],

and the set of such capacities is an interval [0, c*].  This module
computes the endpoint c* three ways (a generic boolean bisection, an exact
atom walk for discrete laws, and a root solve for continuous laws with the
Gaussian reward), plus four cheaper bounds:

  * bound_lower / bound_upper relax the conditional expectation through the
    upper concave / lower convex envelope of r' and Jensen's inequality;
  * semi_bounds_awgn depend on (x_lo, x_hi, mean) only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .distributions import EnergyDistribution
from .errors import ConvergenceError, DomainError, GreedyAlwaysOptimalError
from .reward import (
    AwgnReward,
    RewardFunction,
    deriv_lower_convex_env,
    deriv_upper_concave_env,
)

DEFAULT_SCAN_POINTS = 100_001
_SCAN_CAP_EPS = 1e-12


def _check_standing_assumption(d: EnergyDistribution, r: RewardFunction) -> None:
    if not r.deriv_at(d.x_lo) > r.deriv_at(d.x_hi):
        raise GreedyAlwaysOptimalError(
            "reward derivative is constant across the support; the greedy "
            "policy is optimal for every capacity"
        )


def threshold_margin(d: EnergyDistribution, r: RewardFunction, c: float) -> float:
    """D(c) = r'(c) - rho(c) E[r'(X) | X < c]; nonnegative iff c <= c*."""
    if not c > 0.0:
        raise DomainError("capacity must be positive")
    return r.deriv_at(c) - d.truncated_expect(r.deriv, c)


def _bracket_above(margin, x_lo: float, x_hi: float, mean: float):
    """Find hi with margin(hi) < 0 by doubling; None means hi = x_hi works."""
    finite = math.isfinite(x_hi)
    hi = min(max(mean, 1.0), x_hi) if finite else max(mean, 1.0)
    for _ in range(300):
        if margin(hi) < 0.0:
            return hi
        if finite and hi >= x_hi:
            return None
        hi = min(2.0 * hi, x_hi) if finite else 2.0 * hi
    raise ConvergenceError("margin stayed nonnegative during the doubling search")


def _bracket_below(margin, x_lo: float, hi: float) -> float:
    """Find lo in (x_lo, hi) with margin(lo) >= 0 by geometric descent."""
    lo = x_lo + 1e-12 * max(1.0, x_lo)
    if lo >= hi:
        lo = x_lo + (hi - x_lo) / 16.0
    for _ in range(300):
        if margin(lo) >= 0.0:
            return lo
        lo = x_lo + (lo - x_lo) / 16.0
        if lo - x_lo < 1e-300:
            raise ConvergenceError("margin negative just above the support infimum")
    raise ConvergenceError("could not bracket the threshold from below")


def c_star(d: EnergyDistribution, r: RewardFunction, rel_tol: float = 1e-9) -> float:
    """Largest capacity at which the greedy policy stays optimal.

    Boolean bisection on the margin predicate: the feasible set is the
    interval [0, c*], so bisection between a feasible and an infeasible
    point converges even though the margin may jump at atoms.
    """
    _check_standing_assumption(d, r)
    margin = lambda c: threshold_margin(d, r, c)
    hi = _bracket_above(margin, d.x_lo, d.x_hi, d.mean)
    if hi is None:
        return d.x_hi
    lo = _bracket_below(margin, d.x_lo, hi)
    for _ in range(300):
        if hi - lo <= rel_tol * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if margin(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _atom_walk(xs: np.ndarray, ps: np.ndarray, r: RewardFunction):
    """Walk partial sums S_j over ordered atoms; None if no crossing yet."""
    rd = np.asarray(r.deriv(xs), dtype=float)
    S = np.cumsum(rd * ps)
    fired = (rd[1:] < S[:-1]) | (rd[1:] <= S[1:])
    idx = np.flatnonzero(fired)
    if idx.size == 0:
        return None
    j = int(idx[0]) + 1
    if rd[j] < S[j - 1]:
        # interior crossing: r'(c) = S_j on (xs[j-1], xs[j])
        target = S[j - 1]
        lo, hi = float(xs[j - 1]), float(xs[j])
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if r.deriv_at(mid) >= target:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)
    # the threshold sits exactly on the atom xs[j]
    return float(xs[j])


def c_star_discrete_exact(d: EnergyDistribution, r: RewardFunction) -> float:
    """Exact threshold for discrete laws via the partial-sum walk.

    Either r'(c) meets the running sum strictly inside an atom gap (solved
    by bisection on the monotone derivative) or the threshold is the atom
    itself when the sum brackets r' there.
    """
    if not d.is_discrete:
        raise DomainError("atom walk requires a discrete law")
    _check_standing_assumption(d, r)
    if math.isfinite(d.x_hi):
        xs, ps, _ = d.atoms_below(d.x_hi + 1.0)
        res = _atom_walk(xs, ps, r)
        if res is None:
            raise ConvergenceError("atom walk failed to terminate on finite support")
        return res
    n = 1024
    while True:
        xs, ps, _ = d.atoms_below(float(n))
        res = _atom_walk(xs, ps, r)
        if res is not None:
            return res
        if xs.size < n:  # tail already below the enumeration deficit
            raise ConvergenceError("atom walk exhausted the support")
        if n > 2e8:
            raise ConvergenceError("atom walk exceeded the enumeration cap")
        n *= 8


def _relative_quad(fn, lo: float, hi: float) -> float:
    """Adaptive quadrature driven by relative tolerance; errors loudly."""
    out = integrate.quad(
        fn, lo, hi, epsabs=1e-300, epsrel=1e-11, limit=10_000, full_output=1
    )
    val, abserr = out[0], out[1]
    if abserr > 1e-8 * max(abs(val), 1e-300) and abserr > 1e-13:
        raise ConvergenceError(f"quadrature error {abserr:.3e} too large for {val:.3e}")
    return val


def _awgn_root_margin(d: EnergyDistribution, c: float) -> float:
    """F(c) = 1/(1+c) - int_0^c f(x)/(1+x) dx for continuous laws.

    For c <= 1 the equivalent form

        F(c) = -c/(1+c) + P(X >= c) + int_0^c x f(x)/(1+x) dx

    is used instead: every term is O(c), which avoids the catastrophic
    1 - (1 - O(c)) cancellation and keeps thresholds resolvable down to
    the smallest arrival means used in the asymptotic sweeps.

    The integration domain is clipped at the 1 - 1e-15 quantile so the
    density's shape always spans the interval the quadrature sees; the
    dropped tail is below roundoff relative to the surviving terms.
    """
    lo = d.x_lo
    hi = min(c, d.x_hi, d.quantile_cap(1e-15))
    if c <= 1.0:
        if hi <= lo:
            return -c / (1.0 + c) + float(d.survival(c))
        val = _relative_quad(lambda x: x * d.pdf(x) / (1.0 + x), lo, hi)
        return -c / (1.0 + c) + float(d.survival(c)) + val
    val = _relative_quad(lambda x: d.pdf(x) / (1.0 + x), lo, hi)
    return 1.0 / (1.0 + c) - val


def c_star_continuous_awgn(d: EnergyDistribution, rel_tol: float = 1e-11) -> float:
    """Threshold for a continuous law under the Gaussian reward.

    Solves 1/(1+c) = int_0^c f(x)/(1+x) dx by bisection; the left side
    minus the right side is positive exactly on (x_lo, c*).
    """
    if d.is_discrete:
        raise DomainError("continuous root solve requires a continuous law")
    _check_standing_assumption(d, AwgnReward())
    margin = lambda c: _awgn_root_margin(d, c)
    hi = _bracket_above(margin, d.x_lo, d.x_hi, d.mean)
    if hi is None:
        return d.x_hi
    lo = _bracket_below(margin, d.x_lo, hi)
    for _ in range(300):
        if hi - lo <= rel_tol * hi:
            break
        mid = 0.5 * (lo + hi)
        if _awgn_root_margin(d, mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- envelope bounds ---------------------------------------------------------


def _refine_sign_change(pred, lo: float, hi: float) -> float:
    """Boolean bisection: pred(lo) True, pred(hi) False; returns midpoint."""
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _sup_from_scan(grid: np.ndarray, pred_vals: np.ndarray, pred_scalar, x_hi: float):
    """Supremum of {c : pred(c)} from a dense scan plus local refinement.

    Returns x_hi when the predicate holds through the last interior scan
    point of a finite support, and +inf when it still holds at the scan cap
    of an infinite support ("unbounded within cap").
    """
    idx = np.flatnonzero(pred_vals)
    if idx.size == 0:
        raise ConvergenceError("bound predicate empty on the scan grid")
    k = int(idx[-1])
    if k == pred_vals.size - 1:
        return x_hi if math.isfinite(x_hi) else math.inf
    return _refine_sign_change(pred_scalar, float(grid[k]), float(grid[k + 1]))


def _lower_xi(d: EnergyDistribution, rho, c):
    """Conditional-mean lower bound max{(mu - (1-rho) x_hi)/rho, x_lo}."""
    if math.isfinite(d.x_hi):
        xi = np.maximum((d.mean - (1.0 - rho) * d.x_hi) / rho, d.x_lo)
    else:
        xi = np.full_like(np.asarray(rho, dtype=float), d.x_lo)
    return np.minimum(xi, c)


def bound_lower(
    d: EnergyDistribution,
    r: RewardFunction,
    scan_points: int = DEFAULT_SCAN_POINTS,
) -> float:
    """Envelope lower bound on c*; never exceeds c*.

    With the Gaussian reward the predicate reduces to c <= zeta(c) with
    zeta(c) = ((1-rho(c))(1+x_lo) + rho(c) xi(c)) / rho(c), scanned densely
    and refined by bisection at the last sign change.
    """
    _check_standing_assumption(d, r)
    if scan_points < 8:
        raise DomainError("scan_points too small")
    cap = d.x_hi if math.isfinite(d.x_hi) else d.quantile_cap(_SCAN_CAP_EPS)
    grid = np.linspace(d.x_lo, cap, scan_points)[1:-1]
    if r.kind == "awgn":
        rho = np.asarray(d.cdf_strict(grid), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = _lower_xi(d, rho, grid)
            zeta = ((1.0 - rho) * (1.0 + d.x_lo) + rho * xi) / rho
        pred_vals = (grid <= zeta) | (rho <= 0.0)

        def pred(c: float) -> bool:
            rho_c = float(d.cdf_strict(c))
            if rho_c <= 0.0:
                return True
            xi_c = float(_lower_xi(d, rho_c, c))
            return c <= ((1.0 - rho_c) * (1.0 + d.x_lo) + rho_c * xi_c) / rho_c

    else:

        def pred(c: float) -> bool:
            rho_c = float(d.cdf_strict(c))
            if rho_c <= 0.0:
                return True
            xi_c = min(max(float(_lower_xi(d, rho_c, c)), d.x_lo), c)
            env = deriv_upper_concave_env(r, d.x_lo, c, xi_c)
            return r.deriv_at(c) >= rho_c * env

        pred_vals = np.fromiter((pred(float(c)) for c in grid), bool, grid.size)
    out = _sup_from_scan(grid, pred_vals, pred, d.x_hi)
    if math.isinf(out):
        raise ConvergenceError("lower-bound predicate held through the scan cap")
    return out


def bound_upper(
    d: EnergyDistribution,
    r: RewardFunction,
    scan_points: int = DEFAULT_SCAN_POINTS,
) -> float:
    """Envelope upper bound on c*; always exceeds the mean.

    Returns math.inf when the predicate still holds at the scan cap of an
    infinite support ("unbounded within cap"); the cap itself is available
    from the threshold report.
    """
    _check_standing_assumption(d, r)
    if scan_points < 8:
        raise DomainError("scan_points too small")
    cap = d.x_hi if math.isfinite(d.x_hi) else d.quantile_cap(_SCAN_CAP_EPS)
    lo_edge = max(d.mean, d.x_lo)
    if cap <= lo_edge:
        return d.x_hi
    grid = np.linspace(lo_edge, cap, scan_points)[1:-1]
    if r.kind == "awgn":
        rho = np.asarray(d.cdf_strict(grid), dtype=float)
        rhs = (d.mean + rho - rho * rho) / (1.0 - rho + rho * rho)
        pred_vals = (grid <= rhs) | (rho <= 0.0)

        def pred(c: float) -> bool:
            rho_c = float(d.cdf_strict(c))
            if rho_c <= 0.0:
                return True
            return c <= (d.mean + rho_c - rho_c * rho_c) / (1.0 - rho_c + rho_c * rho_c)

    else:

        def pred(c: float) -> bool:
            rho_c = float(d.cdf_strict(c))
            if rho_c <= 0.0:
                return True
            xi_c = min((d.mean - (1.0 - rho_c) * c) / rho_c, c)
            xi_c = min(max(xi_c, d.x_lo), c)
            env = deriv_lower_convex_env(r, d.x_lo, c, xi_c)
            return r.deriv_at(c) >= rho_c * env

        pred_vals = np.fromiter((pred(float(c)) for c in grid), bool, grid.size)
    return _sup_from_scan(grid, pred_vals, pred, d.x_hi)


def semi_bounds_awgn(x_lo: float, x_hi: float, mu: float) -> tuple[float, float]:
    """Bounds on c* that depend only on (x_lo, x_hi, mu), Gaussian reward.

    The lower bound falls back to x_lo when the support is unbounded.
    """
    if x_lo < 0.0 or not x_lo < x_hi:
        raise DomainError("need 0 <= x_lo < x_hi")
    if not (x_lo <= mu <= x_hi):
        raise DomainError("mean must lie inside the support")
    if math.isinf(x_hi):
        semi_lower = x_lo
    elif mu <= x_hi - x_lo - 1.0:
        semi_lower = (1.0 + x_lo) * (x_hi - x_lo) / (x_hi - mu) - 1.0
    else:
        semi_lower = mu
    disc = (mu + x_lo) ** 2 - 4.0 * (x_lo * x_lo + x_lo - mu)
    c1 = 0.5 * (mu + x_lo + math.sqrt(max(disc, 0.0)))
    c2 = (4.0 * mu + 1.0) / 3.0
    semi_upper = min(c1 if mu <= 1.5 * x_lo + 0.5 else c2, x_hi)
    return semi_lower, semi_upper


def bernoulli_reference(x_lo: float, x_hi: float, p: float):
    """Closed forms of all five threshold quantities for the two-point law.

    Serves as the oracle the generic solvers are validated against.
    Returns (c_star, c_lower, c_upper, semi_lower, semi_upper).
    """
    if not (0.0 <= x_lo < x_hi) or not math.isfinite(x_hi):
        raise DomainError("need 0 <= x_lo < x_hi < inf")
    if not 0.0 < p < 1.0:
        raise DomainError("p must lie in (0, 1)")
    mu = (1.0 - p) * x_lo + p * x_hi
    t = (x_lo + p) / (1.0 - p)
    if t <= x_hi:
        cs = t
        cu = ((1.0 - p) * (x_lo + p) + p * x_hi) / (1.0 - p + p * p)
    else:
        cs = x_hi
        cu = x_hi
    sl = t if ((2.0 - p) * x_lo + 1.0) / (1.0 - p) <= x_hi else mu
    a = (2.0 - p) * x_lo + p * x_hi
    c1 = 0.5 * (a + math.sqrt(max(a * a - 4.0 * (x_lo * x_lo + p * (x_lo - x_hi)), 0.0)))
    c2 = (4.0 * mu + 1.0) / 3.0
    su = min(c1, x_hi) if ((1.0 + 2.0 * p) * x_lo + 1.0) / (2.0 * p) >= x_hi else min(c2, x_hi)
    return cs, cs, cu, sl, su


def rayleigh_scaling_functional(a: float) -> float:
    """(pi a / 2) * int_0^a exp(-pi y^2 / 4) dy, via the error function."""
    if a < 0.0:
        raise DomainError("a must be nonnegative")
    return 0.5 * math.pi * a * math.erf(0.5 * math.sqrt(math.pi) * a)


def rayleigh_a_star() -> float:
    """Unique positive root of the Rayleigh large-mean scaling functional."""
    lo, hi = 0.0, 2.0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if rayleigh_scaling_functional(mid) <= 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- throughput curves -------------------------------------------------------


def greedy_throughput(d: EnergyDistribution, r: RewardFunction, c: float) -> float:
    """E[r(min(X, c))]: the rate the greedy policy attains."""
    if c < 0.0:
        raise DomainError("capacity must be nonnegative")
    if c == 0.0:
        return float(r.value(0.0))
    tail = float(d.survival(c))
    return d.truncated_expect(r.value, c) + tail * float(r.value(c))


def throughput_upper(d: EnergyDistribution, r: RewardFunction, c: float) -> float:
    """r(E[min(X, c)]): the concavity upper bound on the best throughput."""
    if c < 0.0:
        raise DomainError("capacity must be nonnegative")
    return float(r.value(d.expected_min(c)))


# -- report ------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdReport:
    """All threshold quantities for one (distribution, reward) pair."""

    c_star: float
    c_lower: float
    c_upper: float
    semi_lower: float | None
    semi_upper: float | None
    method: str
    residual: float
    mu: float
    x_lo: float
    x_hi: float
    x_hi_cap: float
    c_upper_unbounded: bool
    scan_points: int


def threshold_report(
    d: EnergyDistribution,
    r: RewardFunction,
    scan_points: int = DEFAULT_SCAN_POINTS,
) -> ThresholdReport:
    """Compute c*, both envelope bounds and (for AWGN) the semi bounds.

    The threshold uses the sharpest applicable characterization: the atom
    walk for discrete laws, the root solve for continuous laws under the
    Gaussian reward, and the boolean bisection otherwise.
    """
    if d.is_discrete:
        cs = c_star_discrete_exact(d, r)
        method = "discrete-exact"
    elif r.kind == "awgn":
        cs = c_star_continuous_awgn(d)
        method = "continuous-root"
    else:
        cs = c_star(d, r)
        method = "bisection"
    cl = bound_lower(d, r, scan_points)
    cu = bound_upper(d, r, scan_points)
    if r.kind == "awgn":
        sl, su = semi_bounds_awgn(d.x_lo, d.x_hi, d.mean)
    else:
        sl, su = None, None
    return ThresholdReport(
        c_star=cs,
        c_lower=cl,
        c_upper=cu,
        semi_lower=sl,
        semi_upper=su,
        method=method,
        residual=threshold_margin(d, r, cs),
        mu=d.mean,
        x_lo=d.x_lo,
        x_hi=d.x_hi,
        x_hi_cap=d.x_hi if math.isfinite(d.x_hi) else d.quantile_cap(_SCAN_CAP_EPS),
        c_upper_unbounded=math.isinf(cu),
        scan_points=scan_points,
    )
