import math

import numpy as np
import pytest
from scipy import integrate

from ehpc import (
    AwgnReward,
    Bernoulli,
    DomainError,
    Exponential,
    FiniteDiscrete,
    Geometric,
    GreedyAlwaysOptimalError,
    LinearReward,
    Poisson,
    Rayleigh,
    TabulatedReward,
    Uniform,
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
from ehpc.threshold import rayleigh_scaling_functional

AWGN = AwgnReward()

# frozen independent-oracle roots: bisection on (1+c)ln(1+c)=omega and on
# (1+c) * int_0^c eta e^{-eta x}/(1+x) dx = 1, both run at 1e-12 precision
UNIFORM2_CSTAR = 1.3457507549227654
EXP1_CSTAR = 1.0888622086436395


def test_c_star_known_values():
    assert c_star(Geometric(0.5), AWGN) == pytest.approx(1.0, abs=1e-8)
    assert c_star(Poisson(0.5), AWGN) == pytest.approx(math.exp(0.5) - 1.0, abs=1e-8)
    assert c_star(Bernoulli(0.0, 5.0, 0.5), AWGN) == pytest.approx(1.0, abs=1e-8)
    assert c_star(Uniform(2.0), AWGN) == pytest.approx(UNIFORM2_CSTAR, abs=1e-6)


def test_uniform_threshold_against_inline_oracle():
    # independent check: root of (1+c)ln(1+c) = omega
    omega = 2.0
    lo, hi = 0.0, omega
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (1.0 + mid) * math.log1p(mid) <= omega:
            lo = mid
        else:
            hi = mid
    assert c_star_continuous_awgn(Uniform(omega)) == pytest.approx(
        0.5 * (lo + hi), abs=1e-9
    )


def test_discrete_exact_walk_cases():
    d = FiniteDiscrete([(0.0, 0.5), (5.0, 0.5)])
    assert c_star_discrete_exact(d, AWGN) == pytest.approx(1.0, abs=1e-10)
    d = FiniteDiscrete([(0.0, 0.9), (10.0, 0.1)])
    assert c_star_discrete_exact(d, AWGN) == pytest.approx(1.0 / 9.0, abs=1e-10)


def test_degenerate_atom_rejected():
    with pytest.raises(GreedyAlwaysOptimalError):
        c_star_discrete_exact(FiniteDiscrete([(1.0, 1.0)]), AWGN)


def test_linear_reward_signals_greedy_always_optimal():
    with pytest.raises(GreedyAlwaysOptimalError):
        c_star(Bernoulli(0.0, 5.0, 0.5), LinearReward(0.4))


def test_solver_kind_mismatch_rejected():
    with pytest.raises(DomainError):
        c_star_continuous_awgn(Bernoulli(0.0, 5.0, 0.5))
    with pytest.raises(DomainError):
        c_star_discrete_exact(Uniform(2.0), AWGN)


def test_continuous_root_values():
    assert c_star_continuous_awgn(Exponential(1.0)) == pytest.approx(
        EXP1_CSTAR, abs=1e-8
    )
    assert c_star_continuous_awgn(Uniform(2.0)) == pytest.approx(
        UNIFORM2_CSTAR, abs=1e-8
    )


def test_rayleigh_large_mean_ratio():
    mu = 100.0
    d = Rayleigh(2.0 * mu * mu / math.pi)
    ratio = c_star_continuous_awgn(d) / mu
    assert 0.80 <= ratio <= 0.95


def test_bound_lower_values():
    assert bound_lower(Bernoulli(0.0, 5.0, 0.5), AWGN) == pytest.approx(1.0, abs=1e-8)
    assert bound_lower(Bernoulli(0.0, 5.0, 0.9), AWGN) == 5.0  # capped at the top atom
    d = Exponential(1.0)
    val = bound_lower(d, AWGN)
    assert 0.0 < val <= c_star(d, AWGN) + 1e-8


def test_bound_upper_values():
    assert bound_upper(Bernoulli(0.0, 5.0, 0.5), AWGN) == pytest.approx(
        11.0 / 3.0, abs=1e-8
    )
    assert bound_upper(Bernoulli(0.0, 5.0, 0.9), AWGN) == 5.0
    d = Exponential(1.0)
    cu = bound_upper(d, AWGN)
    assert cu >= c_star(d, AWGN) - 1e-8
    assert cu > d.mean


def test_semi_bounds_values():
    sl, su = semi_bounds_awgn(0.0, 5.0, 2.0)
    assert sl == pytest.approx(2.0 / 3.0, abs=1e-12)
    sl, su = semi_bounds_awgn(0.0, math.inf, 2.0)
    assert sl == 0.0
    assert su == pytest.approx(3.0, abs=1e-12)
    sl, su = semi_bounds_awgn(1.0, 5.0, 1.5)
    assert su == pytest.approx(2.2807764064044154, abs=1e-12)


def test_semi_bounds_domain():
    with pytest.raises(DomainError):
        semi_bounds_awgn(2.0, 5.0, 1.0)  # mean below the support
    with pytest.raises(DomainError):
        semi_bounds_awgn(5.0, 2.0, 3.0)


def test_bernoulli_reference_values():
    ref = bernoulli_reference(0.0, 5.0, 0.5)
    assert ref == pytest.approx((1.0, 1.0, 11.0 / 3.0, 1.0, 11.0 / 3.0), abs=1e-12)
    cs, cl, cu, sl, su = bernoulli_reference(0.0, 5.0, 0.999)
    assert cs == 5.0 and cl == 5.0 and cu == 5.0 and su == 5.0
    assert sl == pytest.approx(0.999 * 5.0, abs=1e-12)


def test_bernoulli_reference_against_generic_solvers():
    x_lo, x_hi, p = 0.0, 5.0, 0.5
    d = Bernoulli(x_lo, x_hi, p)
    ref = bernoulli_reference(x_lo, x_hi, p)
    got = (
        c_star(d, AWGN),
        bound_lower(d, AWGN),
        bound_upper(d, AWGN),
        *semi_bounds_awgn(x_lo, x_hi, d.mean),
    )
    assert got == pytest.approx(ref, abs=1e-8)


def test_rayleigh_scaling_constant():
    a = rayleigh_a_star()
    assert abs(a - 0.875) <= 1e-3
    assert rayleigh_scaling_functional(0.0) == 0.0
    # independent quadrature check that a=2 overshoots the defining value 1
    val, _ = integrate.quad(lambda y: math.exp(-math.pi * y * y / 4.0), 0.0, 2.0)
    assert math.pi * 2.0 / 2.0 * val > 1.0
    assert rayleigh_scaling_functional(2.0) == pytest.approx(math.pi * val, rel=1e-9)


def test_throughput_examples():
    d = Bernoulli(0.0, 5.0, 0.5)
    assert greedy_throughput(d, AWGN, 2.0) == pytest.approx(
        0.25 * math.log(3.0), abs=1e-12
    )
    assert throughput_upper(d, AWGN, 2.0) == pytest.approx(
        0.5 * math.log(2.0), abs=1e-12
    )
    assert greedy_throughput(d, AWGN, 1.0) == pytest.approx(
        0.25 * math.log(2.0), abs=1e-12
    )
    assert greedy_throughput(d, AWGN, 0.0) == 0.0
    assert throughput_upper(d, AWGN, 0.0) == 0.0


@pytest.mark.parametrize(
    "d",
    [Bernoulli(0.0, 5.0, 0.5), Exponential(1.0), Poisson(0.8)],
    ids=lambda d: d.kind,
)
def test_margin_interval_structure(d):
    cs = c_star(d, AWGN)
    rng = np.random.default_rng(5)
    below = rng.uniform(1e-6, cs * (1.0 - 1e-9), 200)
    margins = [threshold_margin(d, AWGN, float(c)) for c in below]
    assert min(margins) >= -1e-9
    above = rng.uniform(cs * (1.0 + 1e-9), 2.0 * cs, 200)
    margins = [threshold_margin(d, AWGN, float(c)) for c in above]
    assert max(margins) < 1e-9
    assert min(margins) < -1e-9


@pytest.mark.parametrize(
    "d",
    [
        Bernoulli(0.0, 5.0, 0.5),
        Geometric(0.5),
        Poisson(0.5),
        Uniform(2.0),
        Exponential(1.0),
        Rayleigh(0.7),
    ],
    ids=lambda d: d.kind,
)
def test_greedy_asymptotically_optimal_at_zero_capacity(d):
    c = 1e-3
    ratio = greedy_throughput(d, AWGN, c) / throughput_upper(d, AWGN, c)
    assert ratio >= 0.99


def test_tight_bound_cases():
    # saturated branch: threshold and upper bound both stick at the top atom
    d = Bernoulli(0.0, 5.0, 0.9)
    assert c_star(d, AWGN) == pytest.approx(5.0, abs=1e-8)
    assert bound_upper(d, AWGN) == pytest.approx(5.0, abs=1e-8)
    # interior branch: the semi-universal lower bound is exact
    d = Bernoulli(0.0, 5.0, 0.5)
    sl, _ = semi_bounds_awgn(0.0, 5.0, d.mean)
    assert sl == pytest.approx(c_star(d, AWGN), abs=1e-8)


def _dense_awgn_table(hi=40.0, n=6001):
    xs = np.linspace(0.0, hi, n)
    return TabulatedReward(xs, AWGN.value(xs), AWGN.deriv(xs))


def test_generic_envelope_path_matches_awgn_path():
    d = Bernoulli(0.0, 5.0, 0.5)
    table = _dense_awgn_table()
    assert bound_lower(d, table, scan_points=1501) == pytest.approx(
        bound_lower(d, AWGN), abs=1e-3
    )
    assert bound_upper(d, table, scan_points=1501) == pytest.approx(
        bound_upper(d, AWGN), abs=1e-3
    )


def test_upper_bound_unbounded_within_cap():
    # derivative flat from 0.5 onward with an unbounded arrival law: the
    # relaxed predicate holds at every scanned capacity
    r = TabulatedReward([0.0, 0.5, 1.0], [0.0, 0.4, 0.65], [1.0, 0.5, 0.5])
    cu = bound_upper(Exponential(1.0), r, scan_points=501)
    assert math.isinf(cu)


def test_threshold_report_fields():
    d = Bernoulli(0.0, 5.0, 0.5)
    rep = threshold_report(d, AWGN)
    assert rep.method == "discrete-exact"
    assert rep.c_star == pytest.approx(1.0, abs=1e-8)
    assert rep.c_lower <= rep.c_star + 1e-8 <= rep.c_upper + 2e-8
    assert rep.semi_lower == pytest.approx(1.0, abs=1e-10)
    assert rep.semi_upper == pytest.approx(11.0 / 3.0, abs=1e-10)
    assert not rep.c_upper_unbounded
    assert abs(rep.residual) <= 1e-8
    rep = threshold_report(Exponential(1.0), AWGN)
    assert rep.method == "continuous-root"
    assert rep.c_star == pytest.approx(EXP1_CSTAR, abs=1e-8)
    assert math.isfinite(rep.x_hi_cap)


def test_ratio_near_zero_capacity_finite_discrete():
    d = FiniteDiscrete([(0.0, 0.2), (1.0, 0.5), (4.0, 0.3)])
    c = 1e-3
    assert greedy_throughput(d, AWGN, c) / throughput_upper(d, AWGN, c) >= 0.99


@pytest.mark.parametrize(
    "d",
    [
        Bernoulli(0.0, 5.0, 0.5),
        FiniteDiscrete([(0.0, 0.2), (1.0, 0.5), (4.0, 0.3)]),
        Geometric(0.4),
        Poisson(1.3),
        Uniform(2.0),
        Exponential(1.0),
        Rayleigh(0.7),
    ],
    ids=lambda d: d.kind,
)
def test_threshold_report_all_families(d):
    rep = threshold_report(d, AWGN, scan_points=20001)
    assert d.x_lo < rep.c_star <= rep.x_hi_cap
    assert rep.semi_lower <= rep.c_lower + 1e-8
    assert rep.c_lower <= rep.c_star + 1e-8
    assert rep.c_star <= rep.c_upper + 1e-8
    if math.isfinite(rep.c_upper):
        assert rep.c_upper <= rep.semi_upper + 1e-8
        assert rep.c_upper > rep.mu
    assert rep.method == ("discrete-exact" if d.is_discrete else "continuous-root")
