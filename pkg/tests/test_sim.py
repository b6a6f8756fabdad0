import math

import numpy as np
import pytest

from ehpc import (
    AdmissibilityError,
    AwgnReward,
    Bernoulli,
    CustomPolicy,
    DomainError,
    Exponential,
    GreedyPolicy,
    ModifiedGreedyPolicy,
    SolutionPolicy,
    Uniform,
    compare_policies,
    greedy_throughput,
    modified_greedy_step,
    simulate,
    solve,
)
from ehpc.sim import simulate_reference_loop

AWGN = AwgnReward()
BERN = Bernoulli(0.0, 5.0, 0.5)


def test_point_mass_greedy_is_deterministic():
    d = Bernoulli(0.0, 1.5, 1.0)  # every arrival is exactly 1.5
    res = simulate(GreedyPolicy(), d, AWGN, 2.0, 1000, seed=1)
    assert res.avg_reward == pytest.approx(float(AWGN.value(1.5)), abs=1e-15)
    assert res.final_battery == 1.5
    assert res.ci_halfwidth_95 <= 1e-15  # batch-mean rounding noise only


def test_greedy_matches_closed_form_rate():
    res = simulate(GreedyPolicy(), BERN, AWGN, 2.0, 1_000_000, seed=11)
    target = greedy_throughput(BERN, AWGN, 2.0)
    assert abs(res.avg_reward - target) <= 3.0 * res.ci_halfwidth_95
    assert res.ci_halfwidth_95 > 0.0


def test_modified_greedy_step_rule():
    # near-maximal arrival on an odd slot triggers the hold-back
    assert modified_greedy_step(1, 3.0, 5.0, 4.0, 0.25, x_hi=5.0) == 2.75
    assert modified_greedy_step(1, 3.0, 0.0, 4.0, 0.25, x_hi=5.0) == 3.0
    assert modified_greedy_step(2, 3.0, 5.0, 4.0, 0.25, x_hi=5.0) == 3.0
    # unbounded arrivals: the trigger references the capacity
    assert modified_greedy_step(1, 1.0, 1.9, 2.0, 0.25) == 0.75


def test_modified_greedy_beats_greedy_above_threshold():
    res = compare_policies(
        ModifiedGreedyPolicy(0.25), GreedyPolicy(), BERN, AWGN, 2.0,
        n=1_000_000, seed_base=7, replicates=20,
    )
    assert res.mean_diff > 0.0
    assert res.significant


def test_identical_policies_difference_exactly_zero():
    res = compare_policies(
        GreedyPolicy(), GreedyPolicy(), BERN, AWGN, 2.0,
        n=10_000, seed_base=3, replicates=10,
    )
    assert res.diffs == tuple([0.0] * 10)
    assert not res.significant


def test_compare_policies_needs_replicates():
    with pytest.raises(DomainError):
        compare_policies(GreedyPolicy(), GreedyPolicy(), BERN, AWGN, 2.0, 100, 0, replicates=5)


def test_inadmissible_policy_faults():
    with pytest.raises(AdmissibilityError):
        simulate(CustomPolicy(lambda b: 1.5 * b + 0.1), BERN, AWGN, 2.0, 100, seed=0)
    with pytest.raises(AdmissibilityError):
        simulate(CustomPolicy(lambda b: -0.1), BERN, AWGN, 2.0, 100, seed=0)


def test_modified_greedy_eps_validation():
    with pytest.raises(DomainError):
        ModifiedGreedyPolicy(0.0)
    # eps above min(x_hi, c)/2 is rejected once the run context is known
    with pytest.raises(DomainError):
        simulate(ModifiedGreedyPolicy(0.6), BERN, AWGN, 1.0, 10, seed=0)
    simulate(ModifiedGreedyPolicy(0.5), BERN, AWGN, 1.0, 10, seed=0)  # boundary ok


@pytest.mark.parametrize(
    "policy",
    [GreedyPolicy(), ModifiedGreedyPolicy(0.25)],
    ids=["greedy", "modified"],
)
@pytest.mark.parametrize(
    "d", [BERN, Exponential(1.0), Uniform(2.0)], ids=lambda d: d.kind
)
def test_fast_paths_match_reference_loop_bitwise(policy, d):
    fast = simulate(policy, d, AWGN, 2.0, 10_001, seed=99)
    slow = simulate_reference_loop(policy, d, AWGN, 2.0, 10_001, seed=99)
    assert fast.avg_reward == slow.avg_reward
    assert fast.final_battery == slow.final_battery
    assert fast.ci_halfwidth_95 == slow.ci_halfwidth_95


def test_reproducibility_and_final_state():
    a = simulate(ModifiedGreedyPolicy(0.3), BERN, AWGN, 2.0, 50_000, seed=123)
    b = simulate(ModifiedGreedyPolicy(0.3), BERN, AWGN, 2.0, 50_000, seed=123)
    assert a == b
    c = simulate(ModifiedGreedyPolicy(0.3), BERN, AWGN, 2.0, 50_000, seed=124)
    assert c.avg_reward != a.avg_reward
    assert 0.0 <= a.final_battery <= 2.0


def test_battery_stays_in_range_reference_loop():
    res = simulate_reference_loop(GreedyPolicy(), Exponential(1.0), AWGN, 1.5, 20_000, seed=5)
    assert 0.0 <= res.final_battery <= 1.5  # loop faults internally if violated


def test_solution_policy_matches_greedy_below_threshold():
    sol = solve(BERN, AWGN, 0.8, grid_n=256)
    res = compare_policies(
        SolutionPolicy(sol), GreedyPolicy(), BERN, AWGN, 0.8,
        n=100_000, seed_base=21, replicates=10,
    )
    assert abs(res.mean_diff) <= 3.0 * res.ci_halfwidth_95 + 1e-12


def test_solution_policy_tracks_solver_gain():
    sol = solve(BERN, AWGN, 2.0, grid_n=512)
    res = simulate(SolutionPolicy(sol), BERN, AWGN, 2.0, 200_000, seed=3)
    assert abs(res.avg_reward - sol.gain) <= 3.0 * res.ci_halfwidth_95


def test_solution_policy_capacity_mismatch():
    sol = solve(BERN, AWGN, 1.0, grid_n=64)
    with pytest.raises(DomainError):
        simulate(SolutionPolicy(sol), BERN, AWGN, 2.0, 10, seed=0)


def test_simulate_domain_errors():
    with pytest.raises(DomainError):
        simulate(GreedyPolicy(), BERN, AWGN, 2.0, 0, seed=0)
    with pytest.raises(DomainError):
        simulate(GreedyPolicy(), BERN, AWGN, 0.0, 10, seed=0)


def test_greedy_simulation_converges_for_all_families():
    import ehpc

    families = [
        BERN,
        ehpc.FiniteDiscrete([(0.0, 0.2), (1.0, 0.5), (4.0, 0.3)]),
        ehpc.Geometric(0.4),
        ehpc.Poisson(1.3),
        Uniform(2.0),
        Exponential(1.0),
        ehpc.Rayleigh(0.7),
    ]
    for d in families:
        c = max(1.0, 0.8 * d.mean)
        res = simulate(GreedyPolicy(), d, AWGN, c, 1_000_000, seed=13)
        target = greedy_throughput(d, AWGN, c)
        assert abs(res.avg_reward - target) / target < 0.01


@pytest.mark.parametrize("n", [1, 2, 3, 101])
def test_modified_greedy_tiny_step_counts(n):
    res = simulate(ModifiedGreedyPolicy(0.25), BERN, AWGN, 2.0, n, seed=2)
    ref = simulate_reference_loop(ModifiedGreedyPolicy(0.25), BERN, AWGN, 2.0, n, seed=2)
    assert res == ref
