"""End-to-end verification checks wiring all oracles together.

Each check pairs an implementation path against an independent reference:
closed forms against generic solvers, the Bellman gain against the greedy
closed form, simulations against analytic rates, and the asymptotic sweeps
against their limit shapes.  ``run`` executes any subset and reports one
pass/fail line per check; the test suite asserts the same functions.
"""

from __future__ import annotations

import io
import math
import time
from contextlib import redirect_stdout
from dataclasses import dataclass

import numpy as np

from . import analysis, bellman, sim, threshold
from .distributions import (
    Bernoulli,
    Exponential,
    FiniteDiscrete,
    Geometric,
    Poisson,
    Rayleigh,
    Uniform,
)
from .reward import AwgnReward

AWGN = AwgnReward()


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} criterion {self.number} ({self.name}): {self.detail} [{self.seconds:.1f}s]"


def _random_bernoulli_triples(rng, count):
    for _ in range(count):
        x_lo = rng.uniform(0.0, 3.0)
        x_hi = x_lo + rng.uniform(0.2, 10.0)
        p = rng.uniform(0.02, 0.98)
        yield x_lo, x_hi, p


def check_bernoulli_oracle() -> CheckResult:
    """500 random two-point laws: generic solvers vs closed forms, < 10 s."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(11001)
    worst = 0.0
    for x_lo, x_hi, p in _random_bernoulli_triples(rng, 500):
        d = Bernoulli(x_lo, x_hi, p)
        ref = threshold.bernoulli_reference(x_lo, x_hi, p)
        got = (
            threshold.c_star(d, AWGN),
            threshold.bound_lower(d, AWGN),
            threshold.bound_upper(d, AWGN),
            *threshold.semi_bounds_awgn(x_lo, x_hi, d.mean),
        )
        worst = max(worst, max(abs(a - b) for a, b in zip(got, ref)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 10.0
    return CheckResult(
        1, "closed-form threshold oracle", ok, f"max deviation {worst:.2e}", dt
    )


def _random_discrete(rng, k):
    kind = k % 3
    if kind == 0:
        m = 2 + k % 5
        while True:
            xs = np.sort(rng.uniform(0.0, 10.0, m))
            if np.all(np.diff(xs) > 1e-2):
                break
        ps = rng.uniform(0.1, 1.0, m)
        ps = ps / ps.sum()
        return FiniteDiscrete(list(zip(xs.tolist(), ps.tolist())))
    if kind == 1:
        return Geometric(rng.uniform(0.15, 0.9))
    return Poisson(rng.uniform(0.1, 4.0))


def _random_continuous(rng, k):
    kind = k % 3
    if kind == 0:
        return Uniform(rng.uniform(0.3, 8.0))
    if kind == 1:
        return Exponential(rng.uniform(0.25, 4.0))
    return Rayleigh(rng.uniform(0.05, 4.0))


def check_characterization_consistency() -> CheckResult:
    """Generic bisection vs exact characterizations on 200 random laws."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(11002)
    worst = 0.0
    for k in range(100):
        d = _random_discrete(rng, k)
        diff = abs(
            threshold.c_star(d, AWGN) - threshold.c_star_discrete_exact(d, AWGN)
        )
        worst = max(worst, diff)
    for k in range(100):
        d = _random_continuous(rng, k)
        diff = abs(threshold.c_star(d, AWGN) - threshold.c_star_continuous_awgn(d))
        worst = max(worst, diff)
    dt = time.perf_counter() - t0
    return CheckResult(
        2,
        "discrete/continuous characterization consistency",
        worst <= 1e-8,
        f"max deviation {worst:.2e}",
        dt,
    )


def check_known_threshold_values() -> CheckResult:
    """Known thresholds: geometric mu, Poisson e^mu - 1, Rayleigh constant."""
    t0 = time.perf_counter()
    errs = []
    for mu in (0.1, 0.5, 1.0):
        d = Geometric(1.0 / (1.0 + mu))
        errs.append(("geom", abs(threshold.c_star_discrete_exact(d, AWGN) - mu), 1e-9))
    for mu in (0.2, 0.5, math.log(2.0)):
        d = Poisson(mu)
        got = threshold.c_star_discrete_exact(d, AWGN)
        errs.append(("poisson", abs(got - (math.exp(mu) - 1.0)), 1e-8))
    errs.append(("rayleigh", abs(threshold.rayleigh_a_star() - 0.875), 1e-3))
    dt = time.perf_counter() - t0
    ok = all(err <= tol for _, err, tol in errs)
    worst = max(err / tol for _, err, tol in errs)
    return CheckResult(
        3, "exact threshold values", ok, f"worst error at {worst:.2e} of tolerance", dt
    )


def _desk_families():
    return [
        ("bernoulli(0,5,0.5)", Bernoulli(0.0, 5.0, 0.5)),
        ("geometric(2/3)", Geometric(2.0 / 3.0)),
        ("poisson(0.5)", Poisson(0.5)),
        ("uniform(2)", Uniform(2.0)),
        ("exponential(1)", Exponential(1.0)),
    ]


def _family_c_star(d) -> float:
    if d.is_discrete:
        return threshold.c_star_discrete_exact(d, AWGN)
    return threshold.c_star_continuous_awgn(d)


def check_greedy_region_gain() -> CheckResult:
    """Below the threshold the solver must reproduce the greedy rate and
    an (up to one grid step) greedy policy; grid_n=512, < 5 min."""
    t0 = time.perf_counter()
    failures = []
    worst = 0.0
    for name, d in _desk_families():
        cs = _family_c_star(d)
        for frac in (0.2, 0.4, 0.6, 0.8, 1.0):
            c = frac * cs
            sol = bellman.solve(d, AWGN, c, grid_n=512, tol=1e-8)
            target = threshold.greedy_throughput(d, AWGN, c)
            rel = abs(sol.gain - target) / target
            worst = max(worst, rel)
            step = c / 511.0
            greedy_ok = bool(np.all(sol.policy >= sol.grid - step - 1e-12))
            if rel > 1e-4 or not greedy_ok:
                failures.append(f"{name}@{frac}: rel={rel:.2e} greedy={greedy_ok}")
    dt = time.perf_counter() - t0
    ok = not failures and dt < 300.0
    detail = f"worst relative gain error {worst:.2e}" + (
        f"; failures: {failures}" if failures else ""
    )
    return CheckResult(4, "greedy optimality below threshold", ok, detail, dt)


def check_above_threshold_gap() -> CheckResult:
    """At c = 2 c*: solver gain beats greedy, and the eps-saving policy
    beats greedy in paired simulation with a CI excluding zero."""
    t0 = time.perf_counter()
    details = []
    ok = True
    for name, d in (
        ("bernoulli(0,5,0.5)", Bernoulli(0.0, 5.0, 0.5)),
        ("exponential(1)", Exponential(1.0)),
    ):
        cs = _family_c_star(d)
        c = 2.0 * cs
        sol = bellman.solve(d, AWGN, c, grid_n=512, tol=1e-8)
        lower = threshold.greedy_throughput(d, AWGN, c)
        upper = threshold.throughput_upper(d, AWGN, c)
        gap = sol.gain - lower
        solver_ok = gap > 1e-3 and sol.gain < upper
        best = None
        for eps in np.arange(0.05, 0.501, 0.05):
            cmp_res = sim.compare_policies(
                sim.ModifiedGreedyPolicy(float(eps)),
                sim.GreedyPolicy(),
                d,
                AWGN,
                c,
                n=1_000_000,
                seed_base=777,
                replicates=20,
            )
            if best is None or cmp_res.mean_diff > best.mean_diff:
                best = cmp_res
        sim_ok = best.mean_diff > 0.0 and best.significant
        ok = ok and solver_ok and sim_ok
        details.append(
            f"{name}: gain gap {gap:.2e}, best paired diff "
            f"{best.mean_diff:.2e} +- {best.ci_halfwidth_95:.2e}"
        )
    dt = time.perf_counter() - t0
    return CheckResult(5, "strict suboptimality above threshold", ok, "; ".join(details), dt)


def check_bound_ordering() -> CheckResult:
    """semi_lower <= lower <= c* <= upper <= semi_upper and mean < upper
    on 1000 randomized laws, slack 1e-8."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(11006)
    violations = 0
    count = 0
    for k in range(1000):
        pick = k % 7
        if pick == 0:
            x_lo, x_hi, p = next(_random_bernoulli_triples(rng, 1))
            d = Bernoulli(x_lo, x_hi, p)
        elif pick in (1, 2, 3):
            d = _random_discrete(rng, k)
        else:
            d = _random_continuous(rng, k)
        cs = _family_c_star(d)
        cl = threshold.bound_lower(d, AWGN)
        cu = threshold.bound_upper(d, AWGN)
        sl, su = threshold.semi_bounds_awgn(d.x_lo, d.x_hi, d.mean)
        chain = [sl, cl, cs, cu]
        if math.isfinite(cu):
            chain.append(su)
            if not cu > d.mean - 1e-8:
                violations += 1
        for a, b in zip(chain, chain[1:]):
            if a > b + 1e-8:
                violations += 1
        count += 1
    dt = time.perf_counter() - t0
    return CheckResult(
        6,
        "bound ordering",
        violations == 0,
        f"{violations} violations over {count} laws",
        dt,
    )


def check_saving_objective_monotonicity() -> CheckResult:
    """phi nondecreasing on a 200x50 grid below the threshold; some strictly
    negative left derivative above it."""
    t0 = time.perf_counter()
    failures = []
    for name, d in _desk_families():
        cs = _family_c_star(d)
        c = 0.9 * cs
        monotone = True
        for b in np.linspace(0.0, c, 50):
            if b <= 0.0:
                continue
            gs = np.linspace(0.0, b, 200)
            vals = [bellman.phi_value(d, AWGN, c, float(b), float(g)) for g in gs]
            if np.any(np.diff(vals) < -1e-9):
                monotone = False
                break
        c_hi = 1.5 * cs
        neg = False
        for b in np.linspace(0.05 * c_hi, c_hi, 25):
            for g in np.linspace(0.05 * b, b, 25):
                left, _ = bellman.phi_semi_derivatives(d, AWGN, c_hi, float(b), float(g))
                if left < -1e-9:
                    neg = True
                    break
            if neg:
                break
        if not monotone or not neg:
            failures.append(f"{name}: monotone={monotone} negative-found={neg}")
    dt = time.perf_counter() - t0
    return CheckResult(
        7,
        "saving-objective monotonicity",
        not failures,
        "; ".join(failures) if failures else "all families consistent",
        dt,
    )


# Decade grids per family/regime.  The log-factor families converge like
# log log mu / log mu, so their sweeps sit deep in the regime; runtime stays
# far below the budget because the sweeps use the exact characterizations.
SWEEP_DECADES = {
    ("geometric", "small"): [1e-4, 1e-3, 1e-2, 1e-1],
    ("poisson", "small"): [1e-4, 1e-3, 1e-2, 1e-1],
    ("uniform", "small"): [1e-4, 1e-3, 1e-2, 1e-1],
    ("exponential", "small"): [1e-43, 1e-42, 1e-41, 1e-40],
    ("rayleigh", "small"): [1e-8, 1e-7, 1e-6, 1e-5],
    ("geometric", "large"): [1e5, 1e6, 1e7, 1e8],
    ("poisson", "large"): [1e2, 1e3, 1e4, 1e5],
    ("uniform", "large"): [1e4, 1e5, 1e6, 1e7],
    ("exponential", "large"): [1e8, 1e9, 1e10, 1e11],
    ("rayleigh", "large"): [1e2, 1e3, 1e4, 1e5],
}

SWEEP_FINAL_BOUND = {
    ("geometric", "small"): 0.05,
    ("poisson", "small"): 0.05,
    ("uniform", "small"): 0.05,
    ("exponential", "small"): 0.05,
    ("rayleigh", "small"): 0.05,
    ("geometric", "large"): 0.15,
    ("poisson", "large"): 0.15,
    ("uniform", "large"): 0.15,
    ("exponential", "large"): 0.15,
    ("rayleigh", "large"): 0.10,
}


def check_asymptotic_trends() -> CheckResult:
    """Three-decade sweeps: |ratio - 1| shrinks toward the regime limit and
    meets the terminal bound; < 2 min."""
    t0 = time.perf_counter()
    failures = []
    for (family, regime), mus in SWEEP_DECADES.items():
        rows = analysis.asymptotic_sweep(family, regime, mus)
        errs = [abs(r.ratio - 1.0) for r in rows]
        # rows are ordered by ascending mean; the regime limit sits at the
        # small end for "small" and the large end for "large"
        toward_limit = errs[::-1] if regime == "large" else errs
        monotone = all(a <= b + 1e-9 for a, b in zip(toward_limit, toward_limit[1:]))
        final = toward_limit[0]
        bound = SWEEP_FINAL_BOUND[(family, regime)]
        if not monotone or final >= bound:
            failures.append(
                f"{family}/{regime}: errs={['%.4f' % e for e in errs]} bound={bound}"
            )
    dt = time.perf_counter() - t0
    ok = not failures and dt < 120.0
    return CheckResult(
        8,
        "asymptotic scaling trends",
        ok,
        "; ".join(failures) if failures else "all ten family/regime sweeps converge",
        dt,
    )


def check_throughput_sandwich() -> CheckResult:
    """Curve rows obey greedy <= optimal <= Jensen and optimal == greedy
    below the threshold (tolerance 1e-4)."""
    t0 = time.perf_counter()
    failures = []
    for name, d in (
        ("bernoulli(0,5,0.5)", Bernoulli(0.0, 5.0, 0.5)),
        ("uniform(2)", Uniform(2.0)),
        ("exponential(1)", Exponential(1.0)),
    ):
        cs = _family_c_star(d)
        rows = analysis.curves(d, AWGN, 0.25 * cs, 1.5 * cs, 6, grid_n=256)
        for row in rows:
            if row.error is not None:
                failures.append(f"{name}@{row.c:.3f}: {row.error}")
                continue
            if not (
                row.gamma_greedy - 1e-4 <= row.gamma_star <= row.gamma_upper + 1e-4
            ):
                failures.append(f"{name}@{row.c:.3f}: sandwich broken")
            if row.c <= cs * (1.0 + 1e-12):
                if abs(row.gamma_star - row.gamma_greedy) > 1e-4:
                    failures.append(
                        f"{name}@{row.c:.3f}: below-threshold gap "
                        f"{abs(row.gamma_star - row.gamma_greedy):.2e}"
                    )
    dt = time.perf_counter() - t0
    return CheckResult(
        9,
        "throughput sandwich",
        not failures,
        "; ".join(failures) if failures else "all rows sandwiched",
        dt,
    )


def check_determinism() -> CheckResult:
    """Repeated invocations with one seed produce byte-identical output."""
    t0 = time.perf_counter()
    from . import cli  # local import: cli imports this module for `verify`

    d = Bernoulli(0.0, 5.0, 0.5)
    ok = True
    details = []
    a = sim.simulate(sim.GreedyPolicy(), d, AWGN, 2.0, 10_000, seed=42)
    b = sim.simulate(sim.GreedyPolicy(), d, AWGN, 2.0, 10_000, seed=42)
    if not (a.avg_reward == b.avg_reward and a.final_battery == b.final_battery):
        ok = False
        details.append("simulate mismatch")
    rows1 = analysis.curves(d, AWGN, 0.5, 1.5, 3, grid_n=64)
    rows2 = analysis.curves(d, AWGN, 0.5, 1.5, 3, grid_n=64)
    if analysis.curves_csv(rows1) != analysis.curves_csv(rows2):
        ok = False
        details.append("curves mismatch")
    s1 = analysis.sweep_csv(analysis.asymptotic_sweep("geometric", "small", [0.01, 0.1, 1.0]))
    s2 = analysis.sweep_csv(analysis.asymptotic_sweep("geometric", "small", [0.01, 0.1, 1.0]))
    if s1 != s2:
        ok = False
        details.append("sweep mismatch")

    def run_cli(argv):
        buf = io.StringIO()
        with redirect_stdout(buf):
            code = cli.main(argv)
        return code, buf.getvalue()

    for argv in (
        [
            "simulate",
            "--dist",
            "bernoulli:xlo=0,xhi=5,p=0.5",
            "--capacity",
            "2",
            "--policy",
            "modified:eps=0.25",
            "--steps",
            "20000",
            "--seed",
            "7",
        ],
        ["sweep", "--family", "geometric", "--regime", "small", "--mu", "0.01,0.1,1"],
        [
            "curves",
            "--dist",
            "bernoulli:xlo=0,xhi=5,p=0.5",
            "--c-min",
            "0.5",
            "--c-max",
            "1.5",
            "--points",
            "3",
            "--grid-n",
            "64",
        ],
    ):
        c1, out1 = run_cli(argv)
        c2, out2 = run_cli(argv)
        if c1 != 0 or c2 != 0 or out1 != out2:
            ok = False
            details.append(f"cli mismatch: {argv[0]}")
    dt = time.perf_counter() - t0
    return CheckResult(
        10,
        "determinism",
        ok,
        "; ".join(details) if details else "all repeated runs byte-identical",
        dt,
    )


CHECKS = {
    1: check_bernoulli_oracle,
    2: check_characterization_consistency,
    3: check_known_threshold_values,
    4: check_greedy_region_gain,
    5: check_above_threshold_gap,
    6: check_bound_ordering,
    7: check_saving_objective_monotonicity,
    8: check_asymptotic_trends,
    9: check_throughput_sandwich,
    10: check_determinism,
}


def run(numbers=None, stream=None) -> list[CheckResult]:
    """Run the requested checks (default: all) and print one line each."""
    selected = sorted(CHECKS) if numbers is None else sorted(numbers)
    results = []
    for num in selected:
        if num not in CHECKS:
            raise KeyError(f"no criterion {num}")
        res = CHECKS[num]()
        results.append(res)
        if stream is not None:
            print(res.line(), file=stream, flush=True)
    return results
