"""Reward functions and envelope evaluators for their derivatives.

A reward function maps an energy consumption level x >= 0 to an
instantaneous rate.  All rewards here are nondecreasing and concave with a
continuous first derivative; the threshold bounds additionally need the
upper concave envelope and the lower convex envelope of the derivative
over a capacity interval.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

ENVELOPE_GRID_N = 4097


def _check_nonnegative(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError("energy argument must be nonnegative")
    return arr


class RewardFunction:
    """Base class: value r(x), derivative r'(x), and the limit r'(inf)."""

    kind = "base"

    def value(self, x):
        raise NotImplementedError

    def deriv(self, x):
        raise NotImplementedError

    @property
    def deriv_at_inf(self) -> float:
        raise NotImplementedError

    def deriv_at(self, x: float) -> float:
        """r'(x) with x = inf allowed (returns the limit)."""
        if math.isinf(x):
            return self.deriv_at_inf
        return float(self.deriv(x))


class AwgnReward(RewardFunction):
    """r(x) = 0.5*log(1+x), the Gaussian-channel rate at SNR x."""

    kind = "awgn"

    def value(self, x):
        arr = _check_nonnegative(x)
        out = 0.5 * np.log1p(arr)
        return out if isinstance(x, np.ndarray) else float(out)

    def deriv(self, x):
        arr = _check_nonnegative(x)
        out = 0.5 / (1.0 + arr)
        return out if isinstance(x, np.ndarray) else float(out)

    @property
    def deriv_at_inf(self) -> float:
        return 0.0


class LinearReward(RewardFunction):
    """r(x) = slope*x.  Constant derivative, so greedy is always optimal."""

    kind = "linear"

    def __init__(self, slope: float):
        if not slope > 0.0 or not math.isfinite(slope):
            raise DomainError("slope must be positive and finite")
        self.slope = float(slope)

    def value(self, x):
        arr = _check_nonnegative(x)
        out = self.slope * arr
        return out if isinstance(x, np.ndarray) else float(out)

    def deriv(self, x):
        arr = _check_nonnegative(x)
        out = np.full_like(arr, self.slope)
        return out if isinstance(x, np.ndarray) else float(out)

    @property
    def deriv_at_inf(self) -> float:
        return self.slope


class TabulatedReward(RewardFunction):
    """Piecewise-linear reward from a breakpoint table (x, r(x), r'(x)).

    Both r and r' are interpolated linearly between breakpoints; beyond the
    last breakpoint r continues with the final slope and r' stays constant.
    Construction rejects tables that are not nondecreasing and concave.
    """

    kind = "tabulated"

    def __init__(self, xs, values, derivs):
        xs = np.asarray(xs, dtype=float)
        values = np.asarray(values, dtype=float)
        derivs = np.asarray(derivs, dtype=float)
        if xs.ndim != 1 or xs.shape != values.shape or xs.shape != derivs.shape:
            raise DomainError("breakpoint arrays must be 1-d and equally sized")
        if xs.size < 2:
            raise DomainError("need at least two breakpoints")
        if xs[0] != 0.0:
            raise DomainError("breakpoint table must start at x = 0")
        if np.any(np.diff(xs) <= 0.0):
            raise DomainError("breakpoints must be strictly increasing")
        if values[0] < 0.0 or np.any(np.diff(values) < 0.0):
            raise DomainError("reward values must be nonnegative and nondecreasing")
        if np.any(derivs < 0.0) or np.any(np.diff(derivs) > 0.0):
            raise DomainError("derivative values must be nonnegative and nonincreasing")
        self.xs = xs
        self.values = values
        self.derivs = derivs

    def value(self, x):
        arr = _check_nonnegative(x)
        out = np.interp(arr, self.xs, self.values)
        # continue with the last slope beyond the table
        beyond = arr > self.xs[-1]
        if np.any(beyond):
            out = np.where(
                beyond,
                self.values[-1] + self.derivs[-1] * (arr - self.xs[-1]),
                out,
            )
        return out if isinstance(x, np.ndarray) else float(out)

    def deriv(self, x):
        arr = _check_nonnegative(x)
        out = np.interp(arr, self.xs, self.derivs)
        return out if isinstance(x, np.ndarray) else float(out)

    @property
    def deriv_at_inf(self) -> float:
        return float(self.derivs[-1])


def _hull_points(xs, ys, upper: bool):
    """Vertices of the upper (or lower) hull of points sorted by x."""
    hull_x: list[float] = []
    hull_y: list[float] = []
    for x, y in zip(xs, ys):
        while len(hull_x) >= 2:
            cross = (hull_x[-1] - hull_x[-2]) * (y - hull_y[-2]) - (
                hull_y[-1] - hull_y[-2]
            ) * (x - hull_x[-2])
            # upper hull keeps right turns only, lower hull left turns only
            if (upper and cross >= 0.0) or (not upper and cross <= 0.0):
                hull_x.pop()
                hull_y.pop()
            else:
                break
        hull_x.append(x)
        hull_y.append(y)
    return np.asarray(hull_x), np.asarray(hull_y)


def _envelope_generic(r, x_lo, c, x, upper, n_grid):
    grid = np.linspace(x_lo, c, n_grid)
    vals = r.deriv(grid)
    hx, hy = _hull_points(grid, vals, upper=upper)
    return np.interp(x, hx, hy)


def _check_envelope_args(x_lo, c, x):
    if not x_lo < c:
        raise DomainError("need x_lo < c")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < x_lo) or np.any(arr > c):
        raise DomainError("evaluation point outside [x_lo, c]")
    return arr


def deriv_upper_concave_env(r, x_lo, c, x, method="auto", n_grid=ENVELOPE_GRID_N):
    """Upper concave envelope of r' over [x_lo, c], evaluated at x.

    For the Gaussian reward r' is convex, so the envelope is the chord
    through the endpoints, available in closed form.  Otherwise the
    envelope is the upper hull of r' sampled on a uniform n_grid-point
    grid, interpolated linearly between hull vertices.
    """
    arr = _check_envelope_args(x_lo, c, x)
    use_closed = method == "closed" or (method == "auto" and r.kind == "awgn")
    if use_closed:
        if r.kind != "awgn":
            raise DomainError("closed-form envelope only available for the AWGN reward")
        out = (1.0 + x_lo + c - arr) / (2.0 * (1.0 + x_lo) * (1.0 + c))
    else:
        out = _envelope_generic(r, x_lo, c, arr, upper=True, n_grid=n_grid)
    return out if isinstance(x, np.ndarray) else float(out)


def deriv_lower_convex_env(r, x_lo, c, x, method="auto", n_grid=ENVELOPE_GRID_N):
    """Lower convex envelope of r' over [x_lo, c], evaluated at x.

    For the Gaussian reward r' is itself convex and the envelope equals r'.
    """
    arr = _check_envelope_args(x_lo, c, x)
    use_closed = method == "closed" or (method == "auto" and r.kind == "awgn")
    if use_closed:
        if r.kind != "awgn":
            raise DomainError("closed-form envelope only available for the AWGN reward")
        out = 0.5 / (1.0 + arr)
    else:
        out = _envelope_generic(r, x_lo, c, arr, upper=False, n_grid=n_grid)
    return out if isinstance(x, np.ndarray) else float(out)
