"""Energy-arrival laws and the probabilistic primitives the solvers consume.

Every distribution exposes the *strict* CDF rho(x) = P(X < x), which is the
quantity the threshold characterization is written in.  For discrete laws
this is the left limit of the usual CDF, so atoms are never accidentally
included or excluded; the usual CDF is deliberately not part of the API.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, DomainError

QUAD_ABS_TOL = 1e-10
QUAD_LIMIT = 10_000
TAIL_MASS_DEFICIT = 1e-15


def _as_float_array(x):
    return np.asarray(x, dtype=float)


class EnergyDistribution:
    """Base class for nonnegative i.i.d. arrival laws."""

    kind = "base"
    is_discrete = False

    #: essential infimum and supremum of the support (x_hi may be math.inf)
    x_lo: float
    x_hi: float
    #: analytic mean
    mean: float

    def cdf_strict(self, x):
        """P(X < x), vectorized; left-continuous in x."""
        raise NotImplementedError

    def survival(self, x):
        """P(X >= x) = 1 - cdf_strict(x), but computed without the
        1 - (1 - tiny) cancellation so deep tails stay meaningful."""
        out = 1.0 - np.asarray(self.cdf_strict(x), dtype=float)
        return out if isinstance(x, np.ndarray) else float(out)

    def point_mass(self, x: float) -> float:
        """P(X = x); zero for continuous laws."""
        raise NotImplementedError

    def pdf(self, x):
        raise DomainError(f"{self.kind} law has no density")

    def atoms_below(self, c: float):
        """(values, masses, tail) with values < c and tail = P(X >= c).

        Discrete laws only.  Enumeration of an infinite support stops once
        the remaining mass is below 1e-15; the dropped mass is accounted in
        ``tail``, so values+tail always describe the full law exactly up to
        that deficit.
        """
        raise DomainError(f"{self.kind} law has no atoms")

    def sample(self, rng: np.random.Generator, size=None):
        """Draw from the law; deterministic given the generator state."""
        raise NotImplementedError

    def quantile_cap(self, eps: float = 1e-12) -> float:
        """Finite scan bound: x_hi when finite, else the (1-eps)-quantile."""
        raise NotImplementedError

    # -- derived operations -------------------------------------------------

    def truncated_expect(self, g, c: float) -> float:
        """E[g(X) * 1{X < c}] = rho(c) * E[g(X) | X < c].

        ``g`` must accept numpy arrays (discrete path) and scalars
        (quadrature path) and be bounded on [0, c].
        """
        if not c > 0.0:
            raise DomainError("truncation point must be positive")
        if self.is_discrete:
            xs, ps, _ = self.atoms_below(c)
            if xs.size == 0:
                return 0.0
            return float(np.dot(ps, np.asarray(g(xs), dtype=float)))
        lo = self.x_lo
        hi = min(c, self.quantile_cap(TAIL_MASS_DEFICIT))
        if hi <= lo:
            return 0.0
        kwargs = {}
        if math.isfinite(self.x_hi) and lo < self.x_hi < hi:
            kwargs["points"] = [self.x_hi]
        val, abserr, info, *rest = integrate.quad(
            lambda x: float(g(x)) * self.pdf(x),
            lo,
            hi,
            epsabs=1e-12,
            epsrel=1e-12,
            limit=QUAD_LIMIT,
            full_output=1,
            **kwargs,
        )
        if rest or abserr > QUAD_ABS_TOL:
            raise ConvergenceError(
                f"quadrature failed on [{lo}, {hi}]: abserr={abserr:.3e}"
            )
        return float(val)

    def expected_min(self, c: float) -> float:
        """E[min(X, c)]."""
        if c < 0.0:
            raise DomainError("capacity must be nonnegative")
        if c == 0.0:
            return 0.0
        return self.truncated_expect(lambda x: x, c) + c * float(self.survival(c))


# -- discrete laws ----------------------------------------------------------


class FiniteDiscrete(EnergyDistribution):
    """Finitely many atoms xi_1 < xi_2 < ... with positive masses."""

    kind = "discrete"
    is_discrete = True

    def __init__(self, points):
        pts = sorted(points, key=lambda t: t[0])
        xs = np.asarray([t[0] for t in pts], dtype=float)
        ps = np.asarray([t[1] for t in pts], dtype=float)
        if xs.size == 0:
            raise DomainError("need at least one atom")
        if np.any(xs < 0.0):
            raise DomainError("atoms must be nonnegative")
        if np.any(np.diff(xs) <= 0.0):
            raise DomainError("atoms must be distinct")
        if np.any(ps <= 0.0):
            raise DomainError("atom masses must be positive")
        if abs(ps.sum() - 1.0) > 1e-12:
            raise DomainError(f"masses sum to {ps.sum()!r}, not 1")
        self.xs = xs
        self.ps = ps
        self._cum = np.concatenate(([0.0], np.cumsum(ps)))
        self._cum_tail = np.concatenate((np.cumsum(ps[::-1])[::-1], [0.0]))
        self.x_lo = float(xs[0])
        self.x_hi = float(xs[-1])
        self.mean = float(np.dot(xs, ps))

    def cdf_strict(self, x):
        arr = _as_float_array(x)
        idx = np.searchsorted(self.xs, arr, side="left")
        out = self._cum[idx]
        return out if isinstance(x, np.ndarray) else float(out)

    def survival(self, x):
        arr = _as_float_array(x)
        idx = np.searchsorted(self.xs, arr, side="left")
        out = self._cum_tail[idx]
        return out if isinstance(x, np.ndarray) else float(out)

    def point_mass(self, x: float) -> float:
        hits = np.flatnonzero(self.xs == float(x))
        return float(self.ps[hits[0]]) if hits.size else 0.0

    def atoms_below(self, c: float):
        n = int(np.searchsorted(self.xs, c, side="left"))
        tail = 1.0 - self._cum[n]
        return self.xs[:n], self.ps[:n], float(tail)

    def sample(self, rng, size=None):
        out = rng.choice(self.xs, size=size, p=self.ps)
        return out if size is not None else float(out)

    def quantile_cap(self, eps: float = 1e-12) -> float:
        return self.x_hi


class Bernoulli(FiniteDiscrete):
    """Two-point law: P(X = x_lo) = 1 - p, P(X = x_hi) = p.

    Degenerate p in {0, 1} collapses to a single atom (useful in
    simulation sanity checks).
    """

    kind = "bernoulli"

    def __init__(self, x_lo: float, x_hi: float, p: float):
        if not 0.0 <= p <= 1.0:
            raise DomainError("p must lie in [0, 1]")
        if not 0.0 <= x_lo < x_hi:
            raise DomainError("need 0 <= x_lo < x_hi")
        if p == 0.0:
            points = [(x_lo, 1.0)]
        elif p == 1.0:
            points = [(x_hi, 1.0)]
        else:
            points = [(x_lo, 1.0 - p), (x_hi, p)]
        super().__init__(points)
        self.p = float(p)


class _IntegerSupport(EnergyDistribution):
    """Common machinery for laws on {0, 1, 2, ...}."""

    is_discrete = True
    x_lo = 0.0
    x_hi = math.inf

    def _pmf_vec(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def _tail_cutoff(self, eps: float) -> int:
        """Smallest K with P(X > K) <= eps."""
        raise NotImplementedError

    def point_mass(self, x: float) -> float:
        if x < 0.0 or x != math.floor(x):
            return 0.0
        k = int(x)
        return float(self._pmf_vec(k + 1)[k])

    def atoms_below(self, c: float):
        n = int(math.ceil(c))  # atoms 0 .. n-1 are strictly below c
        n = min(n, self._tail_cutoff(TAIL_MASS_DEFICIT) + 1)
        ps = self._pmf_vec(n)
        # mass between n and c (dropped by the cutoff) is below the deficit
        return np.arange(n, dtype=float), ps, float(self.survival(float(n)))

    def quantile_cap(self, eps: float = 1e-12) -> float:
        return float(self._tail_cutoff(eps))


class Geometric(_IntegerSupport):
    """P(X = k) = (1-p)^k * p on k = 0, 1, ...; mean (1-p)/p."""

    kind = "geometric"

    def __init__(self, p: float):
        if not 0.0 < p < 1.0:
            raise DomainError("p must lie in (0, 1)")
        self.p = float(p)
        self.mean = (1.0 - p) / p

    def cdf_strict(self, x):
        arr = _as_float_array(x)
        m = np.ceil(np.maximum(arr, 0.0))  # number of atoms strictly below x
        out = np.where(arr <= 0.0, 0.0, -np.expm1(m * math.log1p(-self.p)))
        return out if isinstance(x, np.ndarray) else float(out)

    def survival(self, x):
        arr = _as_float_array(x)
        m = np.ceil(np.maximum(arr, 0.0))
        out = np.where(arr <= 0.0, 1.0, np.exp(m * math.log1p(-self.p)))
        return out if isinstance(x, np.ndarray) else float(out)

    def _pmf_vec(self, n: int) -> np.ndarray:
        k = np.arange(n, dtype=float)
        return np.exp(k * math.log1p(-self.p)) * self.p

    def _tail_cutoff(self, eps: float) -> int:
        # P(X > K) = (1-p)^(K+1)
        return max(0, int(math.ceil(math.log(eps) / math.log1p(-self.p))) - 1)

    def sample(self, rng, size=None):
        out = rng.geometric(self.p, size=size) - 1
        return np.asarray(out, dtype=float) if size is not None else float(out)


class Poisson(_IntegerSupport):
    """P(X = k) = e^-lam * lam^k / k!; mean lam.

    The pmf is evaluated in log space through log-gamma so that sweeps with
    means up to 1e6 stay well-conditioned.
    """

    kind = "poisson"

    def __init__(self, lam: float):
        if not lam > 0.0 or not math.isfinite(lam):
            raise DomainError("lambda must be positive and finite")
        self.lam = float(lam)
        self.mean = float(lam)

    def cdf_strict(self, x):
        arr = _as_float_array(x)
        m = np.ceil(np.maximum(arr, 1e-300))
        # P(X <= m-1) equals the regularized upper incomplete gamma Q(m, lam)
        out = np.where(arr <= 0.0, 0.0, special.gammaincc(np.maximum(m, 1.0), self.lam))
        return out if isinstance(x, np.ndarray) else float(out)

    def survival(self, x):
        arr = _as_float_array(x)
        m = np.ceil(np.maximum(arr, 1e-300))
        out = np.where(arr <= 0.0, 1.0, special.gammainc(np.maximum(m, 1.0), self.lam))
        return out if isinstance(x, np.ndarray) else float(out)

    def _pmf_vec(self, n: int) -> np.ndarray:
        k = np.arange(n, dtype=float)
        return np.exp(k * math.log(self.lam) - self.lam - special.gammaln(k + 1.0))

    def _tail_cutoff(self, eps: float) -> int:
        k = int(self.lam + 10.0 * math.sqrt(self.lam) + 20.0)
        while special.gammaincc(k + 1.0, self.lam) < 1.0 - eps:
            k = int(1.5 * k) + 10
            if k > 10**9:
                raise ConvergenceError("could not bracket the Poisson tail")
        return k

    def sample(self, rng, size=None):
        out = rng.poisson(self.lam, size=size)
        return np.asarray(out, dtype=float) if size is not None else float(out)


# -- continuous laws --------------------------------------------------------


class _Continuous(EnergyDistribution):
    is_discrete = False

    def point_mass(self, x: float) -> float:
        return 0.0


class Uniform(_Continuous):
    """Uniform on [0, omega]; mean omega/2."""

    kind = "uniform"
    x_lo = 0.0

    def __init__(self, omega: float):
        if not omega > 0.0 or not math.isfinite(omega):
            raise DomainError("omega must be positive and finite")
        self.omega = float(omega)
        self.x_hi = float(omega)
        self.mean = 0.5 * omega

    def cdf_strict(self, x):
        arr = _as_float_array(x)
        out = np.clip(arr / self.omega, 0.0, 1.0)
        return out if isinstance(x, np.ndarray) else float(out)

    def survival(self, x):
        arr = _as_float_array(x)
        out = np.clip((self.omega - arr) / self.omega, 0.0, 1.0)
        return out if isinstance(x, np.ndarray) else float(out)

    def pdf(self, x):
        arr = _as_float_array(x)
        out = np.where((arr >= 0.0) & (arr <= self.omega), 1.0 / self.omega, 0.0)
        return out if isinstance(x, np.ndarray) else float(out)

    def sample(self, rng, size=None):
        out = rng.random(size) * self.omega
        return out if size is not None else float(out)

    def quantile_cap(self, eps: float = 1e-12) -> float:
        return self.omega


class Exponential(_Continuous):
    """Density eta * exp(-eta x); mean 1/eta."""

    kind = "exponential"
    x_lo = 0.0
    x_hi = math.inf

    def __init__(self, eta: float):
        if not eta > 0.0 or not math.isfinite(eta):
            raise DomainError("eta must be positive and finite")
        self.eta = float(eta)
        self.mean = 1.0 / eta

    def cdf_strict(self, x):
        arr = _as_float_array(x)
        out = -np.expm1(-self.eta * np.maximum(arr, 0.0))
        return out if isinstance(x, np.ndarray) else float(out)

    def survival(self, x):
        arr = _as_float_array(x)
        out = np.exp(-self.eta * np.maximum(arr, 0.0))
        return out if isinstance(x, np.ndarray) else float(out)

    def pdf(self, x):
        arr = _as_float_array(x)
        with np.errstate(over="ignore"):
            out = np.where(arr >= 0.0, self.eta * np.exp(-self.eta * arr), 0.0)
        return out if isinstance(x, np.ndarray) else float(out)

    def sample(self, rng, size=None):
        out = rng.exponential(self.mean, size=size)
        return out if size is not None else float(out)

    def quantile_cap(self, eps: float = 1e-12) -> float:
        return -math.log(eps) / self.eta


class Rayleigh(_Continuous):
    """Density (x/theta) * exp(-x^2 / (2 theta)); mean sqrt(pi theta / 2)."""

    kind = "rayleigh"
    x_lo = 0.0
    x_hi = math.inf

    def __init__(self, theta: float):
        if not theta > 0.0 or not math.isfinite(theta):
            raise DomainError("theta must be positive and finite")
        self.theta = float(theta)
        self.mean = math.sqrt(math.pi * theta / 2.0)

    def cdf_strict(self, x):
        arr = _as_float_array(x)
        z = np.maximum(arr, 0.0)
        out = -np.expm1(-z * z / (2.0 * self.theta))
        return out if isinstance(x, np.ndarray) else float(out)

    def survival(self, x):
        arr = _as_float_array(x)
        z = np.maximum(arr, 0.0)
        out = np.exp(-z * z / (2.0 * self.theta))
        return out if isinstance(x, np.ndarray) else float(out)

    def pdf(self, x):
        arr = _as_float_array(x)
        with np.errstate(over="ignore"):
            out = np.where(
                arr >= 0.0,
                arr / self.theta * np.exp(-arr * arr / (2.0 * self.theta)),
                0.0,
            )
        return out if isinstance(x, np.ndarray) else float(out)

    def sample(self, rng, size=None):
        out = rng.rayleigh(math.sqrt(self.theta), size=size)
        return out if size is not None else float(out)

    def quantile_cap(self, eps: float = 1e-12) -> float:
        return math.sqrt(-2.0 * self.theta * math.log(eps))


# -- CLI grammar ------------------------------------------------------------

_SCALAR_FAMILIES = {
    "geometric": (("p",), Geometric),
    "poisson": (("lambda",), Poisson),
    "uniform": (("omega",), Uniform),
    "exponential": (("eta",), Exponential),
    "rayleigh": (("theta",), Rayleigh),
}


def parse_distribution(text: str) -> EnergyDistribution:
    """Parse ``name:key=value[,key=value]*`` into a distribution.

    Examples: ``bernoulli:xlo=0,xhi=5,p=0.5``, ``poisson:lambda=2.0``,
    ``discrete:points=0:0.2;1:0.5;4:0.3``, ``uniform:omega=2``.
    """
    name, _, params = text.strip().partition(":")
    name = name.lower()
    kv = {}
    if params:
        for item in params.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise DomainError(f"malformed parameter {item!r} in {text!r}")
            kv[key.strip().lower()] = value.strip()

    def take_float(key):
        if key not in kv:
            raise DomainError(f"distribution {name!r} requires parameter {key!r}")
        try:
            return float(kv.pop(key))
        except ValueError as exc:
            raise DomainError(f"bad numeric value for {key!r}: {exc}") from exc

    if name == "bernoulli":
        dist = Bernoulli(take_float("xlo"), take_float("xhi"), take_float("p"))
    elif name == "discrete":
        if "points" not in kv:
            raise DomainError("discrete law requires points=x:p;x:p;...")
        pts = []
        for chunk in kv.pop("points").split(";"):
            xs, sep, ps = chunk.partition(":")
            if not sep:
                raise DomainError(f"malformed atom {chunk!r}")
            try:
                pts.append((float(xs), float(ps)))
            except ValueError as exc:
                raise DomainError(f"bad atom {chunk!r}: {exc}") from exc
        dist = FiniteDiscrete(pts)
    elif name in _SCALAR_FAMILIES:
        keys, cls = _SCALAR_FAMILIES[name]
        dist = cls(*[take_float(k) for k in keys])
    else:
        raise DomainError(f"unknown distribution {name!r}")
    if kv:
        raise DomainError(f"unexpected parameters {sorted(kv)} for {name!r}")
    return dist
