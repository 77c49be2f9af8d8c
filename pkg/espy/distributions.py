"""Innovation distributions for the volatility models.

Both distributions are standardized to zero mean and unit variance. The skewed
Student's t is the two-piece inverse-scale skewing of a Student's t with
``nu`` degrees of freedom: the positive half is stretched by ``gamma`` and the
negative half by ``1/gamma``. The result is then shifted and rescaled so that
its first two moments are (0, 1). ``gamma = 1`` gives the standardized
symmetric t.
"""

import dataclasses
import functools
import logging
import typing

import numpy as np
from scipy import integrate, optimize, special, stats

from .errors import ModelError


logger = logging.getLogger("distributions")


NORMAL = "normal"
SKEWED_T = "skewed_t"

DISTRIBUTION_KINDS = (NORMAL, SKEWED_T)


class DistributionError(ModelError):
    pass


class InnovationDistribution:
    """A standardized innovation law. Subclasses implement the density and
    CDF; quantiles fall back to a bracketed root search on the CDF."""

    kind: str = None

    def logpdf(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    def pdf(self, z: np.ndarray) -> np.ndarray:
        return np.exp(self.logpdf(z))

    def cdf(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    def quantile(self, p: float) -> float:
        _check_probability(p)

        target = lambda z: float(self.cdf(np.asarray(z))) - p

        lower, upper = -1.0, 1.0
        while target(lower) > 0:
            lower *= 2.0
        while target(upper) < 0:
            upper *= 2.0

        return optimize.brentq(target, lower, upper, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)

    def tail_expectation(self, alpha: float) -> float:
        _check_tail_level(alpha)

        q = self.quantile(alpha)
        value, _ = integrate.quad(lambda z: z * float(self.pdf(np.asarray(z))), -np.inf, q, epsabs=1e-13, epsrel=1e-12, limit=200)

        return value / alpha

    def abs_moment(self) -> float:
        """E|Z|, the centring constant of the EGARCH news term."""
        integrand = lambda z: abs(z) * float(self.pdf(np.asarray(z)))
        lower, _ = integrate.quad(integrand, -np.inf, 0.0, epsabs=1e-13, limit=200)
        upper, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-13, limit=200)

        return lower + upper

    def log_likelihood(self, standardized_residuals: np.ndarray) -> float:
        return float(np.sum(self.logpdf(np.asarray(standardized_residuals, dtype=float))))

    def sample(self, n: int, seed: typing.Union[int, typing.Sequence[int]]) -> np.ndarray:
        raise NotImplementedError()

    def parameters(self) -> typing.Dict[str, float]:
        return {}


@dataclasses.dataclass(frozen=True)
class NormalDistribution(InnovationDistribution):

    kind: str = dataclasses.field(default=NORMAL, init=False)

    def logpdf(self, z):
        return stats.norm.logpdf(z)

    def pdf(self, z):
        return stats.norm.pdf(z)

    def cdf(self, z):
        return stats.norm.cdf(z)

    def quantile(self, p):
        _check_probability(p)
        return float(stats.norm.ppf(p))

    def tail_expectation(self, alpha):
        _check_tail_level(alpha)
        return float(-stats.norm.pdf(stats.norm.ppf(alpha)) / alpha)

    def abs_moment(self):
        return float(np.sqrt(2.0 / np.pi))

    def sample(self, n, seed):
        return np.random.default_rng(seed).standard_normal(n)


@dataclasses.dataclass(frozen=True)
class SkewedTDistribution(InnovationDistribution):

    nu: float = 8.0
    gamma: float = 1.0
    kind: str = dataclasses.field(default=SKEWED_T, init=False)

    def __post_init__(self) -> None:
        if not (np.isfinite(self.nu) and self.nu > 2):
            raise DistributionError(f"Skewed t needs nu > 2, got {self.nu}")

        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise DistributionError(f"Skewed t needs gamma > 0, got {self.gamma}")

    @functools.cached_property
    def _moments(self) -> typing.Tuple[float, float]:
        nu, g = self.nu, self.gamma

        # E|T| and E[T^2] of the unscaled Student's t
        m1 = 2.0 * np.sqrt(nu) * np.exp(special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)) / (np.sqrt(np.pi) * (nu - 1))
        m2 = nu / (nu - 2)

        mean = m1 * (g - 1.0 / g)
        second = m2 * (g ** 3 + 1.0 / g ** 3) / (g + 1.0 / g)

        return mean, float(np.sqrt(second - mean ** 2))

    def _to_raw(self, z):
        mean, scale = self._moments
        return mean + scale * np.asarray(z, dtype=float)

    def logpdf(self, z):
        g = self.gamma
        _, scale = self._moments
        x = self._to_raw(z)

        stretched = np.where(x >= 0, x / g, x * g)

        return np.log(scale) + np.log(2.0 / (g + 1.0 / g)) + stats.t.logpdf(stretched, self.nu)

    def cdf(self, z):
        g = self.gamma
        x = self._to_raw(z)

        below = 2.0 / (g ** 2 + 1.0) * stats.t.cdf(x * g, self.nu)
        above = 1.0 / (g ** 2 + 1.0) + 2.0 * g ** 2 / (g ** 2 + 1.0) * (stats.t.cdf(x / g, self.nu) - 0.5)

        return np.where(x < 0, below, above)

    def tail_expectation(self, alpha):
        _check_tail_level(alpha)

        q = self.quantile(alpha)
        x = float(self._to_raw(q))

        if x >= 0:
            return super().tail_expectation(alpha)

        g, nu = self.gamma, self.nu
        mean, scale = self._moments

        # Closed form of the partial first moment on the negative half, using
        # the Student's t identity  int_{-inf}^y v f(v) dv = -(nu + y^2) f(y) / (nu - 1).
        y = g * x
        partial = 2.0 / (g + 1.0 / g) / g ** 2 * (-(nu + y ** 2) * stats.t.pdf(y, nu) / (nu - 1))

        return float((partial - mean * alpha) / scale / alpha)

    def sample(self, n, seed):
        rng = np.random.default_rng(seed)
        g = self.gamma

        magnitude = np.abs(rng.standard_t(self.nu, size=n))
        positive = rng.random(n) < g ** 2 / (1.0 + g ** 2)

        return (np.where(positive, magnitude * g, -magnitude / g) - self._moments[0]) / self._moments[1]

    def parameters(self):
        return {"nu": float(self.nu), "gamma": float(self.gamma)}


def make_distribution(kind: str, nu: float = 8.0, gamma: float = 1.0) -> InnovationDistribution:
    if kind == NORMAL:
        return NormalDistribution()

    if kind == SKEWED_T:
        return SkewedTDistribution(nu=nu, gamma=gamma)

    raise DistributionError(f"Unknown distribution kind '{kind}'")


def quantile(dist: InnovationDistribution, p: float) -> float:
    return dist.quantile(p)


def tail_expectation(dist: InnovationDistribution, alpha: float) -> float:
    return dist.tail_expectation(alpha)


def log_likelihood(dist: InnovationDistribution, standardized_residuals: typing.Sequence[float]) -> float:
    return dist.log_likelihood(standardized_residuals)


def sample(dist: InnovationDistribution, n: int, seed: typing.Union[int, typing.Sequence[int]]) -> np.ndarray:
    if n < 1:
        raise DistributionError(f"Sample size must be positive, got {n}")

    return dist.sample(n, seed)


def _check_probability(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise DistributionError(f"Probability must lie in (0, 1), got {p}")


def _check_tail_level(alpha: float) -> None:
    if not 0.0 < alpha < 0.5:
        raise DistributionError(f"Tail level must lie in (0, 0.5), got {alpha}")
