import dataclasses
import functools
import logging
import math
import typing

import numpy as np
import pandas as pd
from scipy import optimize, signal

from . import distributions as dists
from .data import ReturnSeries
from .errors import ModelError


logger = logging.getLogger("volatility")


ARCH = "arch"
GARCH = "garch"
EGARCH = "egarch"
RISKMETRICS = "riskmetrics"

FAMILIES = (ARCH, GARCH, EGARCH, RISKMETRICS)

RISKMETRICS_LAMBDA = 0.94

MIN_FILTER_LENGTH = 30
MIN_CALIBRATION_LENGTH = 250

# ln(sigma^2) is confined to this band on EGARCH paths
EGARCH_LOGVAR_BOUND = 40.0

_MIN_VARIANCE = 1e-12
_PENALTY = 1e10


class VolatilityError(ModelError):
    pass


class CalibrationError(VolatilityError):

    def __init__(self, message, family, best_params=None, best_loglik=None, n_restarts=0) -> None:
        super().__init__(message)
        self.family = family
        self.best_params = best_params
        self.best_loglik = best_loglik
        self.n_restarts = n_restarts


@dataclasses.dataclass(frozen=True)
class ModelParams:
    family: str
    omega: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    gamma_lev: float = 0.0
    lam: float = RISKMETRICS_LAMBDA
    mu: float = 0.0
    dist: dists.InnovationDistribution = dataclasses.field(default_factory=dists.NormalDistribution)

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise VolatilityError(f"Unknown volatility family '{self.family}'")

        if self.family == ARCH and not (self.omega > 0 and self.alpha >= 0):
            raise VolatilityError(f"ARCH(1) needs omega > 0 and alpha >= 0, got {self}")

        if self.family == GARCH and not (self.omega > 0 and self.alpha > 0 and self.beta > 0 and self.alpha + self.beta < 1):
            raise VolatilityError(f"GARCH(1,1) needs positive omega, alpha, beta with alpha + beta < 1, got {self}")

        if self.family == EGARCH and not abs(self.beta) < 1:
            raise VolatilityError(f"EGARCH(1,1) needs |beta| < 1, got {self}")

        if self.family == RISKMETRICS and self.lam != RISKMETRICS_LAMBDA:
            raise VolatilityError(f"RiskMetrics smoothing is fixed at {RISKMETRICS_LAMBDA}, got {self.lam}")

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        values = {
            "family": self.family,
            "omega": self.omega,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma_lev": self.gamma_lev,
            "lam": self.lam,
            "mu": self.mu,
            "dist": self.dist.kind
        }
        values.update(self.dist.parameters())
        return values

    def __str__(self) -> str:
        shape = ", ".join(f"{k}={v:.4g}" for k, v in self.dist.parameters().items())
        shape = f", {shape}" if shape else ""

        return (f"{self.family}[{self.dist.kind}](omega={self.omega:.4g}, alpha={self.alpha:.4g}, "
                f"beta={self.beta:.4g}, gamma={self.gamma_lev:.4g}{shape})")


@dataclasses.dataclass(frozen=True)
class VariancePath:
    dates: pd.Index
    sigma2: np.ndarray
    residuals: np.ndarray
    next_sigma2: float
    clamped: bool = False

    def __len__(self) -> int:
        return len(self.sigma2)


@dataclasses.dataclass(frozen=True)
class CalibratedModel:
    params: ModelParams
    path: VariancePath
    loglik: float
    converged: bool = True
    n_evaluations: int = 0
    traces: typing.Tuple[typing.Tuple[float, ...], ...] = ()
    diagnostics: typing.Tuple[str, ...] = ()

    @property
    def next_sigma2(self) -> float:
        return self.path.next_sigma2


def arch_next_var(params: ModelParams, eps_t: float) -> float:
    params.validate()
    return params.omega + params.alpha * eps_t ** 2


def garch_next_var(params: ModelParams, sigma2_t: float, eps_std_t: float) -> float:
    params.validate()

    if not sigma2_t > 0:
        raise VolatilityError(f"Conditional variance must be positive, got {sigma2_t}")

    return params.omega + params.alpha * sigma2_t * eps_std_t ** 2 + params.beta * sigma2_t


def egarch_next_logvar(params: ModelParams, sigma2_t: float, eps_t: float) -> float:
    params.validate()

    if not sigma2_t > 0:
        raise VolatilityError(f"Conditional variance must be positive, got {sigma2_t}")

    z = eps_t / math.sqrt(sigma2_t)

    return (params.omega + params.beta * math.log(sigma2_t)
            + params.alpha * (abs(z) - _abs_moment(params.dist))
            + params.gamma_lev * z)


def riskmetrics_next_var(sigma2_t: float, r_t: float) -> float:
    if not sigma2_t > 0:
        raise VolatilityError(f"Conditional variance must be positive, got {sigma2_t}")

    return RISKMETRICS_LAMBDA * sigma2_t + (1.0 - RISKMETRICS_LAMBDA) * r_t ** 2


class VarianceRecursion:
    """Filters a residual series for one model family and maps its
    parameters to and from the unconstrained space the optimizer searches."""

    family: str = None

    def filter(self, params: ModelParams, eps: np.ndarray, sigma2_0: float) -> typing.Tuple[np.ndarray, float, bool]:
        raise NotImplementedError()

    def start(self, variance: float) -> ModelParams:
        raise NotImplementedError()

    def to_free(self, params: ModelParams, variance: float) -> np.ndarray:
        raise NotImplementedError()

    def from_free(self, theta: np.ndarray, variance: float, innovation: dists.InnovationDistribution) -> ModelParams:
        raise NotImplementedError()


class ArchRecursion(VarianceRecursion):

    family = ARCH

    def filter(self, params, eps, sigma2_0):
        sigma2 = np.empty(len(eps))
        sigma2[0] = sigma2_0
        sigma2[1:] = params.omega + params.alpha * eps[:-1] ** 2

        return sigma2, params.omega + params.alpha * eps[-1] ** 2, False

    def start(self, variance):
        return ModelParams(ARCH, omega=0.8 * variance, alpha=0.2)

    def to_free(self, params, variance):
        alpha = min(max(params.alpha, 1e-8), 1 - 1e-8)
        return np.array([math.log(params.omega / variance), math.log(alpha / (1 - alpha))])

    def from_free(self, theta, variance, innovation):
        a = np.clip(theta[1], -30, 30)
        return ModelParams(ARCH, omega=variance * math.exp(np.clip(theta[0], -50, 50)), alpha=1.0 / (1.0 + math.exp(-a)), dist=innovation)


class GarchRecursion(VarianceRecursion):

    family = GARCH

    def filter(self, params, eps, sigma2_0):
        # sigma2[t+1] = omega + alpha * eps[t]^2 + beta * sigma2[t] is a
        # first-order linear filter of the squared residuals.
        drive = params.omega + params.alpha * eps ** 2
        filtered, _ = signal.lfilter([1.0], [1.0, -params.beta], drive, zi=[params.beta * sigma2_0])

        return np.concatenate([[sigma2_0], filtered[:-1]]), float(filtered[-1]), False

    def start(self, variance):
        return ModelParams(GARCH, omega=0.05 * variance, alpha=0.05, beta=0.90)

    def to_free(self, params, variance):
        rest = max(1.0 - params.alpha - params.beta, 1e-10)
        return np.array([math.log(params.omega / variance),
                         math.log(params.alpha / rest),
                         math.log(params.beta / rest)])

    def from_free(self, theta, variance, innovation):
        a, b = np.exp(np.clip(theta[1:3], -30, 30))
        total = 1.0 + a + b

        return ModelParams(GARCH,
                           omega=variance * math.exp(np.clip(theta[0], -50, 50)),
                           alpha=a / total,
                           beta=b / total,
                           dist=innovation)


class EgarchRecursion(VarianceRecursion):

    family = EGARCH

    def filter(self, params, eps, sigma2_0):
        n = len(eps)
        logvar = np.empty(n + 1)
        logvar[0] = math.log(sigma2_0)

        centre = _abs_moment(params.dist)
        omega, alpha, beta, gamma = params.omega, params.alpha, params.beta, params.gamma_lev
        clamped = False

        for t in range(n):
            z = eps[t] * math.exp(-0.5 * logvar[t])
            value = omega + beta * logvar[t] + alpha * (abs(z) - centre) + gamma * z

            if not -EGARCH_LOGVAR_BOUND <= value <= EGARCH_LOGVAR_BOUND:
                clamped = True
                value = min(max(value, -EGARCH_LOGVAR_BOUND), EGARCH_LOGVAR_BOUND) if math.isfinite(value) else EGARCH_LOGVAR_BOUND

            logvar[t + 1] = value

        sigma2 = np.exp(logvar)

        return sigma2[:-1], float(sigma2[-1]), clamped

    def start(self, variance):
        beta = 0.95
        return ModelParams(EGARCH, omega=(1 - beta) * math.log(variance), alpha=0.1, beta=beta, gamma_lev=-0.05)

    def to_free(self, params, variance):
        beta = min(max(params.beta, -1 + 1e-8), 1 - 1e-8)
        return np.array([params.omega - (1 - beta) * math.log(variance), params.alpha, params.gamma_lev, math.atanh(beta)])

    def from_free(self, theta, variance, innovation):
        beta = math.tanh(theta[3])
        return ModelParams(EGARCH,
                           omega=theta[0] + (1 - beta) * math.log(variance),
                           alpha=float(theta[1]),
                           beta=beta,
                           gamma_lev=float(theta[2]),
                           dist=innovation)


class RiskMetricsRecursion(VarianceRecursion):

    family = RISKMETRICS

    def filter(self, params, eps, sigma2_0):
        drive = (1.0 - params.lam) * eps ** 2
        filtered, _ = signal.lfilter([1.0], [1.0, -params.lam], drive, zi=[params.lam * sigma2_0])

        return np.concatenate([[sigma2_0], filtered[:-1]]), float(filtered[-1]), False

    def start(self, variance):
        return ModelParams(RISKMETRICS)

    def to_free(self, params, variance):
        return np.empty(0)

    def from_free(self, theta, variance, innovation):
        return ModelParams(RISKMETRICS, dist=innovation)


RECURSIONS: typing.Dict[str, VarianceRecursion] = {
    ARCH: ArchRecursion(),
    GARCH: GarchRecursion(),
    EGARCH: EgarchRecursion(),
    RISKMETRICS: RiskMetricsRecursion()
}


def initial_variance(values: np.ndarray) -> float:
    return max(float(np.var(values, ddof=1)), _MIN_VARIANCE)


def filter_variances(params: ModelParams, returns: ReturnSeries) -> VariancePath:
    params.validate()

    if len(returns) < MIN_FILTER_LENGTH:
        raise VolatilityError(f"Need at least {MIN_FILTER_LENGTH} returns to filter, got {len(returns)}")

    eps = returns.values - params.mu
    sigma2, next_sigma2, clamped = RECURSIONS[params.family].filter(params, eps, initial_variance(returns.values))

    if clamped:
        logger.warning(f"Log-variance of {params} left [-{EGARCH_LOGVAR_BOUND}, {EGARCH_LOGVAR_BOUND}] and was clamped")

    return VariancePath(returns.dates, sigma2, eps, next_sigma2, clamped)


def model_loglik(params: ModelParams, path: VariancePath) -> float:
    z = path.residuals / np.sqrt(path.sigma2)
    return params.dist.log_likelihood(z) - 0.5 * float(np.sum(np.log(path.sigma2)))


def calibrate_mle(family: str,
                  returns: ReturnSeries,
                  dist_kind: str,
                  start: typing.Optional[ModelParams] = None,
                  restarts: int = 3,
                  max_iter: int = 4000,
                  seed: int = 0) -> CalibratedModel:
    """Maximum-likelihood fit of one volatility family.

    Nelder-Mead runs in an unconstrained space (logs for positive
    parameters, a softmax for the GARCH persistence simplex, tanh for the
    EGARCH persistence) scaled by the window's sample variance, so that
    rescaling the returns leaves the search itself unchanged. The first run
    starts from the better of the family default and ``start``; each
    restart perturbs the best point found so far.
    """
    if family not in FAMILIES:
        raise CalibrationError(f"Unknown volatility family '{family}'", family)

    if len(returns) < MIN_CALIBRATION_LENGTH:
        raise CalibrationError(f"Need at least {MIN_CALIBRATION_LENGTH} returns to calibrate, got {len(returns)}", family)

    recursion = RECURSIONS[family]
    values = returns.values
    variance = initial_variance(values)
    skewed = dist_kind == dists.SKEWED_T

    if dist_kind not in dists.DISTRIBUTION_KINDS:
        raise CalibrationError(f"Unknown distribution kind '{dist_kind}'", family)

    def unpack(theta):
        if skewed:
            nu = 2.05 + math.exp(min(max(theta[-2], -10.0), 6.2))
            gamma = math.exp(min(max(theta[-1], -5.0), 5.0))
            innovation = dists.SkewedTDistribution(nu=nu, gamma=gamma)
            theta = theta[:-2]
        else:
            innovation = dists.NormalDistribution()

        return recursion.from_free(theta, variance, innovation)

    def pack(params):
        theta = recursion.to_free(params, variance)

        if skewed:
            shape = params.dist.parameters() or {"nu": 8.0, "gamma": 1.0}
            theta = np.concatenate([theta, [math.log(max(shape["nu"] - 2.05, 1e-4)), math.log(shape["gamma"])]])

        return theta

    evaluations = 0

    def negative_loglik(theta):
        nonlocal evaluations
        evaluations += 1

        try:
            params = unpack(theta)
            eps = values - params.mu
            sigma2, _, _ = recursion.filter(params, eps, variance)
        except (dists.DistributionError, ValueError, OverflowError, FloatingPointError):
            return _PENALTY

        if not np.all(sigma2 > 0):
            return _PENALTY

        with np.errstate(all="ignore"):
            value = -(params.dist.log_likelihood(eps / np.sqrt(sigma2)) - 0.5 * float(np.sum(np.log(sigma2))))

        return value if math.isfinite(value) else _PENALTY

    default_start = recursion.start(variance)
    if skewed:
        default_start = dataclasses.replace(default_start, dist=dists.SkewedTDistribution())

    candidates = [pack(default_start)]
    if start is not None and start.family == family and start.dist.kind == dist_kind:
        candidates.append(pack(start))

    theta0 = min(candidates, key=negative_loglik)
    best_theta, best_value = theta0, negative_loglik(theta0)

    if len(theta0) == 0:
        # RiskMetrics with normal innovations has nothing to estimate
        return _finish(unpack(best_theta), returns, True, evaluations, (), ())

    rng = np.random.default_rng(seed)
    any_converged = False
    traces = []
    diagnostics = []

    for attempt in range(restarts + 1):
        initial = best_theta if attempt == 0 else best_theta + rng.normal(0.0, 0.5, size=len(best_theta))
        trace = []

        def record(intermediate_result):
            trace.append(-float(intermediate_result.fun))

        result = optimize.minimize(negative_loglik, initial, method="Nelder-Mead", callback=record,
                                   options={"maxiter": max_iter, "maxfev": 2 * max_iter,
                                            "xatol": 1e-6, "fatol": 1e-7, "adaptive": True})

        traces.append(tuple(trace))
        any_converged = any_converged or bool(result.success)

        logger.debug(f"{family}/{dist_kind} run {attempt}: loglik={-result.fun:.6f}, "
                     f"converged={result.success}, iterations={result.nit}")

        if not result.success:
            diagnostics.append(f"run {attempt}: {result.message}")

        if result.fun < best_value:
            best_theta, best_value = np.asarray(result.x), float(result.fun)

    best_params = unpack(best_theta)

    if not any_converged or best_value >= _PENALTY:
        raise CalibrationError(f"{family}/{dist_kind} calibration did not converge in {restarts + 1} runs",
                               family, best_params=best_params, best_loglik=-best_value, n_restarts=restarts)

    return _finish(best_params, returns, True, evaluations, tuple(traces), tuple(diagnostics))


def _finish(params, returns, converged, evaluations, traces, diagnostics) -> CalibratedModel:
    path = filter_variances(params, returns)
    loglik = model_loglik(params, path)

    if path.clamped:
        diagnostics = diagnostics + ("egarch log-variance clamped",)

    return CalibratedModel(params, path, loglik, converged, evaluations, traces, diagnostics)


def simulate(params: ModelParams, n: int, seed: int, burn: int = 500,
             sigma2_0: typing.Optional[float] = None) -> typing.Tuple[np.ndarray, np.ndarray]:
    """Simulates ``n`` returns and their true conditional variances."""
    params.validate()

    z = params.dist.sample(n + burn, seed)

    if sigma2_0 is None:
        if params.family in (ARCH, GARCH):
            sigma2_0 = params.omega / (1.0 - params.alpha - params.beta)
        elif params.family == EGARCH:
            sigma2_0 = math.exp(params.omega / (1.0 - params.beta))
        else:
            sigma2_0 = 1e-4

    sigma2 = np.empty(n + burn)
    returns = np.empty(n + burn)
    current = sigma2_0

    for t in range(n + burn):
        sigma2[t] = current
        returns[t] = params.mu + math.sqrt(current) * z[t]
        eps = returns[t] - params.mu

        if params.family == ARCH:
            current = arch_next_var(params, eps)
        elif params.family == GARCH:
            current = garch_next_var(params, current, z[t])
        elif params.family == EGARCH:
            current = math.exp(min(max(egarch_next_logvar(params, current, eps), -EGARCH_LOGVAR_BOUND), EGARCH_LOGVAR_BOUND))
        else:
            current = riskmetrics_next_var(current, eps)

    return returns[burn:], sigma2[burn:]


@functools.lru_cache(maxsize=4096)
def _abs_moment(innovation: dists.InnovationDistribution) -> float:
    return innovation.abs_moment()
