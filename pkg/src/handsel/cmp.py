"""Conway-Maxwell-Poisson (CMP) count distribution.

The mass function is

    P(X = k) = lambda**k / (k!)**nu / Z(lambda, nu),   Z = sum_j lambda**j / (j!)**nu

``nu = 1`` gives the Poisson law, ``nu = 0`` (with ``lambda < 1``) the
geometric law, ``nu > 1`` under-dispersion. Everything is evaluated in log
space: for handball-sized scores (``lambda`` in the hundreds, ``nu`` around
1.6) the individual series terms overflow double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import gammaln

from .errors import (
    DegenerateSampleError,
    DivergenceError,
    InsufficientSamplesError,
    TruncationError,
)

NU_FLOOR = 1e-3


@dataclass(frozen=True)
class CmpParams:
    lam: float
    nu: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lambda must be positive and finite, got {self.lam}")
        if not (math.isfinite(self.nu) and self.nu >= 0):
            raise ValueError(f"nu must be non-negative and finite, got {self.nu}")

    @property
    def log_lam(self) -> float:
        return math.log(self.lam)

    @classmethod
    def from_log(cls, log_lam: float, nu: float) -> "CmpParams":
        return cls(math.exp(log_lam), nu)


@dataclass(frozen=True)
class FitConfig:
    tolerance: float = 1e-12
    max_terms: int = 10_000
    nu_cap: float = 50.0
    max_iterations: int = 500
    min_samples: int = 5

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_terms < 100:
            raise ValueError("max_terms must be >= 100")
        if not self.nu_cap > 0:
            raise ValueError("nu_cap must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.min_samples < 2:
            raise ValueError("min_samples must be >= 2")


DEFAULT_CONFIG = FitConfig()


@dataclass(frozen=True)
class FitResult:
    params: CmpParams
    log_likelihood: float
    n_samples: int
    converged: bool
    nu_capped: bool = False
    iterations: int = 0


# log(j!) for j = 0..len-1, grown on demand
_LOG_FACTORIALS = gammaln(np.arange(1, 10_001, dtype=float))

_OK, _DIVERGENT, _TRUNCATED = 0, 1, 2


def _log_factorials(n: int) -> np.ndarray:
    global _LOG_FACTORIALS
    if n > len(_LOG_FACTORIALS):
        _LOG_FACTORIALS = gammaln(np.arange(1, n + 1, dtype=float))
    return _LOG_FACTORIALS


@njit(cache=True)
def _lognorm_kernel(log_lam, nu, log_tol, max_terms, log_fact):
    """Return ``(log Z, number of terms, status)``."""
    if nu == 0.0:
        if log_lam >= 0.0:
            return np.nan, 0, _DIVERGENT
        mode = 0.0
    else:
        log_mode = log_lam / nu
        if log_mode > math.log(max_terms):
            return np.nan, max_terms, _TRUNCATED
        mode = math.exp(log_mode)
    acc = -np.inf
    for j in range(max_terms):
        t = j * log_lam - nu * log_fact[j]
        if acc == -np.inf:
            acc = t
        elif acc >= t:
            acc = acc + math.log1p(math.exp(t - acc))
        else:
            acc = t + math.log1p(math.exp(acc - t))
        if j > mode and t < log_tol + acc:
            return acc, j + 1, _OK
    return np.nan, max_terms, _TRUNCATED


def _raise_for(status: int, log_lam: float, nu: float, config: FitConfig) -> None:
    if status == _DIVERGENT:
        raise DivergenceError(
            f"CMP series diverges for nu=0 and lambda={math.exp(log_lam):g} >= 1"
        )
    if status == _TRUNCATED:
        raise TruncationError(
            f"normalizer for (lambda={math.exp(min(log_lam, 700.0)):.6g}, nu={nu:g}) "
            f"did not reach tolerance {config.tolerance:g} within {config.max_terms} terms"
        )


def _normalize(log_lam: float, nu: float, config: FitConfig) -> tuple[float, int]:
    value, n_terms, status = _lognorm_kernel(
        float(log_lam),
        float(nu),
        math.log(config.tolerance),
        config.max_terms,
        _log_factorials(config.max_terms),
    )
    _raise_for(status, log_lam, nu, config)
    return float(value), int(n_terms)


def _series_terms(log_lam: float, nu: float, config: FitConfig) -> np.ndarray:
    """Log terms ``j*log(lambda) - nu*log(j!)`` up to the truncation point."""
    _, n_terms = _normalize(log_lam, nu, config)
    j = np.arange(n_terms, dtype=float)
    return j * log_lam - nu * _log_factorials(config.max_terms)[:n_terms]


def _log_normalizer(log_lam: float, nu: float, config: FitConfig) -> float:
    return _normalize(log_lam, nu, config)[0]


def log_normalizer(params: CmpParams, config: FitConfig = DEFAULT_CONFIG) -> float:
    """Return ``log Z(lambda, nu)``.

    The series is summed from ``j = 0`` with log-sum-exp accumulation and
    stopped at the first term past the mode that falls below
    ``config.tolerance`` times the running sum.

    Raises:
        DivergenceError: ``nu == 0`` and ``lambda >= 1``.
        TruncationError: ``config.max_terms`` exhausted first.
    """
    return _log_normalizer(params.log_lam, params.nu, config)


def log_pmf(params: CmpParams, k, config: FitConfig = DEFAULT_CONFIG):
    """Log mass at ``k`` (scalar or array of non-negative integers)."""
    k_arr = np.asarray(k)
    if np.any(k_arr < 0):
        raise ValueError("k must be non-negative")
    log_z = log_normalizer(params, config)
    out = k_arr * params.log_lam - params.nu * gammaln(k_arr + 1.0) - log_z
    return float(out) if out.ndim == 0 else out


def pmf(params: CmpParams, k, config: FitConfig = DEFAULT_CONFIG):
    return np.exp(log_pmf(params, k, config))


def mean_variance(
    params: CmpParams, config: FitConfig = DEFAULT_CONFIG
) -> tuple[float, float]:
    terms = _series_terms(params.log_lam, params.nu, config)
    log_z = np.logaddexp.reduce(terms)
    probs = np.exp(terms - log_z)
    k = np.arange(len(terms), dtype=float)
    mean = float(np.dot(k, probs))
    var = float(np.dot((k - mean) ** 2, probs))
    return mean, var


def sample(
    params: CmpParams, size: int, rng: np.random.Generator, config: FitConfig = DEFAULT_CONFIG
) -> np.ndarray:
    """Draw ``size`` variates by inverse-CDF lookup on the truncated support."""
    terms = _series_terms(params.log_lam, params.nu, config)
    probs = np.exp(terms - np.logaddexp.reduce(terms))
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right").astype(np.int64)


def dispersion_index(samples) -> float:
    """Unbiased sample variance over sample mean; below 1 means under-dispersed."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise InsufficientSamplesError("dispersion index needs at least 2 samples")
    m = x.mean()
    if m <= 0:
        raise DegenerateSampleError("dispersion index undefined for zero mean")
    return float(x.var(ddof=1) / m)


def _validate_counts(samples, config: FitConfig) -> np.ndarray:
    x = np.asarray(samples)
    if x.ndim != 1:
        raise ValueError("samples must be one-dimensional")
    if x.size and (np.any(x < 0) or np.any(x != np.round(x))):
        raise ValueError("samples must be non-negative integers")
    if x.size < config.min_samples:
        raise InsufficientSamplesError(
            f"need at least {config.min_samples} samples, got {x.size}"
        )
    if np.all(x == x[0]):
        raise DegenerateSampleError(
            f"all {x.size} samples equal {x[0]}; dispersion is unbounded"
        )
    return x.astype(float)


def log_likelihood(
    params: CmpParams, samples, config: FitConfig = DEFAULT_CONFIG
) -> float:
    x = np.asarray(samples, dtype=float)
    return float(
        x.sum() * params.log_lam
        - params.nu * gammaln(x + 1.0).sum()
        - x.size * log_normalizer(params, config)
    )


@njit(cache=True)
def _loglik_moments(log_lam, nu, n, sum_x, sum_lfact, log_tol, max_terms, log_fact):
    """Log-likelihood with score and observed information in ``(log lambda, nu)``.

    The sufficient statistics are ``x`` and ``log x!``, so the score is the
    sample total minus ``n`` times their CMP means and the information is
    ``n`` times their covariance matrix.
    """
    grad = np.zeros(2)
    info = np.zeros((2, 2))
    log_z, n_terms, status = _lognorm_kernel(log_lam, nu, log_tol, max_terms, log_fact)
    if status != _OK:
        return -np.inf, grad, info
    p = np.empty(n_terms)
    mean_x = 0.0
    mean_l = 0.0
    for j in range(n_terms):
        p[j] = math.exp(j * log_lam - nu * log_fact[j] - log_z)
        mean_x += j * p[j]
        mean_l += log_fact[j] * p[j]
    var_x = 0.0
    var_l = 0.0
    cov = 0.0
    for j in range(n_terms):
        dx = j - mean_x
        dl = log_fact[j] - mean_l
        var_x += dx * dx * p[j]
        var_l += dl * dl * p[j]
        cov += dx * dl * p[j]
    ll = sum_x * log_lam - nu * sum_lfact - n * log_z
    grad[0] = sum_x - n * mean_x
    grad[1] = n * mean_l - sum_lfact
    info[0, 0] = n * var_x
    info[1, 1] = n * var_l
    info[0, 1] = -n * cov
    info[1, 0] = -n * cov
    return ll, grad, info


@njit(cache=True)
def _newton(log_lam, nu, nu_lo, nu_hi, tol, max_iter, n, sum_x, sum_lfact, log_tol, max_terms, log_fact):
    """Damped Newton ascent with ``nu`` kept in ``[nu_lo, nu_hi]``.

    The likelihood is concave in ``(log lambda, nu)``, so a halving line
    search on the full step is enough. A bound that the step pushes against
    freezes ``nu`` for that iteration.
    """
    ll, grad, info = _loglik_moments(log_lam, nu, n, sum_x, sum_lfact, log_tol, max_terms, log_fact)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        step_a = 0.0
        step_n = 0.0
        det = info[0, 0] * info[1, 1] - info[0, 1] * info[1, 0]
        frozen = (nu <= nu_lo and grad[1] < 0.0) or (nu >= nu_hi and grad[1] > 0.0)
        if not frozen and det > 1e-12 * info[0, 0] * info[1, 1] and det > 0.0:
            step_a = (info[1, 1] * grad[0] - info[0, 1] * grad[1]) / det
            step_n = (info[0, 0] * grad[1] - info[1, 0] * grad[0]) / det
        elif info[0, 0] > 0.0:
            step_a = grad[0] / info[0, 0]
        # Newton decrement: the predicted gain of the full step
        if 0.5 * (step_a * grad[0] + step_n * grad[1]) < tol:
            converged = True
            break
        t = 1.0
        accepted = False
        for _ in range(60):
            new_nu = min(max(nu + t * step_n, nu_lo), nu_hi)
            new_a = log_lam + t * step_a
            new_ll, new_grad, new_info = _loglik_moments(new_a, new_nu, n, sum_x, sum_lfact,
                                                         log_tol, max_terms, log_fact)
            if new_ll >= ll:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            converged = True
            break
        log_lam, nu, ll, grad, info = new_a, new_nu, new_ll, new_grad, new_info
    return log_lam, nu, ll, it, converged


def fit_mle(samples, config: FitConfig = DEFAULT_CONFIG) -> FitResult:
    """Maximum-likelihood ``(lambda, nu)`` for a sample of counts.

    Newton's method on the concave log-likelihood in ``(log lambda, nu)``,
    started from the moment match ``lambda = mean``, ``nu = 1``, stops when
    the predicted gain of a full step drops below 1e-12. ``nu`` is held
    inside ``[1e-3, config.nu_cap]``; a fit pinned at either bound is
    reported through ``nu_capped``.

    Raises:
        InsufficientSamplesError: fewer than ``config.min_samples`` counts.
        DegenerateSampleError: all counts equal.
    """
    x = _validate_counts(samples, config)
    n = float(x.size)
    sum_x = float(x.sum())
    sum_lfact = float(gammaln(x + 1.0).sum())
    log_lam, nu, ll, iterations, converged = _newton(
        math.log(sum_x / n),
        1.0,
        NU_FLOOR,
        config.nu_cap,
        1e-12,
        config.max_iterations,
        n,
        sum_x,
        sum_lfact,
        math.log(config.tolerance),
        config.max_terms,
        _log_factorials(config.max_terms),
    )
    params = CmpParams.from_log(float(log_lam), float(nu))
    capped = nu >= config.nu_cap or nu <= NU_FLOOR
    return FitResult(
        params=params,
        log_likelihood=float(ll),
        n_samples=int(n),
        converged=bool(converged) and math.isfinite(ll),
        nu_capped=capped,
        iterations=int(iterations),
    )
