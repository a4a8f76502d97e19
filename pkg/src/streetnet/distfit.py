"""Maximum-likelihood fitting of candidate distributions to street segment
lengths, ranked by AIC, plus the summary statistics and the length-vs-nodes
regression used for corpus-level analysis.

Families with closed-form MLEs (exponential, uniform, lognormal, power law)
are solved directly; gamma, Gumbel, Fréchet, and the exponentiated Weibull
are maximized numerically (Nelder-Mead, tolerance 1e-8) from three
moment-based starting points. Location parameters are fixed at zero
throughout: segment lengths are strictly positive with no offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from .errors import DegenerateInput, EmptyInput, InsufficientSamples

EULER_GAMMA = 0.5772156649015329

FAMILIES = (
    "lognormal",
    "gumbel",
    "gamma",
    "exponentiated_weibull",
    "frechet",
    "power_law",
    "uniform",
    "exponential",
)

PARAM_COUNT = {
    "exponential": 1,
    "power_law": 1,
    "uniform": 2,
    "lognormal": 2,
    "gumbel": 2,
    "gamma": 2,
    "frechet": 2,
    "exponentiated_weibull": 3,
}

MIN_SAMPLES = 30
_OPT_TOL = 1e-8
# starts whose optimized log-likelihoods disagree by more than this
# (relative) mark the fit as unconverged
_START_AGREEMENT_RTOL = 1e-3


@dataclass(frozen=True)
class FitResult:
    family: str
    params: dict[str, float]
    log_likelihood: float
    k: int
    aic: float
    converged: bool


@dataclass(frozen=True)
class StatsSummary:
    mu: float
    sigma: float
    min: float
    median: float
    max: float
    dispersion: Optional[float]


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float


def _check_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or len(x) < MIN_SAMPLES:
        raise InsufficientSamples(f"need at least {MIN_SAMPLES} samples, got {x.size}")
    if not np.all(x > 0):
        raise InsufficientSamples("all samples must be strictly positive")
    return x


# ---------------------------------------------------------------------------
# log-likelihoods (x > 0 throughout)
# ---------------------------------------------------------------------------


def _ll_exponential(x, rate):
    return len(x) * math.log(rate) - rate * float(x.sum())


def _ll_uniform(x, lo, hi):
    if hi <= lo:
        return math.inf  # degenerate support
    return -len(x) * math.log(hi - lo)


def _ll_lognormal(x, mu, sigma):
    lx = np.log(x)
    n = len(x)
    return float(
        -lx.sum() - n * math.log(sigma) - n * 0.5 * math.log(2.0 * math.pi) - ((lx - mu) ** 2).sum() / (2.0 * sigma**2)
    )


def _ll_gumbel(x, mu, beta):
    z = (x - mu) / beta
    return float(-len(x) * math.log(beta) - z.sum() - np.exp(-z).sum())


def _ll_gamma(x, shape, scale):
    n = len(x)
    return float((shape - 1.0) * np.log(x).sum() - x.sum() / scale - n * (gammaln(shape) + shape * math.log(scale)))


def _ll_frechet(x, alpha, scale):
    lz = np.log(x / scale)
    return float(len(x) * math.log(alpha / scale) + (-1.0 - alpha) * lz.sum() - np.exp(-alpha * lz).sum())


def _ll_power_law(x, alpha, xmin):
    return float(len(x) * math.log((alpha - 1.0) / xmin) - alpha * np.log(x / xmin).sum())


def _ll_expweibull(x, a, c, scale):
    z = (x / scale) ** c
    # log(1 - exp(-z)) via expm1 for numerical stability at small z
    tail = np.log(-np.expm1(-np.minimum(z, 700.0)))
    return float(
        len(x) * (math.log(a) + math.log(c) - math.log(scale))
        + (c - 1.0) * np.log(x / scale).sum()
        - z.sum()
        + (a - 1.0) * tail.sum()
    )


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


def _fit_numeric(x, family):
    """Multi-start Nelder-Mead ascent on the log-likelihood in log-parameter space."""
    m = float(x.mean())
    s = float(x.std()) or m * 0.1 or 1.0
    lx = np.log(x)
    lm, ls = float(lx.mean()), float(lx.std()) or 0.1

    if family == "gumbel":
        beta0 = s * math.sqrt(6.0) / math.pi
        starts = [(m - EULER_GAMMA * b, b) for b in (beta0, beta0 / 2.0, beta0 * 2.0)]
        names = ("mu", "beta")
        pack = lambda p: np.array([p[0], math.log(p[1])])
        unpack = lambda v: (v[0], math.exp(v[1]))
        ll = lambda p: _ll_gumbel(x, *p)
    elif family == "gamma":
        shape0 = max(m * m / (s * s), 1e-3)
        starts = [(a, m / a) for a in (shape0, shape0 / 2.0, shape0 * 2.0)]
        names = ("shape", "scale")
        pack = lambda p: np.log(np.array(p))
        unpack = lambda v: tuple(np.exp(v))
        ll = lambda p: _ll_gamma(x, *p)
    elif family == "frechet":
        # ln X of a Frechet(alpha, s) is Gumbel(ln s, 1/alpha)
        beta_l = max(ls * math.sqrt(6.0) / math.pi, 1e-6)
        alpha0 = 1.0 / beta_l
        scale0 = math.exp(lm - EULER_GAMMA * beta_l)
        starts = [(a, scale0) for a in (alpha0, alpha0 / 2.0, alpha0 * 2.0)]
        names = ("alpha", "scale")
        pack = lambda p: np.log(np.array(p))
        unpack = lambda v: tuple(np.exp(v))
        ll = lambda p: _ll_frechet(x, *p)
    elif family == "exponentiated_weibull":
        cv = s / m
        c0 = min(max(cv ** (-1.086), 0.05), 50.0)
        scale0 = m / math.gamma(1.0 + 1.0 / c0)
        starts = [(a, c0, scale0) for a in (1.0, 0.5, 2.0)]
        names = ("exponent", "shape", "scale")
        pack = lambda p: np.log(np.array(p))
        unpack = lambda v: tuple(np.exp(v))
        ll = lambda p: _ll_expweibull(x, *p)
    else:
        raise ValueError(f"no numeric fit for family {family!r}")

    def neg_ll(v):
        try:
            value = ll(unpack(v))
        except (OverflowError, FloatingPointError):
            return math.inf
        return -value if math.isfinite(value) else math.inf

    results = []
    for start in starts:
        res = minimize(
            neg_ll,
            pack(start),
            method="Nelder-Mead",
            options={"xatol": _OPT_TOL, "fatol": _OPT_TOL, "maxiter": 4000, "maxfev": 6000},
        )
        results.append(res)
    best = min(results, key=lambda r: r.fun)
    ll_best = -best.fun
    spread_ok = all(
        math.isfinite(-r.fun) and abs(-r.fun - ll_best) <= _START_AGREEMENT_RTOL * max(1.0, abs(ll_best))
        for r in results
    )
    converged = bool(best.success and math.isfinite(ll_best) and spread_ok)
    params = dict(zip(names, (float(p) for p in unpack(best.x))))
    return params, ll_best, converged


def fit_family(samples, family: str) -> FitResult:
    """Maximum-likelihood fit of one candidate family.

    Never raises for numerical trouble: a diverged or ambiguous fit comes
    back with ``converged=False`` and best-effort values.
    """
    if family not in PARAM_COUNT:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    x = _check_samples(samples)
    converged = True

    if family == "exponential":
        rate = 1.0 / float(x.mean())
        params = {"rate": rate}
        ll = _ll_exponential(x, rate)
    elif family == "uniform":
        lo, hi = float(x.min()), float(x.max())
        params = {"lower": lo, "upper": hi}
        if hi <= lo:
            converged = False
            ll = math.inf
        else:
            ll = _ll_uniform(x, lo, hi)
    elif family == "lognormal":
        lx = np.log(x)
        mu, sigma = float(lx.mean()), float(lx.std())
        params = {"mu": mu, "sigma": sigma}
        if sigma <= 0.0:
            converged = False
            ll = math.inf
        else:
            ll = _ll_lognormal(x, mu, sigma)
    elif family == "power_law":
        xmin = float(x.min())
        denom = float(np.log(x / xmin).sum())
        if denom <= 0.0:
            params = {"alpha": math.inf, "xmin": xmin}
            converged = False
            ll = math.inf
        else:
            alpha = 1.0 + len(x) / denom
            params = {"alpha": alpha, "xmin": xmin}
            ll = _ll_power_law(x, alpha, xmin)
    else:
        params, ll, converged = _fit_numeric(x, family)

    k = PARAM_COUNT[family]
    return FitResult(
        family=family,
        params=params,
        log_likelihood=ll,
        k=k,
        aic=2.0 * k - 2.0 * ll,
        converged=converged,
    )


def best_fit(samples, families: Sequence[str] = FAMILIES) -> list[FitResult]:
    """Fit every family and rank ascending by AIC.

    Ties break toward fewer parameters, then family name. Unconverged fits
    are kept but always rank after every converged fit.
    """
    results = [fit_family(samples, family) for family in families]
    return sorted(results, key=lambda r: (not r.converged, r.aic, r.k, r.family))


def summarize(values) -> StatsSummary:
    """Mean, population standard deviation, extremes, median, and dispersion
    index sigma^2/mu."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise EmptyInput("cannot summarize an empty list")
    mu = float(x.mean())
    sigma = float(x.std())  # population, ddof=0
    if mu != 0.0:
        dispersion = sigma * sigma / mu
    else:
        dispersion = 0.0 if sigma == 0.0 else None
    return StatsSummary(
        mu=mu,
        sigma=sigma,
        min=float(x.min()),
        median=float(np.median(x)),
        max=float(x.max()),
        dispersion=dispersion,
    )


def linear_regression(x, y) -> RegressionResult:
    """Ordinary least squares y on x with r^2 = 1 - SSres/SStot."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise DegenerateInput("x and y must be 1-d arrays of equal length")
    if len(xa) < 3:
        raise DegenerateInput(f"need at least 3 points, got {len(xa)}")
    if float(xa.min()) == float(xa.max()):
        raise DegenerateInput("x is constant")
    xm, ym = xa.mean(), ya.mean()
    sxx = float(((xa - xm) ** 2).sum())
    sxy = float(((xa - xm) * (ya - ym)).sum())
    slope = sxy / sxx
    intercept = float(ym - slope * xm)
    residuals = ya - (slope * xa + intercept)
    ss_res = float((residuals**2).sum())
    ss_tot = float(((ya - ym) ** 2).sum())
    if ss_tot == 0.0:
        r_squared = 1.0  # constant y is fit exactly by the zero-slope line
    else:
        r_squared = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return RegressionResult(slope=float(slope), intercept=intercept, r_squared=r_squared)
