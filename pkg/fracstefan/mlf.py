"""
Mittag-Leffler type functions and the exact self-similar solution of the
fractional Stefan problem with a power-law boundary flux.

Two three-parameter families are evaluated by their power series:

- ml3(): the Prabhakar function
  E^g_{a,b}(z) = sum_k (g)_k z^k / (k! Gamma(a k + b));
- kilbas_saigo(): E_{a,m,l}(z) = sum_k c_k z^k with c_0 = 1 and
  c_{k+1}/c_k = Gamma(a(k m + l) + 1) / Gamma(a(k m + l + 1) + 1).

The similarity profile belongs to the second family:

    sigma(w) = w^(alpha-1) E_{alpha, 1+1/alpha, 1}(-w^(1+alpha)/(1+alpha))

so that with h(t) = h0 t^(-alpha/(1+alpha)) the pair

    s(t) = eta t^(1/(1+alpha)),
    u(x, t) = (h0/Gamma(alpha)) int_{x/t^(1/(1+alpha))}^eta sigma(w) dw

solves the problem, eta being the root of H(x) = x with

    H(x) = h0 [(1+alpha) - (1/Gamma(alpha)) int_0^x w sigma(w) dw].

For alpha = 1, sigma(w) = exp(-w^2/4): the classical Neumann similarity
solution.
"""

from dataclasses import dataclass
from functools import cached_property
import logging
import math

import mpmath
import numpy
from scipy.optimize import brentq
from scipy.special import gamma, poch

from .errors import BracketError, SeriesNonConvergence
from .quadrature import gauss_kronrod, power_weighted_integral

logger = logging.getLogger(__name__)

__all__ = [
    "MLParams",
    "ml3",
    "kilbas_saigo",
    "similarity_profile",
    "profile_integral",
    "h_alpha",
    "eta_solve",
    "AnalyticBenchmark",
    "analytic_pair",
    "analytic_mass",
    "analytic_residual",
]

# Largest accepted |z| for series evaluation:
SERIES_RADIUS = 50.0

# Relative bound on the truncated tail:
SERIES_RTOL = 1e-15

MAX_TERMS = 10_000

# Ratio sum|terms| / |sum| above which the double precision sum is
# recomputed with mpmath:
CANCELLATION_LIMIT = 10.0


@dataclass(frozen=True)
class MLParams:
    """
    Parameters (a, b, g) of the Prabhakar function E^g_{a,b}.
    """

    a: float
    b: float
    g: float = 1.0

    def __post_init__(self):
        for name in ("a", "b", "g"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(
                    "Mittag-Leffler parameter %s must be positive and finite,"
                    " got %r" % (name, value)
                )


###############################################################################
# Power series with a tail bound


def _sum_series(c0, ratio, z):
    """
    Return (sum, sum of absolute values) of sum_k c_k z^k, elementwise.

    ratio(k) -- c_{k+1}/c_k, eventually nonincreasing in k.

    Summation stops when, for every element, the tail bound
    |t_k| rho/(1-rho) with rho = |ratio(k+1) z| falls below SERIES_RTOL
    relative to the partial sum.
    """
    term = numpy.full(z.shape, c0)
    total = term.copy()
    abs_total = numpy.abs(term)
    r_next = ratio(0)

    for k in range(MAX_TERMS):
        term = term * r_next * z
        total += term
        abs_total += numpy.abs(term)
        r_next = ratio(k + 1)
        rho = numpy.abs(r_next * z)
        with numpy.errstate(divide="ignore", invalid="ignore"):
            tail = numpy.where(
                rho < 1, numpy.abs(term) * rho / (1 - rho), numpy.inf
            )
        if numpy.all(tail <= SERIES_RTOL * numpy.abs(total)):
            return total, abs_total

    raise SeriesNonConvergence(
        "series did not converge in %d terms (max |z| = %g)"
        % (MAX_TERMS, numpy.max(numpy.abs(z)))
    )


def _sum_series_mp(c0, ratio, z, cancellation):
    """
    Sum the series for a single z with mpmath, with enough extra digits
    to absorb the given cancellation ratio.
    """
    dps = 20 + int(math.ceil(math.log10(cancellation)))
    with mpmath.workdps(dps):
        z = mpmath.mpf(z)
        term = mpmath.mpf(c0(mpmath))
        total = term
        eps = mpmath.mpf(10) ** (-dps)
        for k in range(MAX_TERMS):
            term *= ratio(k) * z
            total += term
            if abs(term) <= eps * abs(total) and abs(ratio(k + 1) * z) < 0.5:
                return float(total)
    raise SeriesNonConvergence("extended precision series did not converge")


def _evaluate(c0, ratio, ratio_mp, z):
    z = numpy.asarray(z, dtype=float)
    if not numpy.all(numpy.isfinite(z)):
        raise ValueError("series argument must be finite")
    if numpy.any(numpy.abs(z) > SERIES_RADIUS):
        raise ValueError(
            "series argument outside the guarded radius |z| <= %g" % SERIES_RADIUS
        )
    flat = z.reshape(-1)
    total, abs_total = _sum_series(c0(numpy), ratio, flat)

    with numpy.errstate(divide="ignore", invalid="ignore"):
        cancellation = abs_total / numpy.abs(total)
    for index in numpy.flatnonzero(~(cancellation <= CANCELLATION_LIMIT)):
        total[index] = _sum_series_mp(
            c0, ratio_mp, flat[index], min(cancellation[index], 1e300)
        )

    total = total.reshape(z.shape)
    return float(total) if total.ndim == 0 else total


def ml3(p, z):
    """
    Prabhakar (three-parameter Mittag-Leffler) function E^g_{a,b}(z).

    p -- MLParams.
    z -- real number or array, |z| <= SERIES_RADIUS.

    With g = 1 this is the two-parameter function E_{a,b}; E_{1,1} is
    exp.
    """
    a, b, g = p.a, p.b, p.g

    def ratio(k):
        return (g + k) / (k + 1) / poch(a * k + b, a)

    def ratio_mp(k):
        return (g + k) / mpmath.mpf(k + 1) / mpmath.rf(a * k + b, a)

    def c0(lib):
        return 1 / lib.gamma(b) if lib is mpmath else 1 / gamma(b)

    return _evaluate(c0, ratio, ratio_mp, z)


def kilbas_saigo(a, m, l, z):
    """
    Kilbas-Saigo function E_{a,m,l}(z) (c_0 = 1).

    a, m -- positive parameters.
    l -- parameter with a l >= 0.
    """
    if not (a > 0 and m > 0 and a * l >= 0):
        raise ValueError(
            "Kilbas-Saigo parameters must satisfy a > 0, m > 0, a*l >= 0"
        )

    def ratio(k):
        return 1 / poch(a * (k * m + l) + 1, a)

    def ratio_mp(k):
        return 1 / mpmath.rf(a * (k * m + l) + 1, a)

    def c0(lib):
        return 1.0

    return _evaluate(c0, ratio, ratio_mp, z)


###############################################################################
# Similarity solution


def _check_order(alpha):
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0,1], got %r" % (alpha,))


def _profile_factor(alpha, w):
    """
    Smooth factor of sigma: sigma(w) = w^(alpha-1) * _profile_factor(w).
    """
    w = numpy.asarray(w, dtype=float)
    return kilbas_saigo(alpha, 1 + 1 / alpha, 1.0, -(w ** (1 + alpha)) / (1 + alpha))


def similarity_profile(alpha, w):
    """
    sigma(w) = w^(alpha-1) E_{alpha,1+1/alpha,1}(-w^(1+alpha)/(1+alpha)).

    sigma(0) is infinite for alpha < 1; w sigma(w) tends to 0.
    """
    _check_order(alpha)
    w = numpy.asarray(w, dtype=float)
    if numpy.any(w < 0):
        raise ValueError("the similarity variable must be >= 0")
    with numpy.errstate(divide="ignore"):
        result = w ** (alpha - 1) * _profile_factor(alpha, w)
    return float(result) if numpy.ndim(result) == 0 else result


def profile_integral(alpha, x, quad_tol=1e-13, backend="gk"):
    """
    int_0^x sigma(w) dw.
    """
    return power_weighted_integral(
        lambda w: _profile_factor(alpha, w), x, alpha - 1, quad_tol, backend
    )


def _moment_integral(alpha, x, quad_tol, backend):
    # int_0^x w sigma(w) dw
    return power_weighted_integral(
        lambda w: _profile_factor(alpha, w), x, alpha, quad_tol, backend
    )


def h_alpha(alpha, h0, x, quad_tol=1e-13, backend="gk"):
    """
    H(x) = h0 [(1+alpha) - (1/Gamma(alpha)) int_0^x w sigma(w) dw].

    quad_tol -- absolute tolerance on the integral.
    backend -- quadrature backend, "gk" or "scipy".
    """
    _check_order(alpha)
    if x < 0:
        raise ValueError("x must be >= 0, got %r" % (x,))
    if x == 0:
        return h0 * (1 + alpha)
    return h0 * ((1 + alpha) - _moment_integral(alpha, x, quad_tol, backend) / gamma(alpha))


# Number of times the initial bracket may be doubled:
MAX_WIDENINGS = 60


def eta_solve(alpha, h0, tol=1e-10, backend="gk"):
    """
    Return eta with |H(eta) - eta| <= tol: root of H(x) - x by brentq.

    The bracket starts at [0, h0 (1+alpha)] and its upper end is doubled
    (at most MAX_WIDENINGS times) until H - x changes sign.

    BracketError is raised if no sign change is found.
    """
    _check_order(alpha)
    if not h0 > 0:
        raise ValueError("h0 must be positive, got %r" % (h0,))
    if not tol > 0:
        raise ValueError("tol must be positive, got %r" % (tol,))
    quad_tol = max(tol * 1e-2, 1e-15)

    def F(x):
        return h_alpha(alpha, h0, x, quad_tol, backend) - x

    lo, hi = 0.0, h0 * (1 + alpha)
    f_hi = F(hi)
    widenings = 0
    while f_hi > 0:
        if widenings == MAX_WIDENINGS:
            raise BracketError(
                "H(x) - x does not change sign on [0, %g]" % hi
            )
        lo, hi = hi, 2 * hi
        f_hi = F(hi)
        widenings += 1
    if widenings:
        logger.info("eta bracket widened %d times", widenings)

    try:
        eta = brentq(F, lo, hi, xtol=1e-3 * tol, rtol=4 * numpy.finfo(float).eps, maxiter=200)
    except RuntimeError as exc:
        raise BracketError("no root of H(x) - x found in [%g, %g]: %s" % (lo, hi, exc)) from exc

    logger.debug("eta(alpha=%g, h0=%g) = %.17g, residual %.3g", alpha, h0, eta, F(eta))
    return eta


@dataclass(frozen=True)
class AnalyticBenchmark:
    """
    Exact self-similar solution for h(t) = h0 t^(-alpha/(1+alpha)), b = 0
    and zero initial data.

    Use from_parameters() to solve for eta.
    """

    alpha: float
    h0: float
    eta: float
    quad_tol: float = 1e-13

    def __post_init__(self):
        _check_order(self.alpha)
        if not 0 < self.eta <= self.h0 * (1 + self.alpha):
            raise ValueError("eta must lie in (0, h0 (1+alpha)]")

    @classmethod
    def from_parameters(cls, alpha, h0, tol=1e-10, backend="gk"):
        eta = eta_solve(alpha, h0, tol, backend)
        return cls(alpha, h0, eta, quad_tol=max(tol * 1e-3, 1e-15))

    @property
    def exponent(self):
        """
        Exponent 1/(1+alpha) of the front.
        """
        return 1 / (1 + self.alpha)

    @property
    def flux_power(self):
        """
        Exponent -alpha/(1+alpha) of the boundary flux.
        """
        return -self.alpha / (1 + self.alpha)

    def residual(self):
        """
        H(eta) - eta.
        """
        return h_alpha(self.alpha, self.h0, self.eta, self.quad_tol) - self.eta

    def front(self, t):
        return self.eta * numpy.asarray(t, dtype=float) ** self.exponent

    def flux(self, t):
        return self.h0 * numpy.asarray(t, dtype=float) ** self.flux_power

    @cached_property
    def _total_integral(self):
        return profile_integral(self.alpha, self.eta, self.quad_tol)

    def profile(self, xi):
        """
        u as a function of the similarity variable xi = x/t^(1/(1+alpha)).
        """
        xi = numpy.asarray(xi, dtype=float)
        flat = numpy.minimum(xi.reshape(-1), self.eta)
        values = numpy.array(
            [
                self._total_integral - profile_integral(self.alpha, v, self.quad_tol)
                for v in flat
            ]
        )
        values *= self.h0 / gamma(self.alpha)
        values = values.reshape(xi.shape)
        return float(values) if values.ndim == 0 else values


def analytic_pair(bench, x, t):
    """
    Return (u(x, t), s(t)) for the analytic benchmark.

    x can be an array; u vanishes for x >= s(t).
    """
    if not t > 0:
        raise ValueError("t must be positive, got %r" % (t,))
    x = numpy.asarray(x, dtype=float)
    if numpy.any(x < 0):
        raise ValueError("x must be >= 0")
    s = float(bench.front(t))
    u = bench.profile(x / t**bench.exponent)
    return u, s


def analytic_mass(bench, t, abs_tol=1e-11):
    """
    int_0^s(t) u(x, t) dx, by adaptive quadrature of the profile.
    """
    if not t > 0:
        raise ValueError("t must be positive, got %r" % (t,))
    scale = t**bench.exponent
    value, _ = gauss_kronrod(bench.profile, 0.0, bench.eta, abs_tol=abs_tol / scale)
    return scale * value


def analytic_residual(bench, t, abs_tol=1e-11):
    """
    Residual of the integral Stefan condition for the analytic pair:

        s(t) - int_0^t h + int_0^s(t) u(x, t) dx
    """
    s = float(bench.front(t))
    injected = bench.h0 * (1 + bench.alpha) * t**bench.exponent
    return s - injected + analytic_mass(bench, t, abs_tol)
