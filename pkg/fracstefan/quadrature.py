"""
Adaptive quadrature for integrands with an algebraic endpoint
singularity.

Two independent backends are provided:

- "gk": globally adaptive 7-point Gauss / 15-point Kronrod panels,
  applied after the substitution w = x r^(1/(mu+1)) which turns
  int_0^x w^mu g(w) dw into a regular integral over [0, 1];
- "scipy": QUADPACK's QAWS routine (scipy.integrate.quad with an
  algebraic weight).

The integrand g must accept numpy arrays (the "gk" backend evaluates a
whole panel at once) as well as floats.
"""

import heapq
import logging
import warnings

import numpy
from scipy.integrate import IntegrationWarning, quad

from .errors import QuadratureError

logger = logging.getLogger(__name__)

__all__ = [
    "BACKENDS",
    "gauss_kronrod",
    "power_weighted_integral",
    "endpoint_weighted_integral",
]

BACKENDS = ("gk", "scipy")

# Kronrod abscissae on [0, 1] (the rule is symmetric), with Kronrod
# weights; the Gauss points are the odd-indexed abscissae:
_XGK = numpy.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = numpy.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = numpy.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)

# Reference abscissae on [-1, 1], and the weights in the same order:
_NODES = numpy.concatenate((-_XGK[:-1], _XGK[::-1]))
_KRONROD = numpy.concatenate((_WGK[:-1], _WGK[::-1]))
_GAUSS = numpy.zeros(15)
_GAUSS[1:7:2] = _WG[:3]
_GAUSS[7] = _WG[3]
_GAUSS[9:15:2] = _WG[2::-1]


def _panel(f, left, right):
    """
    Return (Kronrod estimate, error estimate) on [left, right].

    The error estimate is the difference between the Kronrod and Gauss
    values, which bounds the error of the Gauss rule.
    """
    half = 0.5 * (right - left)
    values = numpy.asarray(f(0.5 * (left + right) + half * _NODES), dtype=float)
    if not numpy.all(numpy.isfinite(values)):
        raise QuadratureError(
            "non-finite integrand on [%r, %r]" % (left, right)
        )
    kronrod = half * (_KRONROD @ values)
    gauss = half * (_GAUSS @ values)
    return kronrod, abs(kronrod - gauss)


def gauss_kronrod(f, a, b, abs_tol=1e-12, max_panels=2000):
    """
    Return (integral, error estimate) of f over [a, b].

    The panel with the largest error estimate is bisected until the sum
    of the estimates is at most abs_tol.

    QuadratureError is raised if more than max_panels panels would be
    needed.
    """
    if b == a:
        return 0.0, 0.0
    value, error = _panel(f, a, b)
    # Heap of (-error, left, right, value):
    panels = [(-error, a, b, value)]
    total_error = error

    while total_error > abs_tol:
        if len(panels) >= max_panels:
            raise QuadratureError(
                "Gauss-Kronrod: error %.3g above tolerance %.3g after %d panels"
                % (total_error, abs_tol, len(panels))
            )
        neg_error, left, right, value = heapq.heappop(panels)
        mid = 0.5 * (left + right)
        if not left < mid < right:
            raise QuadratureError(
                "Gauss-Kronrod: panel [%r, %r] cannot be bisected" % (left, right)
            )
        value_left, error_left = _panel(f, left, mid)
        value_right, error_right = _panel(f, mid, right)
        heapq.heappush(panels, (-error_left, left, mid, value_left))
        heapq.heappush(panels, (-error_right, mid, right, value_right))
        total_error += error_left + error_right + neg_error

    # Sorted summation for reproducibility:
    values = sorted((panel[3] for panel in panels), key=abs)
    return float(numpy.sum(values)), max(total_error, 0.0)


def _quad_checked(g, a, b, abs_tol, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value = quad(g, a, b, epsabs=abs_tol, epsrel=0.0, limit=500, **kwargs)[0]
        except IntegrationWarning as exc:
            raise QuadratureError("QUADPACK: %s" % exc) from exc
    return value


def power_weighted_integral(g, x, mu, abs_tol=1e-12, backend="gk"):
    """
    Return int_0^x w^mu g(w) dw, for mu > -1 and a smooth g.

    abs_tol -- target absolute error.
    backend -- "gk" or "scipy" (see the module documentation).
    """
    if mu <= -1:
        raise ValueError("mu must be > -1, got %r" % (mu,))
    if x < 0:
        raise ValueError("x must be >= 0, got %r" % (x,))
    if x == 0:
        return 0.0

    if backend == "gk":
        nu = mu + 1
        scale = x**nu / nu
        inner, _ = gauss_kronrod(
            lambda r: g(x * r ** (1 / nu)), 0.0, 1.0, abs_tol=abs_tol / scale
        )
        return scale * inner
    if backend == "scipy":
        return _quad_checked(g, 0.0, x, abs_tol, weight="alg", wvar=(mu, 0.0))
    raise ValueError("unknown quadrature backend %r" % (backend,))


def endpoint_weighted_integral(g, a, x, mu, abs_tol=1e-12, backend="gk"):
    """
    Return int_a^x (x-r)^mu g(r) dr, for mu > -1 and a smooth g.
    """
    if x < a:
        raise ValueError("x must be >= a")
    if backend == "scipy":
        if x == a:
            return 0.0
        return _quad_checked(g, a, x, abs_tol, weight="alg", wvar=(0.0, mu))
    return power_weighted_integral(
        lambda tau: g(x - tau), x - a, mu, abs_tol=abs_tol, backend=backend
    )
