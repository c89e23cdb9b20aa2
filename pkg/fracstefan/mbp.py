"""
Moving-boundary solver on the fixed cylinder p = x/s(t) in [0, 1].

With w(p, t) = u(p s(t), t) the problem reads

    w_t - p (s'/s) w_p - s^(-1-alpha) d/dp D^alpha w = 0,
    -D^alpha w(0, t) = h(t) s^alpha(t),   w(1, t) = 0.

The prescribed flux forces an x^alpha singularity at p = 0, which is
carried by the singular part of the split

    w = v - c(t) phi(p),   c(t) = h(t) s^alpha(t),

where phi(p) = psi(p) p^alpha/Gamma(1+alpha) and psi is a quintic
smoothstep going from 1 at p = 1/2 to 0 at p = 3/4. Since
D^alpha phi = 1 near 0, the regular part v has a homogeneous flux at
p = 0 and solves

    v_t = p (s'/s) v_p + s^(-1-alpha) d/dp D^alpha v + g,
    g = c' phi - s' s^(alpha-1) h p phi' - (h/s) d/dp D^alpha phi.

The boundary flux enters the time stepping through its averages over
the steps, which makes the injected heat exact and keeps singular
power-law fluxes usable from t = 0.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
import logging
import math
import warnings

import numpy
from scipy.interpolate import PchipInterpolator
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve, schur, solve_triangular
from scipy.special import gamma

from .errors import CFLViolation, SingularSystem
from .fracops import _check_alpha
from .mlf import AnalyticBenchmark, analytic_pair
from .quadrature import endpoint_weighted_integral, gauss_kronrod

logger = logging.getLogger(__name__)

__all__ = [
    "FluxSpec",
    "InitialProfile",
    "StefanProblem",
    "FrontPath",
    "SingularSplit",
    "SolutionField",
    "SCHEMES",
    "build_split",
    "singular_profile",
    "transformed_source",
    "step",
    "solve_mbp",
    "front_flux",
    "flux_samples",
    "initial_regular_part",
]

SCHEMES = ("imex", "implicit")

# Velocity floor in the CFL bound:
CFL_EPS = 1e-14


###############################################################################
# Problem data


@dataclass(frozen=True)
class FluxSpec:
    """
    Boundary flux h(t) >= 0.

    kind -- "constant" (h0), "power" (h0 t^power, power > -1) or "table"
    (piecewise linear through (times, values), constant beyond both
    ends).
    """

    kind: str
    h0: float = 0.0
    power: float = 0.0
    times: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind in ("constant", "power"):
            if not (math.isfinite(self.h0) and self.h0 >= 0):
                raise ValueError(
                    "h0 must be finite and >= 0 (the boundary flux satisfies"
                    " h(t) >= 0), got %r" % (self.h0,)
                )
            if self.kind == "power" and not self.power > -1:
                raise ValueError("the flux exponent must be > -1 to be integrable")
        elif self.kind == "table":
            times = numpy.asarray(self.times, dtype=float)
            values = numpy.asarray(self.values, dtype=float)
            if times.ndim != 1 or times.shape != values.shape or len(times) < 2:
                raise ValueError("a flux table needs at least two (t, h) rows")
            if times[0] < 0 or numpy.any(numpy.diff(times) <= 0):
                raise ValueError("flux table times must be >= 0 and increasing")
            negative = numpy.flatnonzero(values < 0)
            if len(negative):
                raise ValueError(
                    "flux table entry h(%g) = %g is negative: the boundary flux"
                    " must satisfy h(t) >= 0"
                    % (times[negative[0]], values[negative[0]])
                )
            if not numpy.all(numpy.isfinite(values)):
                raise ValueError("flux table values must be finite")
            object.__setattr__(self, "times", tuple(times.tolist()))
            object.__setattr__(self, "values", tuple(values.tolist()))
        else:
            raise ValueError("unknown flux kind %r" % (self.kind,))

    @classmethod
    def constant(cls, h0):
        return cls("constant", h0=float(h0))

    @classmethod
    def power_law(cls, h0, power):
        return cls("power", h0=float(h0), power=float(power))

    @classmethod
    def table(cls, times, values):
        return cls("table", times=tuple(times), values=tuple(values))

    @classmethod
    def similarity(cls, alpha, h0):
        """
        h0 t^(-alpha/(1+alpha)), the flux of the self-similar solution.
        """
        return cls.power_law(h0, -alpha / (1 + alpha))

    @property
    def is_zero(self):
        if self.kind == "table":
            return not any(self.values)
        return self.h0 == 0

    def __call__(self, t):
        t = numpy.asarray(t, dtype=float)
        if self.kind == "constant":
            result = numpy.full(t.shape, self.h0)
        elif self.kind == "power":
            with numpy.errstate(divide="ignore"):
                result = self.h0 * t**self.power
        else:
            result = numpy.interp(t, self.times, self.values)
        return float(result) if result.ndim == 0 else result

    def antiderivative(self, t):
        """
        int_0^t h.
        """
        t = numpy.asarray(t, dtype=float)
        if self.kind == "constant":
            result = self.h0 * t
        elif self.kind == "power":
            result = self.h0 * t ** (self.power + 1) / (self.power + 1)
        else:
            times = numpy.asarray(self.times)
            values = numpy.asarray(self.values)
            if times[0] > 0:
                times = numpy.concatenate(([0.0], times))
                values = numpy.concatenate(([values[0]], values))
            cumulative = numpy.concatenate(
                ([0.0], numpy.cumsum(numpy.diff(times) * 0.5 * (values[1:] + values[:-1])))
            )
            index = numpy.clip(numpy.searchsorted(times, t, side="right") - 1, 0, None)
            h_t = numpy.interp(t, times, values)
            result = cumulative[index] + (t - times[index]) * 0.5 * (values[index] + h_t)
        return float(result) if numpy.ndim(result) == 0 else result

    def integral(self, t0, t1):
        return self.antiderivative(t1) - self.antiderivative(t0)

    def average(self, t0, t1):
        """
        Mean value of h over [t0, t1].
        """
        return self.integral(t0, t1) / (t1 - t0)

    def sup(self, t0, t1):
        """
        Supremum of h over [t0, t1] (infinite for a singular power law
        at t0 = 0).
        """
        if self.kind == "constant":
            return self.h0
        if self.kind == "power":
            return float(max(self(t0), self(t1))) if self.h0 else 0.0
        inside = [v for t, v in zip(self.times, self.values) if t0 < t < t1]
        return float(max([self(t0), self(t1)] + inside))

    def describe(self):
        if self.kind == "constant":
            return {"kind": "constant", "h0": self.h0}
        if self.kind == "power":
            return {"kind": "power", "h0": self.h0, "power": self.power}
        return {"kind": "table", "times": list(self.times), "values": list(self.values)}


@dataclass(frozen=True)
class InitialProfile:
    """
    Initial temperature u0 on [0, b].

    kind -- "zero"; "envelope" (scale * M/Gamma(1+alpha) (b^alpha - x^alpha),
    0 <= scale); "table" (physical (x, u) samples, resampled with a
    monotone cubic interpolant); "benchmark" (the analytic profile at
    time t0).
    """

    kind: str = "zero"
    scale: float = 0.0
    x: tuple = ()
    u: tuple = ()
    benchmark: AnalyticBenchmark = None
    t0: float = 0.0

    def __post_init__(self):
        if self.kind == "envelope":
            if not self.scale >= 0:
                raise ValueError("the envelope scale must be >= 0")
        elif self.kind == "table":
            x = numpy.asarray(self.x, dtype=float)
            u = numpy.asarray(self.u, dtype=float)
            if x.ndim != 1 or x.shape != u.shape or len(x) < 2:
                raise ValueError("an initial profile table needs at least two rows")
            if numpy.any(numpy.diff(x) <= 0):
                raise ValueError("initial profile abscissae must be increasing")
            if numpy.any(u < 0):
                raise ValueError("the initial profile must satisfy u0 >= 0")
        elif self.kind == "benchmark":
            if self.benchmark is None or not self.t0 > 0:
                raise ValueError("a benchmark profile needs a benchmark and t0 > 0")
        elif self.kind != "zero":
            raise ValueError("unknown initial profile kind %r" % (self.kind,))

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def envelope(cls, scale):
        return cls("envelope", scale=float(scale))

    @classmethod
    def table(cls, x, u):
        return cls("table", x=tuple(map(float, x)), u=tuple(map(float, u)))

    @classmethod
    def restart(cls, benchmark, t0):
        return cls("benchmark", benchmark=benchmark, t0=float(t0))

    @property
    def is_zero(self):
        return self.kind == "zero" or (self.kind == "envelope" and self.scale == 0)

    def sample(self, p, b, alpha, M):
        """
        u0(p b) at the mapped abscissae p.
        """
        x = numpy.asarray(p, dtype=float) * b
        if self.is_zero:
            return numpy.zeros_like(x)
        if self.kind == "envelope":
            return self.scale * M / gamma(1 + alpha) * (b**alpha - x**alpha)
        if self.kind == "table":
            if self.x[0] > 0 or self.x[-1] < b:
                raise ValueError(
                    "the initial profile table must cover [0, b] = [0, %g]" % b
                )
            return PchipInterpolator(self.x, self.u)(x)
        return analytic_pair(self.benchmark, x, self.t0)[0]

    def describe(self):
        if self.kind == "envelope":
            return {"kind": "envelope", "scale": self.scale}
        if self.kind == "table":
            return {"kind": "table", "x": list(self.x), "u": list(self.u)}
        if self.kind == "benchmark":
            return {
                "kind": "benchmark",
                "alpha": self.benchmark.alpha,
                "h0": self.benchmark.h0,
                "eta": self.benchmark.eta,
                "t0": self.t0,
            }
        return {"kind": "zero"}


@dataclass(frozen=True)
class StefanProblem:
    """
    One-phase space-fractional Stefan problem on [t_start, horizon].

    alpha -- order of the flux law, in (0, 1).
    flux -- FluxSpec of the boundary flux h.
    b -- initial front position (b = 0 is only accepted by the b -> 0
    sweep).
    u0 -- InitialProfile.
    """

    alpha: float
    flux: FluxSpec
    b: float
    u0: InitialProfile = field(default_factory=InitialProfile.zero)
    horizon: float = 1.0
    t_start: float = 0.0

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not (math.isfinite(self.b) and self.b >= 0):
            raise ValueError("b must be finite and >= 0, got %r" % (self.b,))
        if not self.horizon > self.t_start >= 0:
            raise ValueError("the horizon must exceed t_start >= 0")

    @property
    def M(self):
        """
        Supremum of the boundary flux over the time window.
        """
        return self.flux.sup(self.t_start, self.horizon)

    def with_b(self, b):
        return replace(self, b=float(b))

    def envelope(self, x, s, M=None):
        """
        M/Gamma(1+alpha) (s^alpha - x^alpha), the upper bound of u.
        """
        M = self.M if M is None else M
        x = numpy.minimum(numpy.asarray(x, dtype=float), s)
        return M / gamma(1 + self.alpha) * (s**self.alpha - x**self.alpha)

    def initial_samples(self, grid, M=None):
        """
        u0 at the mapped nodes p b, validated: u0 >= 0 and u0(b) = 0.
        """
        M = self.M if M is None else M
        u0 = numpy.asarray(self.u0.sample(grid.nodes, self.b, self.alpha, M), dtype=float)
        scale = max(1.0, float(numpy.max(numpy.abs(u0))))
        if numpy.min(u0) < -1e-12 * scale:
            raise ValueError("the initial profile must satisfy u0 >= 0")
        if self.b > 0 and abs(u0[-1]) > 1e-12 * scale:
            raise ValueError("the initial profile must vanish at the front: u0(b) = 0")
        u0 = numpy.maximum(u0, 0.0)
        u0[-1] = 0.0
        return u0

    def envelope_admissible(self, grid, M=None, tol=0.0):
        """
        True if u0 lies below the envelope of the initial front.
        """
        M = self.M if M is None else M
        if not math.isfinite(M):
            return False
        u0 = self.initial_samples(grid, M)
        return bool(numpy.all(u0 <= self.envelope(grid.nodes * self.b, self.b, M) + tol))

    def describe(self):
        return {
            "alpha": self.alpha,
            "b": self.b,
            "h_spec": self.flux.describe(),
            "u0_spec": self.u0.describe(),
            "horizon": self.horizon,
            "t_start": self.t_start,
        }


@dataclass(frozen=True)
class FrontPath:
    """
    Free boundary s(t) sampled at increasing instants, with velocities.
    """

    times: numpy.ndarray
    s_values: numpy.ndarray
    s_dots: numpy.ndarray

    def __post_init__(self):
        for name in ("times", "s_values", "s_dots"):
            object.__setattr__(self, name, numpy.asarray(getattr(self, name), dtype=float))
        if not (self.times.shape == self.s_values.shape == self.s_dots.shape):
            raise ValueError("front times, positions and velocities must match")
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ValueError("a front path needs at least two instants")
        if numpy.any(numpy.diff(self.times) <= 0):
            raise ValueError("front times must be increasing")

    @classmethod
    def stationary(cls, b, times):
        times = numpy.asarray(times, dtype=float)
        return cls(times, numpy.full(times.shape, float(b)), numpy.zeros(times.shape))

    @classmethod
    def from_function(cls, times, s, s_dot):
        times = numpy.asarray(times, dtype=float)
        return cls(times, s(times), s_dot(times))

    def velocity_violation(self, M):
        """
        Largest distance of the velocities to [0, M].
        """
        return float(
            max(numpy.max(-self.s_dots, initial=0.0), numpy.max(self.s_dots - M, initial=0.0))
        )

    def monotonicity_violation(self):
        return float(numpy.max(-numpy.diff(self.s_values), initial=0.0))

    def __getitem__(self, index):
        return FrontPath(self.times[index], self.s_values[index], self.s_dots[index])


###############################################################################
# Singular part


def _smoothstep(tau):
    """
    Quintic smoothstep S and its first two derivatives, S = 0 for
    tau <= 0 and 1 for tau >= 1.
    """
    tau = numpy.clip(tau, 0.0, 1.0)
    s = tau**3 * (10 - 15 * tau + 6 * tau**2)
    ds = 30 * tau**2 * (1 - tau) ** 2
    d2s = 60 * tau * (1 - tau) * (1 - 2 * tau)
    return s, ds, d2s


class _Phi:
    """
    phi(x) = psi(x) x^alpha/Gamma(1+alpha) and the pieces needed for its
    fractional derivatives. delta = phi - x^alpha/Gamma(1+alpha)
    vanishes below the start of the blend.
    """

    def __init__(self, alpha, blend):
        self.alpha = alpha
        self.lo, self.hi = blend
        self.width = self.hi - self.lo

    def _psi(self, x):
        s, ds, d2s = _smoothstep((x - self.lo) / self.width)
        return 1 - s, -ds / self.width, -d2s / self.width**2

    def power(self, x):
        a = self.alpha
        x = numpy.asarray(x, dtype=float)
        with numpy.errstate(divide="ignore", invalid="ignore"):
            p0 = x**a / gamma(1 + a)
            p1 = x ** (a - 1) / gamma(a)
            p2 = (a - 1) * x ** (a - 2) / gamma(a)
        return p0, p1, p2

    def __call__(self, x):
        psi = self._psi(x)[0]
        return psi * self.power(x)[0]

    def x_derivative(self, x):
        """
        x phi'(x), finite at 0.
        """
        psi, dpsi, _ = self._psi(x)
        p0 = self.power(x)[0]
        return x * dpsi * p0 + psi * self.alpha * p0

    def delta_1(self, r):
        psi, dpsi, _ = self._psi(r)
        p0, p1, _ = self.power(r)
        return dpsi * p0 + (psi - 1) * p1

    def delta_2(self, r):
        psi, dpsi, d2psi = self._psi(r)
        p0, p1, p2 = self.power(r)
        return d2psi * p0 + 2 * dpsi * p1 + (psi - 1) * p2

    def _history(self, x, f, quad_tol, backend):
        """
        (1/Gamma(1-alpha)) int_lo^x (x-r)^(-alpha) f(r) dr, split at the
        end of the blend.
        """
        if x <= self.lo:
            return 0.0
        a = self.alpha
        if x <= self.hi:
            value = endpoint_weighted_integral(f, self.lo, x, -a, quad_tol, backend)
        else:
            value = gauss_kronrod(
                lambda r: (x - r) ** (-a) * f(r), self.lo, self.hi, abs_tol=quad_tol
            )[0]
            value += endpoint_weighted_integral(f, self.hi, x, -a, quad_tol, backend)
        return value / gamma(1 - a)

    def caputo(self, x, quad_tol, backend):
        # D^alpha x^alpha/Gamma(1+alpha) = 1
        return 1.0 + self._history(x, self.delta_1, quad_tol, backend)

    def caputo_slope(self, x, quad_tol, backend):
        # delta'(lo) = 0, so differentiation goes under the integral
        return self._history(x, self.delta_2, quad_tol, backend)


def singular_profile(alpha, p, blend=(0.5, 0.75)):
    """
    phi at the abscissae p of [0, 1].
    """
    phi = numpy.asarray(_Phi(alpha, blend)(p), dtype=float)
    return numpy.where(numpy.asarray(p) >= 1, 0.0, phi)


@dataclass(frozen=True)
class SingularSplit:
    """
    Nodal data of the singular part phi on the grid.

    phi -- phi at the nodes.
    x_dphi -- p phi'(p) at the nodes.
    d_alpha_phi -- D^alpha phi at the faces (0, half-nodes, 1).
    div_phi -- d/dp D^alpha phi at the nodes.
    blend -- interval of the smoothstep.
    """

    alpha: float
    grid: object
    phi: numpy.ndarray = field(repr=False, compare=False)
    x_dphi: numpy.ndarray = field(repr=False, compare=False)
    d_alpha_phi: numpy.ndarray = field(repr=False, compare=False)
    div_phi: numpy.ndarray = field(repr=False, compare=False)
    blend: tuple = (0.5, 0.75)

    @property
    def d_alpha_phi_end(self):
        return float(self.d_alpha_phi[-1])


def build_split(alpha, grid, w=None, quad_tol=1e-12, backend="gk", blend=(0.5, 0.75)):
    """
    Return the SingularSplit of order alpha on grid.

    D^alpha phi and its slope are computed by adaptive quadrature (not
    with the grid tables), which captures the x^alpha kernel exactly.

    w -- FracWeights of the same order, only used for consistency checks.
    blend -- (start, end) of the smoothstep, 0 < start < end < 1.
    """
    _check_alpha(alpha)
    if w is not None and (w.alpha != alpha or w.grid != grid):
        raise ValueError("weights and grid of the split do not match")
    lo, hi = blend
    if not 0 < lo < hi < 1:
        raise ValueError("the blend interval must satisfy 0 < start < end < 1")

    shape = _Phi(alpha, blend)
    nodes = grid.nodes
    d_alpha_phi = numpy.array(
        [shape.caputo(x, quad_tol, backend) for x in grid.faces]
    )
    div_phi = numpy.array([shape.caputo_slope(x, quad_tol, backend) for x in nodes])
    logger.debug(
        "Singular split: alpha=%g, n_cells=%d, D^alpha phi(1)=%.12g",
        alpha,
        grid.n_cells,
        d_alpha_phi[-1],
    )
    phi = singular_profile(alpha, nodes, blend)
    return SingularSplit(
        alpha=alpha,
        grid=grid,
        phi=phi,
        x_dphi=shape.x_derivative(nodes),
        d_alpha_phi=d_alpha_phi,
        div_phi=div_phi,
        blend=tuple(blend),
    )


@dataclass(frozen=True)
class SolutionField:
    """
    Frames of the regular part v, with what is needed to rebuild u.

    fluxes -- boundary flux used with each frame (step averages), so that
    the singular amplitude is fluxes * s^alpha.
    """

    times: numpy.ndarray
    v_frames: numpy.ndarray
    front: FrontPath
    fluxes: numpy.ndarray
    alpha: float
    grid: object
    phi: numpy.ndarray = field(repr=False)

    @property
    def amplitudes(self):
        return self.fluxes * self.front.s_values**self.alpha

    def u_frames(self):
        """
        u at the mapped nodes p s(t) of every frame:
        u = v - h s^alpha phi.
        """
        return self.v_frames - self.amplitudes[:, None] * self.phi

    def positions(self):
        """
        Physical abscissae p s(t) of the nodes, per frame.
        """
        return self.front.s_values[:, None] * self.grid.nodes

    def u_eval(self, x, frame):
        """
        u(x, times[frame]) by linear interpolation; 0 beyond the front.
        """
        s = self.front.s_values[frame]
        u = self.u_frames()[frame]
        x = numpy.asarray(x, dtype=float)
        return numpy.where(x < s, numpy.interp(x / s, self.grid.nodes, u), 0.0)

    def masses(self):
        """
        int_0^s(t) u(x, t) dx per frame.
        """
        return self.front.s_values * self.grid.trapezoid(self.u_frames())


###############################################################################
# Time stepping


class _TransportMatrices:
    """
    Dense matrices of the semi-discrete operator on the nodes.

    diffusion -- d/dp D^alpha with homogeneous flux at p = 0; the row of
    the Dirichlet node p = 1 is zero.
    advection -- conservative upwind discretization of v -> p v_p (the
    characteristics run toward p = 0, so the upwind neighbour is on the
    right).
    """

    def __init__(self, w):
        n = w.grid.n_cells
        increments = numpy.zeros((n, n + 1))
        rows = numpy.arange(n)
        increments[rows, rows] = -1.0
        increments[rows, rows + 1] = 1.0
        diffusion = w.divergence_weights @ w.flux_weights @ increments
        diffusion[-1] = 0.0
        self.diffusion = diffusion

        coefficients = numpy.arange(n) + 0.5
        coefficients[0] = 1.0
        advection = numpy.zeros((n + 1, n + 1))
        advection[rows, rows] = -coefficients
        advection[rows, rows + 1] = coefficients
        self.advection = advection
        self.identity = numpy.eye(n + 1)

    @cached_property
    def schur(self):
        # diffusion = Z T Z^H
        return schur(self.diffusion, output="complex")

    def solve_diffusion(self, kappa, rhs):
        """
        Solve (I - kappa diffusion) x = rhs through the Schur form.
        """
        T, Z = self.schur
        shifted = numpy.eye(len(rhs)) - kappa * T
        diagonal = numpy.abs(numpy.diag(shifted))
        if diagonal.min() <= 1e-12 * diagonal.max():
            raise SingularSystem(
                "implicit diffusion system is singular",
                condition=diagonal.max() / max(diagonal.min(), 1e-300),
            )
        y = solve_triangular(shifted, Z.conj().T @ rhs)
        return (Z @ y).real


@lru_cache(maxsize=8)
def _transport_matrices(w):
    return _TransportMatrices(w)


def transformed_source(split, h_val, h_dot, s_val, s_dot, grid):
    """
    Source g of the equation of the regular part, at the nodes:

        g = (h' s^alpha + alpha h s^(alpha-1) s') phi
            - s' s^(alpha-1) h p phi' - (h/s) d/dp D^alpha phi

    g vanishes at the Dirichlet node.
    """
    if not s_val > 0:
        raise ValueError("the front position must be positive, got %r" % (s_val,))
    a = split.alpha
    amplitude_rate = h_dot * s_val**a + a * h_val * s_val ** (a - 1) * s_dot
    g = (
        amplitude_rate * split.phi
        - s_dot * s_val ** (a - 1) * h_val * split.x_dphi
        - (h_val / s_val) * split.div_phi
    )
    g[-1] = 0.0
    return g


def step(v, s_val, s_dot, h_val, h_dot, dt, grid, w, split, scheme="imex"):
    """
    Advance the regular part v by one step of length dt.

    scheme -- "imex": fractional diffusion implicit (one Schur
    factorization per weights, reused with a scalar shift), advection
    and source explicit; requires dt <= 0.5 spacing s/max(s', eps).
    "implicit": diffusion and advection implicit (LU per step), source
    explicit; monotone for every dt.

    v(1) = 0 is preserved exactly.
    """
    v = grid.check_samples(v, "v")
    if v[-1] != 0:
        raise ValueError("the regular part must vanish at p = 1")
    if not dt > 0:
        raise ValueError("dt must be positive, got %r" % (dt,))
    if not s_dot >= 0:
        raise ValueError("the front velocity must be >= 0, got %r" % (s_dot,))

    ops = _transport_matrices(w)
    kappa = dt * s_val ** (-1 - w.alpha)
    g = transformed_source(split, h_val, h_dot, s_val, s_dot, grid)
    rate = s_dot / s_val

    if scheme == "imex":
        limit = 0.5 * grid.spacing * s_val / max(s_dot, CFL_EPS)
        if dt > limit:
            raise CFLViolation(
                "dt = %g exceeds the advection bound %g (s = %g, s' = %g)"
                % (dt, limit, s_val, s_dot)
            )
        rhs = v + dt * (rate * (ops.advection @ v) + g)
        rhs[-1] = 0.0
        result = ops.solve_diffusion(kappa, rhs)
    elif scheme == "implicit":
        matrix = ops.identity - kappa * ops.diffusion - (dt * rate) * ops.advection
        rhs = v + dt * g
        rhs[-1] = 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            try:
                result = lu_solve(lu_factor(matrix), rhs)
            except (LinAlgWarning, ValueError, numpy.linalg.LinAlgError) as exc:
                raise SingularSystem(
                    "implicit step system is singular: %s" % exc,
                    condition=numpy.linalg.cond(matrix),
                ) from exc
    else:
        raise ValueError("unknown scheme %r, expected one of %s" % (scheme, SCHEMES))

    if not numpy.all(numpy.isfinite(result)):
        raise SingularSystem("non-finite values after a time step")
    result[-1] = 0.0
    return result


def front_flux(v, s_val, h_val, w, split):
    """
    D^alpha_x u at the front:

        s^(-alpha) D^alpha_p v(1) - h D^alpha phi(1)

    (the front velocity is minus this value).
    """
    if not s_val > 0:
        raise ValueError("the front position must be positive, got %r" % (s_val,))
    regular = float(w.flux_end @ numpy.diff(v))
    return s_val ** (-w.alpha) * regular - h_val * split.d_alpha_phi_end


def flux_samples(flux, times):
    """
    Boundary flux data of a time grid: (averages, rates).

    averages[n] is the mean of h over [t_n, t_n+1] (the last instant
    uses the interval of the same length after it); rates[n] is the
    secant slope of consecutive averages.
    """
    times = numpy.asarray(times, dtype=float)
    ends = numpy.append(times[1:], times[-1] + (times[-1] - times[-2]))
    averages = numpy.array([flux.average(a, b) for a, b in zip(times, ends)])
    rates = numpy.zeros_like(averages)
    rates[:-1] = numpy.diff(averages) / numpy.diff(times)
    rates[-1] = rates[-2] if len(rates) > 1 else 0.0
    return averages, rates


def initial_regular_part(problem, grid, split, h_initial, M=None):
    """
    v0 = u0(p b) + h b^alpha phi.
    """
    u0 = problem.initial_samples(grid, M)
    v0 = u0 + h_initial * problem.b**problem.alpha * split.phi
    v0[-1] = 0.0
    return v0


def _frame_indices(n_instants, output_every):
    if output_every < 1:
        raise ValueError("output_every must be >= 1")
    indices = list(range(0, n_instants, output_every))
    if indices[-1] != n_instants - 1:
        indices.append(n_instants - 1)
    return numpy.array(indices)


def solve_mbp(problem, front, grid, w, scheme="implicit", output_every=1, split=None):
    """
    Solve the moving-boundary problem for a prescribed front.

    front -- FrontPath starting at (problem.t_start, problem.b); the
    velocity at t_n drives the step to t_n+1.

    Returns a SolutionField with frames every output_every steps (and at
    the last instant).
    """
    if not problem.b > 0:
        raise ValueError("solve_mbp needs b > 0; b = 0 is handled by solve_b_zero")
    if abs(front.times[0] - problem.t_start) > 1e-12 or abs(front.s_values[0] - problem.b) > 1e-12 * max(1.0, problem.b):
        raise ValueError("the front must start at (t_start, b)")
    if numpy.any(front.s_values <= 0):
        raise ValueError("the front must stay positive")
    split = build_split(problem.alpha, grid, w) if split is None else split

    times = front.times
    averages, rates = flux_samples(problem.flux, times)
    M = float(numpy.max(averages))
    v = initial_regular_part(problem, grid, split, averages[0], M)

    frames = _frame_indices(len(times), output_every)
    wanted = set(frames.tolist())
    v_frames = []
    for n in range(len(times)):
        if n in wanted:
            v_frames.append(v.copy())
        if n == len(times) - 1:
            break
        v = step(
            v,
            front.s_values[n],
            front.s_dots[n],
            averages[n],
            rates[n],
            times[n + 1] - times[n],
            grid,
            w,
            split,
            scheme,
        )

    logger.info(
        "Moving-boundary solve: %d steps, %d frames, scheme %s",
        len(times) - 1,
        len(frames),
        scheme,
    )
    return SolutionField(
        times=times[frames],
        v_frames=numpy.array(v_frames),
        front=front[frames],
        fluxes=averages[frames],
        alpha=problem.alpha,
        grid=grid,
        phi=split.phi,
    )
