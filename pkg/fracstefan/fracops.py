"""
Discrete fractional calculus on a uniform grid of [0, 1].

Functions are represented by their nodal values and reconstructed as
piecewise-linear interpolants. All tables are obtained by exact
integration of the kernels (x-p)^(-alpha) and (x-p)^(alpha-1) against
this reconstruction (product integration), so that they are exact for
linear data.

Fluxes q = D^alpha f live on the faces of the dual control volumes:
x = 0, the half-nodes x_{i+1/2} and x = 1 (n_cells+2 values). The
divergence of such a flux is the telescoping difference of face values
divided by the control volume lengths (spacing/2 at both ends, spacing
in the interior).
"""

from dataclasses import dataclass, field
from functools import lru_cache
import logging

import numpy
from scipy.special import gamma

logger = logging.getLogger(__name__)

__all__ = [
    "Grid",
    "FracWeights",
    "build_weights",
    "frac_integral",
    "frac_integral_right",
    "caputo_derivative",
    "rl_derivative",
    "flux_divergence",
    "faces_to_nodes",
]

# Smallest accepted number of cells:
MIN_CELLS = 4


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0,1), got %r" % (alpha,))


def _frozen(array):
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Grid:
    """
    Uniform partition of [0, 1] into n_cells cells.

    nodes -- n_cells+1 abscissae, nodes[0] = 0 and nodes[-1] = 1.
    half_nodes -- cell midpoints.
    faces -- 0, the half-nodes and 1: the points where fluxes are
    sampled.
    volumes -- lengths of the dual control volumes around the nodes.
    These are also the weights of the trapezoidal rule on the nodes.
    """

    n_cells: int
    nodes: numpy.ndarray = field(init=False, repr=False, compare=False)
    spacing: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < MIN_CELLS:
            raise ValueError(
                "n_cells must be an integer >= %d, got %r" % (MIN_CELLS, self.n_cells)
            )
        object.__setattr__(self, "n_cells", int(self.n_cells))
        nodes = numpy.linspace(0.0, 1.0, self.n_cells + 1)
        object.__setattr__(self, "nodes", _frozen(nodes))
        object.__setattr__(self, "spacing", 1.0 / self.n_cells)

    @property
    def half_nodes(self):
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    @property
    def faces(self):
        return numpy.concatenate(([0.0], self.half_nodes, [1.0]))

    @property
    def volumes(self):
        volumes = numpy.full(self.n_cells + 1, self.spacing)
        volumes[0] = volumes[-1] = 0.5 * self.spacing
        return volumes

    def trapezoid(self, values):
        """
        Integral over [0, 1] of the piecewise-linear interpolant of the
        nodal values (last axis).
        """
        return numpy.asarray(values) @ self.volumes

    def check_samples(self, f, name="f"):
        """
        Return f as a float array, after checking that it holds one value
        per node.
        """
        f = numpy.asarray(f, dtype=float)
        if f.shape != (self.n_cells + 1,):
            raise ValueError(
                "%s must hold %d nodal values, got shape %s"
                % (name, self.n_cells + 1, f.shape)
            )
        return f


@dataclass(frozen=True)
class FracWeights:
    """
    Precomputed product-integration tables of order alpha on a grid.

    integral_weights -- (N+1, N+1) lower-triangular table of I^alpha.
    rl_weights -- (N+1, N+1) lower-triangular table of I^(1-alpha), from
    which the Riemann-Liouville derivative is obtained.
    flux_weights -- (N+2, N) table mapping the increments f[k+1]-f[k] to
    D^alpha f at the faces. Row 0 is zero (limit at 0+ for
    piecewise-linear data).
    divergence_weights -- (N+1, N+2) table mapping face fluxes to their
    conservative divergence at the nodes.

    All tables are read-only and can be shared between threads.
    """

    alpha: float
    grid: Grid
    integral_weights: numpy.ndarray = field(repr=False, compare=False)
    rl_weights: numpy.ndarray = field(repr=False, compare=False)
    flux_weights: numpy.ndarray = field(repr=False, compare=False)
    divergence_weights: numpy.ndarray = field(repr=False, compare=False)

    @property
    def flux_end(self):
        """
        Row of flux_weights giving D^alpha f at x = 1.
        """
        return self.flux_weights[-1]


###############################################################################
# Table construction


def _integral_table(beta, n_cells):
    """
    Table of I^beta for piecewise-linear data (product trapezoidal rule).

    Row n gives (I^beta f)(x_n) as a combination of f(x_0) ... f(x_n).
    """
    h = 1.0 / n_cells
    n = numpy.arange(n_cells + 1)[:, None]
    j = numpy.arange(n_cells + 1)[None, :]
    k = (n - j).astype(float)
    p = beta + 1

    kp = numpy.clip(k, 0, None)
    table = (kp + 1) ** p - 2 * kp**p + numpy.clip(k - 1, 0, None) ** p
    table[k < 1] = 0.0
    # First column and diagonal:
    nf = n[:, 0].astype(float)
    table[1:, 0] = (nf[1:] - 1) ** p - (nf[1:] - 1 - beta) * nf[1:] ** beta
    diag = numpy.arange(1, n_cells + 1)
    table[diag, diag] = 1.0
    table[0, :] = 0.0

    return table * h**beta / gamma(beta + 2)


def _flux_table(alpha, n_cells):
    """
    Table of D^alpha at the faces, acting on nodal increments.
    """
    h = 1.0 / n_cells
    e = 1 - alpha
    i = numpy.arange(n_cells)[:, None]
    k = numpy.arange(n_cells)[None, :]
    d = (i - k).astype(float)

    table = numpy.zeros((n_cells + 2, n_cells))
    # Zero above the diagonal, partial cell on it:
    table[1:-1] = numpy.clip(d + 0.5, 0, None) ** e - numpy.clip(d - 0.5, 0, None) ** e
    m = n_cells - numpy.arange(n_cells, dtype=float)
    table[-1] = m**e - (m - 1) ** e

    return table * h ** (-alpha) / gamma(2 - alpha)


def _divergence_table(grid):
    n = grid.n_cells
    volumes = grid.volumes
    table = numpy.zeros((n + 1, n + 2))
    rows = numpy.arange(n + 1)
    table[rows, rows] = -1 / volumes
    table[rows, rows + 1] = 1 / volumes
    return table


@lru_cache(maxsize=16)
def _cached_weights(alpha, n_cells):
    grid = Grid(n_cells)
    logger.debug("Building fractional weights: alpha=%g, n_cells=%d", alpha, n_cells)
    return FracWeights(
        alpha=alpha,
        grid=grid,
        integral_weights=_frozen(_integral_table(alpha, n_cells)),
        rl_weights=_frozen(_integral_table(1 - alpha, n_cells)),
        flux_weights=_frozen(_flux_table(alpha, n_cells)),
        divergence_weights=_frozen(_divergence_table(grid)),
    )


def build_weights(alpha, grid):
    """
    Return the FracWeights of order alpha on grid.

    The tables only depend on (alpha, n_cells) and are cached.

    A ValueError is raised if alpha is not in (0, 1).
    """
    _check_alpha(alpha)
    return _cached_weights(float(alpha), grid.n_cells)


###############################################################################
# Operators


def frac_integral(f, w):
    """
    Riemann-Liouville integral I^alpha f at the nodes.
    """
    f = w.grid.check_samples(f)
    return w.integral_weights @ f


def frac_integral_right(f, w):
    """
    Right-sided integral I^alpha_- f at the nodes:

        (1/Gamma(alpha)) int_x^1 (p-x)^(alpha-1) f(p) dp

    It is the adjoint of frac_integral for the L2 product on [0, 1].
    """
    f = w.grid.check_samples(f)
    return (w.integral_weights @ f[::-1])[::-1]


def caputo_derivative(f, w):
    """
    Caputo derivative D^alpha f at the faces (0, half-nodes, 1).

    D^alpha f is I^(1-alpha) of the piecewise-constant derivative of the
    linear interpolant of f. The value at 0 is the limit from the right,
    which is 0 for piecewise-linear data.
    """
    f = w.grid.check_samples(f)
    return w.flux_weights @ numpy.diff(f)


def rl_derivative(f, w):
    """
    Riemann-Liouville derivative d/dx I^(1-alpha) f at the interior
    nodes (centered differences).
    """
    f = w.grid.check_samples(f)
    j = w.rl_weights @ f
    return (j[2:] - j[:-2]) / (2 * w.grid.spacing)


def flux_divergence(f, w, left_flux=None):
    """
    Conservative divergence d/dx D^alpha f at the nodes.

    left_flux -- if not None, the prescribed value of -D^alpha f at
    x = 0, which replaces the value computed from the table.

    The control-volume sum of the result telescopes:
    grid.volumes @ result == q(1) - q(0).
    """
    q = caputo_derivative(f, w)
    if left_flux is not None:
        if not numpy.isfinite(left_flux):
            raise ValueError("left_flux must be finite, got %r" % (left_flux,))
        q[0] = -left_flux
    return w.divergence_weights @ q


def faces_to_nodes(q, grid):
    """
    Node values of a face-sampled quantity: averages of the two faces
    around each interior node, endpoint faces at both ends.
    """
    q = numpy.asarray(q, dtype=float)
    nodes = numpy.empty(grid.n_cells + 1)
    nodes[0] = q[0]
    nodes[-1] = q[-1]
    nodes[1:-1] = 0.5 * (q[1:-2] + q[2:-1])
    return nodes
