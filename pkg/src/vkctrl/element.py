"""Bogner-Fox-Schmit bicubic Hermite element on the reference cell [0,1]^2.

The element carries 4 degrees of freedom per corner node: value, d/dx,
d/dy and the mixed derivative d2/dxdy.  Shape functions are tensor
products of the 1D cubic Hermite basis; tabulation stores reference
values and derivatives at the quadrature points.  Mapping to a physical
cell of edge lengths (hx, hy) scales the slope-type functions by hx, hy
or hx*hy and divides each x/y differentiation by hx/hy.

Local ordering: nodes counterclockwise starting at the lower-left
corner (LL, LR, UR, UL), 4 consecutive DOFs per node in the order
(v, v_x, v_y, v_xy), 16 local functions in total.
"""

from dataclasses import dataclass

import numpy as np

#: per local node: is the node on the right edge in x / top edge in y
_NODE_XSIDE = (0, 1, 1, 0)
_NODE_YSIDE = (0, 0, 1, 1)

#: per DOF kind (v, v_x, v_y, v_xy): does the 1D factor use the slope basis
_KIND_SLOPE_X = (False, True, False, True)
_KIND_SLOPE_Y = (False, False, True, True)


def hermite1d(t):
    """Cubic Hermite basis on [0,1] with values, first and second derivatives.

    Returns three arrays of shape (4,) + shape(t) ordered
    (value-left, slope-left, value-right, slope-right), so that
    value-left(0) = 1, slope-left'(0) = 1, value-right(1) = 1,
    slope-right'(1) = 1 and the complementary nodal data vanish.
    """
    t = np.asarray(t, dtype=float)
    t2 = t * t
    t3 = t2 * t
    val = np.stack([
        1.0 - 3.0 * t2 + 2.0 * t3,
        t - 2.0 * t2 + t3,
        3.0 * t2 - 2.0 * t3,
        -t2 + t3,
    ])
    d1 = np.stack([
        -6.0 * t + 6.0 * t2,
        1.0 - 4.0 * t + 3.0 * t2,
        6.0 * t - 6.0 * t2,
        -2.0 * t + 3.0 * t2,
    ])
    d2 = np.stack([
        -6.0 + 12.0 * t,
        -4.0 + 6.0 * t,
        6.0 - 12.0 * t,
        -2.0 + 6.0 * t,
    ])
    return val, d1, d2


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor-product Gauss-Legendre rule on the reference cell [0,1]^2."""

    n: int
    points: np.ndarray   # (n*n, 2)
    weights: np.ndarray  # (n*n,), sums to 1

    @property
    def npoints(self):
        return self.weights.size


def gauss_rule(n):
    """Gauss-Legendre tensor rule with n points per direction (1 <= n <= 12).

    Exact for tensor polynomials of per-direction degree <= 2n - 1.
    """
    if not 1 <= n <= 12:
        raise ValueError(f"quadrature order must be in [1, 12], got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    xi, eta = np.meshgrid(x, x, indexing="ij")
    wx, wy = np.meshgrid(w, w, indexing="ij")
    points = np.column_stack([xi.ravel(), eta.ravel()])
    weights = (wx * wy).ravel()
    return QuadratureRule(n=n, points=points, weights=weights)


def _basis_1d_factors(t, order):
    """1D Hermite factor of the requested derivative order at points t."""
    return hermite1d(t)[order]


def basis_values(xi, eta, dx_order=0, dy_order=0):
    """Reference values of the 16 shape functions, differentiated.

    Parameters
    ----------
    xi, eta : arrays of reference coordinates in [0, 1]
    dx_order, dy_order : 0, 1 or 2, derivative order per direction

    Returns
    -------
    (16,) + shape array; function index runs over 4 nodes x 4 DOF kinds.
    """
    hx = _basis_1d_factors(np.asarray(xi, dtype=float), dx_order)
    hy = _basis_1d_factors(np.asarray(eta, dtype=float), dy_order)
    out = np.empty((16,) + np.broadcast_shapes(hx.shape[1:], hy.shape[1:]))
    for a in range(4):
        ix, iy = _NODE_XSIDE[a], _NODE_YSIDE[a]
        for k in range(4):
            fx = hx[2 * ix + (1 if _KIND_SLOPE_X[k] else 0)]
            fy = hy[2 * iy + (1 if _KIND_SLOPE_Y[k] else 0)]
            out[4 * a + k] = fx * fy
    return out


@dataclass(frozen=True)
class ShapeTable:
    """Tabulated reference shape data at the points of one quadrature rule."""

    rule: QuadratureRule
    val: np.ndarray    # (16, nq)
    dx: np.ndarray
    dy: np.ndarray
    dxx: np.ndarray
    dxy: np.ndarray
    dyy: np.ndarray
    kinds: np.ndarray  # (16,), 0..3 = (v, v_x, v_y, v_xy)

    def scaled(self, hx, hy):
        """Physical-cell tables for a rectangle with edges (hx, hy).

        Slope-kind functions pick up factors hx, hy, hx*hy so that the
        coefficients keep the meaning of physical nodal derivatives;
        each differentiation divides by the matching edge length.
        """
        sx = np.array([1 if _KIND_SLOPE_X[k] else 0 for k in self.kinds])
        sy = np.array([1 if _KIND_SLOPE_Y[k] else 0 for k in self.kinds])
        f = (hx ** sx * hy ** sy)[:, None]
        return PhysicalTable(
            val=self.val * f,
            dx=self.dx * f / hx,
            dy=self.dy * f / hy,
            dxx=self.dxx * f / hx**2,
            dxy=self.dxy * f / (hx * hy),
            dyy=self.dyy * f / hy**2,
        )


@dataclass(frozen=True)
class PhysicalTable:
    val: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    dxx: np.ndarray
    dxy: np.ndarray
    dyy: np.ndarray


def tabulate(rule):
    """Tabulate all 16 shape functions and derivatives at the rule points."""
    xi = rule.points[:, 0]
    eta = rule.points[:, 1]
    return ShapeTable(
        rule=rule,
        val=basis_values(xi, eta, 0, 0),
        dx=basis_values(xi, eta, 1, 0),
        dy=basis_values(xi, eta, 0, 1),
        dxx=basis_values(xi, eta, 2, 0),
        dxy=basis_values(xi, eta, 1, 1),
        dyy=basis_values(xi, eta, 0, 2),
        kinds=np.tile(np.arange(4), 4),
    )
