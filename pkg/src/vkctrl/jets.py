"""Truncated bivariate Taylor (jet) arithmetic to total degree 4.

A Jet4 stores the 15 scaled Taylor coefficients

    c[(i,j)] = (d^{i+j} f / dx^i dy^j) / (i! j!),   i + j <= 4,

of a scalar function at one point or at an array of points; the
coefficient axis comes first so that all operations broadcast over
trailing point axes.  Degree 4 is the smallest order that reaches the
bilaplacian and the von Karman bracket of an exact field, which is what
the manufactured sources and observations need.
"""

import math

import numpy as np

# (i, j) exponent pairs ordered by total degree, x-degree descending.
MONOMIALS = [
    (0, 0),
    (1, 0), (0, 1),
    (2, 0), (1, 1), (0, 2),
    (3, 0), (2, 1), (1, 2), (0, 3),
    (4, 0), (3, 1), (2, 2), (1, 3), (0, 4),
]
NCOEF = len(MONOMIALS)
IDX = {m: k for k, m in enumerate(MONOMIALS)}

# Precomputed truncated product table: for each output slot the list of
# (left, right) coefficient index pairs whose exponents add up to it.
_PRODUCTS = [[] for _ in MONOMIALS]
for _a, (_i1, _j1) in enumerate(MONOMIALS):
    for _b, (_i2, _j2) in enumerate(MONOMIALS):
        _i, _j = _i1 + _i2, _j1 + _j2
        if _i + _j <= 4:
            _PRODUCTS[IDX[(_i, _j)]].append((_a, _b))


def _mul_coeffs(a, b):
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for k, pairs in enumerate(_PRODUCTS):
        for l, r in pairs:
            out[k] += a[l] * b[r]
    return out


class Jet4:
    """Degree-4 jet of a scalar function of (x, y)."""

    __slots__ = ("c",)

    def __init__(self, c):
        c = np.asarray(c, dtype=float)
        if c.shape[0] != NCOEF:
            raise ValueError(f"jet needs {NCOEF} leading coefficients, got shape {c.shape}")
        self.c = c

    @classmethod
    def const(cls, value, shape=()):
        c = np.zeros((NCOEF,) + tuple(shape))
        c[0] = value
        return cls(c)

    @classmethod
    def variables(cls, x, y):
        """Jets of the coordinate functions at points (x, y)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        cx = np.zeros((NCOEF,) + shape)
        cy = np.zeros((NCOEF,) + shape)
        cx[0] = x
        cx[IDX[(1, 0)]] = 1.0
        cy[0] = y
        cy[IDX[(0, 1)]] = 1.0
        return cls(cx), cls(cy)

    def deriv(self, i, j):
        """Unscaled partial derivative d^{i+j}/dx^i dy^j at the point(s)."""
        return self.c[IDX[(i, j)]] * (math.factorial(i) * math.factorial(j))

    @property
    def value(self):
        return self.c[0]

    @property
    def dx(self):
        return self.c[IDX[(1, 0)]]

    @property
    def dy(self):
        return self.c[IDX[(0, 1)]]

    @property
    def dxx(self):
        return 2.0 * self.c[IDX[(2, 0)]]

    @property
    def dxy(self):
        return self.c[IDX[(1, 1)]]

    @property
    def dyy(self):
        return 2.0 * self.c[IDX[(0, 2)]]

    def biharmonic(self):
        """f_xxxx + 2 f_xxyy + f_yyyy."""
        return (24.0 * self.c[IDX[(4, 0)]]
                + 8.0 * self.c[IDX[(2, 2)]]
                + 24.0 * self.c[IDX[(0, 4)]])

    def __add__(self, other):
        if isinstance(other, Jet4):
            return Jet4(self.c + other.c)
        c = self.c.copy()
        c[0] = c[0] + other
        return Jet4(c)

    __radd__ = __add__

    def __neg__(self):
        return Jet4(-self.c)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet4) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet4):
            return Jet4(_mul_coeffs(self.c, other.c))
        return Jet4(self.c * np.asarray(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet4):
            return self * reciprocal(other)
        return Jet4(self.c / np.asarray(other))


def compose(g, outer_derivs):
    """Jet of f(g) from the jet of g and f^{(0..4)} at g's value."""
    ghat = g.c.copy()
    ghat[0] = 0.0
    out = np.zeros_like(g.c + outer_derivs[0])
    out[0] = outer_derivs[0]
    power = ghat
    fact = 1.0
    for k in range(1, 5):
        fact *= k
        out = out + (outer_derivs[k] / fact) * power
        if k < 4:
            power = _mul_coeffs(power, ghat)
    return Jet4(out)


def sin(g):
    v = g.c[0]
    s, co = np.sin(v), np.cos(v)
    return compose(g, [s, co, -s, -co, s])


def cos(g):
    v = g.c[0]
    s, co = np.sin(v), np.cos(v)
    return compose(g, [co, -s, -co, s, co])


def exp(g):
    e = np.exp(g.c[0])
    return compose(g, [e, e, e, e, e])


def log(g):
    v = g.c[0]
    if np.any(v <= 0.0):
        raise ValueError("log of a jet requires a strictly positive value")
    return compose(g, [np.log(v), 1.0 / v, -1.0 / v**2, 2.0 / v**3, -6.0 / v**4])


def power(g, p):
    """g**p for real exponent p; the base value must be strictly positive."""
    v = g.c[0]
    if np.any(v <= 0.0):
        raise ValueError("power of a jet requires a strictly positive base value")
    derivs = []
    coef = 1.0
    for k in range(5):
        derivs.append(coef * v ** (p - k))
        coef *= p - k
    return compose(g, derivs)


def reciprocal(g):
    v = g.c[0]
    if np.any(v == 0.0):
        raise ValueError("reciprocal of a jet with zero value")
    return compose(g, [1.0 / v, -1.0 / v**2, 2.0 / v**3, -6.0 / v**4, 24.0 / v**5])


def atan2(y, x):
    """Jet of the polar angle; the expansion point must not be the origin.

    The increment relative to the base angle is computed from
    atan(u/v) with u = x0*y - y0*x and v = x0*x + y0*y, which is free of
    branch-cut issues because u vanishes at the expansion point.
    """
    x0, y0 = x.c[0], y.c[0]
    if np.any(x0 * x0 + y0 * y0 == 0.0):
        raise ValueError("atan2 jet undefined at the origin")
    u = y * x0 - x * y0
    v = x * x0 + y * y0
    w = u * reciprocal(v)
    inc = compose(w, [0.0, 1.0, 0.0, -2.0, 0.0])  # atan about 0
    return inc + np.arctan2(y0, x0)


def bracket(a, b):
    """Pointwise von Karman bracket [a,b] = a_xx b_yy + a_yy b_xx - 2 a_xy b_xy."""
    return a.dxx * b.dyy + a.dyy * b.dxx - 2.0 * a.dxy * b.dxy
