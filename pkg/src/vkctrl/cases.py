"""Manufactured benchmark cases: exact fields, sources and observations.

Case "ex1" (unit square, smooth):

    psi1 = psi2 = sin^2(pi x) sin^2(pi y)
    theta1 = theta2 = x^2 y^2 (1-x)^2 (1-y)^2
    ubar = clamp(-theta1 / alpha, -750, -50),  alpha = 1e-5

Case "ex2" (L-shaped domain, corner singularity): all four fields equal

    (x^2 - 1)^2 (y^2 - 1)^2 r^(1+g) G(t)

in polar coordinates (r, t) about the re-entrant corner, where g is the
root of sin^2(g w) = g^2 sin^2(w) for the opening angle w = 3pi/2 and G
combines sin/cos of (g -+ 1)t; ubar = clamp(-theta1/alpha, -600, -50)
with alpha = 1e-3.

Sources and observations are reverse-engineered so the exact fields
satisfy the full optimality system:

    f      = bih(psi1) - [psi1, psi2] - ubar
    ftilde = bih(psi2) + 1/2 [psi1, psi1]
    psi1d  = psi1 - bih(theta1) + [psi2, theta1] - [psi1, theta2]
    psi2d  = psi2 - bih(theta2) + [psi1, theta1]

(the bracket terms in psi1d cancel when psi1 = psi2 and theta1 = theta2,
but the general form is implemented).  All derivatives through order 4
come from jet arithmetic, never from hand-derived closed forms.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import jets
from .jets import Jet4
from .mesh import Domain

FIELD_NAMES = ("psi1", "psi2", "theta1", "theta2")


def gamma_root(omega_angle, lo=0.5, hi=0.6, tol=1e-12):
    """Root of sin^2(g*w) = g^2 sin^2(w) in (lo, hi) by bisection."""

    def residual(g):
        return math.sin(g * omega_angle) ** 2 - g * g * math.sin(omega_angle) ** 2

    flo, fhi = residual(lo), residual(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise ValueError(f"no sign change of the root equation on [{lo}, {hi}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = residual(mid)
        if fmid == 0.0 or hi - lo < tol:
            return mid
        if flo * fmid < 0.0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


@dataclass
class CaseSpec:
    name: str
    domain: Domain
    alpha: float
    lower: float
    upper: float
    psi1: Callable
    psi2: Callable
    theta1: Callable
    theta2: Callable
    gamma: float = None
    omega_angle: float = None

    def field(self, name):
        if name not in FIELD_NAMES:
            raise KeyError(f"unknown field {name!r}, expected one of {FIELD_NAMES}")
        return getattr(self, name)


def _ex1_psi(x, y):
    jx, jy = Jet4.variables(x, y)
    sx = jets.sin(jx * math.pi)
    sy = jets.sin(jy * math.pi)
    return (sx * sx) * (sy * sy)


def _ex1_theta(x, y):
    jx, jy = Jet4.variables(x, y)
    gx = jx * (1.0 - jx)
    gy = jy * (1.0 - jy)
    return (gx * gx) * (gy * gy)


def _make_ex2_field(gamma, omega_angle):
    gm, gp = gamma - 1.0, gamma + 1.0
    k1 = math.sin(gm * omega_angle) / gm - math.sin(gp * omega_angle) / gp
    k2 = math.cos(gm * omega_angle) - math.cos(gp * omega_angle)

    def fn(x, y):
        jx, jy = Jet4.variables(x, y)
        r2 = jx * jx + jy * jy
        rad = jets.power(r2, 0.5 * (1.0 + gamma))
        theta = jets.atan2(jy, jx)
        # lift the atan2 branch so the angle is continuous on [0, 3pi/2]
        shift = np.where(theta.value < 0.0, 2.0 * math.pi, 0.0)
        theta = theta + shift
        ang = (k1 * (jets.cos(theta * gm) - jets.cos(theta * gp))
               - k2 * (jets.sin(theta * gm) * (1.0 / gm)
                       - jets.sin(theta * gp) * (1.0 / gp)))
        qx = (jx * jx - 1.0)
        qy = (jy * jy - 1.0)
        cutoff = (qx * qx) * (qy * qy)
        return cutoff * rad * ang

    return fn


def make_case(name):
    name = name.lower()
    if name == "ex1":
        return CaseSpec(
            name="ex1",
            domain=Domain.UNIT_SQUARE,
            alpha=1e-5,
            lower=-750.0,
            upper=-50.0,
            psi1=_ex1_psi,
            psi2=_ex1_psi,
            theta1=_ex1_theta,
            theta2=_ex1_theta,
        )
    if name == "ex2":
        omega_angle = 1.5 * math.pi
        gamma = gamma_root(omega_angle)
        fn = _make_ex2_field(gamma, omega_angle)
        return CaseSpec(
            name="ex2",
            domain=Domain.L_SHAPE,
            alpha=1e-3,
            lower=-600.0,
            upper=-50.0,
            psi1=fn,
            psi2=fn,
            theta1=fn,
            theta2=fn,
            gamma=gamma,
            omega_angle=omega_angle,
        )
    raise ValueError(f"unknown case {name!r} (available: ex1, ex2)")


def exact_eval(case, field, x, y):
    """Order-4 jet of one exact field at the given points."""
    return case.field(field)(x, y)


def exact_control(case, x, y):
    """ubar(x) = clamp(-theta1(x)/alpha) onto the control bounds."""
    t1 = case.theta1(x, y)
    return np.clip(-t1.value / case.alpha, case.lower, case.upper)


def sources_and_observations(case, x, y):
    """Values of (f, ftilde, psi1d, psi2d, ubar) at the given points."""
    p1 = case.psi1(x, y)
    p2 = case.psi2(x, y)
    t1 = case.theta1(x, y)
    t2 = case.theta2(x, y)
    ubar = np.clip(-t1.value / case.alpha, case.lower, case.upper)
    f = p1.biharmonic() - jets.bracket(p1, p2) - ubar
    ftilde = p2.biharmonic() + 0.5 * jets.bracket(p1, p1)
    psi1d = p1.value - t1.biharmonic() + jets.bracket(p2, t1) - jets.bracket(p1, t2)
    psi2d = p2.value - t2.biharmonic() + jets.bracket(p1, t1)
    return {"f": f, "ftilde": ftilde, "psi1d": psi1d, "psi2d": psi2d, "ubar": ubar}


def source_functions(case):
    """Point-evaluable (f, ftilde, psi1d, psi2d, ubar) closures for a case."""

    def make(key):
        def fn(x, y):
            return sources_and_observations(case, x, y)[key]
        return fn

    return {key: make(key) for key in ("f", "ftilde", "psi1d", "psi2d", "ubar")}
