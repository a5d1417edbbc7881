"""Richardson-extrapolated central-difference oracles for jet testing.

Steps are chosen per derivative order: the spec step 1e-3 is fine for
first and second derivatives, but fourth-order differences at that step
drown in roundoff, so higher orders use larger, balanced steps.
"""

import numpy as np

_STEPS = {1: 1e-3, 2: 1e-3, 3: 4e-3, 4: 2e-2}


def _diff_1d(f, order, h):
    """Central difference of the given order as a stencil on f(t)."""
    if order == 0:
        return f(0.0)
    if order == 1:
        return (f(h) - f(-h)) / (2 * h)
    if order == 2:
        return (f(h) - 2 * f(0.0) + f(-h)) / h**2
    if order == 3:
        return (f(2 * h) - 2 * f(h) + 2 * f(-h) - f(-2 * h)) / (2 * h**3)
    if order == 4:
        return (f(2 * h) - 4 * f(h) + 6 * f(0.0) + f(-2 * h) - 4 * f(-h)) / h**4
    raise ValueError(order)


def mixed_partial(fn, x0, y0, i, j):
    """Richardson-extrapolated d^{i+j} fn / dx^i dy^j at (x0, y0)."""
    h = _STEPS[max(i + j, 1)]

    def at_step(step):
        def fx(dx):
            def fy(dy):
                return fn(x0 + dx, y0 + dy)
            return _diff_1d(fy, j, step)
        return _diff_1d(fx, i, step)

    coarse = at_step(h)
    fine = at_step(h / 2)
    return (4.0 * fine - coarse) / 3.0


def jet_vs_fd(fn_jet, fn_val, x0, y0, orders=None):
    """Worst relative error of jet coefficients against FD derivatives.

    fn_jet(x, y) -> Jet4 at scalar points; fn_val(x, y) -> float.
    """
    from vkctrl.jets import MONOMIALS

    worst = 0.0
    jet = fn_jet(np.asarray(x0), np.asarray(y0))
    for i, j in MONOMIALS:
        if orders is not None and i + j not in orders:
            continue
        fd = mixed_partial(fn_val, x0, y0, i, j)
        exact = float(jet.deriv(i, j))
        worst = max(worst, abs(exact - fd) / (1.0 + abs(fd)))
    return worst
