import math

import numpy as np
import pytest

from vkctrl import jets
from vkctrl.jets import IDX, Jet4

from fd_oracles import jet_vs_fd


def test_constant_jet():
    c = Jet4.const(3.5)
    assert c.value == 3.5
    assert np.all(c.c[1:] == 0.0)


def test_sin_jet_at_zero():
    x, _ = Jet4.variables(np.array(0.0), np.array(0.0))
    s = jets.sin(x)
    along_x = [float(s.c[IDX[(i, 0)]]) for i in range(5)]
    assert along_x == pytest.approx([0.0, 1.0, 0.0, -1.0 / 6.0, 0.0], abs=1e-15)


def test_product_jet():
    x, y = Jet4.variables(np.array(2.0), np.array(3.0))
    p = x * y
    assert float(p.value) == 6.0
    assert float(p.dx) == 3.0
    assert float(p.dy) == 2.0
    assert float(p.dxy) == 1.0
    for i, j in ((2, 0), (0, 2), (3, 0), (2, 2), (0, 4)):
        assert float(p.deriv(i, j)) == 0.0


def test_power_jet_vs_fd():
    def fn_jet(x, y):
        jx, jy = Jet4.variables(x, y)
        return jets.power(jx * jx + jy * jy, 0.75)

    def fn_val(x, y):
        return (x * x + y * y) ** 0.75

    worst = jet_vs_fd(fn_jet, fn_val, 0.6, 0.8)
    assert worst <= 1e-5


def _library():
    """Ten composite functions with their plain evaluators."""

    def pair(build, val):
        def fn_jet(x, y):
            jx, jy = Jet4.variables(x, y)
            return build(jx, jy)
        return fn_jet, val

    return [
        pair(lambda x, y: jets.sin(x * 2.0) * jets.cos(y * 3.0),
             lambda x, y: math.sin(2 * x) * math.cos(3 * y)),
        pair(lambda x, y: jets.exp(x * 0.4 - y * 0.3),
             lambda x, y: math.exp(0.4 * x - 0.3 * y)),
        pair(lambda x, y: jets.power(x * x + y * y + 0.3, 1.5),
             lambda x, y: (x * x + y * y + 0.3) ** 1.5),
        pair(lambda x, y: jets.log(x * x + y * y + 0.5) * x,
             lambda x, y: math.log(x * x + y * y + 0.5) * x),
        pair(lambda x, y: (x * x - 1.0) * (y * y - 1.0) * jets.sin(x * y),
             lambda x, y: (x * x - 1) * (y * y - 1) * math.sin(x * y)),
        pair(lambda x, y: jets.atan2(y, x) * 0.5 + x * y,
             lambda x, y: 0.5 * math.atan2(y, x) + x * y),
        pair(lambda x, y: jets.power(x * x + y * y, 0.5 * (1 + 0.544)),
             lambda x, y: (x * x + y * y) ** (0.5 * 1.544)),
        pair(lambda x, y: jets.sin(jets.cos(x) * y),
             lambda x, y: math.sin(math.cos(x) * y)),
        pair(lambda x, y: (x * y + 2.0) / (x * x + 1.0),
             lambda x, y: (x * y + 2) / (x * x + 1)),
        pair(lambda x, y: jets.exp(jets.sin(x) + jets.cos(y * 2.0)),
             lambda x, y: math.exp(math.sin(x) + math.cos(2 * y))),
    ]


def test_composite_library_vs_fd(rng):
    pts = rng.uniform(0.25, 0.85, size=(4, 2))
    for fn_jet, fn_val in _library():
        for x0, y0 in pts:
            assert jet_vs_fd(fn_jet, fn_val, x0, y0) <= 1e-5


def test_log_rejects_nonpositive():
    x, _ = Jet4.variables(np.array(-0.1), np.array(0.0))
    with pytest.raises(ValueError):
        jets.log(x)
    with pytest.raises(ValueError):
        jets.power(x, 0.5)


def test_atan2_rejects_origin():
    x, y = Jet4.variables(np.array(0.0), np.array(0.0))
    with pytest.raises(ValueError):
        jets.atan2(y, x)


def test_atan2_branch_values():
    for x0, y0 in ((1.0, 0.5), (-1.0, 0.5), (-1.0, -0.5), (0.3, -0.8)):
        x, y = Jet4.variables(np.array(x0), np.array(y0))
        t = jets.atan2(y, x)
        assert float(t.value) == pytest.approx(math.atan2(y0, x0), abs=1e-15)


def test_biharmonic_of_quartic():
    # f = x^4 + y^4 + x^2 y^2: bih = 24 + 24 + 8
    x, y = Jet4.variables(np.array(0.3), np.array(0.7))
    f = x * x * x * x + y * y * y * y + (x * x) * (y * y)
    assert float(f.biharmonic()) == pytest.approx(56.0, abs=1e-12)


def test_bracket_of_squares():
    # [x^2, y^2] = 4 everywhere
    x, y = Jet4.variables(np.linspace(0, 1, 5), np.linspace(0, 1, 5))
    val = jets.bracket(x * x, y * y)
    assert np.allclose(val, 4.0, atol=1e-14)


def test_jet_broadcasting():
    x, y = Jet4.variables(np.ones((3, 4)), np.zeros((3, 4)))
    s = jets.sin(x * math.pi) + y
    assert s.value.shape == (3, 4)
    assert np.allclose(s.value, math.sin(math.pi), atol=1e-15)
