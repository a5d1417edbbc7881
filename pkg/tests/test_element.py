import numpy as np
import pytest

from vkctrl import element
from vkctrl.element import basis_values, gauss_rule, hermite1d, tabulate


def test_hermite_kronecker_endpoints():
    val0, d10, _ = hermite1d(0.0)
    val1, d11, _ = hermite1d(1.0)
    assert np.allclose(val0, [1, 0, 0, 0])
    assert np.allclose(val1, [0, 0, 1, 0])
    assert np.allclose(d10, [0, 1, 0, 0])
    assert np.allclose(d11, [0, 0, 0, 1])


def test_hermite_midpoint_values():
    val, _, _ = hermite1d(0.5)
    assert val[0] == pytest.approx(0.5)      # 1 - 3t^2 + 2t^3 at 1/2
    assert val[1] == pytest.approx(0.125)    # t - 2t^2 + t^3 at 1/2


def test_gauss_rule_small_orders():
    r1 = gauss_rule(1)
    assert r1.points[0] == pytest.approx([0.5, 0.5])
    assert r1.weights[0] == pytest.approx(1.0)
    r2 = gauss_rule(2)
    xs = np.unique(np.round(r2.points[:, 0], 14))
    assert xs == pytest.approx([0.5 - 1 / (2 * np.sqrt(3)), 0.5 + 1 / (2 * np.sqrt(3))])


def test_gauss_rule_weights_and_exactness():
    for n in (1, 2, 3, 5, 7, 12):
        r = gauss_rule(n)
        assert r.weights.sum() == pytest.approx(1.0, abs=1e-14)
        assert (r.weights > 0).all()
    r4 = gauss_rule(4)
    val = float(np.sum(r4.weights * r4.points[:, 0] ** 6))
    assert abs(val - 1.0 / 7.0) <= 1e-14


def test_gauss_rule_rejects_bad_order():
    for n in (0, 13, -2):
        with pytest.raises(ValueError):
            gauss_rule(n)


def test_shape_kronecker_property():
    corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    for a, (xi, eta) in enumerate(corners):
        functionals = np.stack([
            basis_values(xi, eta, 0, 0),
            basis_values(xi, eta, 1, 0),
            basis_values(xi, eta, 0, 1),
            basis_values(xi, eta, 1, 1),
        ])
        expected = np.zeros((4, 16))
        for k in range(4):
            expected[k, 4 * a + k] = 1.0
        assert np.allclose(functionals, expected, atol=1e-13)


def test_value_kind_partition_of_unity(rng):
    table = tabulate(gauss_rule(5))
    sums = table.val[0::4].sum(axis=0)
    assert np.allclose(sums, 1.0, atol=1e-14)
    pts = rng.random((2, 40))
    vals = basis_values(pts[0], pts[1], 0, 0)
    assert np.allclose(vals[0::4].sum(axis=0), 1.0, atol=1e-14)


def _interpolate_on_cell(fn_value, fn_dx, fn_dy, fn_dxy):
    """Local coefficients of the nodal interpolant on the unit cell."""
    corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    coeffs = np.empty(16)
    for a, (x, y) in enumerate(corners):
        coeffs[4 * a + 0] = fn_value(x, y)
        coeffs[4 * a + 1] = fn_dx(x, y)
        coeffs[4 * a + 2] = fn_dy(x, y)
        coeffs[4 * a + 3] = fn_dxy(x, y)
    return coeffs


def test_q3_reproduction():
    # p = x^3 y^3 lies in the local space and must be reproduced
    coeffs = _interpolate_on_cell(
        lambda x, y: x**3 * y**3,
        lambda x, y: 3 * x**2 * y**3,
        lambda x, y: x**3 * 3 * y**2,
        lambda x, y: 9 * x**2 * y**2,
    )
    rule = gauss_rule(5)
    table = tabulate(rule)
    vals = coeffs @ table.val
    exact = rule.points[:, 0] ** 3 * rule.points[:, 1] ** 3
    assert np.max(np.abs(vals - exact)) <= 1e-13


def test_quartic_not_reproduced():
    coeffs = _interpolate_on_cell(
        lambda x, y: x**4,
        lambda x, y: 4 * x**3,
        lambda x, y: 0.0,
        lambda x, y: 0.0,
    )
    rule = gauss_rule(5)
    table = tabulate(rule)
    vals = coeffs @ table.val
    exact = rule.points[:, 0] ** 4
    assert np.max(np.abs(vals - exact)) > 1e-4


def test_q3_reproduction_random_cubics(rng):
    rule = gauss_rule(6)
    table = tabulate(rule)
    for _ in range(6):
        c = rng.standard_normal((4, 4))

        def p(x, y, d=(0, 0)):
            # sum c[i,j] x^i y^j differentiated d[0] times in x, d[1] in y
            total = 0.0
            for i in range(4):
                for j in range(4):
                    fx, e = 1.0, i
                    for _ in range(d[0]):
                        fx, e = fx * e, e - 1
                    fy, g = 1.0, j
                    for _ in range(d[1]):
                        fy, g = fy * g, g - 1
                    if e < 0 or g < 0:
                        continue
                    total = total + c[i, j] * fx * fy * x**e * y**g
            return total

        coeffs = _interpolate_on_cell(
            lambda x, y: p(x, y),
            lambda x, y: p(x, y, (1, 0)),
            lambda x, y: p(x, y, (0, 1)),
            lambda x, y: p(x, y, (1, 1)),
        )
        vals = coeffs @ table.val
        exact = p(rule.points[:, 0], rule.points[:, 1])
        scale = 1.0 + np.max(np.abs(exact))
        assert np.max(np.abs(vals - exact)) <= 1e-12 * scale


def test_tabulated_derivatives_vs_fd(rng):
    """Tabulated derivative entries against centered differences."""
    rule = gauss_rule(3)
    table = tabulate(rule)
    h = 1e-4
    xi = rule.points[:, 0]
    eta = rule.points[:, 1]
    fd_dx = (basis_values(xi + h, eta) - basis_values(xi - h, eta)) / (2 * h)
    fd_dy = (basis_values(xi, eta + h) - basis_values(xi, eta - h)) / (2 * h)
    fd_dxx = (basis_values(xi + h, eta) - 2 * table.val + basis_values(xi - h, eta)) / h**2
    fd_dyy = (basis_values(xi, eta + h) - 2 * table.val + basis_values(xi, eta - h)) / h**2
    fd_dxy = (basis_values(xi + h, eta + h) - basis_values(xi + h, eta - h)
              - basis_values(xi - h, eta + h) + basis_values(xi - h, eta - h)) / (4 * h * h)
    assert np.max(np.abs(fd_dx - table.dx)) <= 1e-6
    assert np.max(np.abs(fd_dy - table.dy)) <= 1e-6
    assert np.max(np.abs(fd_dxx - table.dxx)) <= 1e-6
    assert np.max(np.abs(fd_dyy - table.dyy)) <= 1e-6
    assert np.max(np.abs(fd_dxy - table.dxy)) <= 1e-6


def test_physical_scaling_roundtrip():
    rule = gauss_rule(4)
    table = tabulate(rule)
    phys = table.scaled(0.25, 0.5)
    # slope-kind function carries its edge length: at the reference level the
    # dx-kind basis has unit x-slope, so the physical one must too
    assert np.allclose(phys.dx[1], table.dx[1], atol=1e-14)   # hx * (1/hx)
    assert np.allclose(phys.val[1], 0.25 * table.val[1], atol=1e-14)
    assert np.allclose(phys.val[3], 0.125 * table.val[3], atol=1e-14)


def test_interpolation_h2_rate(ex1):
    from vkctrl import assembly, convergence
    from vkctrl.mesh import build_mesh

    errs, hs = [], []
    for level in (1, 2, 3, 4):
        disc = assembly.Discretization(build_mesh("unit_square", level))
        f = assembly.interpolate_nodal(ex1.psi1, disc.mesh, disc.dofmap)
        pair = assembly.PairField(f, f.copy())
        errs.append(convergence.error_norm(disc, pair, (ex1.psi1, ex1.psi1), "h2semi"))
        hs.append(disc.mesh.h)
    rates = convergence.eoc(np.array(errs), np.array(hs))
    assert abs(rates[-1] - 2.0) <= 0.1
