"""Fast self-check properties behind the `verify` command.

Each property is a quick structural or consistency check (seconds, not
minutes): form symmetries, positivity probes, derivative consistency of
the linearization and of the reduced gradient, jet arithmetic against
finite differences, and the optimality conditions of a coarse control
solve.  Properties return (ok, detail) and never raise; an exception is
reported as a failure.
"""

import math

import numpy as np

from . import assembly, cases, convergence, jets, linalg, optimize, solvers
from .mesh import build_mesh, cells_in_omega


def _disc(level=2, domain="unit_square"):
    return assembly.Discretization(build_mesh(domain, level))


def _random_field(disc, seed, amplitude=1.0):
    rng = np.random.default_rng(seed)
    return assembly.ScalarField(disc.dofmap,
                                amplitude * rng.standard_normal(disc.n_free))


def _smooth_field(disc, seed):
    """Interpolant of a random smooth function vanishing at the boundary."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(3)

    def fn(x, y):
        jx, jy = jets.Jet4.variables(x, y)
        bubble = (jx * (1.0 - jx)) * (jy * (1.0 - jy))
        wave = jets.sin(jx * (math.pi * (1 + seed % 3))) * jets.cos(jy * 2.0)
        return bubble * bubble * (wave * c[0] + jx * jy * c[1] + c[2])

    return assembly.interpolate_nodal(fn, disc.mesh, disc.dofmap)


def check_a_symmetry():
    disc = _disc()
    a = disc.a_matrix
    gap = abs(a - a.T).max()
    tol = 1e-12 * abs(a).max()
    return gap <= tol, f"max|A - A^T| = {gap:.2e} (tol {tol:.2e})"


def check_a_spd():
    disc = _disc()
    a = disc.a_matrix
    linalg.factorize(a)
    rng = np.random.default_rng(7)
    quads = [float(x @ (a @ x)) for x in rng.standard_normal((20, disc.n_free))]
    ok = min(quads) > 0
    return ok, f"factorization ok, min x^T A x = {min(quads):.3e}"


def check_mass_spd():
    disc = _disc()
    m = disc.mass
    gap = abs(m - m.T).max()
    linalg.factorize(m)
    rng = np.random.default_rng(8)
    quads = [float(x @ (m @ x)) for x in rng.standard_normal((20, disc.n_free))]
    ok = gap <= 1e-12 * abs(m).max() and min(quads) > 0
    return ok, f"max|M - M^T| = {gap:.2e}, min x^T M x = {min(quads):.3e}"


def check_b_exchange_symmetry():
    disc = _disc()
    worst = 0.0
    for seed in range(5):
        eta = _smooth_field(disc, 3 * seed)
        chi = _smooth_field(disc, 3 * seed + 1)
        phi = _smooth_field(disc, 3 * seed + 2)
        v1 = assembly.eval_b(eta, chi, phi, disc.rule)
        v2 = assembly.eval_b(eta, phi, chi, disc.rule)
        worst = max(worst, abs(v1 - v2) / (1.0 + abs(v1)))
    return worst <= 1e-13, f"worst relative exchange gap {worst:.2e} (tol 1e-13)"


def check_b_full_symmetry():
    disc = _disc()
    worst = 0.0
    for seed in range(5):
        eta = _smooth_field(disc, 3 * seed)
        chi = _smooth_field(disc, 3 * seed + 1)
        phi = _smooth_field(disc, 3 * seed + 2)
        v1 = assembly.eval_b(eta, chi, phi, disc.rule)
        v2 = assembly.eval_b(chi, eta, phi, disc.rule)
        worst = max(worst, abs(v1 - v2) / (1.0 + abs(v1)))
    return worst <= 1e-11, f"worst relative full-symmetry gap {worst:.2e} (tol 1e-11)"


def check_bracket_identity():
    disc = _disc()
    worst = 0.0
    for seed in range(5):
        eta = _smooth_field(disc, 11 + 3 * seed)
        chi = _smooth_field(disc, 12 + 3 * seed)
        phi = _smooth_field(disc, 13 + 3 * seed)
        lhs, rhs = assembly.eval_bracket_identity(eta, chi, phi, disc.rule)
        worst = max(worst, abs(lhs - rhs) / (1.0 + abs(lhs)))
    return worst <= 1e-10, f"worst |lhs - rhs|/(1+|lhs|) = {worst:.2e} (tol 1e-10)"


def check_jacobian_fd():
    disc = _disc()
    psi = assembly.PairField(_smooth_field(disc, 21), _smooth_field(disc, 22))
    xi = assembly.PairField(_smooth_field(disc, 23), _smooth_field(disc, 24))
    jac = solvers.linearized_matrix(disc, psi) - disc.a_block
    jx = jac @ xi.vector()

    def residual_b(vec):
        pair = assembly.PairField.from_vector(disc.dofmap, vec)
        b1, b2 = assembly.b_residual_vectors(pair, disc.mesh, disc.dofmap, disc.rule)
        return np.concatenate([b1, b2])

    errs = []
    for eps in (1e-3, 1e-4):
        fd = (residual_b(psi.vector() + eps * xi.vector())
              - residual_b(psi.vector() - eps * xi.vector())) / (2 * eps)
        errs.append(np.linalg.norm(fd - jx))
    order = math.log(errs[0] / errs[1]) / math.log(10.0)
    return order >= 1.9, f"observed FD order {order:.3f} (need >= 1.9)"


def check_jet_fd():
    worst = _jet_fd_worst()
    return worst <= 1e-5, f"worst relative derivative error {worst:.2e} (tol 1e-5)"


def _jet_fd_worst():
    rng = np.random.default_rng(5)

    def lib(x, y):
        jx, jy = jets.Jet4.variables(x, y)
        r2 = jx * jx + jy * jy + 0.5
        return [
            jets.sin(jx * 2.0) * jets.cos(jy * 3.0),
            jets.exp(jx * 0.3 + jy * 0.2),
            jets.power(r2, 0.75),
            jets.log(r2) * jx,
            (jx * jx - 1.0) * (jy * jy - 1.0) * jets.sin(jx * jy),
        ]

    worst = 0.0
    pts = rng.uniform(0.2, 0.8, size=(6, 2))
    for x0, y0 in pts:
        jets_here = lib(np.array(x0), np.array(y0))
        for k, jet in enumerate(jets_here):
            def val(x, y, k=k):
                return float(lib(np.array(x), np.array(y))[k].value)
            worst = max(worst, _fd_jet_error(val, jet, x0, y0))
    return worst


def _fd_jet_error(val, jet, x0, y0, h=1e-3):
    def rich(f):
        return (4.0 * f(h / 2) - f(h)) / 3.0

    checks = [
        (float(jet.dx), rich(lambda s: (val(x0 + s, y0) - val(x0 - s, y0)) / (2 * s))),
        (float(jet.dy), rich(lambda s: (val(x0, y0 + s) - val(x0, y0 - s)) / (2 * s))),
        (float(jet.dxx), rich(lambda s: (val(x0 + s, y0) - 2 * val(x0, y0)
                                         + val(x0 - s, y0)) / s**2)),
        (float(jet.dyy), rich(lambda s: (val(x0, y0 + s) - 2 * val(x0, y0)
                                         + val(x0, y0 - s)) / s**2)),
        (float(jet.dxy), rich(lambda s: (val(x0 + s, y0 + s) - val(x0 + s, y0 - s)
                                         - val(x0 - s, y0 + s)
                                         + val(x0 - s, y0 - s)) / (4 * s * s))),
    ]
    return max(abs(a - b) / (1.0 + abs(b)) for a, b in checks)


def check_strong_residual():
    worst = 0.0
    rng = np.random.default_rng(17)
    for name in ("ex1", "ex2"):
        case = cases.make_case(name)
        pts = rng.uniform(0.15, 0.85, size=(40, 2))  # inside both domains
        x, y = pts[:, 0], pts[:, 1]
        src = cases.sources_and_observations(case, x, y)
        p1 = case.psi1(x, y)
        p2 = case.psi2(x, y)
        t1 = case.theta1(x, y)
        t2 = case.theta2(x, y)
        scale = 1.0 + np.abs(p1.biharmonic())
        r1 = p1.biharmonic() - jets.bracket(p1, p2) - src["f"] - src["ubar"]
        r2 = p2.biharmonic() + 0.5 * jets.bracket(p1, p1) - src["ftilde"]
        r3 = (t1.biharmonic() - jets.bracket(p2, t1) + jets.bracket(p1, t2)
              - (p1.value - src["psi1d"]))
        r4 = t2.biharmonic() - jets.bracket(p1, t1) - (p2.value - src["psi2d"])
        for r in (r1, r2, r3, r4):
            worst = max(worst, float(np.max(np.abs(r) / scale)))
    return worst <= 1e-9, f"worst scaled strong residual {worst:.2e} (tol 1e-9)"


def check_gradient_fd():
    disc = _disc(level=1)
    case = cases.make_case("ex1")
    src = optimize.frozen_case_sources(disc, case)
    bounds = optimize.Bounds.from_case(case)
    cells = cells_in_omega(disc.mesh)
    base = optimize.ControlField.constant(-120.0, cells, bounds)
    fixed = solvers.state_load_vector(disc, f=src["f"], ftilde=src["ftilde"])
    psid = (src["psi1d"], src["psi2d"])

    def reduced_cost(vals):
        u = optimize.ControlField(vals, cells, bounds)
        psi, _ = solvers.solve_state(disc, u=u, fixed_load=fixed)
        return optimize.cost(disc, psi, u, psid)

    psi, _ = solvers.solve_state(disc, u=base, fixed_load=fixed)
    theta = solvers.solve_adjoint(disc, psi, psid)
    grad = optimize.reduced_gradient(disc, base, theta)

    cell = 5
    errs = []
    for eps in (1e-3, 1e-4):
        vp = base.values.copy()
        vm = base.values.copy()
        vp[cell] += eps
        vm[cell] -= eps
        fd = (reduced_cost(vp) - reduced_cost(vm)) / (2 * eps)
        errs.append(abs(fd - grad[cell]))
    order = math.log(errs[0] / errs[1]) / math.log(10.0)
    ok = order >= 1.9 or errs[1] <= 1e-12 * (1 + abs(grad[cell]))
    return ok, f"FD order {order:.3f}, gaps {errs[0]:.2e} -> {errs[1]:.2e}"


def check_projection_stationarity():
    disc = _disc(level=1)
    case = cases.make_case("ex1")
    sol = optimize.solve_case(disc, case)
    means = optimize.cell_mean_adjoint(disc, sol.adjoint, sol.control.cells)
    bounds = sol.control.bounds
    proj = np.clip(-means / bounds.alpha, bounds.lower, bounds.upper)
    gap = float(np.max(np.abs(sol.control.values - proj)))
    # sign conditions: alpha*u + mean(theta1) >= 0 at the lower bound,
    # <= 0 at the upper bound, ~0 on inactive cells
    d = bounds.alpha * sol.control.values + means
    lower = sol.control.values <= bounds.lower + 1e-12
    upper = sol.control.values >= bounds.upper - 1e-12
    inactive = ~(lower | upper)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(means))))
    signs_ok = (np.all(d[lower] >= -tol) and np.all(d[upper] <= tol)
                and np.all(np.abs(d[inactive]) <= tol))
    ok = gap <= 1e-9 and signs_ok
    return ok, f"projection gap {gap:.2e}, sign conditions {'ok' if signs_ok else 'VIOLATED'}"


def check_interpolation_rate():
    case = cases.make_case("ex1")
    errs, hs = [], []
    for level in (1, 2, 3):
        disc = _disc(level=level)
        f = assembly.interpolate_nodal(case.psi1, disc.mesh, disc.dofmap)
        pair = assembly.PairField(f, f.copy())
        errs.append(convergence.error_norm(disc, pair, (case.psi1, case.psi1), "h2semi"))
        hs.append(disc.mesh.h)
    rate = convergence.eoc(np.array(errs), np.array(hs))[-1]
    return abs(rate - 2.0) <= 0.1, f"interpolation H2 rate {rate:.3f} (expect 2.0 +- 0.1)"


PROPERTIES = (
    ("a-symmetry", check_a_symmetry),
    ("a-spd", check_a_spd),
    ("mass-spd", check_mass_spd),
    ("b-exchange-symmetry", check_b_exchange_symmetry),
    ("b-full-symmetry", check_b_full_symmetry),
    ("bracket-identity", check_bracket_identity),
    ("jacobian-fd", check_jacobian_fd),
    ("jet-fd", check_jet_fd),
    ("strong-residual", check_strong_residual),
    ("interpolation-rate", check_interpolation_rate),
    ("gradient-fd", check_gradient_fd),
    ("projection-stationarity", check_projection_stationarity),
)


def property_names():
    return [name for name, _ in PROPERTIES]


def run_property(name):
    """Run one property by name; returns (ok, detail)."""
    fn = dict(PROPERTIES)[name]
    try:
        return fn()
    except Exception as err:  # report, never crash the suite
        return False, f"raised {type(err).__name__}: {err}"


def run_all(report=print):
    """Run every property; returns True when all pass."""
    all_ok = True
    for name, _ in PROPERTIES:
        ok, detail = run_property(name)
        all_ok &= ok
        report(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return all_ok
