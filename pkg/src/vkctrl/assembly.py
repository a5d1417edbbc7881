"""DOF management, clamped boundary conditions and form assembly.

Every node carries 4 DOFs in the order (v, v_x, v_y, v_xy).  Clamping
v = dv/dn = 0 on an axis-aligned edge forces all four nodal values at
boundary nodes to zero, so the constrained set is exactly the boundary
nodes times 4; constrained DOFs are eliminated, not penalized.

Forms on V = H^2_0:

    a(eta, chi)      = int D^2 eta : D^2 chi dx
    b(eta, chi, phi) = 1/2 int cof(D^2 eta) D chi . D phi dx

and on pairs V x V:

    A(L, P)    = a(l1, p1) + a(l2, p2)
    B(X, L, P) = b(x1, l2, p1) + b(x2, l1, p1) - b(x1, l1, p2)

All cells are congruent, so one element stiffness/mass matrix serves the
whole mesh; the cubic-field matrices (linearization of B) are assembled
per cell with vectorized batched products.  Accumulation order is fixed
by the lexicographic cell ordering, which keeps assembly deterministic.
"""

import functools

import numpy as np
import scipy.sparse as sp

from . import element


@functools.lru_cache(maxsize=None)
def _table_for(n):
    return element.tabulate(element.gauss_rule(n))


class DofMap:
    """Free/constrained DOF numbering for one scalar BFS field."""

    def __init__(self, mesh):
        self.mesh = mesh
        nn = mesh.n_nodes
        constrained = np.zeros(4 * nn, dtype=bool)
        for k in range(4):
            constrained[4 * mesh.boundary_nodes + k] = True
        self.full_to_free = -np.ones(4 * nn, dtype=np.int64)
        self.free_to_full = np.flatnonzero(~constrained)
        self.full_to_free[self.free_to_full] = np.arange(self.free_to_full.size)
        self.n_free = self.free_to_full.size

        # local DOF 4*a + k of cell c -> global full DOF
        self.cell_dofs = (4 * mesh.cells[:, :, None] + np.arange(4)).reshape(-1, 16)
        self.cell_free = self.full_to_free[self.cell_dofs]
        self._coo = None

    @property
    def n_constrained(self):
        return 4 * self.mesh.n_nodes - self.n_free

    def coo_pattern(self):
        """Cached (rows, cols, mask) for scattering (nc,16,16) element blocks."""
        if self._coo is None:
            cf = self.cell_free.astype(np.int32)
            rows = np.repeat(cf[:, :, None], 16, axis=2)
            cols = np.repeat(cf[:, None, :], 16, axis=1)
            mask = (rows >= 0) & (cols >= 0)
            self._coo = (rows[mask], cols[mask], mask)
        return self._coo

    def cell_coeffs(self, field):
        """Per-cell local coefficient matrix (nc, 16), zeros where clamped."""
        return field.full_vector()[self.cell_dofs]


def build_dofmap(mesh):
    return DofMap(mesh)


class ScalarField:
    """Coefficient vector of one scalar field on the free DOFs."""

    def __init__(self, dofmap, coeffs=None):
        self.dofmap = dofmap
        if coeffs is None:
            coeffs = np.zeros(dofmap.n_free)
        else:
            coeffs = np.asarray(coeffs, dtype=float)
            if coeffs.shape != (dofmap.n_free,):
                raise ValueError("coefficient vector has wrong length")
        self.coeffs = coeffs

    def full_vector(self):
        full = np.zeros(4 * self.dofmap.mesh.n_nodes)
        full[self.dofmap.free_to_full] = self.coeffs
        return full

    def copy(self):
        return ScalarField(self.dofmap, self.coeffs.copy())


class PairField:
    """A pair of scalar fields sharing one dofmap (state, adjoint, ...)."""

    def __init__(self, first, second):
        if first.dofmap is not second.dofmap:
            raise ValueError("pair components must share a dofmap")
        self.first = first
        self.second = second

    @classmethod
    def zeros(cls, dofmap):
        return cls(ScalarField(dofmap), ScalarField(dofmap))

    @classmethod
    def from_vector(cls, dofmap, vec):
        n = dofmap.n_free
        return cls(ScalarField(dofmap, vec[:n]), ScalarField(dofmap, vec[n:]))

    def vector(self):
        return np.concatenate([self.first.coeffs, self.second.coeffs])

    def copy(self):
        return PairField(self.first.copy(), self.second.copy())

    @property
    def dofmap(self):
        return self.first.dofmap


def quad_points(mesh, rule):
    """Physical quadrature coordinates, shape (nc, nq, 2)."""
    origins = mesh.cell_origins()
    scale = np.array([mesh.hx, mesh.hy])
    return origins[:, None, :] + rule.points[None, :, :] * scale


def _weighted_elem(fw, ti, tj):
    # fw (nc, nq) carries quadrature weights; ti, tj (16, nq)
    return (ti[None, :, :] * fw[:, None, :]) @ tj.T


def _matrix_from_elems(elems, dofmap):
    rows, cols, mask = dofmap.coo_pattern()
    n = dofmap.n_free
    return sp.coo_matrix((elems[mask], (rows, cols)), shape=(n, n)).tocsr()


def _scatter_vector(elems, dofmap):
    mask = dofmap.cell_free >= 0
    return np.bincount(dofmap.cell_free[mask], weights=elems[mask],
                       minlength=dofmap.n_free)


def field_tables(field, rule, which=("dx", "dy", "dxx", "dxy", "dyy")):
    """Derivatives of a discrete field at all quadrature points, (nc, nq) each."""
    mesh = field.dofmap.mesh
    phys = _table_for(rule.n).scaled(mesh.hx, mesh.hy)
    w = field.dofmap.cell_coeffs(field)
    return {name: w @ getattr(phys, name) for name in which}


def assemble_a(mesh, dofmap, rule):
    """Stiffness matrix of int D^2 u : D^2 v dx on the free DOFs (SPD)."""
    phys = _table_for(rule.n).scaled(mesh.hx, mesh.hy)
    wq = rule.weights * mesh.cell_area
    ae = (phys.dxx * wq) @ phys.dxx.T + 2.0 * (phys.dxy * wq) @ phys.dxy.T \
        + (phys.dyy * wq) @ phys.dyy.T
    elems = np.broadcast_to(ae, (mesh.n_cells, 16, 16))
    return _matrix_from_elems(elems, dofmap)


def assemble_mass(mesh, dofmap, rule):
    """L2 mass matrix on the free DOFs (SPD)."""
    phys = _table_for(rule.n).scaled(mesh.hx, mesh.hy)
    wq = rule.weights * mesh.cell_area
    me = (phys.val * wq) @ phys.val.T
    elems = np.broadcast_to(me, (mesh.n_cells, 16, 16))
    return _matrix_from_elems(elems, dofmap)


def _cof_grad(hess, grad):
    """cof(D^2 w) D v at quadrature points from per-point tables."""
    wxx, wxy, wyy = hess
    vx, vy = grad
    return wyy * vx - wxy * vy, wxx * vy - wxy * vx


def _p_elems(w_tabs, phys, wq):
    """P(w)[c,i,j] = 1/2 int_T cof(D^2 w) D phi_j . D phi_i dx."""
    return 0.5 * (_weighted_elem(w_tabs["dyy"] * wq, phys.dx, phys.dx)
                  - _weighted_elem(w_tabs["dxy"] * wq, phys.dx, phys.dy)
                  - _weighted_elem(w_tabs["dxy"] * wq, phys.dy, phys.dx)
                  + _weighted_elem(w_tabs["dxx"] * wq, phys.dy, phys.dy))


def _q_elems(w_tabs, phys, wq):
    """Q(w)[c,i,j] = 1/2 int_T cof(D^2 phi_j) D w . D phi_i dx."""
    wx, wy = w_tabs["dx"], w_tabs["dy"]
    return 0.5 * (_weighted_elem(wx * wq, phys.dx, phys.dyy)
                  - _weighted_elem(wy * wq, phys.dx, phys.dxy)
                  - _weighted_elem(wx * wq, phys.dy, phys.dxy)
                  + _weighted_elem(wy * wq, phys.dy, phys.dxx))


def assemble_b_jacobian(psi, mesh, dofmap, rule):
    """Linearization of the quadratic form around the pair psi.

    Returns the 2x2 block sparse matrix J with

        J[i, j] = B(psi, phi_j, Phi_i) + B(phi_j, psi, Phi_i),

    block-ordered [psi1; psi2].  The transpose of this matrix is the
    operator of the adjoint equations.
    """
    phys = _table_for(rule.n).scaled(mesh.hx, mesh.hy)
    wq = rule.weights * mesh.cell_area
    t1 = field_tables(psi.first, rule)
    t2 = field_tables(psi.second, rule)
    e11 = _p_elems(t2, phys, wq) + _q_elems(t2, phys, wq)
    e12 = _p_elems(t1, phys, wq) + _q_elems(t1, phys, wq)

    rows, cols, mask = dofmap.coo_pattern()
    n = dofmap.n_free
    data = np.concatenate([e11[mask], e12[mask], -e12[mask]])
    rr = np.concatenate([rows, rows, rows + n])
    cc = np.concatenate([cols, cols + n, cols])
    return sp.coo_matrix((data, (rr, cc)), shape=(2 * n, 2 * n)).tocsr()


def b_residual_vectors(psi, mesh, dofmap, rule):
    """Residual contributions of B(psi, psi, .) tested against both blocks.

    vec1_i = b(psi1, psi2, phi_i) + b(psi2, psi1, phi_i)
    vec2_i = -b(psi1, psi1, phi_i)
    """
    phys = _table_for(rule.n).scaled(mesh.hx, mesh.hy)
    wq = rule.weights * mesh.cell_area
    t1 = field_tables(psi.first, rule)
    t2 = field_tables(psi.second, rule)
    h1 = (t1["dxx"], t1["dxy"], t1["dyy"])
    h2 = (t2["dxx"], t2["dxy"], t2["dyy"])
    g1 = (t1["dx"], t1["dy"])
    g2 = (t2["dx"], t2["dy"])

    ax, ay = _cof_grad(h1, g2)
    bx, by = _cof_grad(h2, g1)
    vec1 = 0.5 * (((ax + bx) * wq) @ phys.dx.T + ((ay + by) * wq) @ phys.dy.T)
    cx, cy = _cof_grad(h1, g1)
    vec2 = -0.5 * ((cx * wq) @ phys.dx.T + (cy * wq) @ phys.dy.T)
    return _scatter_vector(vec1, dofmap), _scatter_vector(vec2, dofmap)


def eval_b(eta, chi, phi, rule):
    """Quadrature value of b(eta, chi, phi) = 1/2 int cof(D^2 eta) D chi . D phi."""
    mesh = eta.dofmap.mesh
    wq = rule.weights * mesh.cell_area
    te = field_tables(eta, rule, ("dxx", "dxy", "dyy"))
    tc = field_tables(chi, rule, ("dx", "dy"))
    tp = field_tables(phi, rule, ("dx", "dy"))
    gx, gy = _cof_grad((te["dxx"], te["dxy"], te["dyy"]), (tc["dx"], tc["dy"]))
    return 0.5 * float(np.sum((gx * tp["dx"] + gy * tp["dy"]) * wq))


def eval_bracket_identity(eta, chi, phi, rule):
    """Both sides of int [eta,chi] phi dx = -2 b(eta, chi, phi).

    Returns (lhs, rhs); equality holds for fields in the clamped space
    and transfers to the discrete level because the quadrature is exact
    for the piecewise-polynomial integrands.
    """
    mesh = eta.dofmap.mesh
    wq = rule.weights * mesh.cell_area
    te = field_tables(eta, rule, ("dxx", "dxy", "dyy"))
    tc = field_tables(chi, rule, ("dxx", "dxy", "dyy"))
    tp = field_tables(phi, rule, ("val",))
    br = (te["dxx"] * tc["dyy"] + te["dyy"] * tc["dxx"]
          - 2.0 * te["dxy"] * tc["dxy"])
    lhs = float(np.sum(br * tp["val"] * wq))
    rhs = -2.0 * eval_b(eta, chi, phi, rule)
    return lhs, rhs


def assemble_load(g, mesh, dofmap, rule):
    """Load vector int g phi_i dx over the free DOFs of one scalar field.

    g(x, y) must return finite values at the physical quadrature points;
    a non-finite value is rejected with the offending cell named.
    """
    qp = quad_points(mesh, rule)
    vals = np.asarray(g(qp[:, :, 0], qp[:, :, 1]), dtype=float)
    vals = np.broadcast_to(vals, qp.shape[:2])
    bad = ~np.isfinite(vals)
    if bad.any():
        cell = int(np.flatnonzero(bad.any(axis=1))[0])
        raise ValueError(f"source not finite at a quadrature point of cell {cell}")
    phys = _table_for(rule.n).scaled(mesh.hx, mesh.hy)
    wq = rule.weights * mesh.cell_area
    elems = (vals * wq) @ phys.val.T
    return _scatter_vector(elems, dofmap)


def control_load(u, mesh, dofmap, rule):
    """Load vector of a piecewise-constant control supported on its cells."""
    phys = _table_for(rule.n).scaled(mesh.hx, mesh.hy)
    wq = rule.weights * mesh.cell_area
    base = phys.val @ wq  # int_T phi_i, identical for every cell
    elems = np.zeros((mesh.n_cells, 16))
    elems[u.cells] = np.asarray(u.values)[:, None] * base
    return _scatter_vector(elems, dofmap)


def eval_scalar(field, x, y, deriv=(0, 0)):
    """Point evaluation of a discrete field or one of its derivatives.

    deriv = (i, j) requests d^{i+j}/dx^i dy^j with i, j <= 2.  Points on
    cell edges are attributed to the upper/right neighbour, which only
    matters for the (discontinuous) second derivatives.
    """
    mesh = field.dofmap.mesh
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x, y = np.broadcast_arrays(x, y)
    cells = mesh.locate(x, y)
    if (cells < 0).any():
        bad = np.flatnonzero(cells < 0)[0]
        raise ValueError(f"point ({x.flat[bad]}, {y.flat[bad]}) outside the domain")
    origins = mesh.cell_origins()[cells]
    xi = (x - origins[..., 0]) / mesh.hx
    eta = (y - origins[..., 1]) / mesh.hy
    basis = element.basis_values(xi, eta, deriv[0], deriv[1])
    kinds = np.tile(np.arange(4), 4)
    sx = np.isin(kinds, (1, 3)).astype(float)
    sy = np.isin(kinds, (2, 3)).astype(float)
    scale = mesh.hx ** (sx - deriv[0]) * mesh.hy ** (sy - deriv[1])
    coeffs = field.full_vector()[field.dofmap.cell_dofs[cells]]  # (..., 16)
    return np.einsum("...i,i...->...", coeffs, basis * scale.reshape((16,) + (1,) * x.ndim))


def eval_pair(pair, x, y, deriv=(0, 0)):
    return (eval_scalar(pair.first, x, y, deriv),
            eval_scalar(pair.second, x, y, deriv))


def interpolate_nodal(fn, mesh, dofmap):
    """BFS nodal interpolant of a jet-evaluable function (clamped space).

    fn(x, y) -> Jet4; the interior nodal data (v, v_x, v_y, v_xy) are
    read off the jets, boundary DOFs stay zero.
    """
    interior = np.flatnonzero(~mesh.is_boundary)
    pts = mesh.nodes[interior]
    jet = fn(pts[:, 0], pts[:, 1])
    data = np.stack([jet.value, jet.dx, jet.dy, jet.dxy], axis=1)
    coeffs = np.zeros(dofmap.n_free)
    idx = dofmap.full_to_free[(4 * interior[:, None] + np.arange(4))]
    coeffs[idx.ravel()] = data.ravel()
    return ScalarField(dofmap, coeffs)


def prolongation_matrix(dofmap_coarse, dofmap_fine):
    """Sparse embedding of a coarse scalar field into a nested fine space.

    Rows are fine free DOFs; each fine interior node takes its nodal
    data (v, v_x, v_y, v_xy) from the 16 coarse shape functions of the
    containing coarse cell.  Spaces are nested, so this is exact.
    """
    mesh_c = dofmap_coarse.mesh
    mesh_f = dofmap_fine.mesh
    interior = np.flatnonzero(~mesh_f.is_boundary)
    pts = mesh_f.nodes[interior]
    x, y = pts[:, 0], pts[:, 1]
    cells = mesh_c.locate(x, y)
    if (cells < 0).any():
        raise ValueError("fine mesh is not nested in the coarse mesh")
    origins = mesh_c.cell_origins()[cells]
    xi = (x - origins[:, 0]) / mesh_c.hx
    eta = (y - origins[:, 1]) / mesh_c.hy
    kinds = np.tile(np.arange(4), 4)
    sx = np.isin(kinds, (1, 3)).astype(float)
    sy = np.isin(kinds, (2, 3)).astype(float)
    cfree = dofmap_coarse.full_to_free[dofmap_coarse.cell_dofs[cells]]  # (npts, 16)
    ok = cfree >= 0

    rows, cols, vals = [], [], []
    for dk, (dx, dy) in enumerate(((0, 0), (1, 0), (0, 1), (1, 1))):
        basis = element.basis_values(xi, eta, dx, dy)
        scale = mesh_c.hx ** (sx - dx) * mesh_c.hy ** (sy - dy)
        basis = (basis * scale[:, None]).T  # (npts, 16)
        fine_free = dofmap_fine.full_to_free[4 * interior + dk]
        rows.append(np.repeat(fine_free, 16).reshape(-1, 16)[ok])
        cols.append(cfree[ok])
        vals.append(basis[ok])
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dofmap_fine.n_free, dofmap_coarse.n_free))
    return mat.tocsr()


class Discretization:
    """Mesh, dofmap, quadrature rules and cached matrices for one level."""

    def __init__(self, mesh, quad_forms=5, quad_errors=7):
        self.mesh = mesh
        self.dofmap = build_dofmap(mesh)
        self.rule = element.gauss_rule(quad_forms)
        self.rule_err = element.gauss_rule(quad_errors)
        self._a = None
        self._a_block = None
        self._mass = None

    @property
    def n_free(self):
        return self.dofmap.n_free

    @property
    def a_matrix(self):
        if self._a is None:
            self._a = assemble_a(self.mesh, self.dofmap, self.rule)
        return self._a

    @property
    def a_block(self):
        """block-diag(A, A) acting on the pair vector [psi1; psi2]."""
        if self._a_block is None:
            self._a_block = sp.block_diag((self.a_matrix, self.a_matrix)).tocsr()
        return self._a_block

    @property
    def mass(self):
        if self._mass is None:
            self._mass = assemble_mass(self.mesh, self.dofmap, self.rule)
        return self._mass

    def zeros_pair(self):
        return PairField.zeros(self.dofmap)
