"""Error norms against manufactured solutions, EOC and study orchestration.

The experimental order of convergence between consecutive levels is

    delta_l = log(e_l / e_{l-1}) / log(h_l / h_{l-1}).

Exact fields enter the error integrands through their jets at the
quadrature points, never through an interpolant, so the reported rates
are not contaminated by interpolation error.  The H1 column uses the
full norm (value plus gradient); rates are unaffected either way.
"""

import math
from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from . import assembly, cases, optimize, solvers
from .mesh import build_mesh, cells_in_omega

H0 = 1.0 / math.sqrt(2.0)

ERROR_COLUMNS = (
    "state_energy", "adjoint_energy",
    "state_h1", "state_l2", "adjoint_h1", "adjoint_l2",
    "control_l2", "postproc_l2",
)


@dataclass
class ErrorRecord:
    level: int
    n_free: int
    h: float
    h_ratio: float
    state_energy: float
    adjoint_energy: float
    state_h1: float
    state_l2: float
    adjoint_h1: float
    adjoint_l2: float
    control_l2: float
    postproc_l2: float

    def __post_init__(self):
        for f in dataclass_fields(self):
            v = getattr(self, f.name)
            if f.name in ERROR_COLUMNS and not (np.isfinite(v) and v >= 0):
                raise ValueError(f"error column {f.name} is not a finite "
                                 f"nonnegative number: {v}")


@dataclass
class EocTable:
    case_name: str
    records: list

    @property
    def levels(self):
        return [r.level for r in self.records]

    @property
    def hs(self):
        return np.array([r.h for r in self.records])

    def errors(self, column):
        return np.array([getattr(r, column) for r in self.records])

    def eoc_column(self, column):
        """EOC values aligned with the records; first entry is NaN."""
        if len(self.records) < 2:
            return np.full(len(self.records), np.nan)
        rates = eoc(self.errors(column), self.hs)
        return np.concatenate([[np.nan], rates])


def eoc(errors, hs):
    """Elementwise log(e_l/e_{l-1}) / log(h_l/h_{l-1}).

    hs must be strictly decreasing; nonpositive errors yield NaN entries
    rather than being dropped.
    """
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if errors.shape != hs.shape or errors.ndim != 1:
        raise ValueError("errors and mesh sizes must be 1D arrays of equal length")
    if not np.all(np.diff(hs) < 0):
        raise ValueError("mesh sizes must be strictly decreasing")
    out = np.full(errors.size - 1, np.nan)
    ok = (errors[1:] > 0) & (errors[:-1] > 0)
    out[ok] = (np.log(errors[1:][ok] / errors[:-1][ok])
               / np.log(hs[1:][ok] / hs[:-1][ok]))
    return out


def _sq_diff(disc, fieldh, jet, names, weights):
    tabs = assembly.field_tables(fieldh, disc.rule_err, tuple(t[0] for t in names))
    wq = disc.rule_err.weights * disc.mesh.cell_area
    acc = 0.0
    for (tab, attr), w in zip(names, weights):
        diff = tabs[tab] - getattr(jet, attr)
        acc += w * float(np.sum((diff * diff) @ wq))
    return acc


_NORM_TERMS = {
    "h2semi": ((("dxx", "dxx"), ("dxy", "dxy"), ("dyy", "dyy")), (1.0, 2.0, 1.0)),
    "h1": ((("val", "value"), ("dx", "dx"), ("dy", "dy")), (1.0, 1.0, 1.0)),
    "l2": ((("val", "value"),), (1.0,)),
}


def error_norm_from_jets(disc, pairh, jets_pair, norm):
    """Pair error norm with exact jets already evaluated at the error rule."""
    try:
        names, weights = _NORM_TERMS[norm]
    except KeyError:
        raise ValueError(f"unknown norm {norm!r}; expected h2semi, h1 or l2")
    s = _sq_diff(disc, pairh.first, jets_pair[0], names, weights) \
        + _sq_diff(disc, pairh.second, jets_pair[1], names, weights)
    return math.sqrt(s)


def exact_jets_at_error_rule(disc, fn_pair):
    """Evaluate the two exact-field jets at the error-rule points (shared)."""
    qp = assembly.quad_points(disc.mesh, disc.rule_err)
    x, y = qp[:, :, 0], qp[:, :, 1]
    j1 = fn_pair[0](x, y)
    j2 = j1 if fn_pair[1] is fn_pair[0] else fn_pair[1](x, y)
    return j1, j2


def error_norm(disc, pairh, exact, norm):
    """Error of a discrete pair against exact jet evaluators.

    norm is one of 'h2semi' (energy), 'h1' (full norm) or 'l2'; the pair
    norm is the square root of the sum of the squared component norms.
    """
    return error_norm_from_jets(disc, pairh, exact_jets_at_error_rule(disc, exact), norm)


def control_error(disc, u, exact_u, omega=None):
    """L2(omega) distance between a control and the exact control.

    u is either a ControlField (the integration region is then its own
    cell set) or a point-evaluable function such as the post-processed
    control; exact_u is point-evaluable.
    """
    if isinstance(u, optimize.ControlField):
        cells = u.cells
    else:
        cells = omega if isinstance(omega, np.ndarray) else cells_in_omega(disc.mesh, omega)
    qp = assembly.quad_points(disc.mesh, disc.rule_err)[cells]
    x, y = qp[:, :, 0], qp[:, :, 1]
    ue = np.broadcast_to(np.asarray(exact_u(x, y), dtype=float), x.shape)
    if isinstance(u, optimize.ControlField):
        uh = u.values[:, None]
    else:
        uh = np.broadcast_to(np.asarray(u(x, y), dtype=float), x.shape)
    wq = disc.rule_err.weights * disc.mesh.cell_area
    return math.sqrt(float(np.sum(((uh - ue) ** 2) @ wq)))


def prolong_scalar(field, disc_fine):
    """BFS re-interpolation of a coarse field on a finer mesh (same domain)."""
    mesh_f = disc_fine.mesh
    interior = np.flatnonzero(~mesh_f.is_boundary)
    pts = mesh_f.nodes[interior]
    x, y = pts[:, 0], pts[:, 1]
    data = np.stack([
        assembly.eval_scalar(field, x, y, (0, 0)),
        assembly.eval_scalar(field, x, y, (1, 0)),
        assembly.eval_scalar(field, x, y, (0, 1)),
        assembly.eval_scalar(field, x, y, (1, 1)),
    ], axis=1)
    coeffs = np.zeros(disc_fine.n_free)
    idx = disc_fine.dofmap.full_to_free[(4 * interior[:, None] + np.arange(4))]
    coeffs[idx.ravel()] = data.ravel()
    return assembly.ScalarField(disc_fine.dofmap, coeffs)


def prolong_pair(pair, disc_fine):
    return assembly.PairField(prolong_scalar(pair.first, disc_fine),
                              prolong_scalar(pair.second, disc_fine))


def prolong_control(u, mesh_coarse, disc_fine, omega=None):
    """Carry a cellwise control to a finer mesh (child takes parent value)."""
    cells = omega if isinstance(omega, np.ndarray) \
        else cells_in_omega(disc_fine.mesh, omega)
    cent = disc_fine.mesh.cell_centroids()[cells]
    parents = mesh_coarse.locate(cent[:, 0], cent[:, 1])
    lookup = -np.ones(mesh_coarse.n_cells, dtype=int)
    lookup[u.cells] = np.arange(len(u.cells))
    vals = u.values[lookup[parents]]
    return optimize.ControlField(vals, cells, u.bounds)


def run_study(case, levels, quad_forms=5, quad_errors=7, pdas_opts=None,
              omega=None, progress=None):
    """Solve the control problem on a ladder of levels and collect errors.

    Nested initial guesses (interpolated state, inherited control) are
    passed level to level.  Returns an EocTable with one record per
    level; per-column EOC values come from EocTable.eoc_column.
    """
    levels = list(levels)
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly ascending")

    records = []
    prev = None  # (disc, solution)
    for level in levels:
        disc = assembly.Discretization(build_mesh(case.domain, level),
                                       quad_forms=quad_forms, quad_errors=quad_errors)
        cells = cells_in_omega(disc.mesh, omega)
        u0 = state0 = None
        if prev is not None:
            u0 = prolong_control(prev[1].control, prev[0].mesh, disc, omega=cells)
            state0 = prolong_pair(prev[1].state, disc)
        try:
            sol = optimize.solve_case(disc, case, omega=cells, opts=pdas_opts,
                                      u0=u0, state_guess=state0)
        except solvers.NewtonError as err:
            raise RuntimeError(f"state solve failed at level {level}: {err}") from err
        except optimize.PdasError as err:
            raise RuntimeError(f"control loop failed at level {level}: {err}") from err

        jets_psi = exact_jets_at_error_rule(disc, (case.psi1, case.psi2))
        jets_theta = exact_jets_at_error_rule(disc, (case.theta1, case.theta2))
        exact_u = lambda x, y: cases.exact_control(case, x, y)  # noqa: E731
        bounds = optimize.Bounds.from_case(case)
        post = optimize.postprocess_control(disc, sol.adjoint, bounds, omega=cells)

        rec = ErrorRecord(
            level=level,
            n_free=disc.n_free,
            h=disc.mesh.h,
            h_ratio=disc.mesh.h / H0,
            state_energy=error_norm_from_jets(disc, sol.state, jets_psi, "h2semi"),
            adjoint_energy=error_norm_from_jets(disc, sol.adjoint, jets_theta, "h2semi"),
            state_h1=error_norm_from_jets(disc, sol.state, jets_psi, "h1"),
            state_l2=error_norm_from_jets(disc, sol.state, jets_psi, "l2"),
            adjoint_h1=error_norm_from_jets(disc, sol.adjoint, jets_theta, "h1"),
            adjoint_l2=error_norm_from_jets(disc, sol.adjoint, jets_theta, "l2"),
            control_l2=control_error(disc, sol.control, exact_u, omega=cells),
            postproc_l2=control_error(disc, post, exact_u, omega=cells),
        )
        records.append(rec)
        if progress is not None:
            progress(level, disc, sol, rec)
        prev = (disc, sol)

    return EocTable(case_name=case.name, records=records)
