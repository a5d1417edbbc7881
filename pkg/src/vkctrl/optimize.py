"""Piecewise-constant control space and primal-dual active set optimization.

The control is one constant per cell of the control region; the reduced
first-order optimality condition projects cellwise,

    u_T = clamp( -(1/(alpha |T|)) int_T theta1 , [ua, ub] ),

with theta1 the first adjoint component.  For piecewise-constant
controls and this quadratic objective the active-set update and the
clamped fixed point coincide cellwise, so the outer iteration repeats
state solve / adjoint solve / cellwise projection until the active set
is unchanged and the control update is below tolerance.
"""

from dataclasses import dataclass, field

import numpy as np

from . import assembly, cases, linalg, solvers
from .mesh import cells_in_omega


@dataclass(frozen=True)
class Bounds:
    lower: float
    upper: float
    alpha: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"empty control bounds [{self.lower}, {self.upper}]")
        if self.alpha <= 0:
            raise ValueError("regularization weight must be positive")

    @classmethod
    def from_case(cls, case):
        return cls(lower=case.lower, upper=case.upper, alpha=case.alpha)


class ControlField:
    """Cellwise-constant control; construction clamps into the bounds."""

    def __init__(self, values, cells, bounds):
        values = np.asarray(values, dtype=float)
        cells = np.asarray(cells, dtype=int)
        if values.shape != cells.shape:
            raise ValueError("control values and cell indices must align")
        self.values = np.clip(values, bounds.lower, bounds.upper)
        self.cells = cells
        self.bounds = bounds

    @classmethod
    def constant(cls, value, cells, bounds):
        return cls(np.full(len(cells), float(value)), cells, bounds)

    def copy(self):
        return ControlField(self.values.copy(), self.cells, self.bounds)


@dataclass
class PdasOptions:
    tol_u: float = 1e-9
    max_outer: int = 60
    relax: float = 1.0
    newton: solvers.NewtonOptions = None

    def __post_init__(self):
        if self.tol_u <= 0:
            raise ValueError("control tolerance must be positive")
        if not 0.0 < self.relax <= 1.0:
            raise ValueError("relaxation factor must lie in (0, 1]")


@dataclass
class OcpSolution:
    control: ControlField
    state: assembly.PairField
    adjoint: assembly.PairField
    cost: float
    outer_iterations: int
    active_set_history: list = field(default_factory=list)
    cost_history: list = field(default_factory=list)


class PdasError(RuntimeError):
    def __init__(self, message, active_set_history):
        super().__init__(message)
        self.active_set_history = active_set_history


def cost(disc, psi, u, psid):
    """J = 1/2 ||psi - psi_d||^2 + alpha/2 int_omega u^2.

    The tracking term uses the exact observation at the quadrature
    points of the error rule, not its interpolant.
    """
    qp = assembly.quad_points(disc.mesh, disc.rule_err)
    t1 = assembly.field_tables(psi.first, disc.rule_err, ("val",))["val"]
    t2 = assembly.field_tables(psi.second, disc.rule_err, ("val",))["val"]
    d1 = np.broadcast_to(psid[0](qp[:, :, 0], qp[:, :, 1]), t1.shape)
    d2 = np.broadcast_to(psid[1](qp[:, :, 0], qp[:, :, 1]), t2.shape)
    wq = disc.rule_err.weights * disc.mesh.cell_area
    track = 0.5 * float(np.sum(((t1 - d1) ** 2 + (t2 - d2) ** 2) @ wq))
    reg = 0.5 * u.bounds.alpha * disc.mesh.cell_area * float(np.sum(u.values ** 2))
    return track + reg


def cell_mean_adjoint(disc, theta, cells=None):
    """Cell averages (1/|T|) int_T theta1 by quadrature.

    theta may be the adjoint pair or its first component; cells defaults
    to all mesh cells, a scalar cell index returns a scalar mean.
    """
    theta1 = theta.first if hasattr(theta, "first") else theta
    vals = assembly.field_tables(theta1, disc.rule, ("val",))["val"]
    means = vals @ disc.rule.weights
    if cells is None:
        return means
    if np.isscalar(cells):
        return float(means[cells])
    return means[np.asarray(cells, dtype=int)]


def reduced_gradient(disc, u, theta):
    """Cellwise reduced derivative g_T = |T| (alpha u_T + mean_T theta1)."""
    means = cell_mean_adjoint(disc, theta, u.cells)
    return disc.mesh.cell_area * (u.bounds.alpha * u.values + means)


def _classify(raw, bounds):
    labels = np.zeros(raw.shape, dtype=np.int8)
    labels[raw <= bounds.lower] = -1
    labels[raw >= bounds.upper] = 1
    return labels


def pdas_solve(disc, f, ftilde, psid, bounds, omega=None, opts=None,
               u0=None, state_guess=None):
    """Active-set iteration for the box-constrained control problem.

    f, ftilde are the loads of the two state equations, psid the pair of
    observation components (all point-evaluable); omega restricts the
    control region (cell index array or rectangle, default the whole
    domain).  Returns an OcpSolution whose control is the exact cellwise
    projection of the returned adjoint; the state is the Newton solution
    at the control of the last outer iteration, which differs from the
    returned control by at most tol_u per cell.
    """
    opts = opts or PdasOptions()
    newton = opts.newton or solvers.NewtonOptions()
    cells = omega if isinstance(omega, np.ndarray) else cells_in_omega(disc.mesh, omega)

    if u0 is None:
        u = ControlField.constant(0.0, cells, bounds)
    else:
        u = u0.copy()
    psi_guess = state_guess

    # sources and observations do not change over the outer loop
    fixed_load = solvers.state_load_vector(disc, f=f, ftilde=ftilde)
    qp = assembly.quad_points(disc.mesh, disc.rule_err)
    d1 = np.broadcast_to(np.asarray(psid[0](qp[:, :, 0], qp[:, :, 1]), dtype=float),
                         qp.shape[:2])
    d2 = np.broadcast_to(np.asarray(psid[1](qp[:, :, 0], qp[:, :, 1]), dtype=float),
                         qp.shape[:2])
    psid_frozen = (lambda x, y: d1, lambda x, y: d2)
    obs_load = solvers.observation_load(disc, psid_frozen)

    prev_labels = None
    history = []
    cost_history = []
    for outer in range(1, opts.max_outer + 1):
        newton.initial_guess = psi_guess
        psi, _ = solvers.solve_state(disc, u=u, opts=newton, fixed_load=fixed_load)
        psi_guess = psi
        theta = solvers.solve_adjoint(disc, psi, obs_load=obs_load)

        cost_history.append(cost(disc, psi, u, psid_frozen))
        raw = -cell_mean_adjoint(disc, theta, cells) / bounds.alpha
        new_values = np.clip(raw, bounds.lower, bounds.upper)
        labels = _classify(raw, bounds)
        history.append(labels)
        du = float(np.max(np.abs(new_values - u.values))) if len(cells) else 0.0

        stable = prev_labels is not None and np.array_equal(labels, prev_labels)
        if du <= opts.tol_u and (stable or prev_labels is None):
            u = ControlField(new_values, cells, bounds)
            return OcpSolution(control=u, state=psi, adjoint=theta,
                               cost=cost(disc, psi, u, psid_frozen),
                               outer_iterations=outer,
                               active_set_history=history,
                               cost_history=cost_history)
        u = ControlField(u.values + opts.relax * (new_values - u.values),
                         cells, bounds)
        prev_labels = labels

    sizes = [(int(np.sum(l == -1)), int(np.sum(l == 1))) for l in history[-6:]]
    raise PdasError(
        f"active-set iteration did not settle in {opts.max_outer} outer steps; "
        f"recent (lower, upper) active counts: {sizes}", history)


def postprocess_control(disc, theta, bounds, omega=None):
    """Pointwise projected control x -> clamp(-theta1(x)/alpha).

    Returns a function of (x, y) arrays; points outside the control
    region are rejected.
    """
    theta1 = theta.first if hasattr(theta, "first") else theta
    cells = omega if isinstance(omega, np.ndarray) else cells_in_omega(disc.mesh, omega)
    member = np.zeros(disc.mesh.n_cells, dtype=bool)
    member[cells] = True

    def fn(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        located = disc.mesh.locate(x, y)
        if np.any(located < 0) or not member[np.clip(located, 0, None)].all():
            raise ValueError("point outside the control region")
        vals = assembly.eval_scalar(theta1, x, y)
        return np.clip(-vals / bounds.alpha, bounds.lower, bounds.upper)

    return fn


def centroid_project(g, mesh, cells=None):
    """Cellwise values of g at the cell centroids (midpoint projection)."""
    c = mesh.cell_centroids()
    if cells is not None:
        c = c[np.asarray(cells, dtype=int)]
    return np.asarray(g(c[:, 0], c[:, 1]), dtype=float)


def frozen_case_sources(disc, case):
    """Case sources/observations evaluated once at the load-rule points.

    Returns closures that hand back the cached arrays; jet evaluation of
    the singular fields is expensive enough to be worth the single pass.
    """
    qp = assembly.quad_points(disc.mesh, disc.rule_err)
    src = cases.sources_and_observations(case, qp[:, :, 0], qp[:, :, 1])

    def make(key):
        def fn(x, y):
            return src[key]
        return fn

    return {key: make(key) for key in src}


def solve_case(disc, case, omega=None, opts=None, u0=None, state_guess=None):
    """pdas_solve with loads/observations manufactured from a benchmark case."""
    src = frozen_case_sources(disc, case)
    return pdas_solve(disc, src["f"], src["ftilde"], (src["psi1d"], src["psi2d"]),
                      Bounds.from_case(case), omega=omega, opts=opts,
                      u0=u0, state_guess=state_guess)
