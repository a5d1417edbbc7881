"""Structured rectangular meshes of the unit square and the L-shaped domain.

Both domains are tiled with congruent square cells on a dyadic grid.
Level l puts 2**(l+1) cells per direction on the bounding box, so the
unit square gets cells of side 2**-(l+1) and the L-shape (bounding box
[-1,1]^2 minus the quadrant [0,1) x (-1,0]) gets cells of side 2**-l.
Nodes and cells are ordered lexicographically by (y, x), which makes
assembly and all file output deterministic.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

MAX_LEVEL = 8


class Domain(enum.Enum):
    UNIT_SQUARE = "unit_square"
    L_SHAPE = "l_shape"


@dataclass(frozen=True)
class RectMesh:
    """Conforming mesh of axis-aligned congruent rectangles.

    cells hold node indices counterclockwise starting at the lower-left
    corner; boundary_nodes are indices of nodes on the domain boundary
    (for the L-shape this includes both re-entrant edges and the corner
    at the origin).  cell_grid maps (iy, ix) grid positions to cell ids,
    -1 where the grid cell lies outside the domain.
    """

    domain: Domain
    level: int
    nodes: np.ndarray           # (nn, 2)
    cells: np.ndarray           # (nc, 4) int
    hx: float
    hy: float
    boundary_nodes: np.ndarray  # sorted int indices
    is_boundary: np.ndarray     # (nn,) bool
    xmin: float
    ymin: float
    ncellx: int
    ncelly: int
    cell_grid: np.ndarray       # (ncelly, ncellx) int
    h: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "h", math.hypot(self.hx, self.hy))

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    @property
    def n_interior_nodes(self):
        return self.n_nodes - self.boundary_nodes.size

    @property
    def cell_area(self):
        return self.hx * self.hy

    def cell_origins(self):
        """Lower-left corner coordinates of every cell, shape (nc, 2)."""
        return self.nodes[self.cells[:, 0]]

    def cell_centroids(self):
        return self.cell_origins() + 0.5 * np.array([self.hx, self.hy])

    def locate(self, x, y):
        """Cell ids containing points (x, y); -1 for points outside."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ix = np.clip(np.floor((x - self.xmin) / self.hx).astype(int), 0, self.ncellx - 1)
        iy = np.clip(np.floor((y - self.ymin) / self.hy).astype(int), 0, self.ncelly - 1)
        cells = self.cell_grid[iy, ix]
        eps = 1e-12
        inside = ((x >= self.xmin - eps) & (x <= self.xmin + self.ncellx * self.hx + eps)
                  & (y >= self.ymin - eps) & (y <= self.ymin + self.ncelly * self.hy + eps))
        return np.where(inside, cells, -1)


def _in_lshape_closure(x, y):
    return (y >= 0.0) | (x <= 0.0)


def _on_boundary(domain, x, y):
    if domain is Domain.UNIT_SQUARE:
        return (x == 0.0) | (x == 1.0) | (y == 0.0) | (y == 1.0)
    outer = (np.abs(x) == 1.0) | (np.abs(y) == 1.0)
    reentrant = ((x == 0.0) & (y <= 0.0)) | ((y == 0.0) & (x >= 0.0))
    return outer | reentrant


def build_mesh(domain, level):
    """Build the structured mesh of the given domain at a dyadic level.

    Levels 1..8 are supported; node coordinates are exact dyadic
    rationals, so the boundary classification can compare exactly.
    """
    if not isinstance(domain, Domain):
        domain = Domain(domain)
    if not 1 <= level <= MAX_LEVEL:
        raise ValueError(f"refinement level must be in [1, {MAX_LEVEL}], got {level}")

    n = 2 ** (level + 1)
    if domain is Domain.UNIT_SQUARE:
        lo, hi = 0.0, 1.0
    else:
        lo, hi = -1.0, 1.0
    hstep = (hi - lo) / n

    coords = lo + hstep * np.arange(n + 1)
    X, Y = np.meshgrid(coords, coords, indexing="xy")  # row-major: y outer
    gx = X.ravel()
    gy = Y.ravel()

    # grid node id at (iy, ix) before compression
    def gid(iy, ix):
        return iy * (n + 1) + ix

    iy, ix = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    cells_full = np.column_stack([
        gid(iy, ix).ravel(),
        gid(iy, ix + 1).ravel(),
        gid(iy + 1, ix + 1).ravel(),
        gid(iy + 1, ix).ravel(),
    ])

    if domain is Domain.L_SHAPE:
        cx = lo + hstep * (ix.ravel() + 0.5)
        cy = lo + hstep * (iy.ravel() + 0.5)
        keep_cell = ~((cx > 0.0) & (cy < 0.0))
        keep_node = _in_lshape_closure(gx, gy)
    else:
        keep_cell = np.ones(cells_full.shape[0], dtype=bool)
        keep_node = np.ones(gx.size, dtype=bool)

    node_map = -np.ones(gx.size, dtype=int)
    node_map[keep_node] = np.arange(keep_node.sum())
    nodes = np.column_stack([gx[keep_node], gy[keep_node]])
    cells = node_map[cells_full[keep_cell]]
    assert (cells >= 0).all()

    cell_map = -np.ones(cells_full.shape[0], dtype=int)
    cell_map[keep_cell] = np.arange(keep_cell.sum())
    cell_grid = cell_map.reshape(n, n)

    is_boundary = _on_boundary(domain, nodes[:, 0], nodes[:, 1])

    return RectMesh(
        domain=domain,
        level=level,
        nodes=nodes,
        cells=cells,
        hx=hstep,
        hy=hstep,
        boundary_nodes=np.flatnonzero(is_boundary),
        is_boundary=is_boundary,
        xmin=lo,
        ymin=lo,
        ncellx=n,
        ncelly=n,
        cell_grid=cell_grid,
    )


def cells_in_omega(mesh, omega=None):
    """Cell indices tiling the control region omega.

    omega is either None (whole domain) or an axis-aligned rectangle
    (x0, y0, x1, y1) whose corners must be mesh vertices; otherwise the
    restriction of the mesh would not tile omega and the request is
    rejected.
    """
    if omega is None:
        return np.arange(mesh.n_cells)
    x0, y0, x1, y1 = map(float, omega)
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"degenerate control region {omega}")
    eps = 1e-12
    for x, y in ((x0, y0), (x1, y0), (x1, y1), (x0, y1)):
        on_grid = (abs((x - mesh.xmin) / mesh.hx - round((x - mesh.xmin) / mesh.hx)) < eps
                   and abs((y - mesh.ymin) / mesh.hy - round((y - mesh.ymin) / mesh.hy)) < eps)
        hit = np.any((np.abs(mesh.nodes[:, 0] - x) < eps) & (np.abs(mesh.nodes[:, 1] - y) < eps))
        if not (on_grid and hit):
            raise ValueError(f"control region corner ({x}, {y}) is not a mesh vertex")
    c = mesh.cell_centroids()
    inside = (c[:, 0] > x0) & (c[:, 0] < x1) & (c[:, 1] > y0) & (c[:, 1] < y1)
    return np.flatnonzero(inside)


def dump_mesh(mesh, stream):
    """Plain-text dump: 'n x y b' per node, then 'c i0 i1 i2 i3' per cell."""
    for k in range(mesh.n_nodes):
        x, y = mesh.nodes[k]
        stream.write(f"n {x!r} {y!r} {int(mesh.is_boundary[k])}\n")
    for cell in mesh.cells:
        stream.write("c " + " ".join(str(i) for i in cell) + "\n")
