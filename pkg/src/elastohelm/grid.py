"""
Regular staggered grids, unknown numbering and the discrete operators built
on them.

Layout conventions
------------------
* Cell fields are numpy arrays of shape ``dims`` flattened in C order, so the
  last axis runs fastest. The last axis is depth (index 0 is the top).
* The displacement component ``u_d`` lives on the *interior* faces normal to
  axis ``d``; its array shape is ``dims`` with ``dims[d] - 1`` along ``d``.
  Boundary-normal faces carry homogeneous Dirichlet values and are not
  unknowns.
* A displacement vector stacks ``u_0, u_1, ...`` one after the other; mixed
  vectors append the cell pressure.

All operators are returned as canonical ``scipy.sparse.csr_matrix`` objects
with ``complex128`` values.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Grid", "StaggeredField", "canonical", "spmv", "transpose",
    "triple_product", "cell_gradient", "block_gradient",
    "derivative_locations", "average_cells_to_faces",
    "average_cells_to_edges", "diag_cells", "divergence", "cell_neighbors",
    "cell_colors",
]


@dataclass(frozen=True)
class Grid:
    """Regular cell-based mesh.

    Parameters
    ----------
    dims : tuple of int
        Number of cells per axis (2 or 3 entries, each >= 2).
    spacing : float or tuple of float
        Mesh width per axis.
    """

    dims: tuple[int, ...]
    spacing: tuple[float, ...]

    def __init__(self, dims, spacing=1.0):
        dims = tuple(int(n) for n in dims)
        if np.isscalar(spacing):
            spacing = (float(spacing),) * len(dims)
        spacing = tuple(float(h) for h in spacing)
        if len(dims) not in (2, 3):
            raise ValueError(f"grid must be 2D or 3D, got dims={dims}")
        if len(spacing) != len(dims):
            raise ValueError("spacing must have one entry per axis")
        if any(n < 2 for n in dims):
            raise ValueError(f"every dims entry must be >= 2, got {dims}")
        if any(h <= 0 for h in spacing):
            raise ValueError(f"spacing must be positive, got {spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)

    @property
    def dim(self) -> int:
        return len(self.dims)

    @property
    def cell_count(self) -> int:
        return int(np.prod(self.dims))

    def face_shape(self, d: int) -> tuple[int, ...]:
        shape = list(self.dims)
        shape[d] -= 1
        return tuple(shape)

    def face_count(self, d: int) -> int:
        return int(np.prod(self.face_shape(d)))

    @cached_property
    def face_offsets(self) -> tuple[int, ...]:
        """Start index of each displacement component; last entry is the total."""
        return tuple(np.concatenate(
            [[0], np.cumsum([self.face_count(d) for d in range(self.dim)])]
        ).astype(int))

    @property
    def n_faces(self) -> int:
        return self.face_offsets[-1]

    @property
    def n_mixed(self) -> int:
        return self.n_faces + self.cell_count

    def coarsen(self) -> "Grid":
        """Grid with half the cells per axis and twice the spacing."""
        if any(n % 2 for n in self.dims):
            raise ValueError(f"dims {self.dims} are not divisible by 2")
        return Grid(tuple(n // 2 for n in self.dims),
                    tuple(2 * h for h in self.spacing))

    def cell_centers(self) -> list[np.ndarray]:
        """Coordinates of the cell centers, one array of shape ``dims`` per axis."""
        axes = [(np.arange(n) + 0.5) * h for n, h in zip(self.dims, self.spacing)]
        return np.meshgrid(*axes, indexing="ij")

    def face_centers(self, d: int) -> list[np.ndarray]:
        axes = []
        for j, (n, h) in enumerate(zip(self.dims, self.spacing)):
            if j == d:
                axes.append(np.arange(1, n) * h)
            else:
                axes.append((np.arange(n) + 0.5) * h)
        return np.meshgrid(*axes, indexing="ij")

    def cell_index(self, idx) -> np.ndarray:
        """Flat index of cells given a tuple of per-axis index arrays."""
        return np.ravel_multi_index(idx, self.dims)

    def face_index(self, d: int, idx) -> np.ndarray:
        """Flat index (into the stacked displacement vector) of faces normal to ``d``.

        ``idx`` uses *node* numbering along ``d``: face ``k`` sits between cells
        ``k - 1`` and ``k``, so interior faces have ``1 <= k <= dims[d] - 1``.
        """
        idx = list(idx)
        idx[d] = np.asarray(idx[d]) - 1
        return self.face_offsets[d] + np.ravel_multi_index(idx, self.face_shape(d))


@dataclass
class StaggeredField:
    """Displacement (faces) plus pressure (cells) on a grid."""

    grid: Grid
    u: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=complex)
        self.p = np.asarray(self.p, dtype=complex)
        if self.u.shape != (self.grid.n_faces,):
            raise ValueError(f"u has length {self.u.size}, expected {self.grid.n_faces}")
        if self.p.shape != (self.grid.cell_count,):
            raise ValueError(f"p has length {self.p.size}, expected {self.grid.cell_count}")

    @classmethod
    def from_vector(cls, grid: Grid, x) -> "StaggeredField":
        x = np.asarray(x)
        return cls(grid, x[:grid.n_faces], x[grid.n_faces:])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.u, self.p])

    def component(self, d: int) -> np.ndarray:
        """Component ``u_d`` reshaped to its face array."""
        o = self.grid.face_offsets
        return self.u[o[d]:o[d + 1]].reshape(self.grid.face_shape(d))

    def pressure(self) -> np.ndarray:
        return self.p.reshape(self.grid.dims)


# -- sparse helpers ----------------------------------------------------------

def canonical(A) -> sp.csr_matrix:
    """Complex CSR with sorted, duplicate-free column indices."""
    A = sp.csr_matrix(A, dtype=complex)
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A, x) -> np.ndarray:
    if A.shape[1] != np.shape(x)[0]:
        raise ValueError(f"shape mismatch: {A.shape} @ {np.shape(x)}")
    return A @ x


def transpose(A) -> sp.csr_matrix:
    return canonical(A.T)


def triple_product(P, H) -> sp.csr_matrix:
    """Galerkin product ``P^T H P``."""
    if H.shape[0] != H.shape[1] or H.shape[1] != P.shape[0]:
        raise ValueError(f"shape mismatch: P {P.shape}, H {H.shape}")
    P = sp.csr_matrix(P)
    return canonical(P.T.tocsr() @ (sp.csr_matrix(H) @ P))


def _kron(mats) -> sp.csr_matrix:
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), mats)


def _diff(n: int, h: float) -> sp.csr_matrix:
    """(n-1) x n forward difference: row k gives (v[k+1] - v[k]) / h."""
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1],
                    shape=(n - 1, n), format="csr") / h


def _diff_ghost(n: int, h: float) -> sp.csr_matrix:
    """(n+1) x n difference onto nodes with zero ghost values outside."""
    return sp.diags([np.ones(n), -np.ones(n)], [0, -1],
                    shape=(n + 1, n), format="csr") / h


def _eye(n: int) -> sp.csr_matrix:
    return sp.identity(n, format="csr")


# -- differential operators ---------------------------------------------------

def cell_gradient(g: Grid) -> sp.csr_matrix:
    """Gradient from cell centers to interior faces (faces x cells)."""
    blocks = []
    for d in range(g.dim):
        mats = [_eye(n) for n in g.dims]
        mats[d] = _diff(g.dims[d], g.spacing[d])
        blocks.append(_kron(mats))
    return canonical(sp.vstack(blocks))


def divergence(g: Grid) -> sp.csr_matrix:
    """Discrete divergence faces -> cells, ``-cell_gradient(g).T``."""
    return canonical(-cell_gradient(g).T)


def _derivative_blocks(g: Grid):
    """Yield ``(d, j, matrix, location_shape)`` for every derivative of every component.

    Normal derivatives (``j == d``) land on cells. Tangential derivatives land
    on the full set of nodes (2D) / edges (3D) spanned by axes ``d`` and ``j``,
    so that ``du_d/dx_j`` and ``du_j/dx_d`` share rows. Rows where the component
    sits on an eliminated boundary face are identically zero.
    """
    for d in range(g.dim):
        for j in range(g.dim):
            mats, shape = [], []
            for a, (n, h) in enumerate(zip(g.dims, g.spacing)):
                if a == d == j:
                    mats.append(-_diff(n, h).T)
                    shape.append(n)
                elif a == d:
                    # embed interior faces into the node line 0..n
                    mats.append(sp.eye(n + 1, n - 1, k=-1, format="csr"))
                    shape.append(n + 1)
                elif a == j:
                    mats.append(_diff_ghost(n, h))
                    shape.append(n + 1)
                else:
                    mats.append(_eye(n))
                    shape.append(n)
            yield d, j, _kron(mats), tuple(shape)


def block_gradient(g: Grid) -> sp.csr_matrix:
    """All first derivatives of all displacement components.

    Columns follow the stacked displacement ordering; rows are grouped by
    ``(component d, derivative axis j)`` in row-major ``(d, j)`` order. See
    :func:`derivative_locations` for where each row lives.
    """
    rows = []
    for d in range(g.dim):
        comp = [m for dd, _, m, _ in _derivative_blocks(g) if dd == d]
        rows.append(sp.vstack(comp))
    return canonical(sp.block_diag(rows))


def derivative_locations(g: Grid) -> list[tuple[str, tuple[int, ...], np.ndarray]]:
    """Location tag for every row block of :func:`block_gradient`.

    Returns a list of ``(kind, shape, rows)`` where ``kind`` is ``"cell"`` or
    ``"edge<a><b>"`` (axes spanned, sorted), ``shape`` is the location array
    shape and ``rows`` the row indices of that block.
    """
    out, start = [], 0
    for d, j, m, shape in _derivative_blocks(g):
        kind = "cell" if d == j else "edge%d%d" % tuple(sorted((d, j)))
        out.append((kind, shape, np.arange(start, start + m.shape[0])))
        start += m.shape[0]
    return out


# -- averaging ------------------------------------------------------------------

def _check_cells(g: Grid, c) -> np.ndarray:
    c = np.asarray(c).ravel()
    if c.size != g.cell_count:
        raise ValueError(f"cell field has length {c.size}, expected {g.cell_count}")
    return c


def _face_average(g: Grid) -> sp.csr_matrix:
    blocks = []
    for d in range(g.dim):
        mats = [_eye(n) for n in g.dims]
        n = g.dims[d]
        mats[d] = sp.diags([0.5 * np.ones(n - 1)] * 2, [0, 1], shape=(n - 1, n))
        blocks.append(_kron(mats))
    return sp.vstack(blocks).tocsr()


def average_cells_to_faces(g: Grid, c) -> sp.csr_matrix:
    """Diagonal matrix of the arithmetic mean of the two cells beside each face."""
    c = _check_cells(g, c)
    return canonical(sp.diags(_face_average(g) @ c))


def _edge_average(g: Grid, shape_axes) -> sp.csr_matrix:
    """Mean of the existing cells around each node along ``shape_axes``."""
    mats = []
    for a, n in enumerate(g.dims):
        if a in shape_axes:
            mats.append(sp.diags([np.ones(n), np.ones(n)], [0, -1], shape=(n + 1, n)))
        else:
            mats.append(_eye(n))
    S = _kron(mats)
    counts = np.asarray(S.sum(axis=1)).ravel()
    return sp.diags(1.0 / counts) @ S


def average_cells_to_edges(g: Grid, c) -> sp.csr_matrix:
    """Diagonal weights for every row of :func:`block_gradient`.

    Cell-center rows take the cell value; node/edge rows take the mean of the
    surrounding cells that exist.
    """
    c = _check_cells(g, c)
    vals = []
    for d, j, m, _ in _derivative_blocks(g):
        if d == j:
            vals.append(c)
        else:
            vals.append(_edge_average(g, (d, j)) @ c)
    return canonical(sp.diags(np.concatenate(vals)))


def diag_cells(c) -> sp.csr_matrix:
    return canonical(sp.diags(np.asarray(c).ravel()))


def cell_neighbors(g: Grid) -> np.ndarray:
    """Per-cell local unknown indices into the mixed vector, ``-1`` where absent.

    Columns are ``[u_0 low, u_0 high, u_1 low, u_1 high, ..., p]``.
    """
    idx = np.indices(g.dims).reshape(g.dim, -1)
    cols = []
    for d in range(g.dim):
        for shift in (0, 1):
            node = idx.copy()
            node[d] = idx[d] + shift
            ok = (node[d] >= 1) & (node[d] <= g.dims[d] - 1)
            col = np.full(g.cell_count, -1)
            col[ok] = g.face_index(d, tuple(node[:, ok]))
            cols.append(col)
    cols.append(g.n_faces + np.arange(g.cell_count))
    return np.stack(cols, axis=1)


def cell_colors(g: Grid) -> np.ndarray:
    """0 for red (even index sum), 1 for black."""
    return np.indices(g.dims).sum(axis=0).ravel() % 2


def node_grid_values(g: Grid, d: int, j: int, values) -> np.ndarray:
    """Reshape one derivative block of :func:`block_gradient` output."""
    for dd, jj, _, shape in _derivative_blocks(g):
        if (dd, jj) == (d, j):
            return np.asarray(values).reshape(shape)
    raise ValueError(f"no derivative block ({d}, {j})")

