"""Geometric multigrid hierarchy and V/W cycles for shifted operators."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, canonical, triple_product
from .smoothers import JacobiSmoother, VankaSmoother

__all__ = ["CycleConfig", "Level", "MultigridHierarchy", "prolongation",
           "build_hierarchy", "cycle", "default_damping", "CoarseSolver"]

log = logging.getLogger(__name__)

DENSE_LIMIT = 2000


def default_damping(levels: int) -> tuple[float, ...]:
    """Per-level Vanka damping: 0.5 everywhere, 0.2 from the third level on when L = 4."""
    if levels >= 4:
        return (0.5, 0.5) + (0.2,) * (levels - 2)
    return (0.5,) * levels


@dataclass(frozen=True)
class CycleConfig:
    levels: int = 3
    cycle: str = "W"
    pre: int = 1
    post: int = 1
    damping: tuple[float, ...] | None = None
    relaxation: str = "vanka-redblack"
    precision: str = "single"
    threads: int = 1

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.cycle not in ("V", "W"):
            raise ValueError(f"cycle must be 'V' or 'W', got {self.cycle!r}")
        if self.pre + self.post < 1:
            raise ValueError("need at least one relaxation per cycle")

    def damping_at(self, level: int) -> float:
        d = self.damping
        if d is None:
            d = (default_damping(self.levels) if self.relaxation == "vanka-redblack"
                 else (0.8,) * self.levels)
        if np.isscalar(d):
            return float(d)
        return float(d[min(level, len(d) - 1)])


# -- transfer operators -------------------------------------------------------

def _p_cell_1d(nc: int) -> sp.csr_matrix:
    """Cell-centered 1D interpolation (3/4, 1/4), constant at the ends."""
    nf = 2 * nc
    rows, cols, vals = [], [], []
    for i in range(nc):
        for f, nbr in ((2 * i, i - 1), (2 * i + 1, i + 1)):
            if 0 <= nbr < nc:
                rows += [f, f]
                cols += [i, nbr]
                vals += [0.75, 0.25]
            else:
                rows.append(f)
                cols.append(i)
                vals.append(1.0)
    return sp.csr_matrix((vals, (rows, cols)), shape=(nf, nc))


def _p_face_1d(nc: int) -> sp.csr_matrix:
    """Interior-face 1D interpolation along the face normal.

    Fine face ``2K`` coincides with coarse face ``K``; fine face ``2K+1`` takes
    the mean of its neighbors, with zero boundary values.
    """
    nf = 2 * nc
    rows, cols, vals = [], [], []
    for k in range(1, nf):  # fine interior faces, node numbering
        if k % 2 == 0:
            rows.append(k - 1)
            cols.append(k // 2 - 1)
            vals.append(1.0)
        else:
            for K in (k // 2, k // 2 + 1):
                if 1 <= K <= nc - 1:
                    rows.append(k - 1)
                    cols.append(K - 1)
                    vals.append(0.5)
    return sp.csr_matrix((vals, (rows, cols)), shape=(nf - 1, nc - 1))


def _kron(mats):
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), mats)


def prolongation(g_coarse: Grid, g_fine: Grid, layout="mixed") -> sp.csr_matrix:
    """Interpolation from ``g_coarse`` to ``g_fine`` for a given unknown layout.

    ``layout`` is ``"cell"`` (cell-centered scalars), ``"face"`` (stacked
    displacements) or ``"mixed"`` (displacements then pressure).
    """
    if g_fine.dim != g_coarse.dim or any(
            nf != 2 * nc for nf, nc in zip(g_fine.dims, g_coarse.dims)):
        raise ValueError(f"grids {g_fine.dims} and {g_coarse.dims} are not 2:1")
    cell = _kron([_p_cell_1d(n) for n in g_coarse.dims])
    if layout == "cell":
        return canonical(cell)
    faces = []
    for d in range(g_coarse.dim):
        mats = [_p_cell_1d(n) for n in g_coarse.dims]
        mats[d] = _p_face_1d(g_coarse.dims[d])
        faces.append(_kron(mats))
    if layout == "face":
        return canonical(sp.block_diag(faces))
    if layout == "mixed":
        return canonical(sp.block_diag(faces + [cell]))
    raise ValueError(f"unknown layout {layout!r}")


# -- hierarchy ----------------------------------------------------------------

class CoarseSolver:
    """Direct solver for the coarsest operator."""

    def __init__(self, A):
        n = A.shape[0]
        self.n = n
        if n < DENSE_LIMIT:
            self.dense = True
            with np.errstate(all="raise"):
                self.lu = sl.lu_factor(A.toarray(), check_finite=True)
            if np.any(np.abs(np.diag(self.lu[0])) == 0):
                raise np.linalg.LinAlgError("singular coarsest operator")
        else:
            self.dense = False
            self.lu = spla.splu(sp.csc_matrix(A), permc_spec="COLAMD")

    def solve(self, b):
        if self.dense:
            return sl.lu_solve(self.lu, b)
        return self.lu.solve(np.asarray(b, dtype=complex))


@dataclass
class Level:
    grid: Grid
    A: sp.csr_matrix
    P: sp.csr_matrix | None = None      # from the next coarser level to this one
    smoother: object = None


@dataclass
class MultigridHierarchy:
    levels: list[Level]
    coarse: CoarseSolver
    config: CycleConfig
    layout: str
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.levels)

    def __call__(self, rhs):
        """Apply one cycle to ``rhs`` from a zero initial guess (preconditioner)."""
        return cycle(self, rhs)


def build_hierarchy(A, g: Grid, config: CycleConfig = CycleConfig(),
                    layout="mixed") -> MultigridHierarchy:
    """Galerkin hierarchy for the (shifted) operator ``A`` on grid ``g``."""
    L = config.levels
    div = 2 ** (L - 1)
    if any(n % div for n in g.dims):
        raise ValueError(f"grid {g.dims} is not divisible by 2^{L - 1} = {div}; "
                         "pad the model explicitly")
    if layout == "mixed" and config.relaxation != "vanka-redblack":
        raise ValueError("the mixed layout needs cell-wise (Vanka) relaxation")
    levels = [Level(g, canonical(A))]
    for ell in range(1, L):
        gc = levels[-1].grid.coarsen()
        P = prolongation(gc, levels[-1].grid, layout)
        Ac = triple_product(P, levels[-1].A)
        levels.append(Level(gc, Ac, P))
    for ell, lev in enumerate(levels[:-1]):
        w = config.damping_at(ell)
        if config.relaxation == "vanka-redblack":
            lev.smoother = VankaSmoother(lev.A, lev.grid, w, config.precision,
                                         config.threads)
        else:
            lev.smoother = JacobiSmoother(lev.A, w)
    coarse = CoarseSolver(levels[-1].A)
    log.debug("hierarchy: %s", [lev.grid.dims for lev in levels])
    return MultigridHierarchy(levels, coarse, config, layout)


def _cycle(h: MultigridHierarchy, ell: int, rhs, x):
    lev = h.levels[ell]
    if ell == len(h.levels) - 1:
        return h.coarse.solve(rhs)
    cfg = h.config
    if x is None:
        x = np.zeros(rhs.shape, dtype=complex)
    x = lev.smoother(x, rhs, cfg.pre)
    P = h.levels[ell + 1].P
    rc = P.T @ (rhs - lev.A @ x)
    nrec = 1 if (cfg.cycle == "V" or ell + 1 == len(h.levels) - 1) else 2
    ec = None
    for _ in range(nrec):
        ec = _cycle(h, ell + 1, rc, ec)
    x = x + P @ ec
    return lev.smoother(x, rhs, cfg.post)


def cycle(h: MultigridHierarchy, rhs, u0=None) -> np.ndarray:
    """One V- or W-cycle on the hierarchy's finest operator."""
    rhs = np.asarray(rhs, dtype=complex)
    if len(h.levels) == 1:
        return h.coarse.solve(rhs)
    x = None if u0 is None else np.array(u0, dtype=complex)
    return _cycle(h, 0, rhs, x)
