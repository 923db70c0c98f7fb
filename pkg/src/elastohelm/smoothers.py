"""Red-black cell-wise (Vanka) relaxation and damped Jacobi."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .grid import Grid, cell_colors, cell_neighbors

__all__ = [
    "RelaxConfig", "VankaBlocks", "SingularBlockError", "vanka_setup",
    "vanka_sweep", "jacobi_sweep", "VankaSmoother", "JacobiSmoother",
    "gather_entries", "PRECISION_TOL",
]

_STORAGE = {"half": np.float16, "single": np.complex64, "double": np.complex128}
_COMPUTE = {"half": np.complex64, "single": np.complex64, "double": np.complex128}

# relative tolerance on ||B^-1 B - I|| for each stored precision
PRECISION_TOL = {"half": 1e-2, "single": 1e-5, "double": 1e-12}


class SingularBlockError(np.linalg.LinAlgError):
    """A local Vanka block could not be inverted."""

    def __init__(self, cells):
        self.cells = np.asarray(cells)
        super().__init__(f"singular local block in {self.cells.size} cell(s), "
                         f"first: {self.cells[:5].tolist()}")


@dataclass(frozen=True)
class RelaxConfig:
    scheme: str = "vanka-redblack"
    damping: float = 0.5
    sweeps: int = 1
    precision: str = "single"

    def __post_init__(self):
        if self.damping <= 0:
            raise ValueError("damping must be positive")
        if self.scheme not in ("vanka-redblack", "jacobi"):
            raise ValueError(f"unknown relaxation scheme {self.scheme!r}")
        if self.precision not in _STORAGE:
            raise ValueError(f"unknown precision {self.precision!r}")


@dataclass(frozen=True)
class VankaBlocks:
    """Inverted local blocks, one per cell.

    ``index`` holds the local unknowns of each cell; slots without an unknown
    (eliminated boundary faces) point at the dummy index ``n`` and carry an
    identity row/column in the stored inverse.
    """

    n: int
    index: np.ndarray
    stored: np.ndarray
    precision: str
    colors: tuple[np.ndarray, np.ndarray]

    @property
    def block_sizes(self) -> np.ndarray:
        return (self.index < self.n).sum(axis=1)

    def inverse(self, cells=slice(None)) -> np.ndarray:
        s = self.stored[cells]
        if self.precision == "half":
            return (s[..., 0] + 1j * s[..., 1].astype(np.float32)).astype(np.complex64)
        return s


def gather_entries(A, rows, cols) -> np.ndarray:
    """Values ``A[rows[k], cols[k]]`` (zero where not stored) for a canonical CSR."""
    A = sp.csr_matrix(A)
    A.sort_indices()
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    row_of_nz = np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))
    keys = row_of_nz.astype(np.int64) * A.shape[1] + A.indices
    q = rows.astype(np.int64) * A.shape[1] + cols
    if keys.size == 0:
        return np.zeros(q.shape, dtype=A.dtype)
    pos = np.searchsorted(keys, q)
    pos = np.minimum(pos, keys.size - 1)
    hit = keys[pos] == q
    return np.where(hit, A.data[pos], 0)


def vanka_setup(A, g: Grid, precision="single") -> VankaBlocks:
    """Extract and invert the local block of every cell of a mixed operator."""
    if precision not in _STORAGE:
        raise ValueError(f"unknown precision {precision!r}")
    n = A.shape[0]
    if n != g.n_mixed:
        raise ValueError(f"operator of size {n} does not match grid {g.dims}")
    nb = cell_neighbors(g)
    ncell, k = nb.shape
    present = nb >= 0
    B = np.zeros((ncell, k, k), dtype=complex)
    for a in range(k):
        for b in range(k):
            ok = present[:, a] & present[:, b]
            B[ok, a, b] = gather_entries(A, nb[ok, a], nb[ok, b])
    for a in range(k):
        B[~present[:, a], a, a] = 1.0
    try:
        inv = np.linalg.inv(B)
    except np.linalg.LinAlgError:
        bad = [c for c in range(ncell) if np.linalg.matrix_rank(B[c]) < k]
        raise SingularBlockError(bad) from None
    if not np.all(np.isfinite(inv)):
        raise SingularBlockError(np.flatnonzero(~np.isfinite(inv).all(axis=(1, 2))))
    index = np.where(present, nb, n)
    if precision == "half":
        stored = np.stack([inv.real, inv.imag], axis=-1).astype(np.float16)
    else:
        stored = inv.astype(_STORAGE[precision])
    colors = cell_colors(g)
    return VankaBlocks(n, index, stored, precision,
                       (np.flatnonzero(colors == 0), np.flatnonzero(colors == 1)))


def _chunks(cells, threads):
    if threads <= 1 or cells.size < 2 * threads:
        return [cells]
    return np.array_split(cells, threads)


def vanka_sweep(A, blocks: VankaBlocks, x, rhs, damping=0.5, color_order=(0, 1),
                threads=1) -> np.ndarray:
    """One red-black cell-wise sweep; returns the updated iterate.

    Cells of one color are updated together from the same residual, so the
    result does not depend on the order (or the thread) in which they are
    processed.
    """
    dtype = _COMPUTE[blocks.precision]
    xe = np.zeros(blocks.n + 1, dtype=complex)
    xe[:-1] = x
    re = np.zeros(blocks.n + 1, dtype=complex)

    def work(cells):
        idx = blocks.index[cells]
        loc = re[idx].astype(dtype)
        delta = np.einsum("cij,cj->ci", blocks.inverse(cells), loc)
        xe[idx] += damping * delta

    for color in color_order:
        re[:-1] = rhs - A @ xe[:-1]
        parts = _chunks(blocks.colors[color], threads)
        if len(parts) == 1:
            work(parts[0])
        else:
            with ThreadPoolExecutor(threads) as pool:
                list(pool.map(work, parts))
        xe[-1] = 0.0
    return xe[:-1]


def jacobi_sweep(A, x, rhs, weight=0.8, diagonal=None) -> np.ndarray:
    """``x + weight * D^-1 (rhs - A x)``."""
    d = A.diagonal() if diagonal is None else diagonal
    if np.any(d == 0):
        raise ZeroDivisionError("zero diagonal entry in Jacobi relaxation")
    return x + weight * (rhs - A @ x) / d


class VankaSmoother:
    def __init__(self, A, g: Grid, damping=0.5, precision="single", threads=1):
        self.A = A
        self.damping = damping
        self.threads = threads
        self.blocks = vanka_setup(A, g, precision)

    def __call__(self, x, rhs, sweeps=1):
        for _ in range(sweeps):
            x = vanka_sweep(self.A, self.blocks, x, rhs, self.damping,
                            threads=self.threads)
        return x


class JacobiSmoother:
    def __init__(self, A, weight=0.8):
        self.A = A
        self.damping = weight
        self.diagonal = A.diagonal()
        if np.any(self.diagonal == 0):
            raise ZeroDivisionError("zero diagonal entry in Jacobi relaxation")

    def __call__(self, x, rhs, sweeps=1):
        for _ in range(sweeps):
            x = jacobi_sweep(self.A, x, rhs, self.damping, self.diagonal)
        return x
