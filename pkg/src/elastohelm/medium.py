"""Cell-centered media: Lame parameters, density, attenuation and model builders."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Grid

__all__ = [
    "MediumModel", "AttenuationConfig", "poisson_ratio", "velocities",
    "build_gamma", "make_constant_model", "make_linear_model",
    "make_layered_model", "model_from_velocities", "load_raw_model",
    "save_raw_model",
]

SIDES = ("left", "right", "top", "bottom", "front", "back")


@dataclass(frozen=True)
class MediumModel:
    """Per-cell density, Lame parameters and attenuation."""

    grid: Grid
    rho: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    gamma: np.ndarray = None

    def __post_init__(self):
        n = self.grid.cell_count
        vals = {}
        for name in ("rho", "mu", "lam", "gamma"):
            v = getattr(self, name)
            v = np.zeros(n) if v is None else np.asarray(v, dtype=float).ravel()
            if v.size == 1:
                v = np.full(n, v.item())
            if v.size != n:
                raise ValueError(f"{name} has {v.size} entries, grid has {n} cells")
            vals[name] = v
            object.__setattr__(self, name, v)
        if np.any(vals["rho"] <= 0):
            raise ValueError("density must be positive")
        if np.any(vals["mu"] < 0):
            raise ValueError("mu must be non-negative")
        if np.any(vals["lam"] <= 0):
            raise ValueError("lambda must be positive")
        if np.any(vals["gamma"] < 0):
            raise ValueError("gamma must be non-negative")

    def with_gamma(self, gamma) -> "MediumModel":
        return MediumModel(self.grid, self.rho, self.mu, self.lam, gamma)

    @property
    def vp(self) -> np.ndarray:
        return velocities(self)[0]

    @property
    def vs(self) -> np.ndarray:
        return velocities(self)[1]


@dataclass(frozen=True)
class AttenuationConfig:
    """Absorbing boundary layer plus a uniform bulk attenuation.

    ``abl_amplitude=None`` means "use omega", so that the mass-matrix factor
    ``1 - i gamma / omega`` reaches ``1 - i (1 + bulk_factor)`` at the boundary.
    """

    abl_cells: int = 20
    abl_amplitude: float | None = None
    bulk_factor: float = 0.005
    sides: tuple[str, ...] | None = None  # None: every side

    def validate(self, g: Grid):
        if self.abl_cells < 0:
            raise ValueError("abl_cells must be >= 0")
        if self.bulk_factor < 0:
            raise ValueError("bulk_factor must be >= 0")
        if self.abl_cells and 2 * self.abl_cells >= min(g.dims):
            raise ValueError(
                f"absorbing layer of {self.abl_cells} cells is too wide for grid {g.dims}")
        bad = set(self.sides or ()) - {name for name, _, _ in _side_axes(g)}
        if bad:
            raise ValueError(f"unknown sides {sorted(bad)} for a {g.dim}D grid")


def poisson_ratio(m: MediumModel) -> np.ndarray:
    s = m.lam + m.mu
    if np.any(s == 0):
        raise ZeroDivisionError("lambda + mu vanishes")
    return m.lam / (2 * s)


def velocities(m: MediumModel) -> tuple[np.ndarray, np.ndarray]:
    """Pressure and shear wave velocities."""
    vp = np.sqrt((m.lam + 2 * m.mu) / m.rho)
    vs = np.sqrt(m.mu / m.rho)
    return vp, vs


def _side_axes(g: Grid):
    # (side name, axis, low end?) -- depth is the last axis, top is index 0
    if g.dim == 2:
        names = [("left", 0, True), ("right", 0, False),
                 ("top", 1, True), ("bottom", 1, False)]
    else:
        names = [("left", 0, True), ("right", 0, False),
                 ("front", 1, True), ("back", 1, False),
                 ("top", 2, True), ("bottom", 2, False)]
    return names


def build_gamma(g: Grid, cfg: AttenuationConfig, omega: float) -> np.ndarray:
    """Attenuation per cell: bulk term plus a quadratic absorbing layer.

    The layer profile is ``((w - depth) / w)**2`` where ``depth`` is the distance
    of the cell center from the boundary in cells, ``w = abl_cells``; the
    maximum is taken over the active sides.
    """
    cfg.validate(g)
    amp = omega if cfg.abl_amplitude is None else cfg.abl_amplitude
    q = np.zeros(g.dims)
    w = cfg.abl_cells
    if w > 0:
        for name, axis, low in _side_axes(g):
            if cfg.sides is not None and name not in cfg.sides:
                continue
            n = g.dims[axis]
            centers = np.arange(n) + 0.5
            dist = centers if low else n - centers
            prof = np.clip((w - dist) / w, 0.0, None) ** 2
            shape = [1] * g.dim
            shape[axis] = n
            q = np.maximum(q, prof.reshape(shape))
    return (cfg.bulk_factor * omega + amp * q).ravel()


def model_from_velocities(g: Grid, vp, vs, rho, gamma=None) -> MediumModel:
    """Back-compute Lame parameters: ``mu = rho vs^2``, ``lam = rho vp^2 - 2 mu``."""
    vp, vs, rho = (np.broadcast_to(np.asarray(a, float).ravel(), (g.cell_count,))
                   for a in (vp, vs, rho))
    if np.any(vp <= 0) or np.any(vs < 0):
        raise ValueError("velocities must be positive")
    mu = rho * vs**2
    lam = rho * vp**2 - 2 * mu
    return MediumModel(g, rho, mu, lam, gamma)


def make_constant_model(g: Grid, rho=1.0, mu=1.0, lam=1.0) -> MediumModel:
    n = g.cell_count
    return MediumModel(g, np.full(n, rho), np.full(n, mu), np.full(n, lam))


def make_linear_model(g: Grid, vs_top=0.9, vs_bottom=2.25, ratio=2.0,
                      rho_top=2.0, rho_bottom=2.5) -> MediumModel:
    """Shear velocity and density linear in depth; ``vp = ratio * vs``."""
    if min(vs_top, vs_bottom, rho_top, rho_bottom, ratio) <= 0:
        raise ValueError("velocities, density and ratio must be positive")
    depth = g.cell_centers()[-1] / (g.dims[-1] * g.spacing[-1])
    vs = vs_top + (vs_bottom - vs_top) * depth
    rho = rho_top + (rho_bottom - rho_top) * depth
    return model_from_velocities(g, ratio * vs, vs, rho)


def make_layered_model(g: Grid, seed=0, n_layers=9, vp_range=(1.6, 4.4)):
    """Synthetic heterogeneous section: dipping layers cut by a normal fault.

    Velocities grow with depth, the vp/vs ratio varies between layers (and so
    does Poisson's ratio), and density follows Gardner's relation.
    """
    rng = np.random.default_rng(seed)
    xyz = g.cell_centers()
    extent = [n * h for n, h in zip(g.dims, g.spacing)]
    x = xyz[0] / extent[0]
    z = xyz[-1] / extent[-1]
    dip = 0.15 * np.sin(2.5 * np.pi * x + rng.uniform(0, np.pi))
    fault = np.where(x + 0.4 * z > 0.55, 0.08, 0.0)
    depth = np.clip(z + dip * z * (1 - z) * 2 + fault, 0, 0.9999)
    edges = np.sort(rng.uniform(0.05, 0.95, n_layers - 1))
    layer = np.searchsorted(edges, depth)
    vp_layers = np.linspace(*vp_range, n_layers) + rng.uniform(-0.2, 0.2, n_layers)
    ratio_layers = rng.uniform(1.7, 3.2, n_layers)
    vp = vp_layers[layer] * (1 + 0.05 * (depth - 0.5))
    vs = vp / ratio_layers[layer]
    rho = 1.741 * vp**0.25
    return model_from_velocities(g, vp, vs, rho)


def load_raw_model(path, dims, value_kind="float32") -> np.ndarray:
    """Read a headerless little-endian float grid into a flat cell field.

    Values are stored with the last axis running fastest (C order).
    """
    dtype = {"float32": "<f4", "float64": "<f8"}[value_kind]
    path = Path(path)
    n = int(np.prod(dims))
    size = path.stat().st_size
    if size != n * np.dtype(dtype).itemsize:
        raise ValueError(f"{path}: {size} bytes does not match dims {tuple(dims)} "
                         f"of {value_kind}")
    return np.fromfile(path, dtype=dtype).astype(float)


def save_raw_model(path, values, value_kind="float32"):
    dtype = {"float32": "<f4", "float64": "<f8"}[value_kind]
    np.asarray(values, dtype=dtype).ravel().tofile(path)
