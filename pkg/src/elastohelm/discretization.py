"""
Assembly of the elastic Helmholtz operator, its mixed (displacement-pressure)
form, the cell-centered acoustic operator, shifts and sources.

Sign convention: the elastic operators are assembled with the positive
semi-definite stiffness part, ``H = K - omega^2 M`` where
``M = A_f(rho * (1 - i gamma / omega))``. The acoustic operator keeps the
opposite (PDE) sign, ``L + omega^2 kappa^2 (1 - i gamma / omega)`` with ``L``
negative semi-definite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .grid import (Grid, average_cells_to_edges, average_cells_to_faces,
                   block_gradient, canonical, cell_gradient, diag_cells)
from .medium import MediumModel, velocities

__all__ = [
    "ElasticSystem", "MixedSystem", "AcousticSystem", "mass_matrix",
    "stiffness", "assemble_elastic", "assemble_mixed", "assemble_acoustic",
    "shifted", "point_source", "pressure_from_displacement",
    "displacement_from_pressure", "acoustic_rhs_from_elastic",
]


@dataclass(frozen=True)
class ElasticSystem:
    """Displacement-only elastic Helmholtz operator."""

    grid: Grid
    model: MediumModel
    omega: float
    H: sp.csr_matrix
    shift_mass: sp.csr_matrix

    @property
    def A(self):
        return self.H

    @property
    def layout(self):
        return "face"


@dataclass(frozen=True)
class MixedSystem:
    """Block operator over ``(u, p)``; ``shift_mass`` is zero on pressure rows."""

    grid: Grid
    model: MediumModel
    omega: float
    A: sp.csr_matrix
    shift_mass: sp.csr_matrix

    @property
    def layout(self):
        return "mixed"

    def blocks(self):
        """Return the four blocks ``(Auu, Aup, Apu, App)``."""
        n = self.grid.n_faces
        A = self.A
        return (A[:n, :n], A[:n, n:], A[n:, :n], A[n:, n:])


@dataclass(frozen=True)
class AcousticSystem:
    """Cell-centered acoustic Helmholtz operator."""

    grid: Grid
    omega: float
    A: sp.csr_matrix
    shift_mass: sp.csr_matrix
    rho: np.ndarray
    velocity: np.ndarray

    @property
    def layout(self):
        return "cell"


def mass_matrix(g: Grid, m: MediumModel, omega: float) -> sp.csr_matrix:
    """Face mass matrix ``A_f(rho * (1 - i gamma / omega))``."""
    if omega == 0:
        raise ValueError("omega must be nonzero for the attenuated mass matrix")
    return average_cells_to_faces(g, m.rho * (1 - 1j * m.gamma / omega))


def stiffness(g: Grid, m: MediumModel, with_grad_div=True) -> sp.csr_matrix:
    """Elasticity operator ``grad_h D(lam+mu) grad_h^T + Grad^T A_e(mu) Grad``."""
    B = block_gradient(g)
    K = B.T @ average_cells_to_edges(g, m.mu) @ B
    if with_grad_div:
        G = cell_gradient(g)
        K = K + G @ diag_cells(m.lam + m.mu) @ G.T
    return canonical(K)


def assemble_elastic(g: Grid, m: MediumModel, omega: float) -> ElasticSystem:
    K = stiffness(g, m)
    if omega == 0:
        H = K
    else:
        H = K - omega**2 * mass_matrix(g, m, omega)
    return ElasticSystem(g, m, omega, canonical(H), average_cells_to_faces(g, m.rho))


def assemble_mixed(g: Grid, m: MediumModel, omega: float) -> MixedSystem:
    s = m.lam + m.mu
    if np.any(s == 0):
        raise ValueError("lambda + mu vanishes in some cell")
    Auu = stiffness(g, m, with_grad_div=False)
    if omega != 0:
        Auu = Auu - omega**2 * mass_matrix(g, m, omega)
    G = cell_gradient(g)
    A = sp.bmat([[Auu, G], [G.T, diag_cells(-1.0 / s)]])
    Ms = sp.block_diag([average_cells_to_faces(g, m.rho),
                        sp.csr_matrix((g.cell_count, g.cell_count))])
    return MixedSystem(g, m, omega, canonical(A), canonical(Ms))


def assemble_acoustic(g: Grid, velocity, rho, gamma, omega: float,
                      density_average="inverse-of-mean") -> AcousticSystem:
    """Acoustic operator ``rho div(rho^-1 grad) + omega^2 kappa^2 (1 - i gamma/omega)``.

    ``density_average`` picks the face value of ``1/rho``: ``"inverse-of-mean"``
    uses ``1 / A_f(rho)`` (matches the elastic mass matrix, so the mu = 0 mixed
    system reduces to this operator exactly); ``"mean-of-inverse"`` uses
    ``A_f(1/rho)``.
    """
    n = g.cell_count
    velocity = np.broadcast_to(np.asarray(velocity, float).ravel(), (n,))
    rho = np.broadcast_to(np.asarray(rho, float).ravel(), (n,))
    gamma = np.broadcast_to(np.asarray(gamma, float).ravel(), (n,))
    if np.any(velocity <= 0):
        raise ValueError("velocity must be positive")
    G = cell_gradient(g)
    if density_average == "inverse-of-mean":
        face = 1.0 / average_cells_to_faces(g, rho).diagonal()
    elif density_average == "mean-of-inverse":
        face = average_cells_to_faces(g, 1.0 / rho).diagonal()
    else:
        raise ValueError(f"unknown density_average {density_average!r}")
    L = -diag_cells(rho) @ G.T @ sp.diags(face) @ G
    kappa2 = 1.0 / velocity**2
    A = L + omega**2 * diag_cells(kappa2 * (1 - 1j * gamma / omega))
    return AcousticSystem(g, omega, canonical(A), diag_cells(kappa2),
                          np.array(rho), np.array(velocity))


def shifted(system, alpha: float):
    """Complex-shifted copy of ``system.A`` used to build the preconditioner.

    The shift adds artificial attenuation with the same sign as the physical
    attenuation in the mass term: for the elastic and mixed operators (positive
    stiffness) this is ``A + i alpha omega^2 A_f(rho)`` on displacement rows;
    for the acoustic operator it is ``A - i alpha omega^2 D(kappa^2)``.
    """
    if alpha < 0:
        raise ValueError("shift must be non-negative")
    w2 = system.omega**2
    if isinstance(system, AcousticSystem):
        return canonical(system.A - 1j * alpha * w2 * system.shift_mass)
    return canonical(system.A + 1j * alpha * w2 * system.shift_mass)


def _nearest(centers, x):
    return int(np.argmin(np.abs(centers - x)))


def point_source(g: Grid, component=None, position=None, kind="elastic"):
    """Unit point source scaled by ``1 / cell volume``.

    ``position`` is in physical coordinates (default: horizontal center, top
    boundary). For ``kind="elastic"`` the source sits on the nearest face of
    displacement ``component`` (default: the vertical one, last axis) and a
    displacement-length vector is returned; for ``kind="acoustic"`` it sits
    in the nearest cell.
    """
    extent = np.array([n * h for n, h in zip(g.dims, g.spacing)])
    if position is None:
        position = extent / 2
        position[-1] = 0.0
    position = np.asarray(position, float)
    if position.shape != (g.dim,) or np.any(position < 0) or np.any(position > extent):
        raise ValueError(f"source position {position} is outside the domain {extent}")
    scale = 1.0 / np.prod(g.spacing)
    if kind == "acoustic":
        idx = tuple(_nearest((np.arange(n) + 0.5) * h, x)
                    for n, h, x in zip(g.dims, g.spacing, position))
        q = np.zeros(g.cell_count, dtype=complex)
        q[g.cell_index(idx)] = scale
        return q
    if kind != "elastic":
        raise ValueError(f"unknown source kind {kind!r}")
    d = g.dim - 1 if component is None else component
    if not 0 <= d < g.dim:
        raise ValueError(f"component {d} out of range")
    idx = []
    for a, (n, h, x) in enumerate(zip(g.dims, g.spacing, position)):
        if a == d:
            idx.append(1 + _nearest(np.arange(1, n) * h, x))
        else:
            idx.append(_nearest((np.arange(n) + 0.5) * h, x))
    q = np.zeros(g.n_faces, dtype=complex)
    q[g.face_index(d, tuple(idx))] = scale
    return q


def pressure_from_displacement(g: Grid, m: MediumModel, u) -> np.ndarray:
    """``p = D(lam + mu) grad_h^T u``."""
    return (m.lam + m.mu) * (cell_gradient(g).T @ u)


def displacement_from_pressure(g: Grid, m: MediumModel, omega, q, p) -> np.ndarray:
    """Top-block recovery ``u = -omega^-2 M^-1 (q - grad_h p)`` (valid for mu = 0)."""
    M = mass_matrix(g, m, omega).diagonal()
    if np.any(M == 0):
        raise ZeroDivisionError("singular mass matrix")
    return -(q - cell_gradient(g) @ p) / (omega**2 * M)


def acoustic_rhs_from_elastic(g: Grid, m: MediumModel, omega, q) -> np.ndarray:
    """Cell source for which the acoustic solution equals the mu = 0 mixed pressure.

    Eliminating ``u`` from the mu = 0 mixed system gives
    ``S p = omega^-2 grad_h^T M^-1 q``, and the acoustic operator (gamma = 0)
    equals ``-omega^2 D(rho) S``.
    """
    M = mass_matrix(g, m, omega).diagonal()
    return -m.rho * (cell_gradient(g).T @ (q / M))


def acoustic_velocity(m: MediumModel, which="p") -> np.ndarray:
    vp, vs = velocities(m)
    return vp if which == "p" else vs
