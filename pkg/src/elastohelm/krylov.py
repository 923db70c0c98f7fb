"""Restarted flexible GMRES and the preconditioned elastic/acoustic solve drivers."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .discretization import (assemble_acoustic, assemble_mixed, point_source,
                             shifted)
from .grid import Grid, StaggeredField
from .medium import AttenuationConfig, MediumModel, build_gamma
from .multigrid import CycleConfig, build_hierarchy

__all__ = ["SolveConfig", "SolveReport", "KrylovBreakdown", "fgmres",
           "solve_elastic", "solve_acoustic", "solve_standard"]

log = logging.getLogger(__name__)


class KrylovBreakdown(RuntimeError):
    """Non-finite values appeared during the iteration."""


@dataclass(frozen=True)
class SolveConfig:
    restart: int = 5
    tol: float = 1e-6
    maxiter: int = 250
    shift: float = 0.2

    def __post_init__(self):
        if self.restart < 1:
            raise ValueError("restart must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass
class SolveReport:
    iterations: int = 0
    converged: bool = False
    residuals: list = field(default_factory=list)
    setup_time: float = 0.0
    solve_time: float = 0.0

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else np.nan

    def label(self) -> str:
        n = self.iterations
        return str(n) if self.converged else f">{n}"


def _apply(op, x):
    if op is None:
        return x
    if callable(op):
        return op(x)
    return op @ x


def fgmres(A, b, precond=None, restart=5, tol=1e-6, maxiter=250, x0=None):
    """Right-preconditioned flexible GMRES(restart).

    Parameters
    ----------
    A : sparse matrix, ndarray or callable
        System operator.
    b : ndarray
        Right-hand side.
    precond : callable, matrix or None
        Preconditioner application ``z = M^-1 v``; may change between calls.
    restart : int
        Krylov subspace dimension per cycle.
    tol : float
        Stop when ``||b - A x|| / ||b|| <= tol``.
    maxiter : int
        Maximum number of preconditioner applications (inner iterations).

    Returns
    -------
    x : ndarray
    report : SolveReport
        ``iterations`` counts preconditioner applications; ``residuals`` holds
        the relative residual after every inner step (recomputed from scratch
        at every restart).
    """
    b = np.asarray(b, dtype=complex)
    n = b.size
    x = np.zeros(n, dtype=complex) if x0 is None else np.array(x0, dtype=complex)
    rep = SolveReport()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        rep.converged = True
        rep.residuals.append(0.0)
        return np.zeros(n, dtype=complex), rep
    m = restart
    t0 = time.perf_counter()
    while True:
        r = b - _apply(A, x)
        beta = np.linalg.norm(r)
        if not np.isfinite(beta):
            raise KrylovBreakdown("non-finite residual norm")
        rel = beta / bnorm
        if rep.residuals:
            rep.residuals[-1] = rel
        else:
            rep.residuals.append(rel)
        if rel <= tol:
            rep.converged = True
            break
        if rep.iterations >= maxiter:
            break
        V = np.zeros((m + 1, n), dtype=complex)
        Z = np.zeros((m, n), dtype=complex)
        Hm = np.zeros((m + 1, m), dtype=complex)
        cs = np.zeros(m, dtype=complex)
        sn = np.zeros(m, dtype=complex)
        g = np.zeros(m + 1, dtype=complex)
        g[0] = beta
        V[0] = r / beta
        k = 0
        for j in range(m):
            Z[j] = _apply(precond, V[j])
            w = _apply(A, Z[j])
            rep.iterations += 1
            if not np.all(np.isfinite(w)):
                raise KrylovBreakdown(f"non-finite values at iteration {rep.iterations}")
            for i in range(j + 1):  # modified Gram-Schmidt
                Hm[i, j] = np.vdot(V[i], w)
                w = w - Hm[i, j] * V[i]
            Hm[j + 1, j] = np.linalg.norm(w)
            lucky = Hm[j + 1, j] <= 1e-14 * np.abs(Hm[:j + 1, j]).max(initial=0.0)
            if not lucky:
                V[j + 1] = w / Hm[j + 1, j]
            for i in range(j):
                t = cs[i] * Hm[i, j] + sn[i] * Hm[i + 1, j]
                Hm[i + 1, j] = -np.conj(sn[i]) * Hm[i, j] + np.conj(cs[i]) * Hm[i + 1, j]
                Hm[i, j] = t
            a, c = Hm[j, j], Hm[j + 1, j]
            den = np.hypot(abs(a), abs(c))
            if den == 0:
                cs[j], sn[j] = 1.0, 0.0
            elif a == 0:
                cs[j], sn[j] = 0.0, 1.0
            else:
                cs[j] = abs(a) / den
                sn[j] = (a / abs(a)) * np.conj(c) / den
            Hm[j, j] = cs[j] * a + sn[j] * c
            Hm[j + 1, j] = 0.0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]
            k = j + 1
            rel = abs(g[j + 1]) / bnorm
            rep.residuals.append(rel)
            if rel <= tol or lucky or rep.iterations >= maxiter:
                break
        y = np.linalg.solve(np.triu(Hm[:k, :k]), g[:k])
        x = x + Z[:k].T @ y
    rep.solve_time = time.perf_counter() - t0
    return x, rep


# -- solve drivers --------------------------------------------------------------

def _with_attenuation(m: MediumModel, omega, att: AttenuationConfig | None):
    if att is None:
        return m
    return m.with_gamma(build_gamma(m.grid, att, omega))


def solve_elastic(g: Grid, m: MediumModel, omega: float, cfg=SolveConfig(),
                  cycle=CycleConfig(), rhs=None, attenuation=AttenuationConfig(),
                  u_only=False):
    """Mixed-formulation solve preconditioned by a cycle on the shifted operator.

    Returns ``(StaggeredField, SolveReport)`` or ``(u, SolveReport)`` with
    ``u_only``.
    """
    t0 = time.perf_counter()
    m = _with_attenuation(m, omega, attenuation)
    system = assemble_mixed(g, m, omega)
    H = build_hierarchy(shifted(system, cfg.shift), g, cycle, layout="mixed")
    setup = time.perf_counter() - t0
    q = point_source(g) if rhs is None else np.asarray(rhs)
    if q.size == g.n_faces:
        q = np.concatenate([q, np.zeros(g.cell_count, dtype=complex)])
    x, rep = fgmres(system.A, q, H, cfg.restart, cfg.tol, cfg.maxiter)
    rep.setup_time = setup
    field_ = StaggeredField.from_vector(g, x)
    log.info("elastic %s omega=%.4g: %s its", g.dims, omega, rep.label())
    return (field_.u if u_only else field_), rep


def solve_standard(g: Grid, m: MediumModel, omega: float, cfg=SolveConfig(),
                   cycle=CycleConfig(pre=2, post=2, relaxation="jacobi",
                                     damping=0.5),
                   rhs=None, attenuation=AttenuationConfig()):
    """Displacement-only solve with a Jacobi-relaxed cycle (baseline formulation)."""
    from .discretization import assemble_elastic

    t0 = time.perf_counter()
    m = _with_attenuation(m, omega, attenuation)
    system = assemble_elastic(g, m, omega)
    H = build_hierarchy(shifted(system, cfg.shift), g, cycle, layout="face")
    setup = time.perf_counter() - t0
    q = point_source(g) if rhs is None else np.asarray(rhs)
    x, rep = fgmres(system.H, q, H, cfg.restart, cfg.tol, cfg.maxiter)
    rep.setup_time = setup
    log.info("standard %s omega=%.4g: %s its", g.dims, omega, rep.label())
    return x, rep


def solve_acoustic(g: Grid, velocity, rho, omega: float, cfg=SolveConfig(),
                   cycle=CycleConfig(pre=2, post=2, relaxation="jacobi",
                                     damping=0.8),
                   rhs=None, attenuation=AttenuationConfig(), gamma=None):
    """Cell-centered acoustic solve with a Jacobi-relaxed shifted cycle."""
    t0 = time.perf_counter()
    if gamma is None:
        gamma = (np.zeros(g.cell_count) if attenuation is None
                 else build_gamma(g, attenuation, omega))
    system = assemble_acoustic(g, velocity, rho, gamma, omega)
    H = build_hierarchy(shifted(system, cfg.shift), g, cycle, layout="cell")
    setup = time.perf_counter() - t0
    q = point_source(g, kind="acoustic") if rhs is None else np.asarray(rhs)
    x, rep = fgmres(system.A, q, H, cfg.restart, cfg.tol, cfg.maxiter)
    rep.setup_time = setup
    log.info("acoustic %s omega=%.4g: %s its", g.dims, omega, rep.label())
    return x, rep
