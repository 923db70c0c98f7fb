import numpy as np
import pytest
import scipy.sparse as sp

from elastohelm.grid import Grid
from elastohelm.krylov import (KrylovBreakdown, SolveConfig, fgmres,
                               solve_acoustic, solve_elastic, solve_standard)
from elastohelm.medium import AttenuationConfig, make_constant_model
from elastohelm.multigrid import CycleConfig


def rand_system(n, seed=0, diag=None):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    A += (diag if diag is not None else 2 * np.sqrt(n)) * np.eye(n)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return A, b


def test_identity_one_iteration():
    b = np.arange(1.0, 6.0)
    x, rep = fgmres(sp.identity(5), b)
    np.testing.assert_allclose(x, b)
    assert rep.iterations == 1 and rep.converged


def test_zero_rhs():
    x, rep = fgmres(np.eye(3), np.zeros(3))
    assert rep.converged and rep.iterations == 0 and not x.any()


def test_random_dense():
    A, b = rand_system(50)
    x, rep = fgmres(A, b, restart=5, tol=1e-12, maxiter=500)
    assert rep.converged
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-10, atol=1e-10)


def test_exact_preconditioner():
    A, b = rand_system(30, 1, diag=0.0)
    Ainv = np.linalg.inv(A)
    x, rep = fgmres(A, b, precond=lambda v: Ainv @ v, tol=1e-10)
    assert rep.iterations == 1
    assert np.linalg.norm(b - A @ x) <= 1e-10 * np.linalg.norm(b)


def test_matches_minimal_residual():
    # without restarts, iteration k minimizes the residual over K_k(A, b)
    A, b = rand_system(30, 2, diag=3.0)
    n = 8
    _, rep = fgmres(A, b, restart=n, tol=1e-15, maxiter=n)
    K = np.empty((30, n), dtype=complex)
    v = b.copy()
    for k in range(n):
        K[:, k] = v
        v = A @ v
    for k in range(1, n + 1):
        Q, _ = np.linalg.qr(K[:, :k])
        AQ = A @ Q
        y, *_ = np.linalg.lstsq(AQ, b, rcond=None)
        ref = np.linalg.norm(b - AQ @ y) / np.linalg.norm(b)
        assert rep.residuals[k] == pytest.approx(ref, rel=1e-8)


def test_history_properties():
    A, b = rand_system(40, 3, diag=4.0)
    _, rep = fgmres(A, b, restart=5, tol=1e-8, maxiter=300)
    r = np.array(rep.residuals)
    assert r[0] == pytest.approx(1.0)
    assert len(r) == rep.iterations + 1
    # minimal residual: nonincreasing within each restart cycle
    for start in range(0, rep.iterations, 5):
        seg = r[start:start + 6]
        assert np.all(np.diff(seg) <= 1e-12)


def test_restart_uses_true_residual():
    A, b = rand_system(40, 4)
    x, rep = fgmres(A, b, restart=5, tol=1e-8, maxiter=300)
    assert rep.converged
    assert np.linalg.norm(b - A @ x) / np.linalg.norm(b) == pytest.approx(rep.final_residual, rel=1e-6)
    assert rep.final_residual <= 1e-8


def test_not_converged_label():
    A, b = rand_system(40, 5, diag=0.0)
    _, rep = fgmres(A, b, restart=2, tol=1e-12, maxiter=6)
    assert not rep.converged and rep.iterations == 6
    assert rep.label() == ">6"


def test_flexible_preconditioner():
    # a preconditioner that changes every call still converges
    A, b = rand_system(30, 6, diag=0.0)
    Ainv = np.linalg.inv(A)
    calls = [0]

    def prec(v):
        calls[0] += 1
        return Ainv @ v * (1 + 0.1 * calls[0])

    x, rep = fgmres(A, b, precond=prec, tol=1e-10)
    assert rep.converged and rep.iterations == calls[0]


def test_breakdown():
    with pytest.raises(KrylovBreakdown):
        fgmres(lambda v: v * np.nan, np.ones(3))


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(restart=0)
    with pytest.raises(ValueError):
        SolveConfig(tol=0)


class TestDrivers:
    def setup_method(self):
        self.g = Grid((32, 16), 1 / 16)
        self.m = make_constant_model(self.g, lam=2.0)
        self.att = AttenuationConfig(abl_cells=4)

    def test_elastic(self):
        f, rep = solve_elastic(self.g, self.m, np.pi, attenuation=self.att)
        assert rep.converged and rep.iterations < 30
        assert f.u.shape == (self.g.n_faces,) and f.p.shape == (self.g.cell_count,)

    def test_standard_and_mixed_agree(self):
        # the mixed and displacement-only formulations are the same equations
        u_mix, _ = solve_elastic(self.g, self.m, np.pi, SolveConfig(tol=1e-10),
                                 attenuation=self.att, u_only=True)
        u_std, rep = solve_standard(self.g, self.m, np.pi, SolveConfig(tol=1e-10),
                                    attenuation=self.att)
        assert rep.converged
        assert np.linalg.norm(u_mix - u_std) <= 1e-7 * np.linalg.norm(u_std)

    def test_acoustic(self):
        x, rep = solve_acoustic(self.g, 1.0, 1.0, np.pi, attenuation=self.att,
                                cycle=CycleConfig(pre=2, post=2, relaxation="jacobi", damping=0.8))
        assert rep.converged and x.shape == (self.g.cell_count,)
