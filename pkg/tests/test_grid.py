import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from elastohelm.grid import (Grid, StaggeredField, average_cells_to_edges,
                             average_cells_to_faces, block_gradient, canonical,
                             cell_colors, cell_gradient, cell_neighbors,
                             derivative_locations, diag_cells, divergence,
                             node_grid_values, spmv, transpose, triple_product)


def is_canonical(A):
    A = sp.csr_matrix(A)
    for r in range(A.shape[0]):
        cols = A.indices[A.indptr[r]:A.indptr[r + 1]]
        if np.any(np.diff(cols) <= 0):
            return False
    return True


def random_sparse(rng, m, n, density=0.4):
    A = sp.random(m, n, density=density, random_state=rng, format="csr")
    B = sp.random(m, n, density=density, random_state=rng, format="csr")
    return canonical(A + 1j * B)


class TestGrid:
    def test_counts_2d(self):
        g = Grid((4, 3), 0.5)
        assert g.cell_count == 12
        assert g.face_count(0) == 3 * 3
        assert g.face_count(1) == 4 * 2
        assert g.n_faces == 17
        assert g.n_mixed == 29

    def test_counts_3d(self):
        g = Grid((4, 3, 2))
        assert [g.face_count(d) for d in range(3)] == [3 * 3 * 2, 4 * 2 * 2, 4 * 3 * 1]

    @pytest.mark.parametrize("dims, spacing", [((1, 4), 1.0), ((4,), 1.0),
                                               ((4, 4), 0.0), ((4, 4), (1.0,))])
    def test_invalid(self, dims, spacing):
        with pytest.raises(ValueError):
            Grid(dims, spacing)

    def test_coarsen(self):
        g = Grid((8, 4), (0.1, 0.2)).coarsen()
        assert g.dims == (4, 2) and g.spacing == (0.2, 0.4)
        with pytest.raises(ValueError):
            Grid((6, 3)).coarsen()

    def test_staggered_field_lengths(self):
        g = Grid((3, 3))
        f = StaggeredField(g, np.zeros(g.n_faces), np.zeros(g.cell_count))
        assert f.component(1).shape == (3, 2)
        with pytest.raises(ValueError):
            StaggeredField(g, np.zeros(g.n_faces + 1), np.zeros(g.cell_count))


class TestCellGradient:
    def test_constant_field(self):
        g = Grid((5, 3, 4), (0.3, 0.2, 0.1))
        G = cell_gradient(g)
        assert G.shape == (g.n_faces, g.cell_count)
        assert np.abs(G @ np.full(g.cell_count, 3.7)).max() == 0

    def test_linear_field_4x4(self):
        g = Grid((4, 4), 1.0)
        x1 = g.cell_centers()[0].ravel()
        v = cell_gradient(g) @ x1
        o = g.face_offsets
        np.testing.assert_allclose(v[o[0]:o[1]], 1.0)
        np.testing.assert_allclose(v[o[1]:o[2]], 0.0)

    def test_divergence_is_minus_transpose(self):
        g = Grid((4, 3, 3), (1.0, 0.5, 2.0))
        G, Dv = cell_gradient(g), divergence(g)
        assert abs(Dv + G.T).max() == 0

    def test_curl_in_null_space(self):
        g = Grid((12, 10), (0.3, 0.2))
        h1, h2 = g.spacing
        rng = np.random.default_rng(1)
        psi = np.zeros((13, 11))
        psi[3:-3, 3:-3] = rng.standard_normal((7, 5))
        v1 = (psi[1:-1, 1:] - psi[1:-1, :-1]) / h2       # faces normal to x1
        v2 = -(psi[1:, 1:-1] - psi[:-1, 1:-1]) / h1      # faces normal to x2
        v = np.concatenate([v1.ravel(), v2.ravel()])
        G = cell_gradient(g)
        r = G @ diag_cells(np.ones(g.cell_count)) @ G.T @ v
        assert np.linalg.norm(r) <= 1e-12 * np.linalg.norm(v)


class TestBlockGradient:
    def test_translation(self):
        g = Grid((4, 3, 3))
        B = block_gradient(g)
        u = np.concatenate([np.full(g.face_count(d), d + 1.0) for d in range(3)])
        # rigid translation: interior derivatives vanish; only rows touching
        # the zero ghost/boundary values see the jump
        out = B @ u
        for kind, shape, rows in derivative_locations(g):
            vals = out[rows].reshape(shape)
            if kind == "cell":
                inner = vals[tuple(slice(1, -1) for _ in shape)]
                assert np.abs(inner).max() == 0

    def test_translation_interior_2d(self):
        g = Grid((6, 5))
        B = block_gradient(g)
        u = np.concatenate([np.full(g.face_count(0), 2.0), np.full(g.face_count(1), -1.0)])
        out = B @ u
        dx2 = node_grid_values(g, 0, 1, out[derivative_locations(g)[1][2]])
        assert np.abs(dx2[1:-1, 1:-1]).max() == 0

    def test_linear_in_x2(self):
        g = Grid((3, 3), 1.0)
        x2 = g.face_centers(0)[1].ravel()
        u = np.concatenate([x2, np.zeros(g.face_count(1))])
        out = block_gradient(g) @ u
        locs = derivative_locations(g)
        vals = out[locs[1][2]].reshape(locs[1][1])   # du_1 / dx_2 on nodes
        np.testing.assert_allclose(vals[1:-1, 1:-1], 1.0)

    def test_location_matching(self):
        for g in (Grid((4, 3)), Grid((3, 4, 2))):
            locs = {}
            it = iter(derivative_locations(g))
            for d in range(g.dim):
                for j in range(g.dim):
                    locs[d, j] = next(it)
            for d in range(g.dim):
                assert locs[d, d][0] == "cell"
                for j in range(g.dim):
                    if j != d:
                        assert locs[d, j][:2] == locs[j, d][:2]
            rng = np.random.default_rng(0)
            Ae = average_cells_to_edges(g, rng.uniform(1, 2, g.cell_count)).diagonal()
            for d in range(g.dim):
                for j in range(d + 1, g.dim):
                    np.testing.assert_array_equal(Ae[locs[d, j][2]], Ae[locs[j, d][2]])

    def test_interior_stencil_is_laplacian(self):
        g = Grid((4, 4), 1.0)
        B = block_gradient(g)
        L = (B.T @ B).toarray()
        # u_1 face at node 2, cell 1 (interior): 5-point Laplacian
        row = g.face_index(0, (2, 1))
        nbrs = [g.face_index(0, (1, 1)), g.face_index(0, (3, 1)),
                g.face_index(0, (2, 0)), g.face_index(0, (2, 2))]
        assert L[row, row] == pytest.approx(4.0)
        np.testing.assert_allclose(L[row, nbrs], -1.0)
        assert np.count_nonzero(L[row]) == 5


class TestAveraging:
    def test_faces_uniform(self):
        g = Grid((4, 3))
        A = average_cells_to_faces(g, np.ones(g.cell_count))
        assert abs(A - sp.identity(g.n_faces)).max() == 0

    def test_faces_pair(self):
        g = Grid((2, 2))
        c = np.array([1.0, 1.0, 3.0, 3.0])   # cells (0,*)=1, (1,*)=3
        A = average_cells_to_faces(g, c).diagonal()
        np.testing.assert_allclose(A[:g.face_count(0)], 2.0)

    def test_faces_linear_ramp(self):
        g = Grid((6, 4), (0.5, 0.25))
        x1, x2 = g.cell_centers()
        rho = 1 + 2 * x1 + 3 * x2
        A = average_cells_to_faces(g, rho).diagonal()
        expected = np.concatenate([(1 + 2 * f[0] + 3 * f[1]).ravel()
                                   for f in (g.face_centers(0), g.face_centers(1))])
        np.testing.assert_allclose(A, expected, rtol=1e-14)

    def test_edges_uniform(self):
        g = Grid((3, 4, 2))
        A = average_cells_to_edges(g, np.ones(g.cell_count))
        np.testing.assert_allclose(A.diagonal(), 1.0)

    def test_edges_2x2(self):
        g = Grid((2, 2))
        A = average_cells_to_edges(g, [1, 2, 3, 4]).diagonal()
        locs = derivative_locations(g)
        center = A[locs[1][2]].reshape(locs[1][1])[1, 1]
        assert center == pytest.approx(2.5)

    def test_edges_checkerboard(self):
        g = Grid((6, 5))
        a, b = 1.5, 4.0
        c = np.where(np.indices(g.dims).sum(axis=0) % 2, a, b).ravel()
        A = average_cells_to_edges(g, c).diagonal()
        locs = derivative_locations(g)
        nodes = A[locs[1][2]].reshape(locs[1][1])
        np.testing.assert_allclose(nodes[1:-1, 1:-1], (a + b) / 2)

    def test_edges_boundary_two_neighbors(self):
        g = Grid((3, 3))
        c = np.arange(1.0, 10.0)
        nodes = average_cells_to_edges(g, c).diagonal()[derivative_locations(g)[1][2]]
        nodes = nodes.reshape(4, 4)
        cc = c.reshape(3, 3)
        assert nodes[0, 1] == pytest.approx((cc[0, 0] + cc[0, 1]) / 2)
        assert nodes[0, 0] == pytest.approx(cc[0, 0])

    @pytest.mark.parametrize("fn", [average_cells_to_faces, average_cells_to_edges])
    def test_length_mismatch(self, fn):
        with pytest.raises(ValueError):
            fn(Grid((3, 3)), np.ones(8))

    def test_diag_cells(self):
        assert abs(diag_cells(np.ones(5)) - sp.identity(5)).max() == 0
        assert diag_cells(np.zeros(5)).count_nonzero() == 0
        v = np.random.default_rng(0).standard_normal(7)
        np.testing.assert_array_equal(diag_cells(v).diagonal(), v)


class TestSparse:
    def test_identity_triple_product(self):
        rng = np.random.default_rng(3)
        H = random_sparse(rng, 6, 6)
        R = triple_product(sp.identity(6), H)
        assert abs(R - H).max() == 0

    def test_triple_product_dense_oracle(self):
        rng = np.random.default_rng(4)
        H = random_sparse(rng, 6, 6)
        P = random_sparse(rng, 6, 3, 0.6)
        dense = P.toarray().T @ H.toarray() @ P.toarray()
        R = triple_product(P, H)
        np.testing.assert_allclose(R.toarray(), dense, atol=1e-14)
        assert is_canonical(R)

    def test_triple_product_symmetric_pattern(self):
        g = Grid((4, 4))
        G = cell_gradient(g)
        H = canonical(G.T @ G)
        rng = np.random.default_rng(0)
        P = random_sparse(rng, 16, 5, 0.3)
        R = triple_product(P, H)
        pat = (abs(R) > 0).astype(int)
        assert abs(pat - pat.T).max() == 0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            triple_product(sp.identity(4), sp.identity(5))
        with pytest.raises(ValueError):
            spmv(sp.identity(4), np.ones(3))

    def test_spmv_columns(self):
        rng = np.random.default_rng(5)
        A = random_sparse(rng, 5, 4)
        for k in range(4):
            e = np.zeros(4)
            e[k] = 1
            np.testing.assert_array_equal(spmv(A, e), A.toarray()[:, k])

    def test_transpose_canonical(self):
        A = random_sparse(np.random.default_rng(6), 7, 5)
        T = transpose(A)
        assert is_canonical(T)
        np.testing.assert_array_equal(T.toarray(), A.toarray().T)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 9), st.integers(1, 6), st.integers(0, 2**31 - 1))
    def test_triple_product_matches_spmv(self, n, k, seed):
        rng = np.random.default_rng(seed)
        H = random_sparse(rng, n, n, 0.5)
        P = random_sparse(rng, n, k, 0.5)
        R = triple_product(P, H)
        assert is_canonical(R)
        x = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        ref = P.T @ (H @ (P @ x))
        scale = max(np.linalg.norm(ref), 1e-300)
        assert np.linalg.norm(R @ x - ref) <= 1e-13 * scale + 1e-300


class TestCellTopology:
    def test_neighbors_2x2(self):
        g = Grid((2, 2))
        nb = cell_neighbors(g)
        assert nb.shape == (4, 5)
        assert ((nb >= 0).sum(axis=1) == 3).all()

    def test_interior_block_sizes(self):
        assert (cell_neighbors(Grid((5, 5))) >= 0).sum(axis=1).max() == 5
        assert (cell_neighbors(Grid((4, 4, 4))) >= 0).sum(axis=1).max() == 7

    def test_colors(self):
        c = cell_colors(Grid((3, 3))).reshape(3, 3)
        assert c[0, 0] == 0 and c[0, 1] == 1 and c[1, 1] == 0
