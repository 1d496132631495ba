import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsenet import topology as T
from sparsenet.linalg import (
    CsrMatrix,
    DimensionMismatch,
    csr_from_topology,
    sp_outer,
    sp_outer_accumulate,
    spmv,
    spmv_transpose,
)
from sparsenet.topology import BipartiteTopology


def random_csr(rng, rows, cols, density=0.4):
    mask = rng.random((rows, cols)) < density
    t = BipartiteTopology(rows, cols, [np.flatnonzero(r) for r in mask])
    return csr_from_topology(t, lambda nnz: rng.normal(size=nnz)), mask


class TestConstruction:
    def test_constant_zero(self):
        M = csr_from_topology(T.fully_connected(2, 2), lambda nnz: np.zeros(nnz))
        assert M.nnz == 4 and not M.values.any()

    def test_pattern_copy(self):
        M = csr_from_topology(T.regular_rotating(3, 4, 2), lambda nnz: np.ones(nnz))
        assert M.row_offsets.tolist() == [0, 2, 4, 6]
        assert M.col_indices.tolist() == [0, 1, 1, 2, 2, 3]

    def test_empty(self):
        M = csr_from_topology(BipartiteTopology(3, 2, [[], [], []]))
        assert M.nnz == 0
        assert spmv(M, [1.0, 2.0]).tolist() == [0.0, 0.0, 0.0]

    def test_values_in_row_major_edge_order(self):
        t = T.random_edge(5, 6, 3, 2)
        M = csr_from_topology(t, lambda nnz: np.arange(nnz, dtype=float))
        dense = M.to_dense()
        assert [dense[i, j] for i, j in t.edges()] == list(range(t.edge_count))

    @pytest.mark.parametrize(
        "args",
        [
            (2, 2, [0, 1], [0], [1.0]),
            (1, 2, [0, 2], [1, 0], [1.0, 1.0]),
            (1, 2, [0, 2], [0, 0], [1.0, 1.0]),
            (1, 2, [0, 1], [2], [1.0]),
            (1, 2, [0, 2], [0, 1], [1.0]),
        ],
    )
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            CsrMatrix(*args)

    def test_pattern_is_read_only(self):
        M = csr_from_topology(T.fully_connected(2, 2))
        with pytest.raises(ValueError):
            M.col_indices[0] = 1


class TestKernels:
    def test_identity(self):
        M = CsrMatrix(2, 2, [0, 1, 2], [0, 1], [1.0, 1.0])
        assert spmv(M, [3.0, -1.0]).tolist() == [3.0, -1.0]

    def test_row_sums(self):
        M = csr_from_topology(T.fully_connected(2, 3), lambda nnz: np.ones(nnz))
        assert spmv(M, np.ones(3)).tolist() == [3.0, 3.0]

    @pytest.mark.parametrize("seed", range(20))
    def test_8x6_against_dense(self, seed):
        rng = np.random.default_rng(seed)
        M, _ = random_csr(rng, 8, 6)
        x = rng.normal(size=6)
        np.testing.assert_allclose(spmv(M, x), M.to_dense() @ x, atol=1e-12, rtol=0)

    def test_oracle_equivalence_100(self):
        rng = np.random.default_rng(12345)
        for _ in range(100):
            rows, cols = rng.integers(1, 30, size=2)
            M, mask = random_csr(rng, rows, cols, rng.uniform(0.05, 0.9))
            D = M.to_dense()
            x, y = rng.normal(size=cols), rng.normal(size=rows)
            np.testing.assert_allclose(spmv(M, x), D @ x, atol=1e-12, rtol=0)
            np.testing.assert_allclose(spmv_transpose(M, y), D.T @ y, atol=1e-12, rtol=0)
            scale = rng.normal()
            expected = D + scale * np.outer(y, x) * mask
            sp_outer_accumulate(M, y, x, scale)
            np.testing.assert_allclose(M.to_dense(), expected, atol=1e-12, rtol=0)

    def test_batched_columns(self):
        rng = np.random.default_rng(7)
        M, mask = random_csr(rng, 9, 7)
        X, Y = rng.normal(size=(7, 5)), rng.normal(size=(9, 5))
        np.testing.assert_allclose(spmv(M, X), M.to_dense() @ X, atol=1e-12)
        np.testing.assert_allclose(spmv_transpose(M, Y), M.to_dense().T @ Y, atol=1e-12)
        dense_outer = (Y @ X.T) * mask
        np.testing.assert_allclose(
            M.with_values(sp_outer(M, Y, X)).to_dense(), dense_outer, atol=1e-12
        )

    def test_scale_zero_is_identity(self):
        rng = np.random.default_rng(1)
        M, _ = random_csr(rng, 5, 5)
        before = M.values.copy()
        sp_outer_accumulate(M, rng.normal(size=5), rng.normal(size=5), 0.0)
        assert np.array_equal(M.values, before)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 15), st.integers(1, 15), st.integers(0, 2**32), st.integers(1, 20))
    def test_structural_zeros_stay_zero(self, rows, cols, seed, steps):
        rng = np.random.default_rng(seed)
        M, mask = random_csr(rng, rows, cols)
        for _ in range(steps):
            sp_outer_accumulate(M, rng.normal(size=rows) * 1e3, rng.normal(size=cols), rng.normal())
        dense = M.to_dense()
        assert np.all(dense[~mask] == 0.0)

    def test_dimension_mismatch(self):
        M = csr_from_topology(T.fully_connected(2, 3))
        with pytest.raises(DimensionMismatch):
            spmv(M, np.ones(2))
        with pytest.raises(DimensionMismatch):
            spmv_transpose(M, np.ones(3))
        with pytest.raises(DimensionMismatch):
            sp_outer_accumulate(M, np.ones(3), np.ones(3), 1.0)
        with pytest.raises(DimensionMismatch):
            sp_outer(M, np.ones((3, 2)), np.ones((2, 4)))


def test_sparse_faster_than_dense_masked_benchmark():
    """Benchmark only: reports the timing ratio, never fails on it."""
    t = T.random_d_regular(784, 500, 50, 0).transpose()
    M = csr_from_topology(t, lambda nnz: np.ones(nnz))
    W = M.to_dense()
    mask = M.mask()
    x = np.ones((784, 32))
    spmv(M, x)

    def best(fn, reps=20):
        times = []
        for _ in range(reps):
            start = time.perf_counter()
            fn()
            times.append(time.perf_counter() - start)
        return min(times)

    sparse = best(lambda: spmv(M, x))
    dense = best(lambda: (W * mask) @ x)
    print(f"\nspmv 500x784 at 10% density: sparse {sparse * 1e3:.3f} ms, dense masked {dense * 1e3:.3f} ms")
    np.testing.assert_allclose(spmv(M, x), (W * mask) @ x, atol=1e-9)
