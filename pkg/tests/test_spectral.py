from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsenet import spectral as S
from sparsenet import topology as T
from sparsenet.topology import BipartiteTopology


def complete_spectrum(n, m):
    vals = [0.0] + [float(n)] * (m - 1) + [float(m)] * (n - 1) + [float(n + m)]
    return np.sort(vals)


def charpoly(M):
    """Characteristic polynomial coefficients by Faddeev-LeVerrier in exact rationals."""
    n = len(M)
    A = [[Fraction(float(v)) for v in row] for row in M]
    coeffs = [Fraction(1)]
    Mk = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        # Mk = A @ M_{k-1} + c_{k-1} I
        prev = Mk
        Mk = [[sum(A[i][t] * prev[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
        for i in range(n):
            Mk[i][i] += coeffs[-1]
        AM = [[sum(A[i][t] * Mk[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
        coeffs.append(-sum(AM[i][i] for i in range(n)) / k)
    return [float(c) for c in coeffs]


class TestLaplacian:
    def test_single_edge(self):
        L = S.build_laplacian(T.fully_connected(1, 1))
        assert L.tolist() == [[1, -1], [-1, 1]]

    def test_edgeless(self):
        assert not S.build_laplacian(BipartiteTopology(2, 2, [[], []])).any()

    def test_k23_diagonal(self):
        L = S.build_laplacian(T.fully_connected(2, 3))
        assert L.shape == (5, 5)
        assert np.diag(L).tolist() == [3, 3, 2, 2, 2]

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**32))
    def test_rows_sum_to_zero(self, n, m, seed):
        L = S.build_laplacian(T.random_edge(n, m, max(1, m // 3), seed))
        assert np.all(L.sum(axis=1) == 0)
        assert np.array_equal(L, L.T)


class TestEigenvalues:
    def test_identity(self):
        assert S.eigenvalues_symmetric(np.eye(3)).tolist() == [1.0, 1.0, 1.0]

    def test_k23(self):
        e = S.eigenvalues_symmetric(S.build_laplacian(T.fully_connected(2, 3)))
        np.testing.assert_allclose(e, [0, 2, 2, 3, 5], atol=1e-10)

    def test_two_disjoint_edges(self):
        t = BipartiteTopology(2, 2, [[0], [1]])
        np.testing.assert_allclose(S.eigenvalues_symmetric(S.build_laplacian(t)), [0, 0, 2, 2], atol=1e-10)

    def test_k23_matches_characteristic_polynomial(self):
        # (x)(x-2)^2(x-3)(x-5) expanded
        L = S.build_laplacian(T.fully_connected(2, 3))
        expected = np.poly1d([0.0, 2, 2, 3, 5], r=True).coeffs
        np.testing.assert_allclose(charpoly(L), expected, atol=1e-9)

    @pytest.mark.parametrize("size", [1, 2, 3, 4])
    @pytest.mark.parametrize("method", ["jacobi", "tridiagonal"])
    def test_small_against_polynomial_roots(self, size, method):
        rng = np.random.default_rng(1000 + size)
        for _ in range(25):
            A = rng.normal(size=(size, size))
            M = A + A.T
            roots = np.sort(np.roots(charpoly(M)).real)
            np.testing.assert_allclose(S.eigenvalues_symmetric(M, method), roots, atol=1e-8, rtol=1e-8)

    @pytest.mark.parametrize("method", ["jacobi", "tridiagonal"])
    def test_against_lapack(self, method):
        rng = np.random.default_rng(3)
        for size in (5, 17, 40):
            A = rng.normal(size=(size, size))
            M = A + A.T
            np.testing.assert_allclose(S.eigenvalues_symmetric(M, method), np.linalg.eigvalsh(M), atol=1e-10)

    def test_auto_switches_above_limit(self):
        t = T.random_d_regular(50, 40, 4, 9)
        L = S.build_laplacian(t)
        assert L.shape[0] > S.JACOBI_MAX_N
        np.testing.assert_allclose(S.eigenvalues_symmetric(L), np.linalg.eigvalsh(L), atol=1e-9)

    def test_not_symmetric(self):
        with pytest.raises(S.NotSymmetricError):
            S.eigenvalues_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))
        with pytest.raises(S.NotSymmetricError):
            S.eigenvalues_symmetric(np.ones((2, 3)))

    def test_non_convergence_is_reported(self):
        M = np.array([[2.0, 1.0], [1.0, 3.0]])
        with pytest.raises(S.NoConvergenceError):
            S.jacobi_eigenvalues(M, max_sweeps=0)

    @pytest.mark.parametrize("n", range(1, 13))
    def test_complete_bipartite_closed_form(self, n):
        for m in range(1, 13):
            e = S.eigenvalues_symmetric(S.build_laplacian(T.fully_connected(n, m)))
            np.testing.assert_allclose(e, complete_spectrum(n, m), atol=1e-8, rtol=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 100), st.integers(1, 100), st.integers(0, 2**32))
    def test_trace_and_psd(self, n, m, seed):
        t = T.random_edge(n, m, max(1, m // 4), seed)
        e = S.eigenvalues_symmetric(S.build_laplacian(t))
        assert np.all(e >= -1e-9)
        assert e.sum() == pytest.approx(2 * t.edge_count, rel=1e-8, abs=1e-8)


class TestReport:
    def test_k23(self):
        r = S.analyze(T.fully_connected(2, 3))
        assert r.algebraic_connectivity_standard == pytest.approx(2, abs=1e-10)
        assert r.largest_nonzero == pytest.approx(5, abs=1e-10)
        assert r.second_largest_nonzero == pytest.approx(3, abs=1e-10)
        assert r.component_count == 1
        assert r.zero_tolerance == pytest.approx(5e-8)

    def test_edgeless(self):
        r = S.analyze(BipartiteTopology(3, 2, [[], [], []]))
        assert r.component_count == 5
        assert r.algebraic_connectivity_standard == 0
        assert r.zero_tolerance == 1e-8

    def test_two_edges(self):
        r = S.analyze(BipartiteTopology(2, 2, [[0], [1]]))
        assert r.component_count == 2
        assert r.algebraic_connectivity_standard == 0

    def test_fully_connected_connectivity_is_min_side(self):
        for n, m in [(3, 7), (10, 4), (6, 6)]:
            r = S.analyze(T.fully_connected(n, m))
            assert r.algebraic_connectivity_standard == pytest.approx(min(n, m), abs=1e-9)

    def test_regular_rotating_monotone_in_k(self):
        lam = [S.analyze(T.regular_rotating(50, 50, k)).algebraic_connectivity_standard for k in (2, 5, 10, 25, 50)]
        assert all(a <= b for a, b in zip(lam, lam[1:])), lam
        assert lam[-1] == pytest.approx(50, abs=1e-9)

    def test_csv_row(self):
        t = T.random_edge(4, 3, 2, 11)
        r = S.analyze(t)
        row = S.report_csv_row(t, r)
        assert list(row) == list(S.REPORT_CSV_COLUMNS)
        assert S.REPORT_CSV_COLUMNS == (
            "construction", "n", "m", "k", "seed", "component_count",
            "lambda2", "second_largest_nonzero", "largest_nonzero",
        )
        assert row["seed"] == 11 and row["construction"] == "RandomEdge"
