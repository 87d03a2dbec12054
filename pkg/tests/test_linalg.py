import numpy as np
import pytest
import scipy.linalg

from rsshash.linalg import (
    LinalgError,
    jacobi_eig,
    lda,
    pca,
    principal_angles,
    scatter_matrices,
    symmetric_eig,
)


def total_scatter_loop(X):
    mu = [sum(col) / len(X) for col in zip(*X)]
    d = len(mu)
    T = [[0.0] * d for _ in range(d)]
    for x in X:
        dev = [a - b for a, b in zip(x, mu)]
        for i in range(d):
            for j in range(d):
                T[i][j] += dev[i] * dev[j]
    return np.array(T)


def labelled(rng, n_classes, per_class, d, spread=3.0):
    centers = rng.normal(scale=spread, size=(n_classes, d))
    X = np.repeat(centers, per_class, axis=0) + rng.normal(size=(n_classes * per_class, d))
    y = np.repeat(np.arange(n_classes), per_class)
    return X, y


class TestScatter:
    def test_one_point_per_class(self):
        sc = scatter_matrices([("a", [1.0, 2.0]), ("b", [3.0, -1.0])])
        np.testing.assert_array_equal(sc.within, np.zeros((2, 2)))

    def test_identical_points(self):
        sc = scatter_matrices([("a", [1.0, 1.0]), ("b", [1.0, 1.0]), ("a", [1.0, 1.0])])
        np.testing.assert_allclose(sc.between, 0, atol=1e-15)
        np.testing.assert_allclose(sc.within, 0, atol=1e-15)

    def test_decomposition_3x5(self):
        rng = np.random.default_rng(0)
        X, y = labelled(rng, 3, 5, 4)
        sc = scatter_matrices(X, y)
        T = total_scatter_loop(X.tolist())
        np.testing.assert_allclose(sc.between + sc.within, T, rtol=1e-8, atol=1e-10 * np.abs(T).max())

    def test_pair_input_matches_array_input(self):
        rng = np.random.default_rng(1)
        X, y = labelled(rng, 3, 4, 3)
        a = scatter_matrices(list(zip(y.tolist(), X)))
        b = scatter_matrices(X, y)
        np.testing.assert_array_equal(a.between, b.between)
        assert a.class_counts == {0: 4, 1: 4, 2: 4}

    def test_psd_and_symmetric(self):
        rng = np.random.default_rng(2)
        X, y = labelled(rng, 4, 6, 5)
        sc = scatter_matrices(X, y)
        for m in (sc.between, sc.within):
            np.testing.assert_array_equal(m, m.T)
            assert np.linalg.eigvalsh(m).min() >= -1e-8 * np.trace(m)

    def test_errors(self):
        with pytest.raises(LinalgError):
            scatter_matrices([])
        with pytest.raises(LinalgError, match="2 classes"):
            scatter_matrices([("a", [1.0]), ("a", [2.0])])


class TestSymmetricEig:
    @pytest.mark.parametrize("method", ["lapack", "jacobi"])
    def test_identity(self, method):
        w, v = symmetric_eig(np.eye(3), method=method)
        np.testing.assert_allclose(w, [1, 1, 1])
        np.testing.assert_allclose(v.T @ v, np.eye(3), atol=1e-12)

    @pytest.mark.parametrize("method", ["lapack", "jacobi"])
    def test_diagonal(self, method):
        w, v = symmetric_eig(np.diag([3.0, 1.0, 2.0]), method=method)
        np.testing.assert_allclose(w, [3, 2, 1])
        np.testing.assert_allclose(np.abs(v), np.eye(3)[:, [0, 2, 1]], atol=1e-12)

    @pytest.mark.parametrize("method", ["lapack", "jacobi"])
    @pytest.mark.parametrize("seed", range(5))
    def test_random_reconstruction(self, method, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(8, 8))
        m = a + a.T
        w, v = symmetric_eig(m, method=method)
        assert np.all(np.diff(w) <= 0)
        np.testing.assert_allclose(v @ np.diag(w) @ v.T, m, atol=1e-7)
        np.testing.assert_allclose(v.T @ v, np.eye(8), atol=1e-8)
        norm = np.linalg.norm(m, 2)
        for i in range(8):
            assert np.linalg.norm(m @ v[:, i] - w[i] * v[:, i]) <= 1e-7 * norm

    def test_jacobi_agrees_with_lapack(self):
        rng = np.random.default_rng(9)
        a = rng.normal(size=(12, 12))
        m = a @ a.T
        wj, _ = symmetric_eig(m, method="jacobi")
        wl, _ = symmetric_eig(m)
        np.testing.assert_allclose(wj, wl, rtol=1e-10, atol=1e-10)

    def test_non_symmetric_rejected(self):
        with pytest.raises(LinalgError, match="symmetric"):
            symmetric_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_non_convergence_reported(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(6, 6))
        with pytest.raises(Exception, match="converge"):
            jacobi_eig(a + a.T, max_sweeps=1)


def brute_force_lda(X, y, k):
    """Generalized eigenvectors via a non-symmetric solve of S_w^-1 S_b."""
    sc = scatter_matrices(X, y)
    w, v = scipy.linalg.eig(np.linalg.solve(sc.within, sc.between))
    order = np.argsort(-w.real)
    return v[:, order[:k]].real, w.real[order[:k]]


class TestLda:
    def test_axis_separation(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(200, 2)) + [5.0, 0.0]
        b = rng.normal(size=(200, 2)) - [5.0, 0.0]
        t = lda(np.vstack([a, b]), 1, labels=[0] * 200 + [1] * 200)
        direction = t.matrix[:, 0] / np.linalg.norm(t.matrix[:, 0])
        assert abs(direction[0]) > 0.99

    def test_two_class_rank(self):
        rng = np.random.default_rng(1)
        X, y = labelled(rng, 2, 10, 4)
        assert lda(X, 1, labels=y).matrix.shape == (4, 1)
        with pytest.raises(LinalgError, match="C-1"):
            lda(X, 2, labels=y)

    def test_beats_random_projections(self):
        rng = np.random.default_rng(2)
        X, y = labelled(rng, 4, 15, 6, spread=1.0)
        sc = scatter_matrices(X, y)

        def ratio(W):
            return np.trace(W.T @ sc.between @ W) / np.trace(W.T @ sc.within @ W)

        W = lda(X, 3, labels=y).matrix
        # trace ratio is scale invariant per subspace only after orthonormalising
        ours = ratio(np.linalg.qr(W)[0])
        for _ in range(50):
            Q, _ = np.linalg.qr(rng.normal(size=(6, 3)))
            assert ours >= ratio(Q)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        X, y = labelled(rng, 5, 8, 6)
        t = lda(X, 3, labels=y, ridge=0.0)
        ref, ref_w = brute_force_lda(X, y, 3)
        assert principal_angles(t.matrix, ref).max() < 1e-6
        np.testing.assert_allclose(t.eigenvalues, ref_w, rtol=1e-8)
        assert np.all(np.diff(t.eigenvalues) <= 0)

    def test_relabel_invariance(self):
        rng = np.random.default_rng(4)
        X, y = labelled(rng, 4, 10, 5)
        perm = np.array([2, 0, 3, 1])
        a = lda(X, 3, labels=y).matrix
        b = lda(X, 3, labels=[f"c{perm[c]}" for c in y]).matrix
        assert principal_angles(a, b).max() < 1e-6

    def test_ridge_effect_vanishes_with_data(self):
        def angle(n):
            rng = np.random.default_rng(5)
            X, y = labelled(rng, 4, n, 5, spread=1.0)
            sc = scatter_matrices(X, y)
            eps = 1e-3 * np.trace(sc.within) / 5
            return principal_angles(lda(X, 3, eps, labels=y).matrix, lda(X, 3, 2 * eps, labels=y).matrix).max()

        assert angle(400) < angle(10)

    def test_singular_within_without_ridge(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
        with pytest.raises(LinalgError, match="positive definite"):
            lda(X, 1, ridge=0.0, labels=[0, 1, 2])

    def test_jacobi_route(self):
        rng = np.random.default_rng(6)
        X, y = labelled(rng, 4, 10, 5)
        a = lda(X, 3, labels=y).matrix
        b = lda(X, 3, labels=y, method="jacobi").matrix
        assert principal_angles(a, b).max() < 1e-6


class TestPca:
    def test_line(self):
        rng = np.random.default_rng(0)
        direction = np.array([1.0, 2.0, -2.0]) / 3.0
        X = rng.normal(size=(100, 1)) * direction + 1e-3 * rng.normal(size=(100, 3))
        v = pca(X, 1)[:, 0]
        assert abs(v @ direction) > 0.999

    def test_orthonormal_basis(self):
        X = np.random.default_rng(1).normal(size=(500, 4))
        V = pca(X, 4)
        np.testing.assert_allclose(V.T @ V, np.eye(4), atol=1e-8)

    def test_component_variances(self):
        rng = np.random.default_rng(2)
        A = rng.normal(size=(5, 5))
        X = rng.normal(size=(1000, 5)) @ A
        V = pca(X, 5)
        variances = np.var(X @ V, axis=0, ddof=1)
        ref = np.sort(np.linalg.eigvalsh(np.cov(X, rowvar=False)))[::-1]
        np.testing.assert_allclose(variances, ref, rtol=1e-6)

    def test_too_many_components(self):
        with pytest.raises(LinalgError):
            pca(np.ones((3, 2)), 3)


def test_principal_angles_small():
    Q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(6, 2)))
    R = Q @ np.array([[2.0, 1.0], [0.0, 3.0]])
    assert principal_angles(Q, R).max() < 1e-12
