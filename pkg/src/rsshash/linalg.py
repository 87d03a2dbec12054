"""Dense linear algebra for the projection generators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular


class LinalgError(ValueError):
    pass


class ConvergenceError(LinalgError):
    pass


@dataclass
class ScatterPair:
    between: np.ndarray
    within: np.ndarray
    global_mean: np.ndarray
    class_means: dict
    class_counts: dict


@dataclass
class LdaTransform:
    matrix: np.ndarray  # (d, k)
    eigenvalues: np.ndarray  # (k,), descending


def _as_labelled(vectors, labels=None):
    """Accept either ``(X, labels)`` arrays or a list of ``(class, vector)`` pairs."""
    if labels is None:
        pairs = list(vectors)
        if not pairs:
            raise LinalgError("empty input")
        labels = [c for c, _ in pairs]
        X = np.array([v for _, v in pairs], dtype=np.float64)
    else:
        X = np.asarray(vectors, dtype=np.float64)
        if len(X) == 0:
            raise LinalgError("empty input")
    if X.ndim != 2:
        raise LinalgError("vectors must share one dimension")
    if len(labels) != len(X):
        raise LinalgError("labels and vectors differ in length")
    return X, np.asarray(labels)


def scatter_matrices(vectors, labels=None) -> ScatterPair:
    """Between- and within-class scatter of labelled vectors.

    ``S_w = sum_c sum_{i in c} (x_i - mu_c)(x_i - mu_c)^T`` and
    ``S_b = sum_c n_c (mu_c - mu)(mu_c - mu)^T``.
    """
    X, y = _as_labelled(vectors, labels)
    classes, inverse, counts = np.unique(y, return_inverse=True, return_counts=True)
    if len(classes) < 2:
        raise LinalgError("scatter matrices need at least 2 classes")
    d = X.shape[1]
    mu = X.mean(axis=0)
    sums = np.zeros((len(classes), d))
    np.add.at(sums, inverse, X)
    means = sums / counts[:, None]

    centered = X - means[inverse]
    within = centered.T @ centered
    dev = (means - mu) * np.sqrt(counts)[:, None]
    between = dev.T @ dev
    # symmetrize away rounding
    within = 0.5 * (within + within.T)
    between = 0.5 * (between + between.T)
    return ScatterPair(
        between=between,
        within=within,
        global_mean=mu,
        class_means={c: means[i] for i, c in enumerate(classes.tolist())},
        class_counts={c: int(counts[i]) for i, c in enumerate(classes.tolist())},
    )


def _check_symmetric(m: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise LinalgError("matrix must be square")
    scale = max(np.abs(m).max(initial=0.0), np.finfo(float).tiny)
    if np.abs(m - m.T).max(initial=0.0) > rtol * scale:
        raise LinalgError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def jacobi_eig(m: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100):
    """Cyclic Jacobi eigensolver for a symmetric matrix.

    Returns unsorted eigenvalues and eigenvector columns. Sweeps stop once the
    off-diagonal Frobenius norm drops below ``tol * ||m||_F``.
    """
    a = np.array(m, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    target = tol * max(np.linalg.norm(a), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= target:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    raise ConvergenceError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


def symmetric_eig(m: np.ndarray, method: str = "lapack"):
    """Eigen-decomposition of a symmetric matrix, eigenvalues descending.

    Parameters
    ----------
    m : (d, d) array
        Symmetric input (checked to 1e-9 relative).
    method : {"lapack", "jacobi"}
        ``"jacobi"`` runs :func:`jacobi_eig`; ``"lapack"`` uses
        :func:`numpy.linalg.eigh`, much faster for the many per-table solves.

    Returns
    -------
    eigenvalues : (d,) array, descending
    eigenvectors : (d, d) array with orthonormal columns
    """
    m = _check_symmetric(m)
    if method == "jacobi":
        w, v = jacobi_eig(m)
    elif method == "lapack":
        try:
            w, v = np.linalg.eigh(m)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(str(exc)) from None
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def default_ridge(within: np.ndarray) -> float:
    d = within.shape[0]
    return 1e-6 * float(np.trace(within)) / d


def lda(vectors, k: int, ridge: float | None = None, labels=None, method: str = "lapack") -> LdaTransform:
    """Top-``k`` discriminant directions of labelled data.

    Solves ``S_b v = lambda (S_w + ridge I) v`` by Cholesky whitening:
    with ``S_w + ridge I = C C^T`` the symmetric matrix ``C^-1 S_b C^-T`` is
    eigendecomposed and its eigenvectors mapped back through ``C^-T``.
    ``ridge`` defaults to ``1e-6 * trace(S_w) / d``.
    """
    X, y = _as_labelled(vectors, labels)
    sc = scatter_matrices(X, y)
    d = X.shape[1]
    n_classes = len(sc.class_counts)
    if k < 1 or k > min(d, n_classes - 1):
        raise LinalgError(f"k={k} exceeds min(d, C-1) = {min(d, n_classes - 1)}")
    if ridge is None:
        ridge = default_ridge(sc.within)
    sw = sc.within + ridge * np.eye(d)
    try:
        chol = np.linalg.cholesky(sw)
    except np.linalg.LinAlgError:
        raise LinalgError("within-class scatter plus ridge is not positive definite") from None
    tmp = solve_triangular(chol, sc.between, lower=True)
    whitened = solve_triangular(chol, tmp.T, lower=True).T
    w, u = symmetric_eig(0.5 * (whitened + whitened.T), method=method)
    matrix = solve_triangular(chol.T, u[:, :k], lower=False)
    return LdaTransform(matrix=matrix, eigenvalues=w[:k])


def pca(vectors, m: int, method: str = "lapack") -> np.ndarray:
    """Leading ``m`` principal axes (columns, descending variance) of the data."""
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise LinalgError("pca needs at least 2 vectors")
    d = X.shape[1]
    if m < 1 or m > d:
        raise LinalgError(f"m={m} must lie in [1, d={d}]")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (len(X) - 1)
    _, v = symmetric_eig(0.5 * (cov + cov.T), method=method)
    return v[:, :m]


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles (radians, ascending) between the column spaces of a and b."""
    qa, _ = np.linalg.qr(np.asarray(a, dtype=np.float64))
    qb, _ = np.linalg.qr(np.asarray(b, dtype=np.float64))
    if qa.shape[1] < qb.shape[1]:
        qa, qb = qb, qa
    cos = np.linalg.svd(qa.T @ qb, compute_uv=False)  # descending
    # arccos is inaccurate near 0; take sines from the residual instead
    sin = np.linalg.svd(qb - qa @ (qa.T @ qb), compute_uv=False)[::-1]  # ascending
    return np.arctan2(sin, cos)
