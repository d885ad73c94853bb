"""Dense numeric kernels: column scalers, a symmetric eigensolver, and
PCA / kernel-PCA projections.

Matrices are plain ``numpy`` float64 arrays in row-major layout.  Everything
here is pure and reentrant; none of the functions keep state between calls,
so they are safe to use from concurrent workers on distinct inputs.

The eigensolver is a cyclic Jacobi iteration rather than a LAPACK call.  The
matrices this package decomposes are at most a few hundred square, where
Jacobi is plenty fast, unconditionally robust, and easy to make reproducible
(fixed sweep order, fixed sign convention).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidInputError

JACOBI_MAX_SWEEPS = 100
JACOBI_OFF_TOL = 1e-10
KPCA_EIGENVALUE_FLOOR = 1e-12


def check_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce ``X`` to a 2-D float64 array, rejecting non-finite entries."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-dimensional, got ndim={A.ndim}")
    if A.size == 0:
        raise InvalidInputError(f"{name} must be non-empty")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return A


@dataclass(frozen=True)
class ScalerParams:
    """Fitted per-column statistics for one of the two scaler kinds.

    For ``kind="minmax"`` the stats are (min, max) per column; for
    ``kind="gaussian"`` they are (mean, stddev).  Columns whose spread is
    zero are flagged degenerate and always map to 0.
    """

    kind: str
    loc: np.ndarray    # per-column min or mean
    scale: np.ndarray  # per-column (max - min) or stddev
    degenerate: np.ndarray  # bool mask of constant columns

    def apply(self, X) -> np.ndarray:
        A = check_matrix(X)
        if A.shape[1] != self.loc.shape[0]:
            raise InvalidInputError(
                f"scaler fitted on {self.loc.shape[0]} columns, got {A.shape[1]}"
            )
        safe = np.where(self.degenerate, 1.0, self.scale)
        out = (A - self.loc) / safe
        out[:, self.degenerate] = 0.0
        return out


def fit_apply_scaler(X, kind: str) -> tuple[np.ndarray, ScalerParams]:
    """Fit a column scaler on ``X`` and return (scaled X, fitted params).

    ``minmax`` maps each column affinely onto [0, 1]; ``gaussian`` maps each
    column to zero mean and unit (population) variance.  Constant columns
    become 0 under either kind.
    """
    A = check_matrix(X)
    if kind == "minmax":
        lo = A.min(axis=0)
        hi = A.max(axis=0)
        params = ScalerParams("minmax", lo, hi - lo, degenerate=(hi == lo))
    elif kind == "gaussian":
        mean = A.mean(axis=0)
        std = A.std(axis=0)
        params = ScalerParams("gaussian", mean, std, degenerate=(std == 0.0))
    else:
        raise InvalidInputError(f"unknown scaler kind: {kind!r}")
    return params.apply(A), params


def _fix_eigenvector_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so each eigenvector's largest-magnitude entry is >= 0."""
    idx = np.argmax(np.abs(V), axis=0)
    flip = V[idx, np.arange(V.shape[1])] < 0.0
    V = V.copy()
    V[:, flip] *= -1.0
    return V


def jacobi_eigh(A) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Returns (eigenvalues, eigenvectors-as-columns) sorted by descending
    eigenvalue.  Input must be symmetric within 1e-9.  Raises
    :class:`ConvergenceError` if the off-diagonal mass has not dropped below
    tolerance after ``JACOBI_MAX_SWEEPS`` sweeps.
    """
    A = check_matrix(A, "A")
    n = A.shape[0]
    if A.shape[1] != n:
        raise InvalidInputError(f"A must be square, got {A.shape}")
    if not np.allclose(A, A.T, atol=1e-9, rtol=0.0):
        raise InvalidInputError("A is not symmetric within 1e-9")

    work = (A + A.T) / 2.0
    V = np.eye(n)
    anorm = np.max(np.abs(work))
    if n == 1 or anorm == 0.0:
        return work.diagonal().copy(), V

    threshold = JACOBI_OFF_TOL * anorm
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.max(np.abs(work - np.diag(work.diagonal())))
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                if abs(apq) <= threshold * 1e-2:
                    continue
                # Stable rotation angle (Golub & Van Loan style).
                theta = (work[q, q] - work[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c

                rp = work[p, :].copy()
                rq = work[q, :].copy()
                work[p, :] = c * rp - s * rq
                work[q, :] = s * rp + c * rq
                cp = work[:, p].copy()
                cq = work[:, q].copy()
                work[:, p] = c * cp - s * cq
                work[:, q] = s * cp + c * cq
                work[p, q] = 0.0
                work[q, p] = 0.0

                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        off = np.max(np.abs(work - np.diag(work.diagonal())))
        if off > threshold:
            raise ConvergenceError(
                f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps; "
                f"off-diagonal residual {off:.3e} (tolerance {threshold:.3e})"
            )

    eigvals = work.diagonal().copy()
    order = np.argsort(-eigvals, kind="stable")
    return eigvals[order], _fix_eigenvector_signs(V[:, order])


def sym_eigen(A, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` eigenpairs of a symmetric matrix, eigenvalues descending.

    Eigenvectors are returned as columns, orthonormal, each with its
    largest-magnitude entry made non-negative for reproducibility.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"A must be square, got shape {A.shape}")
    if not 1 <= k <= A.shape[0]:
        raise InvalidInputError(f"k={k} out of range [1, {A.shape[0]}]")
    eigvals, V = jacobi_eigh(A)
    return eigvals[:k], V[:, :k]


def pca(X, d: int) -> np.ndarray:
    """Project rows of ``X`` onto the top-``d`` principal directions.

    Directions come from the column-centered data.  When there are fewer
    rows than columns the decomposition runs on the (smaller) Gram matrix,
    which yields the same scores up to the shared sign convention.
    """
    A = check_matrix(X)
    n, p = A.shape
    if not 1 <= d <= min(n, p):
        raise InvalidInputError(f"d={d} out of range [1, {min(n, p)}]")
    centered = A - A.mean(axis=0)

    if p <= n:
        cov = centered.T @ centered / max(n - 1, 1)
        _, V = sym_eigen(cov, d)
        return centered @ V
    # Gram-side decomposition: scores_k = sqrt(lam_k) * u_k.
    gram = centered @ centered.T
    lam, U = sym_eigen(gram, d)
    lam = np.maximum(lam, 0.0)
    scores = U * np.sqrt(lam)
    scores[:, lam <= KPCA_EIGENVALUE_FLOOR] = 0.0
    return scores


def pairwise_sq_dists(X) -> np.ndarray:
    """Matrix of squared Euclidean distances between rows of ``X``."""
    A = np.asarray(X, dtype=np.float64)
    sq = np.sum(A * A, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (A @ A.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def kernel_pca(X, d: int, gamma: float, kernel: str = "rbf") -> np.ndarray:
    """Kernel-PCA embedding of the rows of ``X`` into ``d`` components.

    The kernel matrix is double-centered and eigendecomposed; row ``i`` of
    the output is the projection of sample ``i`` onto the top components,
    i.e. column ``k`` equals sqrt(lam_k) * v_k (the 1/sqrt(lam) - scaled
    expansion coefficients applied to the centered kernel).  Components with
    eigenvalue <= 1e-12 are dropped and zero-padded so the output always has
    exactly ``d`` columns.

    ``kernel`` is ``"rbf"`` (exp(-gamma * ||x - y||^2)) or the test-only
    ``"linear"`` variant, which reproduces plain PCA scores.
    """
    A = check_matrix(X)
    n, p = A.shape
    if not 1 <= d <= min(n, p):
        raise InvalidInputError(f"d={d} out of range [1, {min(n, p)}]")
    if kernel == "rbf":
        if not gamma > 0.0:
            raise InvalidInputError(f"gamma must be positive, got {gamma}")
        K = np.exp(-gamma * pairwise_sq_dists(A))
    elif kernel == "linear":
        K = A @ A.T
    else:
        raise InvalidInputError(f"unknown kernel: {kernel!r}")

    # Double centering in feature space.
    row_mean = K.mean(axis=0)
    Kc = K - row_mean[None, :] - row_mean[:, None] + K.mean()
    Kc = (Kc + Kc.T) / 2.0

    lam, V = sym_eigen(Kc, d)
    out = np.zeros((n, d))
    keep = lam > KPCA_EIGENVALUE_FLOOR
    out[:, keep] = V[:, keep] * np.sqrt(lam[keep])
    return out
