"""Clustering back-ends used to group model representations.

Three methods over rows of a numeric matrix: k-means (k-means++ seeding,
Lloyd iterations), spectral clustering (RBF affinity, symmetric normalized
Laplacian), and agglomerative average-linkage. All three are deterministic
for a fixed (X, k, method, seed) and always return k non-empty clusters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .linalg import check_matrix, jacobi_eigh, pairwise_sq_dists

KMEANS_MAX_ITER = 300
KMEANS_TOL = 1e-9
KMEANS_RESTARTS = 10

METHODS = ("kmeans", "spectral", "agglomerative")


@dataclass(frozen=True)
class ClusterAssignment:
    """Per-row cluster labels plus k-means diagnostics.

    ``inertia`` and ``inertia_trace`` are populated for k-means (and for
    spectral clustering, whose final step is k-means in the embedding);
    the trace holds one inertia value per Lloyd iteration of the winning
    restart and is non-increasing.
    """

    labels: np.ndarray
    k: int
    inertia: float | None = None
    inertia_trace: tuple[float, ...] = field(default=())

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 1:
            raise InvalidInputError("labels must be one-dimensional")
        present = np.unique(labels)
        if present.size != self.k or present[0] != 0 or present[-1] != self.k - 1:
            raise InvalidInputError(
                f"labels must cover every cluster in [0, {self.k}), got {present}"
            )


def _sq_dists_to(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = X[:, None, :] - centroids[None, :, :]
    return np.sum(d * d, axis=2)


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding; degenerate zero-spread draws fall back to the
    lowest-index rows so identical inputs still yield k distinct seeds."""
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    while len(chosen) < k:
        total = d2.sum()
        if total > 0.0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            mask = np.ones(n, dtype=bool)
            mask[chosen] = False
            nxt = int(np.argmax(mask))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    return X[chosen].copy()


def _lloyd(X: np.ndarray, k: int, rng: np.random.Generator):
    """One k-means run. Returns (labels, inertia, per-iteration trace)."""
    n = X.shape[0]
    centroids = _kmeanspp_init(X, k, rng)
    trace: list[float] = []
    prev_inertia = np.inf
    labels = np.zeros(n, dtype=np.int64)

    for _ in range(KMEANS_MAX_ITER):
        d2 = _sq_dists_to(X, centroids)
        labels = np.argmin(d2, axis=1)
        own = d2[np.arange(n), labels]

        # Repair: hand the globally worst-assigned point to each empty
        # cluster; its cost becomes zero (it now sits on its own centroid).
        # Donors must keep at least one member, so a repaired cluster can
        # never be emptied again; ties fall to the lowest row index.
        for c in range(k):
            if not np.any(labels == c):
                counts = np.bincount(labels, minlength=k)
                candidates = np.where(counts[labels] > 1)[0]
                far = int(candidates[np.argmax(own[candidates])])
                labels[far] = c
                centroids[c] = X[far]
                own[far] = 0.0

        inertia = float(own.sum())
        trace.append(inertia)
        if prev_inertia - inertia < KMEANS_TOL:
            break
        prev_inertia = inertia
        for c in range(k):
            centroids[c] = X[labels == c].mean(axis=0)

    return labels, trace[-1], trace


def _kmeans(X: np.ndarray, k: int, seed: int) -> ClusterAssignment:
    streams = np.random.SeedSequence(seed).spawn(KMEANS_RESTARTS)
    best = None
    for stream in streams:
        labels, inertia, trace = _lloyd(X, k, np.random.default_rng(stream))
        if best is None or inertia < best[1]:
            best = (labels, inertia, trace)
    labels, inertia, trace = best
    return ClusterAssignment(labels, k, inertia=inertia, inertia_trace=tuple(trace))


def _spectral(X: np.ndarray, k: int, seed: int) -> ClusterAssignment:
    n = X.shape[0]
    D2 = pairwise_sq_dists(X)
    if n > 1:
        median = float(np.median(D2[np.triu_indices(n, 1)]))
    else:
        median = 0.0
    gamma = 1.0 / median if median > 0.0 else 1.0

    affinity = np.exp(-gamma * D2)
    np.fill_diagonal(affinity, 0.0)
    degrees = affinity.sum(axis=1)
    inv_sqrt = np.where(degrees > 0.0, 1.0 / np.sqrt(np.maximum(degrees, 1e-300)), 0.0)
    laplacian = np.eye(n) - inv_sqrt[:, None] * affinity * inv_sqrt[None, :]
    laplacian = (laplacian + laplacian.T) / 2.0

    _, vecs = jacobi_eigh(laplacian)
    embedding = vecs[:, n - k:]  # eigenvectors of the k smallest eigenvalues
    norms = np.linalg.norm(embedding, axis=1, keepdims=True)
    embedding = np.where(norms > 0.0, embedding / np.maximum(norms, 1e-300), 0.0)

    result = _kmeans(embedding, k, seed)
    return ClusterAssignment(result.labels, k, inertia=result.inertia,
                             inertia_trace=result.inertia_trace)


def _agglomerative(X: np.ndarray, k: int) -> ClusterAssignment:
    """Average-linkage merging on Euclidean distance, cut at k clusters.

    Clusters are identified by their smallest member row index; distance
    ties are broken by the lexicographically smallest id pair, which makes
    the merge sequence fully deterministic.
    """
    n = X.shape[0]
    dist = np.sqrt(pairwise_sq_dists(X))
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    # Average linkage between active clusters, indexed by cluster id.
    link = dist.copy()

    while len(members) > k:
        active = sorted(members)
        best = None
        for ai, a in enumerate(active):
            for b in active[ai + 1:]:
                cand = (link[a, b], a, b)
                if best is None or cand < best:
                    best = cand
        _, a, b = best
        size_a, size_b = len(members[a]), len(members[b])
        for c in members:
            if c in (a, b):
                continue
            merged = (size_a * link[c, a] + size_b * link[c, b]) / (size_a + size_b)
            link[c, a] = link[a, c] = merged
        members[a].extend(members[b])
        del members[b]

    labels = np.empty(n, dtype=np.int64)
    for new_label, cid in enumerate(sorted(members)):
        labels[members[cid]] = new_label
    return ClusterAssignment(labels, k)


def cluster(X, k: int, method: str, seed: int) -> ClusterAssignment:
    """Group the rows of ``X`` into exactly ``k`` non-empty clusters.

    ``method`` is one of ``kmeans``, ``spectral`` or ``agglomerative``.
    The result is deterministic for a fixed (X, k, method, seed); with
    degenerate all-identical rows, ties fall to the lowest row index.
    """
    A = check_matrix(X)
    if not 1 <= k <= A.shape[0]:
        raise InvalidInputError(f"k={k} out of range [1, {A.shape[0]}]")
    if method == "kmeans":
        return _kmeans(A, k, seed)
    if method == "spectral":
        return _spectral(A, k, seed)
    if method == "agglomerative":
        return _agglomerative(A, k)
    raise InvalidInputError(f"unknown clustering method: {method!r}")
