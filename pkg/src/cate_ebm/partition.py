"""Lloyd's k-means with k-means++ seeding.

The subset count equals the representation dimension of the downstream
model, so a fitted partition is the index structure for the per-subset
energies. Deterministic for a fixed rng; ties in assignment break toward
the lowest centroid index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, TooFewSamplesError


@dataclass
class PartitionModel:
    centroids: np.ndarray  # (k, d)
    inertia: float = 0.0
    history: list = field(default_factory=list, repr=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def d(self) -> int:
        return self.centroids.shape[1]

    def assign(self, x: np.ndarray) -> np.ndarray | int:
        """Nearest-centroid index; vector input gives a scalar, matrix a vector."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.d:
            raise DimensionError(
                f"point dimension {x.shape[1]} != centroid dimension {self.d}"
            )
        d2 = _sq_dists(x, self.centroids)
        labels = np.argmin(d2, axis=1)  # argmin takes the lowest index on ties
        return int(labels[0]) if single else labels


def _sq_dists(x, c):
    # (n, k) squared distances, computed without forming the n*k*d tensor
    xx = np.sum(x * x, axis=1)[:, None]
    cc = np.sum(c * c, axis=1)[None, :]
    d2 = xx + cc - 2.0 * (x @ c.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _kmeanspp_init(x, k, rng):
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = _sq_dists(x, centroids[:1]).ravel()
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining points coincide with chosen centroids
            idx = rng.integers(n)
        else:
            probs = d2 / total
            idx = rng.choice(n, p=probs)
        centroids[j] = x[idx]
        d2 = np.minimum(d2, _sq_dists(x, centroids[j : j + 1]).ravel())
    return centroids


def kmeans_fit(x, k, rng, max_iter=100, tol=1e-8) -> PartitionModel:
    """Lloyd iterations from a k-means++ start.

    Stops at an assignment fixpoint, when inertia improves by less than tol,
    or after max_iter. An emptied cluster is re-seeded at the point farthest
    from its current centroid.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DimensionError("expected an n-by-d matrix")
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise TooFewSamplesError(f"n={n} < k={k}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")

    centroids = _kmeanspp_init(x, k, rng)
    prev_labels = None
    prev_inertia = np.inf
    history = []
    for _ in range(max_iter):
        d2 = _sq_dists(x, centroids)
        labels = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), labels].sum())
        history.append(inertia)
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        for j in range(k):
            members = labels == j
            if members.any():
                centroids[j] = x[members].mean(axis=0)
            else:
                far = int(np.argmax(d2[:, j]))
                centroids[j] = x[far]
        if prev_inertia - inertia < tol and np.isfinite(prev_inertia):
            prev_labels = labels
            prev_inertia = inertia
            break
        prev_labels = labels
        prev_inertia = inertia

    d2 = _sq_dists(x, centroids)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    return PartitionModel(centroids=centroids, inertia=inertia, history=history)
