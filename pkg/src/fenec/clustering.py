"""Per-class k-means used to pick centroid representatives of a class.

Plain Lloyd iterations with k-means++ seeding on squared Euclidean
distance. Deterministic for a given seed; empty clusters are repaired by
reassigning the point currently farthest from its centroid so exactly k
centroids always survive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CardinalityError, DataError


@dataclass(frozen=True)
class CentroidSet:
    class_id: int
    centroids: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.centroids, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise DataError(f"class {self.class_id}: centroids contain non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "centroids", arr)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    objective: float
    objective_history: tuple
    n_iter: int


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    sq = (
        np.einsum("ij,ij->i", x, x)[:, None]
        + np.einsum("ij,ij->i", centroids, centroids)[None, :]
        - 2.0 * (x @ centroids.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return sq


def _plusplus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    closest = _sq_dists(x, x[chosen[:1]])[:, 0]
    for i in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # All remaining points coincide with a chosen centre; take the
            # smallest index not yet picked to keep centroids distinct rows.
            taken = set(chosen[:i].tolist())
            idx = next(j for j in range(n) if j not in taken)
        chosen[i] = idx
        closest = np.minimum(closest, _sq_dists(x, x[idx : idx + 1])[:, 0])
    return x[chosen].copy()


def kmeans(
    x: np.ndarray,
    k: int,
    seed,
    *,
    max_iter: int = 300,
    tol: float = 1e-6,
    init_centroids: np.ndarray | None = None,
) -> KMeansResult:
    """Cluster rows of ``x`` into k groups; deterministic for a given seed.

    Stops when the largest centroid movement falls below ``tol`` or after
    ``max_iter`` iterations. ``init_centroids`` overrides the k-means++
    seeding (used by tests to force degenerate starts).
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise CardinalityError(f"k must be positive, got {k}")
    if k > n:
        raise CardinalityError(f"cannot form {k} clusters from {n} samples")

    rng = np.random.default_rng(seed)
    if init_centroids is not None:
        centroids = np.asarray(init_centroids, dtype=np.float64).copy()
        if centroids.shape != (k, x.shape[1]):
            raise CardinalityError(
                f"init_centroids must have shape {(k, x.shape[1])}, got {centroids.shape}"
            )
    else:
        centroids = _plusplus_init(x, k, rng)

    history = []
    labels = np.zeros(n, dtype=np.int64)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        dists = _sq_dists(x, centroids)
        labels = np.argmin(dists, axis=1)
        point_d = dists[np.arange(n), labels]

        # Repair empty clusters: hand each one the point farthest from its
        # current centroid. Donors must come from clusters of size >= 2 so
        # the repair never empties another cluster.
        counts = np.bincount(labels, minlength=k)
        while True:
            empties = np.flatnonzero(counts == 0)
            if empties.size == 0:
                break
            empty = int(empties[0])
            eligible = counts[labels] >= 2
            donor = int(np.argmax(np.where(eligible, point_d, -np.inf)))
            counts[labels[donor]] -= 1
            labels[donor] = empty
            counts[empty] = 1
            point_d[donor] = 0.0

        new_centroids = np.empty_like(centroids)
        for j in range(k):
            new_centroids[j] = x[labels == j].mean(axis=0)

        # Exact per-point residuals: an input point serving as its own
        # centroid contributes exactly zero, unlike the expansion form.
        diff = x - new_centroids[labels]
        history.append(float(np.einsum("ij,ij->i", diff, diff).sum()))

        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tol:
            break

    return KMeansResult(
        centroids=centroids,
        labels=labels,
        objective=history[-1],
        objective_history=tuple(history),
        n_iter=n_iter,
    )
