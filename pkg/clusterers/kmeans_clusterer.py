from typing import Optional, Tuple

import numpy as np

from compression_logger import logger
from .base_clusterer import (
    Algorithm,
    BaseClusterer,
    ClusterConfig,
    ClusterOutcome,
    max_displacement,
    squared_distances,
)
from .seeding import seed_kmeanspp, seed_random


def _repair_empty(points: np.ndarray, centroids: np.ndarray, labels: np.ndarray,
                  assigned_d2: np.ndarray, empty: int) -> bool:
    """
    Move the point farthest from its own centroid into the empty cluster and
    put that cluster's centroid on it. Only points off their centroid whose
    cluster keeps at least one other member are eligible; returns False when
    there are none (every point already sits on a centroid, SSE is 0).
    """
    counts = np.bincount(labels, minlength=centroids.shape[0])
    eligible = (counts[labels] > 1) & (assigned_d2 > 0)
    if not eligible.any():
        return False
    idx = int(np.argmax(np.where(eligible, assigned_d2, -1.0)))

    labels[idx] = empty
    centroids[empty] = points[idx]
    assigned_d2[idx] = 0.0
    return True


def _assign(points: np.ndarray, centroids: np.ndarray,
            weights: Optional[np.ndarray]) -> Tuple[np.ndarray, float, int]:
    """
    Nearest-centroid assignment (lowest index wins ties) with empty-cluster
    repair. Mutates centroids when a repair happens; returns labels, SSE and
    the number of repairs.

    Each repair strictly lowers SSE, so the loop ends. A cluster stays empty
    only when there are fewer distinct points than K.
    """
    k = centroids.shape[0]
    repairs = 0
    while True:
        d2 = squared_distances(points, centroids)
        labels = np.argmin(d2, axis=1)
        assigned_d2 = d2[np.arange(points.shape[0]), labels]

        counts = np.bincount(labels, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size == 0:
            break
        if not _repair_empty(points, centroids, labels, assigned_d2, int(empties[0])):
            logger.debug(f"[kmeans] {empties.size} cluster(s) left empty: fewer distinct points than K")
            break
        repairs += 1

    w = np.ones(points.shape[0]) if weights is None else weights
    sse = float(np.sum(w * assigned_d2))
    return labels, sse, repairs


def _update(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray,
            weights: Optional[np.ndarray]) -> np.ndarray:
    """Cluster means; an empty cluster keeps its previous centroid."""
    k = centroids.shape[0]
    w = np.ones(points.shape[0]) if weights is None else weights
    mass = np.bincount(labels, weights=w, minlength=k)
    updated = centroids.copy()
    occupied = mass > 0
    for dim in range(points.shape[1]):
        sums = np.bincount(labels, weights=w * points[:, dim], minlength=k)
        updated[occupied, dim] = sums[occupied] / mass[occupied]
    return updated


def kmeans_run(points: np.ndarray, init: np.ndarray, config: ClusterConfig,
               weights: Optional[np.ndarray] = None,
               algorithm: Algorithm = Algorithm.KMEANS) -> ClusterOutcome:
    """
    Lloyd iterations from the given centroids until the largest centroid
    move is below config.tolerance or config.max_iterations is reached.

    objective_trace[i] is the SSE of the assignment made in step i; it never
    increases. The final entry is the SSE of the returned assignment.
    """
    points = np.asarray(points, dtype=np.float64)
    centroids = np.array(init, dtype=np.float64)

    labels, sse, repairs = _assign(points, centroids, weights)
    trace = [sse]
    converged = False
    iterations = 0

    for iterations in range(1, config.max_iterations + 1):
        new_centroids = _update(points, labels, centroids, weights)
        shift = max_displacement(centroids, new_centroids)
        centroids = new_centroids

        labels, sse, n_repairs = _assign(points, centroids, weights)
        repairs += n_repairs
        trace.append(sse)

        if shift < config.tolerance:
            converged = True
            break

    if repairs:
        logger.debug(f"[kmeans] repaired {repairs} empty cluster(s)")
    if not converged:
        logger.debug(f"[kmeans] stopped at max_iterations={config.max_iterations}")

    return ClusterOutcome(
        centroids=centroids,
        assignments=labels,
        objective_trace=trace,
        iterations=iterations,
        converged=converged,
        algorithm=algorithm,
        seed=config.seed,
    )


class KMeansClusterer(BaseClusterer):
    """K-Means with uniform (kmeans) or D^2 (kmeanspp) seeding."""

    def __init__(self, algorithm: Algorithm = Algorithm.KMEANS):
        if algorithm.is_fuzzy:
            raise ValueError(f"KMeansClusterer cannot run {algorithm.value}")
        self.algorithm = algorithm

    def seed(self, points, k, rng, weights=None):
        if self.algorithm.uses_d2_seeding:
            return seed_kmeanspp(points, k, rng, weights=weights)
        return seed_random(points, k, rng, weights=weights)

    def iterate(self, points, init, config, weights=None):
        return kmeans_run(points, init, config, weights=weights, algorithm=self.algorithm)
