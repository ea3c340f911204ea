from typing import Optional

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


def memberships(d2: np.ndarray, m: float) -> np.ndarray:
    """
    u_ik = 1 / sum_j (d_ik / d_jk)^(2/(m-1)), computed on squared distances.

    A point that coincides with a centroid gets membership 1 there and 0
    elsewhere (lowest index if it coincides with several).
    """
    n, k = d2.shape
    u = np.zeros((n, k), dtype=np.float64)

    singular = np.any(d2 == 0.0, axis=1)
    if np.any(singular):
        u[np.flatnonzero(singular), np.argmax(d2[singular] == 0.0, axis=1)] = 1.0

    regular = ~singular
    if np.any(regular):
        d2r = d2[regular]
        # ratios against the row minimum stay in (0, 1]
        scaled = (d2r.min(axis=1, keepdims=True) / d2r) ** (1.0 / (m - 1.0))
        u[regular] = scaled / scaled.sum(axis=1, keepdims=True)
    return u


def fcm_objective(d2: np.ndarray, u: np.ndarray, m: float,
                  weights: Optional[np.ndarray] = None) -> float:
    terms = (u ** m) * d2
    if weights is not None:
        terms = terms * weights[:, None]
    return float(np.sum(terms))


def _update(points: np.ndarray, u: np.ndarray, m: float,
            weights: Optional[np.ndarray], previous: np.ndarray) -> np.ndarray:
    um = u ** m
    if weights is not None:
        um = um * weights[:, None]
    mass = um.sum(axis=0)
    # a cluster with no membership mass keeps its centroid
    safe = np.where(mass > 0, mass, 1.0)[:, None]
    return np.where(mass[:, None] > 0, (um.T @ points) / safe, previous)


def fcm_run(points: np.ndarray, init: np.ndarray, config: ClusterConfig,
            weights: Optional[np.ndarray] = None,
            algorithm: Algorithm = Algorithm.FCM) -> ClusterOutcome:
    """
    Alternating membership / centroid updates until the largest centroid move
    is below config.tolerance or the iteration cap is hit. Hard labels are
    the argmax membership; objective_trace holds J_m after each membership
    update.
    """
    points = np.asarray(points, dtype=np.float64)
    centroids = np.array(init, dtype=np.float64)
    m = config.fuzzifier

    d2 = squared_distances(points, centroids)
    u = memberships(d2, m)
    trace = [fcm_objective(d2, u, m, weights)]
    converged = False
    iterations = 0

    for iterations in range(1, config.max_iterations + 1):
        new_centroids = _update(points, u, m, weights, centroids)
        shift = max_displacement(centroids, new_centroids)
        centroids = new_centroids

        d2 = squared_distances(points, centroids)
        u = memberships(d2, m)
        trace.append(fcm_objective(d2, u, m, weights))

        if shift < config.tolerance:
            converged = True
            break

    if not converged:
        logger.debug(f"[fcm] stopped at max_iterations={config.max_iterations}")

    return ClusterOutcome(
        centroids=centroids,
        assignments=np.argmax(u, axis=1),
        objective_trace=trace,
        iterations=iterations,
        converged=converged,
        algorithm=algorithm,
        seed=config.seed,
        memberships=u,
    )


class FuzzyCMeansClusterer(BaseClusterer):
    """Fuzzy C-Means with uniform (fcm) or D^2 (fcmpp) seeding."""

    def __init__(self, algorithm: Algorithm = Algorithm.FCM):
        if not algorithm.is_fuzzy:
            raise ValueError(f"FuzzyCMeansClusterer cannot run {algorithm.value}")
        self.algorithm = algorithm

    def seed(self, points, k, rng, weights=None):
        if self.algorithm.uses_d2_seeding:
            return seed_kmeanspp(points, k, rng, weights=weights)
        return seed_random(points, k, rng, weights=weights)

    def iterate(self, points, init, config, weights=None):
        return fcm_run(points, init, config, weights=weights, algorithm=self.algorithm)
