# clusterers/__init__.py

from typing import Optional

import numpy as np

from compression_logger import logger

from .base_clusterer import (
    Algorithm,
    BaseClusterer,
    ClusterConfig,
    ClusterOutcome,
    squared_distances,
)
from .fcm_clusterer import FuzzyCMeansClusterer, fcm_run, memberships
from .kmeans_clusterer import KMeansClusterer, kmeans_run
from .seeding import collapse_points, seed_kmeanspp, seed_random


def get_clusterer(algorithm) -> BaseClusterer:
    """
    Factory returning the clusterer for an algorithm name or Algorithm.

    Each clusterer implements:
      - seed(points, k, rng, weights=None) -> centroids
      - iterate(points, init, config, weights=None) -> ClusterOutcome
    """
    algorithm = Algorithm.parse(algorithm)
    if algorithm.is_fuzzy:
        return FuzzyCMeansClusterer(algorithm)
    return KMeansClusterer(algorithm)


def restart_rng(seed: int, restart: int) -> np.random.Generator:
    """Generator for one restart; restart 0 of seed s is the same stream for any restart count."""
    return np.random.default_rng([seed, restart])


def run_clustering(points: np.ndarray, config: ClusterConfig,
                   weights: Optional[np.ndarray] = None) -> ClusterOutcome:
    """
    Seed and iterate config.restarts times and keep the outcome with the
    lowest final objective (earliest restart on ties).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]

    clusterer = get_clusterer(config.algorithm)

    inverse = None
    if config.use_unique_colors and weights is None:
        points, weights, inverse = collapse_points(points)

    best: Optional[ClusterOutcome] = None
    for restart in range(config.restarts):
        outcome = clusterer.run(points, config, restart_rng(config.seed, restart), weights=weights)
        logger.debug(
            f"[{config.algorithm.value}] restart {restart + 1}/{config.restarts}: "
            f"objective={outcome.objective:.6f} iterations={outcome.iterations}"
        )
        if best is None or outcome.objective < best.objective:
            best = outcome

    if inverse is not None:
        best.assignments = best.assignments[inverse]
        if best.memberships is not None:
            best.memberships = best.memberships[inverse]

    return best


__all__ = [
    "Algorithm",
    "BaseClusterer",
    "ClusterConfig",
    "ClusterOutcome",
    "FuzzyCMeansClusterer",
    "KMeansClusterer",
    "collapse_points",
    "fcm_run",
    "get_clusterer",
    "kmeans_run",
    "memberships",
    "restart_rng",
    "run_clustering",
    "seed_kmeanspp",
    "seed_random",
    "squared_distances",
]
