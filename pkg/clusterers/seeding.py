"""
Centroid seeding.

Both seeders collapse the input to its distinct colors weighted by
multiplicity before drawing, so a pixel stream and its (unique colors,
counts) summary produce identical seeds for the same generator state.
"""

from typing import Optional, Tuple

import numpy as np

from compression_errors import DegenerateInputError


def collapse_points(points: np.ndarray,
                    weights: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Return (unique_points, unique_weights, inverse) with unique rows sorted
    lexicographically and inverse mapping every input row to its unique row.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    uniq, inverse = np.unique(points, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    w = np.bincount(inverse, weights=weights, minlength=uniq.shape[0]).astype(np.float64)
    return uniq, w, inverse


def _check_distinct(n_distinct: int, k: int) -> None:
    if n_distinct == 0:
        raise DegenerateInputError("Cannot seed centroids from an empty point set")
    if n_distinct < k:
        raise DegenerateInputError(
            f"Need at least K={k} distinct points to seed, found only {n_distinct}"
        )


def seed_random(points: np.ndarray, k: int, rng: np.random.Generator,
                weights: Optional[np.ndarray] = None) -> np.ndarray:
    """K distinct data points, drawn one at a time without replacement."""
    uniq, w, _ = collapse_points(points, weights)
    _check_distinct(uniq.shape[0], k)

    remaining = w.copy()
    chosen = []
    for _ in range(k):
        idx = int(rng.choice(uniq.shape[0], p=remaining / remaining.sum()))
        chosen.append(idx)
        remaining[idx] = 0.0
    return uniq[chosen].copy()


def seed_kmeanspp(points: np.ndarray, k: int, rng: np.random.Generator,
                  weights: Optional[np.ndarray] = None) -> np.ndarray:
    """
    D^2 seeding: the first center is drawn uniformly over the data, each
    following one with probability proportional to the squared distance to
    the nearest center chosen so far.
    """
    uniq, w, _ = collapse_points(points, weights)
    _check_distinct(uniq.shape[0], k)

    first = int(rng.choice(uniq.shape[0], p=w / w.sum()))
    chosen = [first]
    nearest_d2 = np.sum((uniq - uniq[first]) ** 2, axis=1)

    for _ in range(1, k):
        mass = w * nearest_d2
        idx = int(rng.choice(uniq.shape[0], p=mass / mass.sum()))
        chosen.append(idx)
        nearest_d2 = np.minimum(nearest_d2, np.sum((uniq - uniq[idx]) ** 2, axis=1))

    return uniq[chosen].copy()
