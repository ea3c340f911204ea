from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from compression_errors import ConfigError

# Containers store the seed as an unsigned 64-bit field
MAX_SEED = 2 ** 64 - 1


class Algorithm(str, Enum):
    KMEANS = "kmeans"
    KMEANSPP = "kmeanspp"
    FCM = "fcm"
    FCMPP = "fcmpp"

    @property
    def uses_d2_seeding(self) -> bool:
        return self in (Algorithm.KMEANSPP, Algorithm.FCMPP)

    @property
    def is_fuzzy(self) -> bool:
        return self in (Algorithm.FCM, Algorithm.FCMPP)

    @classmethod
    def parse(cls, name) -> "Algorithm":
        try:
            return cls(name)
        except ValueError as e:
            choices = ", ".join(a.value for a in cls)
            raise ConfigError(f"Unknown algorithm {name!r}; expected one of {choices}") from e


@dataclass(frozen=True)
class ClusterConfig:
    algorithm: Algorithm = Algorithm.KMEANSPP
    k: int = 16
    fuzzifier: float = 2.0
    tolerance: float = 1e-4
    max_iterations: int = 300
    seed: int = 0
    restarts: int = 1
    # Cluster distinct colors weighted by their pixel counts instead of every pixel
    use_unique_colors: bool = False

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm.parse(self.algorithm))

        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not self.fuzzifier > 1:
            raise ConfigError(f"fuzzifier m must be > 1, got {self.fuzzifier}")
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.restarts < 1:
            raise ConfigError(f"restarts must be >= 1, got {self.restarts}")
        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigError(f"seed must be in [0, 2**64 - 1], got {self.seed}")


@dataclass
class ClusterOutcome:
    """
    Result of one clustering run.

    centroids:       (K, channels) float64, never rounded
    assignments:     (n,) hard labels in [0, K)
    objective_trace: SSE (K-Means) or J_m (FCM) per iteration; the last entry
                     is the objective of the final assignment
    memberships:     final (n, K) membership matrix for the fuzzy algorithms
    """
    centroids: np.ndarray
    assignments: np.ndarray
    objective_trace: List[float]
    iterations: int
    converged: bool
    algorithm: Algorithm
    seed: int
    memberships: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, K) squared Euclidean distances, one vectorized pass per centroid."""
    d2 = np.empty((points.shape[0], centroids.shape[0]), dtype=np.float64)
    for k, center in enumerate(centroids):
        d2[:, k] = np.sum((points - center) ** 2, axis=1)
    return d2


def max_displacement(old: np.ndarray, new: np.ndarray) -> float:
    return float(np.max(np.sqrt(np.sum((new - old) ** 2, axis=1))))


class BaseClusterer(ABC):
    """
    A palette learner: a seeding rule plus an iteration loop.

    Subclasses implement seed(...) and iterate(...); run(...) wires the two
    together for a single seeded attempt.
    """

    algorithm: Algorithm

    @abstractmethod
    def seed(self, points: np.ndarray, k: int, rng: np.random.Generator,
             weights: Optional[np.ndarray] = None) -> np.ndarray:
        ...

    @abstractmethod
    def iterate(self, points: np.ndarray, init: np.ndarray, config: ClusterConfig,
                weights: Optional[np.ndarray] = None) -> ClusterOutcome:
        ...

    def run(self, points: np.ndarray, config: ClusterConfig, rng: np.random.Generator,
            weights: Optional[np.ndarray] = None) -> ClusterOutcome:
        init = self.seed(points, config.k, rng, weights=weights)
        return self.iterate(points, init, config, weights=weights)
