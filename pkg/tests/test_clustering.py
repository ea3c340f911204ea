import itertools

import numpy as np
import pytest

from clusterers import (
    Algorithm,
    ClusterConfig,
    FuzzyCMeansClusterer,
    KMeansClusterer,
    collapse_points,
    fcm_run,
    get_clusterer,
    kmeans_run,
    memberships,
    restart_rng,
    run_clustering,
    seed_kmeanspp,
    seed_random,
    squared_distances,
)
from compression_errors import ConfigError, DegenerateInputError
from image_model import to_pixel_points
from significance_stats import wilcoxon_signed_rank

SLACK = 1e-9


def column(values):
    return np.asarray(values, dtype=np.float64)[:, None]


def brute_force_sse(values: np.ndarray, k: int) -> float:
    """Minimum SSE over every labelling of 1-D points into k groups."""
    labellings = np.array(list(itertools.product(range(k), repeat=values.size)))
    total = np.zeros(labellings.shape[0])
    for c in range(k):
        mask = labellings == c
        count = mask.sum(axis=1)
        s = (mask * values).sum(axis=1)
        ss = (mask * values ** 2).sum(axis=1)
        total += np.where(count > 0, ss - s ** 2 / np.maximum(count, 1), 0.0)
    return float(total.min())


def gaussian_blobs(rng: np.random.Generator) -> np.ndarray:
    centers = np.array([[30, 30, 30], [200, 40, 60], [60, 200, 90], [180, 180, 220]], dtype=np.float64)
    return np.vstack([c + rng.normal(0.0, 5.0, size=(25, 3)) for c in centers])


# ---------------------------------------------------------
# Config and factory
# ---------------------------------------------------------
@pytest.mark.parametrize("kwargs", [
    dict(k=0),
    dict(fuzzifier=1.0),
    dict(tolerance=0.0),
    dict(max_iterations=0),
    dict(restarts=0),
    dict(seed=-1),
    dict(seed=2 ** 64),
    dict(algorithm="kmedoids"),
])
def test_invalid_config_rejected(kwargs):
    with pytest.raises(ConfigError):
        ClusterConfig(**kwargs)


def test_config_accepts_algorithm_names():
    assert ClusterConfig(algorithm="fcmpp").algorithm is Algorithm.FCMPP


@pytest.mark.parametrize("name, cls, d2", [
    ("kmeans", KMeansClusterer, False),
    ("kmeanspp", KMeansClusterer, True),
    ("fcm", FuzzyCMeansClusterer, False),
    ("fcmpp", FuzzyCMeansClusterer, True),
])
def test_get_clusterer(name, cls, d2):
    clusterer = get_clusterer(name)
    assert isinstance(clusterer, cls)
    assert clusterer.algorithm.uses_d2_seeding is d2


# ---------------------------------------------------------
# Seeding
# ---------------------------------------------------------
def test_seed_random_with_k_equal_to_distinct_points():
    points = column([5, 1, 5, 9, 1])
    centers = seed_random(points, 3, np.random.default_rng(0))
    assert sorted(centers[:, 0].tolist()) == [1.0, 5.0, 9.0]


@pytest.mark.parametrize("seeder", [seed_random, seed_kmeanspp])
def test_seeders_are_deterministic(seeder):
    points = gaussian_blobs(np.random.default_rng(3))
    a = seeder(points, 4, np.random.default_rng(11))
    b = seeder(points, 4, np.random.default_rng(11))
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("seed", range(10))
def test_kmeanspp_skips_zero_mass_duplicates(seed):
    centers = seed_kmeanspp(column([0, 0, 100]), 2, np.random.default_rng(seed))
    assert sorted(centers[:, 0].tolist()) == [0.0, 100.0]


def test_kmeanspp_single_center_and_identical_points():
    centers = seed_kmeanspp(column([7, 7, 7]), 1, np.random.default_rng(0))
    assert centers.tolist() == [[7.0]]


@pytest.mark.parametrize("seeder", [seed_random, seed_kmeanspp])
def test_seeders_reject_too_few_distinct_points(seeder):
    with pytest.raises(DegenerateInputError, match="K=3"):
        seeder(column([1, 1, 2]), 3, np.random.default_rng(0))


@pytest.mark.parametrize("seeder", [seed_random, seed_kmeanspp])
def test_seeding_matches_on_unique_color_summary(seeder, gray_image):
    points = to_pixel_points(gray_image)
    uniq, weights, _ = collapse_points(points)
    a = seeder(points, 8, np.random.default_rng(5))
    b = seeder(uniq, 8, np.random.default_rng(5), weights=weights)
    np.testing.assert_array_equal(a, b)


# ---------------------------------------------------------
# K-Means
# ---------------------------------------------------------
def test_kmeans_exact_cover_converges_immediately():
    points = column([3, 3, 50, 50, 120])
    outcome = kmeans_run(points, column([3, 50, 120]), ClusterConfig(k=3))
    assert outcome.objective == 0.0
    assert outcome.iterations == 1
    assert outcome.converged


def test_kmeans_single_cluster_is_mean(rgb_image):
    points = to_pixel_points(rgb_image)
    outcome = kmeans_run(points, points[:1], ClusterConfig(k=1))
    np.testing.assert_allclose(outcome.centroids[0], points.mean(axis=0), rtol=1e-12)


@pytest.mark.parametrize("init", [[0, 1], [9, 10], [1, 9], [0, 10]])
def test_kmeans_two_pairs(init):
    outcome = kmeans_run(column([0, 1, 9, 10]), column(init), ClusterConfig(k=2))
    assert sorted(outcome.centroids[:, 0].tolist()) == [0.5, 9.5]
    assert outcome.objective == pytest.approx(1.0)


def test_kmeans_repairs_empty_cluster():
    # the centroid at 200 attracts nothing on the first assignment
    points = column([0, 1, 2, 10, 11, 12])
    outcome = kmeans_run(points, column([1, 11, 200]), ClusterConfig(k=3))
    assert np.bincount(outcome.assignments, minlength=3).min() >= 1
    assert outcome.centroids.max() <= 12.0


def test_kmeans_keeps_unfillable_cluster_when_points_sit_on_centroids():
    # no point can leave its centroid without raising SSE; the 100 centroid stays empty
    outcome = kmeans_run(column([0, 0, 5]), column([0, 5, 100]), ClusterConfig(k=3))
    assert outcome.objective == 0.0
    assert outcome.converged
    assert outcome.assignments.tolist() == [0, 0, 1]
    assert outcome.centroids[:, 0].tolist() == [0.0, 5.0, 100.0]


def test_kmeans_repair_with_unit_weights_matches_unweighted():
    points = column([0, 0, 5])
    init = column([0, 5, 100])
    plain = kmeans_run(points, init, ClusterConfig(k=3))
    weighted = kmeans_run(points, init, ClusterConfig(k=3), weights=np.ones(3))
    np.testing.assert_array_equal(plain.centroids, weighted.centroids)


@pytest.mark.parametrize("seed", range(5))
def test_kmeans_trace_is_non_increasing(seed, rgb_image):
    outcome = run_clustering(to_pixel_points(rgb_image), ClusterConfig(algorithm="kmeans", k=8, seed=seed))
    trace = np.asarray(outcome.objective_trace)
    assert np.all(np.diff(trace) <= SLACK * trace[:-1])
    assert outcome.objective == trace[-1]


@pytest.mark.parametrize("algorithm", ["kmeans", "kmeanspp", "fcm", "fcmpp"])
def test_assignments_are_nearest_centroid(algorithm, gray_image):
    points = to_pixel_points(gray_image)
    outcome = run_clustering(points, ClusterConfig(algorithm=algorithm, k=6, seed=1))
    d2 = squared_distances(points, outcome.centroids)
    chosen = d2[np.arange(points.shape[0]), outcome.assignments]
    assert np.all(chosen <= d2.min(axis=1))


@pytest.mark.parametrize("data_seed", range(50))
def test_best_of_restarts_reaches_brute_force_optimum(data_seed):
    rng = np.random.default_rng(data_seed)
    k = int(rng.integers(2, 4))
    n = int(rng.integers(k + 2, 11))
    values = rng.choice(51, size=n, replace=False).astype(np.float64)
    outcome = run_clustering(values[:, None], ClusterConfig(algorithm="kmeanspp", k=k, restarts=20, seed=data_seed))
    assert outcome.objective == pytest.approx(brute_force_sse(values, k), rel=1e-9, abs=1e-7)


def test_d2_seeding_beats_random_seeding_on_average():
    points = gaussian_blobs(np.random.default_rng(42))
    sse = {"kmeans": [], "kmeanspp": []}
    for seed in range(100):
        for algorithm in sse:
            outcome = run_clustering(points, ClusterConfig(algorithm=algorithm, k=4, seed=seed))
            sse[algorithm].append(outcome.objective)
    assert np.mean(sse["kmeanspp"]) <= np.mean(sse["kmeans"])
    assert wilcoxon_signed_rank(sse["kmeanspp"], sse["kmeans"]).p_value < 0.05


# ---------------------------------------------------------
# Fuzzy C-Means
# ---------------------------------------------------------
def test_memberships_rows_sum_to_one():
    d2 = np.random.default_rng(0).uniform(0.1, 500.0, size=(50, 5))
    d2[3, 2] = 0.0
    u = memberships(d2, 2.0)
    np.testing.assert_allclose(u.sum(axis=1), 1.0, atol=1e-9)
    assert np.all((u >= 0) & (u <= 1))


def test_memberships_equidistant_point():
    u = memberships(np.array([[25.0, 25.0]]), 2.0)
    np.testing.assert_allclose(u, [[0.5, 0.5]])


def test_memberships_singularity_rule():
    u = memberships(np.array([[4.0, 0.0, 0.0]]), 2.0)
    assert u.tolist() == [[0.0, 1.0, 0.0]]


def test_fcm_symmetric_pair_converges_symmetrically():
    config = ClusterConfig(algorithm="fcm", k=2, tolerance=1e-10, max_iterations=1000)
    outcome = fcm_run(column([0, 10]), column([1, 9]), config)
    low, high = sorted(outcome.centroids[:, 0])
    assert low + high == pytest.approx(10.0, abs=1e-6)


@pytest.mark.parametrize("algorithm", ["fcm", "fcmpp"])
def test_fcm_trace_non_increasing_and_memberships_kept(algorithm, rgb_image):
    points = to_pixel_points(rgb_image)
    outcome = run_clustering(points, ClusterConfig(algorithm=algorithm, k=5, seed=2))
    trace = np.asarray(outcome.objective_trace)
    assert np.all(np.diff(trace) <= SLACK * trace[:-1])
    assert outcome.memberships.shape == (points.shape[0], 5)
    np.testing.assert_allclose(outcome.memberships.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_array_equal(outcome.assignments, np.argmax(outcome.memberships, axis=1))


# ---------------------------------------------------------
# Dispatch and restarts
# ---------------------------------------------------------
def test_run_clustering_two_values_with_duplicate():
    outcome = run_clustering(column([0, 0, 100]), ClusterConfig(algorithm="kmeanspp", k=2, seed=9))
    assert outcome.objective == 0.0


@pytest.mark.parametrize("algorithm", ["kmeans", "kmeanspp", "fcm", "fcmpp"])
def test_run_clustering_is_deterministic(algorithm, gray_image):
    points = to_pixel_points(gray_image)
    config = ClusterConfig(algorithm=algorithm, k=4, seed=13)
    a = run_clustering(points, config)
    b = run_clustering(points, config)
    np.testing.assert_array_equal(a.centroids, b.centroids)
    np.testing.assert_array_equal(a.assignments, b.assignments)
    assert a.objective_trace == b.objective_trace


def test_more_restarts_never_worse(rgb_image):
    points = to_pixel_points(rgb_image)
    one = run_clustering(points, ClusterConfig(algorithm="kmeans", k=6, seed=4, restarts=1))
    five = run_clustering(points, ClusterConfig(algorithm="kmeans", k=6, seed=4, restarts=5))
    assert five.objective <= one.objective


def test_restart_zero_stream_is_shared():
    a = restart_rng(7, 0).random(4)
    b = restart_rng(7, 0).random(4)
    c = restart_rng(7, 1).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("algorithm", ["kmeanspp", "fcm"])
def test_unique_color_fast_path_matches_reference(algorithm, gray_image):
    points = to_pixel_points(gray_image)
    reference = run_clustering(points, ClusterConfig(algorithm=algorithm, k=6, seed=3))
    fast = run_clustering(points, ClusterConfig(algorithm=algorithm, k=6, seed=3, use_unique_colors=True))
    np.testing.assert_allclose(fast.centroids, reference.centroids, atol=1e-3)
    assert fast.objective == pytest.approx(reference.objective, rel=1e-6)
    assert fast.assignments.shape == reference.assignments.shape


def test_largest_container_seed_is_accepted():
    assert ClusterConfig(seed=2 ** 64 - 1).seed == 2 ** 64 - 1
