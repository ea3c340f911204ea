import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterers import ClusterConfig, squared_distances
from compression_errors import (
    BadMagicError,
    ConfigError,
    DegenerateInputError,
    IndexOutOfRangeError,
    MalformedContainerError,
    ShapeMismatchError,
    TruncatedStreamError,
    UnsupportedVersionError,
)
from image_model import RasterImage, distinct_colors, to_pixel_points
from palette_codec import (
    ALGORITHM_TAGS,
    HEADER_SIZE,
    bits_per_index,
    compression_ratio,
    container_size,
    decode,
    deserialize,
    encode,
    encode_with_palette,
    on_disk_ratio,
    serialize,
)
from quality_metrics import rmse

# 2x1 gray, K=2, palette {10, 20}, pixels [20, 10] -> index bits "10" then zero padding
GOLDEN_CONTAINER = (
    b"IECC"
    + b"\x01"
    + b"\x02\x00\x00\x00"
    + b"\x01\x00\x00\x00"
    + b"\x01"
    + b"\x02\x00"
    + b"\xff"
    + b"\x00" * 8
    + b"\x0a\x14"
    + b"\x80"
)


def golden_image() -> RasterImage:
    return RasterImage.from_array(np.array([[20, 10]], dtype=np.uint8))


def header_bytes(width=1, height=1, channels=1, k=2, version=1) -> bytes:
    return (
        b"IECC" + bytes([version]) + width.to_bytes(4, "little") + height.to_bytes(4, "little")
        + bytes([channels]) + k.to_bytes(2, "little") + b"\x00" + b"\x00" * 8
    )


# ---------------------------------------------------------
# Golden container
# ---------------------------------------------------------
def test_golden_container_bytes():
    compressed = encode_with_palette(golden_image(), np.array([[10.0], [20.0]]))
    assert compressed.indices.indices.tolist() == [1, 0]
    assert serialize(compressed) == GOLDEN_CONTAINER
    assert len(GOLDEN_CONTAINER) == HEADER_SIZE + 2 + 1


def test_golden_container_decodes():
    compressed = deserialize(GOLDEN_CONTAINER)
    assert compressed.header.algorithm_name == "external"
    assert decode(compressed).to_array().tolist() == [[20, 10]]
    assert serialize(compressed) == GOLDEN_CONTAINER


# ---------------------------------------------------------
# Malformed containers
# ---------------------------------------------------------
def test_bad_magic():
    with pytest.raises(BadMagicError):
        deserialize(b"IECX" + GOLDEN_CONTAINER[4:])


def test_unsupported_version():
    with pytest.raises(UnsupportedVersionError):
        deserialize(GOLDEN_CONTAINER[:4] + b"\x02" + GOLDEN_CONTAINER[5:])


@pytest.mark.parametrize("cut", [3, 10, HEADER_SIZE, len(GOLDEN_CONTAINER) - 1])
def test_truncated_container(cut):
    with pytest.raises(TruncatedStreamError):
        deserialize(GOLDEN_CONTAINER[:cut])


def test_trailing_bytes_rejected():
    with pytest.raises(MalformedContainerError):
        deserialize(GOLDEN_CONTAINER + b"\x00")


def test_nonzero_padding_rejected():
    with pytest.raises(MalformedContainerError):
        deserialize(GOLDEN_CONTAINER[:-1] + b"\x81")


def test_index_out_of_range():
    # K=3 uses two bits per index; "11" addresses a fourth entry
    data = header_bytes(k=3) + b"\x00\x80\xff" + b"\xc0"
    with pytest.raises(IndexOutOfRangeError):
        deserialize(data)


@pytest.mark.parametrize("kwargs", [dict(width=0), dict(channels=2), dict(k=0), dict(k=257)])
def test_invalid_header_fields(kwargs):
    with pytest.raises(MalformedContainerError):
        deserialize(header_bytes(**kwargs) + b"\x00" * 64)


# ---------------------------------------------------------
# Encode / decode
# ---------------------------------------------------------
@st.composite
def images_with_k(draw):
    width = draw(st.integers(1, 6))
    height = draw(st.integers(1, 6))
    channels = draw(st.sampled_from([1, 3]))
    levels = draw(st.lists(st.integers(0, 255), min_size=1, max_size=6, unique=True))
    picks = draw(st.lists(st.sampled_from(levels), min_size=width * height * channels,
                          max_size=width * height * channels))
    image = RasterImage(width=width, height=height, channels=channels, samples=np.array(picks, dtype=np.uint8))
    k = draw(st.integers(1, min(4, distinct_colors(image))))
    algorithm = draw(st.sampled_from(["kmeans", "kmeanspp", "fcm", "fcmpp"]))
    return image, ClusterConfig(algorithm=algorithm, k=k, seed=draw(st.integers(0, 1000)))


@settings(max_examples=40, deadline=None)
@given(images_with_k())
def test_roundtrip_through_container(case):
    image, config = case
    compressed = encode(image, config)
    restored = deserialize(serialize(compressed))
    assert restored == compressed
    assert len(serialize(compressed)) == container_size(compressed)

    decoded = decode(restored)
    assert decoded.shape == image.shape
    palette = {tuple(entry) for entry in restored.palette.tolist()}
    assert {tuple(p) for p in decoded.samples.reshape(-1, image.channels).tolist()} <= palette


def test_exact_palette_is_lossless():
    colors = np.array([[10, 20, 30], [200, 100, 0], [0, 255, 128]], dtype=np.uint8)
    labels = np.random.default_rng(0).integers(0, 3, size=(8, 9))
    image = RasterImage.from_array(colors[labels])
    assert decode(encode(image, ClusterConfig(algorithm="kmeanspp", k=3))) == image


def test_single_pixel_k1():
    image = RasterImage.from_array(np.array([[[9, 8, 7]]], dtype=np.uint8))
    compressed = encode(image, ClusterConfig(k=1))
    assert compressed.palette.tolist() == [[9, 8, 7]]
    assert compressed.indices.bits_per_index == 1
    assert decode(compressed) == image


def test_two_tone_k2(two_tone_image):
    compressed = encode(two_tone_image, ClusterConfig(algorithm="kmeans", k=2, seed=3))
    assert sorted(compressed.palette[:, 0].tolist()) == [0, 255]
    assert compressed.outcome.objective == 0.0
    assert decode(compressed) == two_tone_image


def test_encode_rejects_too_few_colors(two_tone_image):
    with pytest.raises(DegenerateInputError, match="2 distinct colors.*K=3"):
        encode(two_tone_image, ClusterConfig(k=3))


def test_encode_rejects_k_above_container_limit(rgb_image):
    with pytest.raises(ConfigError):
        encode(rgb_image, ClusterConfig(k=300))


def test_encode_records_algorithm_and_seed(gray_image):
    compressed = encode(gray_image, ClusterConfig(algorithm="fcmpp", k=4, seed=77))
    assert compressed.header.algorithm_tag == 3
    assert compressed.header.seed == 77
    assert deserialize(serialize(compressed)).header.algorithm_name == "fcmpp"


@pytest.mark.parametrize("algorithm", ["kmeans", "fcmpp"])
def test_assignment_uses_nearest_unrounded_centroid(algorithm, rgb_image):
    compressed = encode(rgb_image, ClusterConfig(algorithm=algorithm, k=8, seed=2))
    d2 = squared_distances(to_pixel_points(rgb_image), compressed.centroids)
    labels = compressed.indices.indices.astype(np.int64)
    assert np.all(d2[np.arange(labels.size), labels] <= d2.min(axis=1))


def test_palette_trained_on_itself_matches_encode(gray_image):
    config = ClusterConfig(algorithm="kmeanspp", k=6, seed=8)
    compressed = encode(gray_image, config)
    again = encode_with_palette(gray_image, compressed.centroids,
                                algorithm_tag=ALGORITHM_TAGS[config.algorithm], seed=config.seed)
    assert again == compressed


def test_encode_with_palette_all_zero_image():
    image = RasterImage.from_array(np.zeros((3, 3), dtype=np.uint8))
    compressed = encode_with_palette(image, [[0.0], [255.0]])
    assert compressed.indices.indices.tolist() == [0] * 9


def test_encode_with_palette_dimension_mismatch(rgb_image):
    with pytest.raises(ShapeMismatchError):
        encode_with_palette(rgb_image, [[0.0], [255.0]])


def test_shared_palette_is_no_better_than_per_image():
    gradient = RasterImage.from_array(np.tile(np.arange(0, 256, 4, dtype=np.uint8), (8, 1)))
    dark = RasterImage.from_array(np.tile(np.arange(0, 64, dtype=np.uint8), (8, 1)))
    config = ClusterConfig(algorithm="kmeanspp", k=2, restarts=5)
    shared = encode_with_palette(gradient, encode(dark, config).centroids)
    own = encode(gradient, config)
    assert rmse(gradient, decode(shared)) >= rmse(gradient, decode(own))


def test_reencoding_decoded_image_is_idempotent(rgb_image):
    compressed = encode(rgb_image, ClusterConfig(algorithm="kmeanspp", k=8, seed=1))
    decoded = decode(compressed)
    again = encode_with_palette(decoded, compressed.palette.astype(np.float64))
    np.testing.assert_array_equal(again.indices.indices, compressed.indices.indices)


# ---------------------------------------------------------
# Size accounting
# ---------------------------------------------------------
@pytest.mark.parametrize("k, bits", [(1, 1), (2, 1), (3, 2), (4, 2), (5, 3), (16, 4), (17, 5), (256, 8)])
def test_bits_per_index(k, bits):
    assert bits_per_index(k) == bits


def test_ratio_small_image():
    assert compression_ratio(10, 10, 1, 4) == pytest.approx(800 / 232)


def test_ratio_512_k16_close_to_two():
    assert compression_ratio(512, 512, 1, 16) == pytest.approx(2.0, abs=0.01)


@pytest.mark.parametrize("k, limit", [(4, 4.0), (8, 8 / 3), (16, 2.0), (32, 1.6)])
def test_ratio_large_image_limits(k, limit):
    assert compression_ratio(4096, 4096, 1, k) == pytest.approx(limit, abs=0.01)


def test_ratio_scales_palette_term_with_channels():
    assert compression_ratio(10, 10, 3, 4) == pytest.approx(2400 / (200 + 96))


def test_ratio_needs_two_entries():
    with pytest.raises(ConfigError):
        compression_ratio(4, 4, 1, 1)


def test_container_size_matches_payload(rgb_image):
    compressed = encode(rgb_image, ClusterConfig(k=5))
    expected = HEADER_SIZE + 5 * 3 + (rgb_image.pixel_count * 3 + 7) // 8
    assert container_size(compressed) == expected == len(serialize(compressed))
    assert on_disk_ratio(compressed) == pytest.approx(rgb_image.raw_size / expected)


@pytest.mark.parametrize("case", range(50))
def test_ratio_matches_direct_evaluation(case):
    rng = np.random.default_rng(case)
    n = int(rng.integers(1, 5000))
    k = 2 ** int(rng.integers(1, 9))
    expected = 8 * n * n / (np.log2(k) * n * n + 8 * k)
    assert compression_ratio(n, n, 1, k) == pytest.approx(expected, rel=1e-12)


def test_roundtrip_over_random_images():
    rng = np.random.default_rng(2024)
    for case in range(200):
        width, height = (int(v) for v in rng.integers(1, 65, size=2))
        channels = int(rng.choice([1, 3]))
        levels = rng.integers(0, 256, size=(int(rng.integers(1, 41)), channels))
        pixels = levels[rng.integers(0, levels.shape[0], size=height * width)]
        image = RasterImage(width=width, height=height, channels=channels, samples=pixels.astype(np.uint8))

        n_colors = distinct_colors(image)
        k = min(int(rng.integers(2, 33)), n_colors)
        algorithm = "kmeanspp" if case % 2 else "kmeans"
        compressed = encode(image, ClusterConfig(algorithm=algorithm, k=k, seed=case))
        decoded = decode(deserialize(serialize(compressed)))

        assert decoded.shape == image.shape
        palette = {tuple(entry) for entry in compressed.palette.tolist()}
        assert {tuple(p) for p in decoded.samples.reshape(-1, channels).tolist()} <= palette
        if n_colors <= k:
            assert decoded == image
