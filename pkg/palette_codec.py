"""
Palette codec: a K-color palette plus a bit-packed plane of palette indices.

Container layout (little-endian):

    offset  size  field
    0       4     magic b"IECC"
    4       1     version (1)
    5       4     width  (u32)
    9       4     height (u32)
    13      1     channels (1 or 3)
    14      2     K (u16, 1..256)
    16      1     algorithm tag (0 kmeans, 1 kmeanspp, 2 fcm, 3 fcmpp, 255 external palette)
    17      8     seed (u64)
    25      K*channels   palette bytes, entry-major
    ...     ceil(w*h*bits/8)  index plane, row-major, MSB-first, zero-padded

bits per index = ceil(log2 K), minimum 1.
"""

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from clusterers import Algorithm, ClusterConfig, ClusterOutcome, run_clustering, squared_distances
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
from compression_logger import logger
from image_model import RasterImage, distinct_colors, to_pixel_points

MAGIC = b"IECC"
VERSION = 1
HEADER = struct.Struct("<4sBIIBHBQ")
HEADER_SIZE = HEADER.size  # 25
MAX_K = 256

EXTERNAL_PALETTE_TAG = 255
ALGORITHM_TAGS = {
    Algorithm.KMEANS: 0,
    Algorithm.KMEANSPP: 1,
    Algorithm.FCM: 2,
    Algorithm.FCMPP: 3,
}
TAG_NAMES = {tag: algo.value for algo, tag in ALGORITHM_TAGS.items()}
TAG_NAMES[EXTERNAL_PALETTE_TAG] = "external"


def bits_per_index(k: int) -> int:
    return max(1, (k - 1).bit_length())


def packed_length(pixel_count: int, k: int) -> int:
    return (pixel_count * bits_per_index(k) + 7) // 8


@dataclass(frozen=True)
class ContainerHeader:
    width: int
    height: int
    channels: int
    k: int
    algorithm_tag: int
    seed: int
    version: int = VERSION

    def pack(self) -> bytes:
        return HEADER.pack(MAGIC, self.version, self.width, self.height,
                           self.channels, self.k, self.algorithm_tag, self.seed)

    @property
    def algorithm_name(self) -> str:
        return TAG_NAMES.get(self.algorithm_tag, f"unknown({self.algorithm_tag})")


@dataclass(eq=False)
class IndexPlane:
    """The "middle image": one palette index per pixel, row-major."""
    width: int
    height: int
    k: int
    indices: np.ndarray

    @property
    def bits_per_index(self) -> int:
        return bits_per_index(self.k)

    def pack(self) -> bytes:
        bits = self.bits_per_index
        shifts = np.arange(bits - 1, -1, -1, dtype=np.uint16)
        flat = self.indices.astype(np.uint16).reshape(-1)
        bit_matrix = ((flat[:, None] >> shifts) & 1).astype(np.uint8)
        return np.packbits(bit_matrix.reshape(-1)).tobytes()

    @classmethod
    def unpack(cls, data: bytes, width: int, height: int, k: int) -> "IndexPlane":
        bits = bits_per_index(k)
        n = width * height
        expected = packed_length(n, k)
        if len(data) < expected:
            raise TruncatedStreamError(
                f"Index plane needs {expected} bytes, only {len(data)} available"
            )

        all_bits = np.unpackbits(np.frombuffer(data[:expected], dtype=np.uint8))
        if np.any(all_bits[n * bits:]):
            raise MalformedContainerError("Non-zero padding bits after the index plane")

        weights = (1 << np.arange(bits - 1, -1, -1)).astype(np.int64)
        indices = all_bits[: n * bits].reshape(n, bits).astype(np.int64) @ weights
        if indices.size and int(indices.max()) >= k:
            bad = int(np.argmax(indices >= k))
            raise IndexOutOfRangeError(
                f"Pixel {bad} references palette entry {int(indices[bad])} but K={k}"
            )
        return cls(width=width, height=height, k=k, indices=indices.astype(np.uint16))


@dataclass(eq=False)
class CompressedImage:
    header: ContainerHeader
    palette: np.ndarray  # (K, channels) uint8
    indices: IndexPlane
    # Unrounded centroids used for assignment; not part of the wire format
    centroids: Optional[np.ndarray] = field(default=None, repr=False)
    outcome: Optional[ClusterOutcome] = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.header.k

    def __eq__(self, other) -> bool:
        if not isinstance(other, CompressedImage):
            return NotImplemented
        return (
            self.header == other.header
            and np.array_equal(self.palette, other.palette)
            and np.array_equal(self.indices.indices, other.indices.indices)
        )


# ------------------------------------------------------------------
# Encode / decode
# ------------------------------------------------------------------
def _nearest(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return np.argmin(squared_distances(points, centroids), axis=1)


def _round_palette(centroids: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(centroids), 0, 255).astype(np.uint8)


def _build(image: RasterImage, centroids: np.ndarray, labels: np.ndarray,
           algorithm_tag: int, seed: int,
           outcome: Optional[ClusterOutcome] = None) -> CompressedImage:
    k = centroids.shape[0]
    header = ContainerHeader(
        width=image.width,
        height=image.height,
        channels=image.channels,
        k=k,
        algorithm_tag=algorithm_tag,
        seed=seed,
    )
    plane = IndexPlane(width=image.width, height=image.height, k=k,
                       indices=np.asarray(labels, dtype=np.uint16))
    return CompressedImage(header=header, palette=_round_palette(centroids),
                           indices=plane, centroids=np.array(centroids, dtype=np.float64),
                           outcome=outcome)


def encode(image: RasterImage, config: ClusterConfig) -> CompressedImage:
    """Learn a palette on this image's own pixels and index every pixel into it."""
    if config.k > MAX_K:
        raise ConfigError(f"K={config.k} exceeds the container limit of {MAX_K}")

    n_colors = distinct_colors(image)
    if n_colors < config.k:
        raise DegenerateInputError(
            f"Image has {n_colors} distinct colors, fewer than K={config.k}"
        )

    points = to_pixel_points(image)
    outcome = run_clustering(points, config)
    logger.info(
        f"[codec] encoded {image.width}x{image.height}x{image.channels} with "
        f"{config.algorithm.value} K={config.k}: objective={outcome.objective:.4f} "
        f"iterations={outcome.iterations} converged={outcome.converged}"
    )
    return _build(image, outcome.centroids, outcome.assignments,
                  ALGORITHM_TAGS[config.algorithm], config.seed, outcome)


def encode_with_palette(image: RasterImage, centroids: np.ndarray,
                        algorithm_tag: int = EXTERNAL_PALETTE_TAG,
                        seed: int = 0) -> CompressedImage:
    """Index the image against given (e.g. shared) centroids, skipping clustering."""
    centroids = np.asarray(centroids, dtype=np.float64)
    if centroids.ndim == 1:
        centroids = centroids[:, None]
    if centroids.shape[1] != image.channels:
        raise ShapeMismatchError(
            f"Centroids have {centroids.shape[1]} channel(s), image has {image.channels}"
        )
    if not 1 <= centroids.shape[0] <= MAX_K:
        raise ConfigError(f"Palette size must be in [1, {MAX_K}], got {centroids.shape[0]}")

    labels = _nearest(to_pixel_points(image), centroids)
    return _build(image, centroids, labels, algorithm_tag, seed)


def decode(compressed: CompressedImage) -> RasterImage:
    header = compressed.header
    indices = compressed.indices.indices.reshape(-1)
    if indices.size != header.width * header.height:
        raise MalformedContainerError(
            f"Index plane has {indices.size} entries for a {header.width}x{header.height} image"
        )
    if indices.size and int(indices.max()) >= header.k:
        raise IndexOutOfRangeError(f"Index {int(indices.max())} >= K={header.k}")

    pixels = compressed.palette[indices.astype(np.int64)]
    return RasterImage(width=header.width, height=header.height,
                       channels=header.channels, samples=pixels)


# ------------------------------------------------------------------
# Size accounting
# ------------------------------------------------------------------
def compression_ratio(width: int, height: int, channels: int, k: int) -> float:
    """
    Uncompressed bits over index-plane-plus-palette bits, header excluded:
    8*c*w*h / (ceil(log2 K)*w*h + 8*c*K).
    """
    if k < 2:
        raise ConfigError(f"compression_ratio needs K >= 2, got {k}")
    pixels = width * height
    return (8 * channels * pixels) / (bits_per_index(k) * pixels + 8 * channels * k)


def container_size(compressed: CompressedImage) -> int:
    h = compressed.header
    return HEADER_SIZE + h.k * h.channels + packed_length(h.width * h.height, h.k)


def on_disk_ratio(compressed: CompressedImage) -> float:
    h = compressed.header
    return (h.width * h.height * h.channels) / container_size(compressed)


def eq1_ratio(compressed: CompressedImage) -> Optional[float]:
    h = compressed.header
    if h.k < 2:
        return None
    return compression_ratio(h.width, h.height, h.channels, h.k)


# ------------------------------------------------------------------
# Wire format
# ------------------------------------------------------------------
def serialize(compressed: CompressedImage) -> bytes:
    h = compressed.header
    palette = np.asarray(compressed.palette, dtype=np.uint8).reshape(h.k, h.channels)
    return h.pack() + palette.tobytes() + compressed.indices.pack()


def deserialize(data: bytes) -> CompressedImage:
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        if len(data) >= 4 and data[:4] != MAGIC:
            raise BadMagicError(f"Bad magic {data[:4]!r}")
        raise TruncatedStreamError(f"Container is {len(data)} bytes, header needs {HEADER_SIZE}")

    magic, version, width, height, channels, k, tag, seed = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"Bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"Unsupported container version {version}")
    if width < 1 or height < 1:
        raise MalformedContainerError(f"Invalid dimensions {width}x{height}")
    if channels not in (1, 3):
        raise MalformedContainerError(f"Invalid channel count {channels}")
    if not 1 <= k <= MAX_K:
        raise MalformedContainerError(f"Invalid palette size K={k}")

    palette_end = HEADER_SIZE + k * channels
    expected = palette_end + packed_length(width * height, k)
    if len(data) < expected:
        raise TruncatedStreamError(f"Container is {len(data)} bytes, expected {expected}")
    if len(data) > expected:
        raise MalformedContainerError(
            f"Container is {len(data)} bytes, expected {expected} (trailing data)"
        )

    palette = np.frombuffer(data[HEADER_SIZE:palette_end], dtype=np.uint8).reshape(k, channels).copy()
    plane = IndexPlane.unpack(data[palette_end:], width, height, k)
    header = ContainerHeader(width=width, height=height, channels=channels,
                             k=k, algorithm_tag=tag, seed=seed, version=version)
    return CompressedImage(header=header, palette=palette, indices=plane)
