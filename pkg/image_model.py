"""
In-memory raster model.

A RasterImage holds 8-bit samples as a (height, width, channels) uint8
array; flattening it in C order gives the row-major, channel-interleaved
sample stream. Clustering works on "pixel points": one float64 row per
pixel with `channels` coordinates in [0, 255].
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from compression_errors import InvalidImageError

VALID_CHANNELS = (1, 3)

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class RasterImage:
    width: int
    height: int
    channels: int
    samples: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidImageError(
                f"Image dimensions must be >= 1, got {self.width}x{self.height}"
            )
        if self.channels not in VALID_CHANNELS:
            raise InvalidImageError(f"channels must be 1 or 3, got {self.channels}")

        samples = np.asarray(self.samples)
        expected = self.width * self.height * self.channels
        if samples.size != expected:
            raise InvalidImageError(
                f"samples length {samples.size} != width*height*channels = {expected}"
            )
        if samples.dtype != np.uint8:
            if samples.size and (samples.min() < 0 or samples.max() > 255):
                raise InvalidImageError("samples must lie in [0, 255]")
            samples = samples.astype(np.uint8)

        samples = samples.reshape(self.height, self.width, self.channels).copy()
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "RasterImage":
        """Build from a (h, w) grayscale or (h, w, c) array."""
        array = np.asarray(array)
        if array.ndim == 2:
            array = array[:, :, None]
        if array.ndim != 3:
            raise InvalidImageError(f"Expected a 2-D or 3-D array, got shape {array.shape}")
        height, width, channels = array.shape
        return cls(width=width, height=height, channels=channels, samples=array)

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.height, self.width, self.channels

    @property
    def raw_size(self) -> int:
        """Uncompressed size in bytes."""
        return self.pixel_count * self.channels

    @property
    def color_mode(self) -> str:
        return "gray" if self.channels == 1 else "rgb"

    def to_array(self) -> np.ndarray:
        if self.channels == 1:
            return np.array(self.samples[:, :, 0])
        return np.array(self.samples)

    def flat_samples(self) -> np.ndarray:
        return self.samples.reshape(-1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.samples, other.samples)

    def __hash__(self) -> int:
        return hash((self.shape, self.samples.tobytes()))

    def __repr__(self) -> str:
        return f"RasterImage({self.width}x{self.height}, channels={self.channels})"


@dataclass(frozen=True, eq=False)
class Histogram:
    """bins[c][v] = number of samples of channel c with value v."""
    bins: np.ndarray

    @property
    def channels(self) -> int:
        return self.bins.shape[0]

    def channel_sums(self) -> np.ndarray:
        return self.bins.sum(axis=1)


def to_pixel_points(image: RasterImage) -> np.ndarray:
    """One float64 row per pixel, row-major order; shape (width*height, channels)."""
    return image.samples.reshape(-1, image.channels).astype(np.float64)


def from_pixel_points(points: np.ndarray, width: int, height: int) -> RasterImage:
    """Reassemble pixel points into a raster, rounding and clamping to [0, 255]."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] != width * height:
        raise InvalidImageError(
            f"Expected {width * height} points, got array of shape {points.shape}"
        )
    samples = np.clip(np.rint(points), 0, 255).astype(np.uint8)
    return RasterImage(width=width, height=height, channels=points.shape[1], samples=samples)


def to_grayscale(image: RasterImage) -> RasterImage:
    if image.channels != 3:
        raise InvalidImageError("to_grayscale expects an RGB image; input is already grayscale")

    luma = image.samples.astype(np.float64) @ LUMA_WEIGHTS
    gray = np.clip(np.rint(luma), 0, 255).astype(np.uint8)
    return RasterImage(width=image.width, height=image.height, channels=1, samples=gray)


def histogram(image: RasterImage) -> Histogram:
    channels = image.samples.reshape(-1, image.channels)
    bins = np.stack(
        [np.bincount(channels[:, c], minlength=256) for c in range(image.channels)]
    ).astype(np.int64)
    return Histogram(bins=bins)


def distinct_colors(image: RasterImage) -> int:
    return int(np.unique(image.samples.reshape(-1, image.channels), axis=0).shape[0])
