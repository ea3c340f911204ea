from pathlib import Path
from typing import Callable, List

import numpy as np
import pytest
from PIL import Image

from compression_config_loader import ConfigLoader
from compression_output_manager import OutputManager
from image_model import RasterImage


def make_natural_image(seed: int = 0, width: int = 40, height: int = 32, channels: int = 3) -> RasterImage:
    """Smooth gradient plus a few soft blobs plus sensor-like noise."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    planes = []
    for _ in range(channels):
        plane = 40.0 + 150.0 * (rng.uniform(0.3, 1.0) * x / width + rng.uniform(0.3, 1.0) * y / height) / 2.0
        for _ in range(3):
            cx, cy = rng.uniform(0, width), rng.uniform(0, height)
            radius = rng.uniform(4.0, 10.0)
            plane += rng.uniform(-60.0, 60.0) * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * radius ** 2))
        plane += rng.normal(0.0, 6.0, size=plane.shape)
        planes.append(plane)
    array = np.clip(np.rint(np.stack(planes, axis=-1)), 0, 255).astype(np.uint8)
    return RasterImage.from_array(array)


def make_offset_frames(count: int, offset: int = 4, seed: int = 0, size: int = 16) -> List[RasterImage]:
    """Frames that brighten by a fixed offset per step; values never clip."""
    rng = np.random.default_rng(seed)
    base = rng.integers(20, 121, size=(size, size)).astype(np.int64)
    return [RasterImage.from_array((base + i * offset).astype(np.uint8)) for i in range(count)]


def save_png(image: RasterImage, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(image.to_array())).save(path, format="PNG")
    return path


@pytest.fixture(autouse=True)
def reset_config():
    ConfigLoader.reset_instance()
    yield
    ConfigLoader.reset_instance()


@pytest.fixture
def natural_image() -> Callable[..., RasterImage]:
    return make_natural_image


@pytest.fixture
def rgb_image() -> RasterImage:
    return make_natural_image(seed=1)


@pytest.fixture
def gray_image() -> RasterImage:
    return make_natural_image(seed=2, channels=1)


@pytest.fixture
def two_tone_image() -> RasterImage:
    array = np.zeros((4, 4), dtype=np.uint8)
    array[:, 2:] = 255
    return RasterImage.from_array(array)


@pytest.fixture
def output_manager(tmp_path) -> OutputManager:
    return OutputManager(tmp_path / "out", log_dir=tmp_path / "logs")


@pytest.fixture
def png_writer(tmp_path) -> Callable[[RasterImage, str], Path]:
    def write(image: RasterImage, name: str) -> Path:
        return save_png(image, tmp_path / name)
    return write
