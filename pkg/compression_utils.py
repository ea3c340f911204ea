import os
from pathlib import Path
from typing import Iterable, List, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from compression_errors import EmptyInputError, RasterReadError, RasterWriteError
from compression_logger import logger
from image_model import RasterImage

PathLike = Union[str, os.PathLike]

RASTER_EXTENSIONS = (".png", ".bmp", ".tif", ".tiff", ".jpg", ".jpeg", ".ppm", ".pgm")


class UtilityFunctions:
    """Raster file I/O and input discovery for the CLI and bench runners."""

    def __init__(self, extensions: Iterable[str] = RASTER_EXTENSIONS):
        self.extensions = tuple(e.lower() for e in extensions)

    # -----------------------------
    # Raster I/O
    # -----------------------------
    def read_raster(self, path: PathLike) -> RasterImage:
        """
        Decode a raster file to 8-bit L or RGB. Palette, alpha and 16-bit
        modes are converted (alpha is dropped).
        """
        path = Path(path)
        try:
            with Image.open(path) as img:
                img.load()
                if img.mode == "L":
                    converted = img
                elif img.mode in ("1", "I", "I;16", "I;16B", "I;16L", "F", "LA"):
                    converted = img.convert("L")
                else:
                    converted = img.convert("RGB")
                array = np.asarray(converted, dtype=np.uint8)
        except (FileNotFoundError, IsADirectoryError, UnidentifiedImageError, OSError) as e:
            raise RasterReadError(f"Cannot read raster {path}: {e}") from e

        image = RasterImage.from_array(array)
        logger.debug(f"Read {path} as {image}")
        return image

    def write_raster(self, image: RasterImage, path: PathLike) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            # uint8 (h, w) decodes as L, (h, w, 3) as RGB
            Image.fromarray(np.ascontiguousarray(image.to_array())).save(path, format="PNG")
        except (OSError, ValueError) as e:
            raise RasterWriteError(f"Cannot write raster {path}: {e}") from e
        logger.info(f"Wrote raster {path}")
        return path

    # -----------------------------
    # Input discovery
    # -----------------------------
    def is_raster(self, path: Path) -> bool:
        return path.is_file() and path.suffix.lower() in self.extensions

    def get_frames_to_process(self, frame_dir: PathLike) -> List[Path]:
        """Raster files directly under frame_dir, in lexicographic filename order."""
        frame_dir = Path(frame_dir)
        if not frame_dir.is_dir():
            raise RasterReadError(f"Frame directory not found: {frame_dir}")

        frames = sorted((p for p in frame_dir.iterdir() if self.is_raster(p)), key=lambda p: p.name)
        if not frames:
            raise EmptyInputError(f"No raster files found in {frame_dir}")
        logger.info(f"Found {len(frames)} frame(s) in {frame_dir}")
        return frames

    def collect_images(self, paths: Iterable[PathLike]) -> List[Path]:
        """Expand files and directories into a sorted, de-duplicated image list."""
        images: List[Path] = []
        for entry in paths:
            entry = Path(entry)
            if entry.is_dir():
                images.extend(p for p in entry.iterdir() if self.is_raster(p))
            elif entry.exists():
                images.append(entry)
            else:
                raise RasterReadError(f"Input not found: {entry}")

        unique = sorted(set(images), key=lambda p: str(p))
        if not unique:
            raise EmptyInputError("Image set is empty")
        return unique
