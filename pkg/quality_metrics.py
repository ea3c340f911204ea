"""
Full-reference quality metrics: MSE, RMSE, PSNR and SSIM.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy import ndimage

from compression_errors import ShapeMismatchError
from image_model import RasterImage
from palette_codec import eq1_ratio, on_disk_ratio

MAX_I = 255.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_C1 = (SSIM_K1 * MAX_I) ** 2
SSIM_C2 = (SSIM_K2 * MAX_I) ** 2
# gaussian_filter radius = int(truncate * sigma + 0.5) = 5 -> 11x11 window
_TRUNCATE = 3.5

REPORT_FIELDS = ["mse", "rmse", "psnr_db", "ssim", "ratio_eq1", "ratio_on_disk"]


def _check_shapes(original: RasterImage, reconstructed: RasterImage) -> None:
    if original.shape != reconstructed.shape:
        raise ShapeMismatchError(
            f"Shape mismatch: {original.width}x{original.height}x{original.channels} "
            f"vs {reconstructed.width}x{reconstructed.height}x{reconstructed.channels}"
        )


def mse(original: RasterImage, reconstructed: RasterImage) -> float:
    """Mean squared error over every sample, channels pooled."""
    _check_shapes(original, reconstructed)
    diff = original.samples.astype(np.float64) - reconstructed.samples.astype(np.float64)
    return float(np.mean(diff ** 2))


def rmse(original: RasterImage, reconstructed: RasterImage) -> float:
    return math.sqrt(mse(original, reconstructed))


def psnr_from_mse(value: float) -> float:
    if value == 0:
        return math.inf
    return 10.0 * math.log10(MAX_I ** 2 / value)


def psnr(original: RasterImage, reconstructed: RasterImage) -> float:
    """PSNR in dB; math.inf when the images are identical."""
    return psnr_from_mse(mse(original, reconstructed))


def _ssim_map(x: np.ndarray, y: np.ndarray, windowed: bool) -> np.ndarray:
    if windowed:
        def blur(a):
            return ndimage.gaussian_filter(a, sigma=SSIM_SIGMA, truncate=_TRUNCATE, mode="reflect")
    else:
        def blur(a):
            return np.full_like(a, a.mean())

    mu_x = blur(x)
    mu_y = blur(y)
    sigma_x2 = blur(x * x) - mu_x * mu_x
    sigma_y2 = blur(y * y) - mu_y * mu_y
    sigma_xy = blur(x * y) - mu_x * mu_y

    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * sigma_xy + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (sigma_x2 + sigma_y2 + SSIM_C2)
    return num / den


def _channel_ssim(x: np.ndarray, y: np.ndarray) -> float:
    height, width = x.shape
    windowed = min(height, width) >= SSIM_WINDOW
    smap = _ssim_map(x, y, windowed)
    if windowed:
        pad = SSIM_WINDOW // 2
        smap = smap[pad:height - pad, pad:width - pad]
    return float(smap.mean())


def ssim(original: RasterImage, reconstructed: RasterImage) -> float:
    """
    Mean SSIM over 11x11 Gaussian windows (sigma 1.5), border windows cropped;
    images smaller than the window fall back to one global window. RGB is the
    unweighted mean of the per-channel values.
    """
    _check_shapes(original, reconstructed)
    a = original.samples.astype(np.float64)
    b = reconstructed.samples.astype(np.float64)
    values = [_channel_ssim(a[:, :, c], b[:, :, c]) for c in range(original.channels)]
    return float(np.clip(np.mean(values), -1.0, 1.0))


def one_minus_nrmse(original: RasterImage, reconstructed: RasterImage) -> float:
    return 1.0 - rmse(original, reconstructed) / MAX_I


def format_psnr(value: float) -> Any:
    return "inf" if math.isinf(value) else value


@dataclass
class MetricsReport:
    mse: float
    rmse: float
    psnr: float
    ssim: float
    compression_ratio: Optional[float] = None
    on_disk_ratio: Optional[float] = None

    def to_dict(self, schema_version: int = 1) -> Dict[str, Any]:
        return {
            "schema_version": schema_version,
            "mse": self.mse,
            "rmse": self.rmse,
            "psnr_db": format_psnr(self.psnr),
            "ssim": self.ssim,
            "ratio_eq1": self.compression_ratio,
            "ratio_on_disk": self.on_disk_ratio,
        }


def evaluate(original: RasterImage, reconstructed: RasterImage,
             compressed=None) -> MetricsReport:
    """
    Compute all metrics for a pair; the ratio fields are filled only when the
    container that produced `reconstructed` is supplied.
    """
    value = mse(original, reconstructed)
    ratio = on_disk = None
    if compressed is not None:
        ratio = eq1_ratio(compressed)
        on_disk = on_disk_ratio(compressed)

    return MetricsReport(
        mse=value,
        rmse=math.sqrt(value),
        psnr=psnr_from_mse(value),
        ssim=ssim(original, reconstructed),
        compression_ratio=ratio,
        on_disk_ratio=on_disk,
    )
