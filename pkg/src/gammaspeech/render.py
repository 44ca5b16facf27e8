"""Time-frequency matrices to fixed-size RGB images, bit-exactly reproducible.

The export format is binary PPM (P6): trivially byte-exact, no codec in the
verified path. The colormap is a closed-form jet-like ramp so no plotting
library enters the contract.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_FLOOR_DB = -80.0
DEFAULT_EXPORT_SIZE = 227


@dataclass
class RgbImage:
    pixels: np.ndarray  # height x width x 3, uint8, rows top-first

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def power_to_db_norm(m: np.ndarray, floor_db: float = DEFAULT_FLOOR_DB,
                     ) -> np.ndarray:
    """Normalize a non-negative matrix to [0, 1] on a clamped dB scale.

    d = 20*log10(max(m, 1e-10) / max(m)), clamped to [floor_db, 0], then
    shifted so floor_db -> 0 and the matrix maximum -> 1. An all-zero input
    maps to all zeros.
    """
    if floor_db >= 0:
        raise ValueError(f"floor_db must be negative, got {floor_db}")
    m = np.asarray(m, dtype=np.float64)
    peak = m.max() if m.size else 0.0
    if peak <= 0.0:
        return np.zeros_like(m)
    d = 20.0 * np.log10(np.maximum(m, 1e-10) / peak)
    d = np.clip(d, floor_db, 0.0)
    return (d - floor_db) / (-floor_db)


def colormap(v: np.ndarray | float) -> np.ndarray:
    """Jet-like map from values in [0, 1] to uint8 (r, g, b).

    Rounding is half away from zero. Scalars map to a length-3 vector,
    arrays to shape (..., 3).
    """
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0.0) or np.any(v > 1.0):
        raise ValueError("colormap input outside [0, 1]")
    r = np.clip(1.5 - np.abs(4.0 * v - 3.0), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * v - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * v - 1.0), 0.0, 1.0)
    rgb = np.stack([r, g, b], axis=-1)
    return np.floor(255.0 * rgb + 0.5).astype(np.uint8)


def resize_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Edge-clamped bilinear resample with center-aligned sampling.

    The source coordinate for destination pixel (i, j) is
    x = (j + 0.5) * src_w / out_w - 0.5 and likewise for y. Works on 2-D
    matrices and on H x W x C arrays (channels resampled independently).
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output size must be >= 1, got {out_w}x{out_h}")
    img = np.asarray(img, dtype=np.float64)
    if img.size == 0:
        raise ValueError("cannot resize an empty source")
    src_h, src_w = img.shape[:2]
    x = (np.arange(out_w) + 0.5) * (src_w / out_w) - 0.5
    y = (np.arange(out_h) + 0.5) * (src_h / out_h) - 0.5
    x0 = np.clip(np.floor(x).astype(int), 0, src_w - 1)
    y0 = np.clip(np.floor(y).astype(int), 0, src_h - 1)
    x1 = np.minimum(x0 + 1, src_w - 1)
    y1 = np.minimum(y0 + 1, src_h - 1)
    fx = np.clip(x - x0, 0.0, 1.0)
    fy = np.clip(y - y0, 0.0, 1.0)
    wx = fx[None, :]
    wy = fy[:, None]
    if img.ndim == 3:
        wx = wx[..., None]
        wy = wy[..., None]
    top = img[np.ix_(y0, x0)] * (1 - wx) + img[np.ix_(y0, x1)] * wx
    bot = img[np.ix_(y1, x0)] * (1 - wx) + img[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy


def render_image(matrix: np.ndarray, out_w: int = DEFAULT_EXPORT_SIZE,
                 out_h: int = DEFAULT_EXPORT_SIZE,
                 floor_db: float = DEFAULT_FLOOR_DB) -> RgbImage:
    """Render a channels-x-frames magnitude matrix as a false-color image.

    Row 0 of the input is the lowest frequency channel; it lands on the
    bottom image row. Pipeline: dB normalization, vertical flip, bilinear
    resize, colormap.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("expected a non-empty 2-D matrix")
    v = power_to_db_norm(m, floor_db)
    v = v[::-1, :]
    v = np.clip(resize_bilinear(v, out_w, out_h), 0.0, 1.0)
    return RgbImage(pixels=colormap(v))


def write_ppm(img: RgbImage, path: str | Path) -> None:
    """Binary PPM (P6): ASCII header, then raw RGB bytes, top row first."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.pixels.tobytes())


def read_ppm(path: str | Path) -> RgbImage:
    """Parse a P6 file written by write_ppm (strict single-space header)."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P6\n"):
        raise ValueError(f"{path}: not a P6 PPM")
    try:
        nl1 = data.index(b"\n", 3)
        dims = data[3:nl1].split(b" ")
        width, height = int(dims[0]), int(dims[1])
        nl2 = data.index(b"\n", nl1 + 1)
        maxval = int(data[nl1 + 1:nl2])
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed PPM header") from exc
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    body = data[nl2 + 1:]
    if len(body) != width * height * 3:
        raise ValueError(f"{path}: expected {width * height * 3} pixel bytes, "
                         f"got {len(body)}")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)
    return RgbImage(pixels=pixels.copy())
