"""Scene images that translate across the DMD mask.

Scenes are stored as (rows, columns, channels) float arrays of linear
radiance, nominally in [0, 1]. Anything outside the image extent is dark.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import netpbm
from .errors import FormatError

SYNTHETIC_KINDS = (
    "uniform",
    "horizontal-gradient",
    "vertical-gradient",
    "checkerboard",
    "delta",
    "texture",
)


@dataclass(frozen=True, eq=False)
class SceneImage:
    """Multi-channel non-negative image; ``data`` has shape (height, width, channels)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ValueError(f"scene must be (H, W, 1|3), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("scene values must be finite")
        if np.any(data < 0):
            raise ValueError("scene values must be non-negative")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def __add__(self, other):
        return SceneImage(self.data + other.data)

    def __mul__(self, k):
        return SceneImage(self.data * k)

    __rmul__ = __mul__


def load_image(path) -> SceneImage:
    """Load a binary PGM/PPM, scaling samples by the file's maxval."""
    arr, maxval = netpbm.read(path)
    return SceneImage(arr.astype(np.float64) / maxval)


def save_image(scene, path, bits: int = 16) -> None:
    """Write a scene as PGM/PPM. Values are clipped to [0, 1] then quantized."""
    data = scene.data if isinstance(scene, SceneImage) else np.asarray(scene, dtype=np.float64)
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    maxval = (1 << bits) - 1
    q = np.rint(np.clip(data, 0.0, 1.0) * maxval).astype(np.uint16)
    netpbm.write(path, q, maxval)


def resample_height(s: SceneImage, n: int) -> SceneImage:
    """Linearly interpolate the scene to ``n`` rows (end rows stay aligned)."""
    if n < 2:
        raise ValueError(f"target height must be >= 2, got {n}")
    h = s.height
    if h == n:
        return s
    if h == 1:
        return SceneImage(np.repeat(s.data, n, axis=0))
    pos = np.linspace(0.0, h - 1, n)
    lo = np.minimum(np.floor(pos).astype(np.intp), h - 2)
    frac = (pos - lo)[:, None, None]
    out = (1.0 - frac) * s.data[lo] + frac * s.data[lo + 1]
    # A constant column must stay bit-exact constant.
    const = np.all(s.data == s.data[:1], axis=0)
    if np.any(const):
        out = np.where(const[None], s.data[:1], out)
    return SceneImage(np.maximum(out, 0.0))


def sample(data, rows, cols):
    """Bilinear sample of ``data`` (H, W, C) at real coordinates, zero outside.

    ``rows`` and ``cols`` broadcast together; the result has their broadcast
    shape plus a trailing channel axis.
    """
    data = np.asarray(data)
    h, w, _ = data.shape
    # a zero border lets out-of-range taps clip onto zeros
    padded = np.pad(data, ((1, 1), (1, 1), (0, 0)))
    rows, cols = np.broadcast_arrays(np.asarray(rows, dtype=np.float64),
                                     np.asarray(cols, dtype=np.float64))
    r0 = np.floor(rows)
    c0 = np.floor(cols)
    fr = (rows - r0)[..., None]
    fc = (cols - c0)[..., None]
    r0 = r0.astype(np.intp)
    c0 = c0.astype(np.intp)
    ca = np.clip(c0, -1, w) + 1
    cb = np.clip(c0 + 1, -1, w) + 1

    def row(r):
        r = np.clip(r, -1, h) + 1
        v = padded[r, ca]
        return v * (1.0 - fc) + padded[r, cb] * fc if np.any(fc) else v

    top = row(r0)
    if not np.any(fr):
        return top
    bottom = row(r0 + 1)
    return top * (1.0 - fr) + bottom * fr


def column_at(s: SceneImage, x: float) -> np.ndarray:
    """Scene column at horizontal position ``x`` as an (height, channels) array.

    Interpolates linearly between columns ``floor(x)`` and ``floor(x) + 1``;
    columns outside [0, width) read as zero.
    """
    rows = np.arange(s.height, dtype=np.float64)
    return sample(s.data, rows, np.full(s.height, float(x)))


def synthetic(kind: str, n: int, W: int, channels: int = 1, **params) -> SceneImage:
    """Analytic test scenes of ``n`` rows and ``W`` columns.

    Parameters by kind:

    - uniform: ``level`` (1.0)
    - horizontal-gradient / vertical-gradient: ``low`` (0.0), ``high`` (1.0)
    - checkerboard: ``period`` (2, pixels per full cycle), ``low``, ``high``
    - delta: ``row`` (0), ``col`` (0), ``level`` (1.0)
    - texture: ``seed`` (0), ``smooth`` (2.0 px), ``low`` (0.05), ``high`` (0.95);
      band-limited seeded noise, rescaled per channel to [low, high]
    """
    if kind not in SYNTHETIC_KINDS:
        raise ValueError(f"unknown synthetic scene kind {kind!r}; choose from {SYNTHETIC_KINDS}")
    if n < 1 or W < 1 or channels not in (1, 3):
        raise ValueError("need n >= 1, W >= 1 and 1 or 3 channels")
    shape = (n, W, channels)
    low = float(params.get("low", 0.0))
    high = float(params.get("high", 1.0))
    if kind == "uniform":
        data = np.full(shape, float(params.get("level", 1.0)))
    elif kind == "horizontal-gradient":
        ramp = np.linspace(low, high, W) if W > 1 else np.full(1, low)
        data = np.broadcast_to(ramp[None, :, None], shape)
    elif kind == "vertical-gradient":
        ramp = np.linspace(low, high, n) if n > 1 else np.full(1, low)
        data = np.broadcast_to(ramp[:, None, None], shape)
    elif kind == "checkerboard":
        period = int(params.get("period", 2))
        cell = max(period // 2, 1)
        j, i = np.indices((n, W))
        on = ((j // cell) + (i // cell)) % 2 == 0
        data = np.broadcast_to(np.where(on, high, low)[:, :, None], shape)
    elif kind == "delta":
        row, col = int(params.get("row", 0)), int(params.get("col", 0))
        data = np.zeros(shape)
        data[row, col, :] = float(params.get("level", 1.0))
    else:
        rng = np.random.default_rng(int(params.get("seed", 0)))
        smooth = float(params.get("smooth", 2.0))
        low = float(params.get("low", 0.05))
        high = float(params.get("high", 0.95))
        noise = rng.standard_normal(shape)
        field = ndimage.gaussian_filter(noise, sigma=(smooth, smooth, 0), mode="wrap")
        lo = field.min(axis=(0, 1), keepdims=True)
        span = np.maximum(field.max(axis=(0, 1), keepdims=True) - lo, 1e-300)
        data = low + (high - low) * (field - lo) / span
    return SceneImage(np.array(data, dtype=np.float64))


__all__ = [
    "SceneImage",
    "load_image",
    "save_image",
    "resample_height",
    "column_at",
    "sample",
    "synthetic",
    "SYNTHETIC_KINDS",
    "FormatError",
]
