"""Pushframe optical forward model.

A scene slides across a static Hadamard mask one pattern column per time
step. At step ``t`` pattern column ``i`` sees scene position
``x = t * (1 + step_error) - i``; the masked light in each pattern column is
summed onto one linear-detector element. Degradations: illumination
non-uniformity, finite mask contrast, stray light, Gaussian blur of the
masked image, vertical scene shear, shot and read noise.

``simulate`` evaluates column sums through precomputed linear maps instead
of building the supersampled frames; ``render_frame`` followed by
``integrate_columns`` is the explicit path and agrees with it to rounding.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import ndimage

from . import rng as _rng
from .errors import ConfigError
from .pattern import PatternSpec, to_binary_mask
from .scene import SceneImage, sample
from .stream import READOUTS, CalibrationData, MeasurementStream

ILLUMINATION_MODES = ("uniform", "column-gains", "separable", "vignette", "map")

# Time steps evaluated together. Fixed so that results never depend on the
# number of workers.
CHUNK = 16


@dataclass(frozen=True, eq=False)
class IlluminationField:
    """Gain of the light reaching each DMD location (strictly positive).

    Coordinates are in pattern pixels: pattern pixel (j, i) covers rows
    [j, j+1) and columns [i, i+1). Modes:

    - ``uniform``: gain 1 everywhere
    - ``column-gains``: ``gains[i]`` for pattern column i
    - ``separable``: ``row_profile[j] * col_profile[i]``
    - ``vignette``: ``floor + (1 - floor) * exp(-d**2 / (2 sigma**2))`` around
      ``center`` (defaults: pattern centre, ``sigma = n / 2``), evaluated at
      every supersampled pixel
    - ``map``: arbitrary n x n per-pattern-pixel gains
    """

    mode: str = "uniform"
    gains: tuple | None = None
    row_profile: tuple | None = None
    col_profile: tuple | None = None
    center: tuple | None = None
    sigma: float | None = None
    floor: float = 0.5
    gain_map: tuple | None = None

    def __post_init__(self):
        if self.mode not in ILLUMINATION_MODES:
            raise ConfigError(f"unknown illumination mode {self.mode!r}", ["illumination.mode"])
        for name in ("gains", "row_profile", "col_profile", "center"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(float(x) for x in np.ravel(v)))
        if self.gain_map is not None:
            object.__setattr__(self, "gain_map",
                               tuple(tuple(float(x) for x in row) for row in np.atleast_2d(self.gain_map)))
        required = {"column-gains": ("gains",), "separable": ("row_profile", "col_profile"),
                    "map": ("gain_map",)}.get(self.mode, ())
        missing = [f"illumination.{r}" for r in required if getattr(self, r) is None]
        if missing:
            raise ConfigError(f"illumination mode {self.mode!r} needs {missing}", missing)
        bad = []
        for name in ("gains", "row_profile", "col_profile"):
            v = getattr(self, name)
            if v is not None and not all(math.isfinite(x) and x > 0 for x in v):
                bad.append(f"illumination.{name}")
        if self.gain_map is not None and not all(math.isfinite(x) and x > 0 for r in self.gain_map for x in r):
            bad.append("illumination.gain_map")
        if self.mode == "vignette":
            if not (0 < self.floor <= 1):
                bad.append("illumination.floor")
            if self.sigma is not None and not (math.isfinite(self.sigma) and self.sigma > 0):
                bad.append("illumination.sigma")
        if bad:
            raise ConfigError(f"illumination gains must be finite and > 0: {bad}", bad)

    @classmethod
    def column_gains_field(cls, gains):
        return cls("column-gains", gains=gains)

    @classmethod
    def separable_field(cls, row_profile, col_profile):
        return cls("separable", row_profile=row_profile, col_profile=col_profile)

    @classmethod
    def vignette_field(cls, sigma=None, floor=0.5, center=None):
        return cls("vignette", center=center, sigma=sigma, floor=floor)

    @classmethod
    def map_field(cls, gain_map):
        return cls("map", gain_map=gain_map)

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}

    def fine(self, n: int, s: int) -> np.ndarray:
        """Gain at every supersampled pixel, shape (n*s, n*s)."""
        ns = n * s

        def per_pixel(grid, name):
            grid = np.asarray(grid, dtype=np.float64)
            if grid.shape != (n, n):
                raise ConfigError(f"illumination.{name} has shape {grid.shape}, pattern is {n}x{n}",
                                  [f"illumination.{name}"])
            return np.repeat(np.repeat(grid, s, axis=0), s, axis=1)

        if self.mode == "uniform":
            return np.ones((ns, ns))
        if self.mode == "column-gains":
            if len(self.gains) != n:
                raise ConfigError(f"need {n} column gains, got {len(self.gains)}", ["illumination.gains"])
            return per_pixel(np.broadcast_to(np.asarray(self.gains), (n, n)), "gains")
        if self.mode == "separable":
            if len(self.row_profile) != n or len(self.col_profile) != n:
                raise ConfigError("separable profiles must have one entry per pattern row/column",
                                  ["illumination.row_profile", "illumination.col_profile"])
            return per_pixel(np.outer(self.row_profile, self.col_profile), "separable")
        if self.mode == "map":
            return per_pixel(self.gain_map, "gain_map")
        coords = (np.arange(ns) + 0.5) / s
        cy, cx = self.center if self.center is not None else (n / 2, n / 2)
        sigma = self.sigma if self.sigma is not None else n / 2
        d2 = (coords[:, None] - cy) ** 2 + (coords[None, :] - cx) ** 2
        return self.floor + (1.0 - self.floor) * np.exp(-d2 / (2.0 * sigma ** 2))


@dataclass(frozen=True, eq=False)
class OpticsConfig:
    """Every degradation parameter of the forward model.

    contrast_floor : reflectance of an "off" mask pixel, in [0, 0.5)
    blur_sigma : Gaussian PSF standard deviation in pattern pixels
    illumination : IlluminationField
    step_error : fractional step miscalibration; the scene advances
        ``1 + step_error`` pattern columns per time step
    step_jitter : std of an extra random per-step offset, pattern columns
    stray_light : additive pedestal per supersampled pixel
    read_noise : Gaussian std added to each column sum
    shot_noise, photons_per_unit : Poisson noise with this many photons per
        unit of column sum
    supersample : DMD micromirrors per pattern pixel along each axis
    shear_rows_per_column : vertical scene shift (rows) per scene column
    readout : "binary" (one port, 0/1 mask) or "differential" (both DMD
        ports subtracted, a +/-1 code)
    seed : key of all noise streams
    """

    contrast_floor: float = 0.0
    blur_sigma: float = 0.0
    illumination: IlluminationField = field(default_factory=IlluminationField)
    step_error: float = 0.0
    step_jitter: float = 0.0
    stray_light: float = 0.0
    read_noise: float = 0.0
    shot_noise: bool = False
    photons_per_unit: float = 1e4
    supersample: int = 4
    shear_rows_per_column: float = 0.0
    readout: str = "binary"
    seed: int = 0

    def __post_init__(self):
        bad = []
        reals = ("contrast_floor", "blur_sigma", "step_error", "step_jitter", "stray_light",
                 "read_noise", "photons_per_unit", "shear_rows_per_column")
        for name in reals:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float, np.floating, np.integer)) \
                    or not math.isfinite(v):
                bad.append(name)
            else:
                object.__setattr__(self, name, float(v))
        if bad:
            raise ConfigError(f"non-finite or non-numeric optics parameters: {bad}", bad)
        if not 0.0 <= self.contrast_floor < 0.5:
            bad.append("contrast_floor")
        for name in ("blur_sigma", "step_jitter", "stray_light", "read_noise"):
            if getattr(self, name) < 0:
                bad.append(name)
        if self.step_error <= -1.0:
            bad.append("step_error")
        if self.photons_per_unit <= 0:
            bad.append("photons_per_unit")
        if isinstance(self.supersample, bool) or int(self.supersample) != self.supersample \
                or self.supersample < 1:
            bad.append("supersample")
        if self.readout not in READOUTS:
            bad.append("readout")
        if not isinstance(self.illumination, IlluminationField):
            bad.append("illumination")
        if bad:
            raise ConfigError(f"optics parameters out of range: {bad}", bad)
        object.__setattr__(self, "supersample", int(self.supersample))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "shot_noise", bool(self.shot_noise))

    @classmethod
    def ideal(cls, supersample=1, **kw):
        """Perfect optics: no blur, noise, stray light or contrast loss."""
        return cls(supersample=supersample, **kw)

    def replace(self, **kw):
        return replace(self, **kw)

    @property
    def noiseless(self):
        return replace(self, read_noise=0.0, shot_noise=False)

    @property
    def noisy(self) -> bool:
        return self.read_noise > 0 or self.shot_noise

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "illumination"}
        d["illumination"] = self.illumination.to_dict()
        return d

    @property
    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("ascii")).hexdigest()[:16]


def gaussian_kernel(sigma: float) -> np.ndarray | None:
    """Normalised 1D Gaussian truncated at 4 sigma; None for sigma == 0."""
    if sigma <= 0:
        return None
    radius = int(4.0 * sigma + 0.5)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


class _Optics:
    """Per (pattern, config) quantities shared by every time step."""

    def __init__(self, pattern: PatternSpec, cfg: OpticsConfig):
        self.pattern = pattern
        self.cfg = cfg
        n = self.n = pattern.order
        s = self.s = cfg.supersample
        ns = self.ns = n * s
        eps = cfg.contrast_floor
        mask = to_binary_mask(pattern).astype(np.float64)
        self.mask = mask
        self.refl = {"a": mask + eps * (1.0 - mask)}
        if cfg.readout == "differential":
            self.refl["b"] = (1.0 - mask) + eps * mask
        self.ports = tuple(self.refl)

        self.kernel = gaussian_kernel(cfg.blur_sigma * s)
        self.illum = cfg.illumination.fine(n, s)
        if self.kernel is None:
            w = np.ones(ns)
            band = None
        else:
            w = ndimage.convolve1d(np.ones(ns), self.kernel, mode="constant")
            band = np.repeat(np.eye(n), s, axis=1)
            band = ndimage.convolve1d(band, self.kernel, axis=1, mode="constant")
        # q[j, c]: vertically integrated gain of pattern row j at fine column c,
        # including light the vertical blur pushes off the frame.
        q = (w[:, None] * self.illum).reshape(n, s, ns).sum(axis=1)
        self.band = band
        if band is None:
            self.col_gain = q.reshape(n, n, s).sum(axis=2) / (s * s)
            self.q = None
            self.stray = np.full(n, cfg.stray_light * w.sum() * s / (s * s))
        else:
            self.col_gain = None
            self.q = q
            self.fine_col = np.repeat(np.arange(n), s)
            self.stray = cfg.stray_light * band.sum(axis=1) * w.sum() / (s * s)

    def scene_at_mask(self, scene_data, steps):
        """Scene radiance under each pattern pixel, shape (len(steps), n, n, C)."""
        cfg = self.cfg
        steps = np.asarray(steps, dtype=np.int64)
        pos = steps * (1.0 + cfg.step_error)
        if cfg.step_jitter > 0:
            pos = pos + cfg.step_jitter * np.array(
                [_rng.keyed_generator(cfg.seed, _rng.JITTER, t).standard_normal() for t in steps])
        x = pos[:, None] - np.arange(self.n)[None, :]
        rows = np.arange(self.n, dtype=np.float64)[None, :, None]
        if cfg.shear_rows_per_column:
            rows = rows - cfg.shear_rows_per_column * x[:, None, :]
        return sample(scene_data, rows, x[:, None, :])

    def column_sums(self, radiance, port="a"):
        """Noise-free column sums for masked radiance (steps, n, n, C) -> (steps, n, C)."""
        a = radiance * self.refl[port][None, :, :, None]
        if self.col_gain is not None:
            sums = (a * self.col_gain[None, :, :, None]).sum(axis=1)
        else:
            u = (a[:, :, self.fine_col, :] * self.q[None, :, :, None]).sum(axis=1)
            sums = np.matmul(self.band, u) / (self.s * self.s)
        return sums + self.stray[None, :, None]

    def frame(self, radiance, port="a"):
        """Explicit supersampled frame for one step's radiance (n, n, C)."""
        a = radiance * self.refl[port][:, :, None]
        s = self.s
        f = np.repeat(np.repeat(a, s, axis=0), s, axis=1) * self.illum[:, :, None]
        f = f + self.cfg.stray_light
        if self.kernel is not None:
            f = ndimage.convolve1d(f, self.kernel, axis=0, mode="constant")
            f = ndimage.convolve1d(f, self.kernel, axis=1, mode="constant")
        return f

    def white_frame(self, channels):
        f = np.broadcast_to(self.illum[:, :, None], (self.ns, self.ns, channels)) + self.cfg.stray_light
        if self.kernel is not None:
            f = ndimage.convolve1d(f, self.kernel, axis=0, mode="constant")
            f = ndimage.convolve1d(f, self.kernel, axis=1, mode="constant")
        return np.array(f)


def detector_noise(port_sums, cfg: OpticsConfig, steps):
    """Apply shot then read noise to noise-free port sums and combine ports.

    ``port_sums`` maps port name to (steps, n, C) arrays. Every (step,
    channel) pair draws from its own keyed stream.
    """
    a = port_sums["a"]
    out = np.empty_like(a)
    for k, t in enumerate(steps):
        for c in range(a.shape[2]):
            vals = []
            for port, tag in (("a", _rng.SHOT_A), ("b", _rng.SHOT_B)):
                if port not in port_sums:
                    continue
                v = port_sums[port][k, :, c]
                if cfg.shot_noise:
                    g = _rng.keyed_generator(cfg.seed, tag, t, c)
                    lam = cfg.photons_per_unit * np.maximum(v, 0.0)
                    v = g.poisson(lam) / cfg.photons_per_unit
                vals.append(v)
            v = vals[0] - vals[1] if len(vals) == 2 else vals[0]
            if cfg.read_noise > 0:
                g = _rng.keyed_generator(cfg.seed, _rng.READ, t, c)
                v = v + cfg.read_noise * g.standard_normal(v.shape[0])
            out[k, :, c] = v
    return out


def _check_scene(scene, pattern):
    if not isinstance(scene, SceneImage):
        scene = SceneImage(scene)
    if scene.height != pattern.order:
        raise ConfigError(f"scene height {scene.height} does not match pattern order "
                          f"{pattern.order}; resample it first", ["scene"])
    return scene


def render_frame(scene, pattern, cfg, t, port="a", _optics=None):
    """Supersampled camera frame (n*s, n*s, C) at time step ``t``, before noise."""
    scene = _check_scene(scene, pattern)
    T = scene.width + pattern.order - 1
    if not 0 <= t < T:
        raise IndexError(f"time step {t} outside [0, {T})")
    optics = _optics or _Optics(pattern, cfg)
    if port not in optics.refl:
        raise ValueError(f"port {port!r} not available for {cfg.readout} readout")
    radiance = optics.scene_at_mask(scene.data, [t])[0]
    return optics.frame(radiance, port)


def integrate_columns(frame, s: int = 1) -> np.ndarray:
    """Sum a supersampled frame within each pattern-column band, divided by s**2."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 2:
        frame = frame[:, :, None]
    rows, cols, C = frame.shape
    if rows % s or cols % s:
        raise ValueError(f"frame shape {frame.shape[:2]} is not a multiple of supersample {s}")
    return frame.reshape(rows, cols // s, s, C).sum(axis=(0, 2)) / (s * s)


class FrameStack(Sequence):
    """Lazily rendered pre-integration frames of one simulation.

    Indexing gives the port-"a" frame; ``frame(t, "b")`` the complementary
    port for differential readout.
    """

    def __init__(self, scene, pattern, cfg):
        self.scene = scene
        self.pattern = pattern
        self.cfg = cfg
        self._optics = _Optics(pattern, cfg)

    @property
    def ports(self):
        return self._optics.ports

    @property
    def mask(self):
        return self._optics.mask

    def __len__(self):
        return self.scene.width + self.pattern.order - 1

    def frame(self, t, port="a"):
        if t < 0:
            t += len(self)
        return render_frame(self.scene, self.pattern, self.cfg, t, port, self._optics)

    def __getitem__(self, t):
        if isinstance(t, slice):
            return [self.frame(k) for k in range(*t.indices(len(self)))]
        return self.frame(t)


def simulate(scene, pattern, cfg=None, keep_frames=False, workers=1):
    """Measurement stream of ``scene`` moving across ``pattern``.

    Returns a MeasurementStream with ``T = W + n - 1`` steps, or
    ``(stream, FrameStack)`` when ``keep_frames`` is set. ``workers`` > 1
    evaluates blocks of time steps on a thread pool; the output is identical.
    """
    cfg = OpticsConfig() if cfg is None else cfg
    scene = _check_scene(scene, pattern)
    optics = _Optics(pattern, cfg)
    T = scene.width + pattern.order - 1

    def block(t0):
        steps = np.arange(t0, min(t0 + CHUNK, T))
        radiance = optics.scene_at_mask(scene.data, steps)
        sums = {p: optics.column_sums(radiance, p) for p in optics.ports}
        if cfg.noisy:
            return detector_noise(sums, cfg, steps)
        return sums["a"] - sums["b"] if "b" in sums else sums["a"]

    starts = range(0, T, CHUNK)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(block, starts))
    else:
        blocks = [block(t0) for t0 in starts]
    stream = MeasurementStream(np.concatenate(blocks, axis=0), scene.width, pattern.digest,
                               cfg.digest, cfg.readout, cfg.step_error)
    if keep_frames:
        return stream, FrameStack(scene, pattern, cfg)
    return stream


def white_calibration(pattern, cfg=None, channels=1) -> CalibrationData:
    """Noise-free white reference through the same optics.

    ``weights`` are the column sums of a uniform unit scene at full overlap
    (the sum of both ports for differential readout). ``reference`` is what
    perfect optics would record for the same pattern. ``white_frame`` is the
    supersampled frame of a unit scene with every mirror on, i.e. the 2D
    illumination gain the camera sees.
    """
    cfg = OpticsConfig() if cfg is None else cfg
    optics = _Optics(pattern, cfg.noiseless)
    ones = np.ones((1, pattern.order, pattern.order, channels))
    weights = sum(optics.column_sums(ones, p)[0] for p in optics.ports)
    if cfg.readout == "differential":
        reference = np.full((pattern.order, channels), float(pattern.order))
    else:
        on_count = optics.mask.sum(axis=0)
        reference = np.repeat(on_count[:, None], channels, axis=1)
    return CalibrationData(weights, pattern.digest, pattern.white_column, reference,
                           optics.white_frame(channels), cfg.supersample, cfg.readout)
