"""Scene reconstruction from a pushframe measurement stream.

Scene column ``k`` meets pattern column ``i`` at time step ``k + i``, so its
n coded sums are ``S[k + i, i]``. With +/-1 codes the column is recovered by
the weighted sum of pattern columns ``(1/n) * sum_i P[:, i] * s_i``. Physical
0/1 masks leak the scene's DC level into every sum; the "debiased" path
removes it with the all-white column: ``2 * s_i - s_white`` is the +/-1
measurement.
"""

from __future__ import annotations

import numpy as np

from .errors import DigestMismatchError
from .forward import detector_noise, integrate_columns
from .scene import sample
from .stream import CalibrationData, MeasurementStream, ReconImage, check_digest

MODES = ("naive", "flatfield", "debiased", "2d-corrected")


def fwht(v, axis=-1) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform in natural (Sylvester) order.

    Equivalent to ``sylvester(n) @ v`` along ``axis``; O(n log n) butterflies.
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[axis]
    if n < 1 or n & (n - 1):
        raise ValueError(f"transform length must be a power of two, got {n}")
    x = np.moveaxis(v, axis, -1).copy()
    lead = x.shape[:-1]
    h = 1
    while h < n:
        y = x.reshape(*lead, n // (2 * h), 2, h)
        a = y[..., 0, :]
        b = y[..., 1, :]
        x = np.stack((a + b, a - b), axis=-2).reshape(*lead, n)
        h *= 2
    return np.moveaxis(x, -1, axis)


def _pm_estimates(s, white, debias):
    """+/-1 code estimates from raw sums (last-but-one axis is the pattern column)."""
    if not debias:
        return s
    s_white = np.take(s, [white], axis=-2)
    return 2.0 * s - s_white


def reconstruct_column(s, pattern, mode="debiased", readout="binary") -> np.ndarray:
    """Recover one scene column (length n) from its n coded sums.

    ``naive`` synthesises straight from the sums. ``debiased`` first turns
    0/1-mask sums into +/-1 measurements; differential readout already is one,
    so there the two modes coincide.
    """
    s = np.asarray(s, dtype=np.float64)
    n = pattern.order
    if s.shape[0] != n:
        raise ValueError(f"expected {n} sums, got {s.shape[0]}")
    if mode not in ("naive", "debiased"):
        raise ValueError(f"column mode must be 'naive' or 'debiased', got {mode!r}")
    debias = mode == "debiased" and readout == "binary"
    squeeze = s.ndim == 1
    s2 = s[:, None] if squeeze else s
    est = _pm_estimates(s2, pattern.white_column, debias)
    out = pattern.matrix.astype(np.float64) @ est / n
    return out[:, 0] if squeeze else out


def flat_field(stream: MeasurementStream, calib: CalibrationData) -> MeasurementStream:
    """Per-column gain correction: ``S'[t, i] = S[t, i] * reference[i] / weights[i]``."""
    check_digest(calib.pattern_digest, stream.pattern_digest, "calibration/stream pattern")
    if calib.n != stream.n:
        raise DigestMismatchError(f"calibration has {calib.n} columns, stream has {stream.n}")
    if calib.channels not in (1, stream.channels):
        raise ValueError(f"calibration has {calib.channels} channels, stream has {stream.channels}")
    if np.any(calib.weights <= 0):
        raise ValueError("calibration weights must be > 0")
    factor = calib.reference / calib.weights
    return stream.with_data(stream.data * factor[None], "flatfield")


def _edge_columns(stream, n):
    """Scene columns whose samples were partly taken outside the scene."""
    W = stream.width
    d = stream.step_error
    k = np.arange(W)[:, None]
    i = np.arange(n)[None, :]
    x = k * (1.0 + d) + i * d
    outside = np.any((x < 0) | (x > W - 1), axis=1)
    return tuple(np.flatnonzero(outside).tolist())


def gather(stream: MeasurementStream) -> np.ndarray:
    """Coded sums per scene column: ``out[k, i, c] = S[k + i, i, c]``, shape (W, n, C)."""
    W, n = stream.width, stream.n
    t = np.arange(W)[:, None] + np.arange(n)[None, :]
    if t.max(initial=0) >= stream.steps:
        raise IndexError(f"stream truncated: need {t.max() + 1} steps, have {stream.steps}")
    return stream.data[t, np.arange(n)[None, :], :]


def reconstruct(stream, pattern, calib=None, mode="debiased", use_fast=False) -> ReconImage:
    """Reconstruct the (n, W, C) scene.

    Modes: ``naive`` (synthesis from raw sums), ``debiased`` (DC removed via
    the white column), ``flatfield`` (per-column gain correction, then
    debiased; needs ``calib``), ``2d-corrected`` (for streams produced by
    :func:`correct_2d`; debiased). A calibration passed with any mode is
    applied as a flat field. ``use_fast`` selects the Walsh-Hadamard
    transform instead of the explicit matrix product.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    check_digest(pattern.digest, stream.pattern_digest, "stream/pattern")
    if stream.n != pattern.order:
        raise ValueError(f"stream has {stream.n} columns, pattern order is {pattern.order}")
    if mode == "flatfield" and calib is None:
        raise ValueError("flatfield mode needs calibration data")
    if mode == "2d-corrected" and "2d" not in stream.corrections:
        raise ValueError("2d-corrected mode expects a stream produced by correct_2d")
    if calib is not None:
        stream = flat_field(stream, calib)

    n = pattern.order
    g = gather(stream)
    debias = mode != "naive" and stream.readout == "binary"
    est = _pm_estimates(g, pattern.white_column, debias)
    if use_fast:
        u = np.empty_like(est)
        u[:, pattern.perm, :] = est
        cols = fwht(u, axis=1) / n
    else:
        cols = np.matmul(pattern.matrix.astype(np.float64)[None], est) / n
    data = np.transpose(cols, (1, 0, 2))
    return ReconImage(data, mode, pattern.digest, True, _edge_columns(stream, n),
                      meta={"readout": stream.readout,
                            "config_digest": stream.config_digest,
                            "corrections": "+".join(stream.corrections) or "none",
                            "fast": str(bool(use_fast)).lower()})


def correct_2d(frame_stack, calib: CalibrationData, cfg=None) -> MeasurementStream:
    """Software-only correction of the pre-integration frames.

    Divides every frame by the calibration's 2D gain map, zeroes every pixel
    under an "off" mirror (infinite contrast), integrates the columns and
    re-applies the detector noise of ``cfg`` with the same keys as
    :func:`~pushframe.forward.simulate`.
    """
    cfg = frame_stack.cfg if cfg is None else cfg
    pattern = frame_stack.pattern
    check_digest(calib.pattern_digest, pattern.digest, "calibration/pattern")
    gain = calib.gain_map
    if gain is None:
        raise ValueError("calibration has no 2D white frame")
    s = cfg.supersample
    ns = pattern.order * s
    if gain.shape[:2] != (ns, ns):
        raise ValueError(f"white frame shape {gain.shape[:2]} does not match frames ({ns}, {ns})")
    on = np.repeat(np.repeat(frame_stack.mask > 0, s, axis=0), s, axis=1)[:, :, None]
    keep = {"a": on, "b": ~on}
    T = len(frame_stack)
    sums = {}
    for port in frame_stack.ports:
        out = []
        for t in range(T):
            f = frame_stack.frame(t, port)
            if f.shape[:2] != gain.shape[:2]:
                raise ValueError("frame and white frame shapes differ")
            out.append(integrate_columns(np.where(keep[port], f / gain, 0.0), s))
        sums[port] = np.stack(out)
    steps = np.arange(T)
    if cfg.noisy:
        data = detector_noise(sums, cfg, steps)
    else:
        data = sums["a"] - sums["b"] if "b" in sums else sums["a"]
    return MeasurementStream(data, frame_stack.scene.width, pattern.digest, cfg.digest,
                             cfg.readout, cfg.step_error, ("2d",))


def shift_columns(data, rows_per_column) -> np.ndarray:
    """Move image column k down by ``rows_per_column * k`` rows (linear, zero fill)."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 2:
        data = data[:, :, None]
    h, w, _ = data.shape
    if rows_per_column == 0:
        return data.copy()
    k = np.arange(w, dtype=np.float64)[None, :]
    rows = np.arange(h, dtype=np.float64)[:, None] - rows_per_column * k
    return sample(data, rows, np.broadcast_to(k, (h, w)))


def shear_correct(img, shear_rows_per_column: float):
    """Undo the scene shear: column k moves by ``-shear * k`` rows.

    Content shifted past the top or bottom is lost; vacated rows are zero.
    Accepts a ReconImage (returns one) or a bare array.
    """
    if isinstance(img, ReconImage):
        data = shift_columns(img.data, -shear_rows_per_column)
        return ReconImage(data, img.mode, img.pattern_digest, img.normalized, img.edge_columns,
                          img.shear_corrected + shear_rows_per_column, dict(img.meta))
    return shift_columns(img, -shear_rows_per_column)
