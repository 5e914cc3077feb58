"""Diagnostic frame stacks on disk.

A stack directory holds one 16-bit PGM/PPM per (time step, port) and an
index manifest ``frames.txt`` (``PUSHFRAME-FRAMES 1``). Every frame is
scaled to its own [min, max] window, recorded in the manifest, so the
stored values are recovered to within half a code step of that window.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import netpbm
from .errors import FormatError
from .forward import OpticsConfig, _Optics
from .pattern import PatternSpec
from .stream import check_digest, dump_kv, load_raw, parse_kv, save_raw

FRAMES_MAGIC = "PUSHFRAME-FRAMES 1"
MANIFEST = "frames.txt"


def _quantize(frame):
    lo = float(frame.min())
    hi = float(frame.max())
    span = hi - lo if hi > lo else 1.0
    return np.rint((frame - lo) / span * 65535).astype(np.uint16), lo, hi


def save_frame_stack(stack, directory, comment=None, raw=False) -> Path:
    """Write every frame of ``stack`` (a FrameStack) and the manifest; returns its path.

    ``raw`` adds an exact float64 dump next to each image.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ext = ".pgm" if stack.scene.channels == 1 else ".ppm"
    items = [
        ("pattern_digest", stack.pattern.digest),
        ("config_digest", stack.cfg.digest),
        ("n", stack.pattern.order),
        ("supersample", stack.cfg.supersample),
        ("width", stack.scene.width),
        ("channels", stack.scene.channels),
        ("steps", len(stack)),
        ("ports", ",".join(stack.ports)),
    ]
    for t in range(len(stack)):
        for port in stack.ports:
            name = f"frame_{t:05d}_{port}"
            frame = stack.frame(t, port)
            q, lo, hi = _quantize(frame)
            netpbm.write(directory / (name + ext), q, 65535, comment)
            entry = [name + ext, repr(lo), repr(hi)]
            if raw:
                save_raw(frame, directory / (name + ".raw"))
                entry.append(name + ".raw")
            items.append((f"frame.{t}.{port}", ",".join(entry)))
    manifest = directory / MANIFEST
    text = dump_kv(FRAMES_MAGIC, items)
    if comment:
        text = text.replace("\n", "\n" + "".join(f"# {c}\n" for c in comment.splitlines()), 1)
    manifest.write_text(text, encoding="ascii", newline="\n")
    return manifest


class StoredFrameStack:
    """Frame stack read back from disk, usable wherever a FrameStack is.

    ``pattern`` and ``cfg`` must be the ones the stack was rendered with;
    their digests are checked against the manifest.
    """

    def __init__(self, directory, pattern: PatternSpec, cfg: OpticsConfig, check_config=True):
        self.directory = Path(directory)
        path = self.directory / MANIFEST
        kv = parse_kv(path.read_text(encoding="ascii"), FRAMES_MAGIC)
        try:
            check_digest(kv["pattern_digest"], pattern.digest, "frames/pattern")
            if check_config:
                check_digest(kv["config_digest"], cfg.digest, "frames/config")
            self.steps = int(kv["steps"])
            self.width = int(kv["width"])
            self.channels = int(kv["channels"])
            self._ports = tuple(kv["ports"].split(","))
            self._entries = {(t, p): kv[f"frame.{t}.{p}"].split(",")
                             for t in range(self.steps) for p in self._ports}
        except KeyError as exc:
            raise FormatError(f"frame manifest missing field {exc}") from None
        if self.steps != self.width + pattern.order - 1:
            raise FormatError("frame manifest step count does not match width + n - 1")
        self.pattern = pattern
        self.cfg = cfg
        self._optics = _Optics(pattern, cfg)

    @property
    def ports(self):
        return self._ports

    @property
    def mask(self):
        return self._optics.mask

    @property
    def scene(self):
        # correct_2d only needs the scene width
        return _SceneShape(self.width, self.channels)

    def __len__(self):
        return self.steps

    def frame(self, t, port="a"):
        entry = self._entries[(t, port)]
        if len(entry) > 3:
            return load_raw(self.directory / entry[3])
        q, maxval = netpbm.read(self.directory / entry[0])
        lo, hi = float(entry[1]), float(entry[2])
        span = hi - lo if hi > lo else 1.0
        return q.astype(np.float64) / maxval * span + lo

    def __getitem__(self, t):
        return self.frame(t)


class _SceneShape:
    def __init__(self, width, channels):
        self.width = width
        self.channels = channels
