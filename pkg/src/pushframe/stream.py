"""Measurement streams, calibration records and reconstructed images.

Also holds their on-disk formats:

- stream CSV (``PUSHFRAME-STREAM 1``): a metadata row, then one row of n
  column sums per (time step, channel), floats written with ``repr`` so
  they round-trip exactly;
- calibration text (``PUSHFRAME-CALIB 1``) with an optional raw white frame;
- raw float64 dumps (``PUSHFRAME-RAW 1``), little-endian, row-major;
- 16-bit PGM/PPM image plus a ``.meta`` sidecar recording the display window.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import netpbm
from .errors import DigestMismatchError, FormatError

STREAM_MAGIC = "PUSHFRAME-STREAM 1"
CALIB_MAGIC = "PUSHFRAME-CALIB 1"
RAW_MAGIC = "PUSHFRAME-RAW 1"
META_MAGIC = "PUSHFRAME-META 1"

READOUTS = ("binary", "differential")


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MeasurementStream:
    """Column sums over time: ``data[t, i, c]`` is pattern column i at step t."""

    data: np.ndarray
    width: int
    pattern_digest: str
    config_digest: str
    readout: str = "binary"
    step_error: float = 0.0
    corrections: tuple = ()

    def __post_init__(self):
        data = _readonly(self.data)
        if data.ndim != 3:
            raise ValueError(f"stream data must be (T, n, C), got shape {data.shape}")
        object.__setattr__(self, "data", data)
        T, n, _ = data.shape
        if T != self.width + n - 1:
            raise ValueError(f"stream has T={T} steps but W + n - 1 = {self.width + n - 1}")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}")
        object.__setattr__(self, "corrections", tuple(self.corrections))

    @property
    def steps(self) -> int:
        return self.data.shape[0]

    T = steps

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def with_data(self, data, correction=None):
        extra = (correction,) if correction else ()
        return replace(self, data=data, corrections=self.corrections + extra)


@dataclass(frozen=True, eq=False)
class CalibrationData:
    """White-reference column sums used for the per-column flat field.

    ``weights[i, c]`` is the measured white sum of pattern column i and
    ``reference[i, c]`` the value it is corrected to. When no reference is
    given it defaults to the mean weight of each channel.
    """

    weights: np.ndarray
    pattern_digest: str
    white_column: int = 0
    reference: np.ndarray | None = None
    white_frame: np.ndarray | None = None
    supersample: int = 1
    readout: str = "binary"

    def __post_init__(self):
        w = _readonly(self.weights)
        if w.ndim == 1:
            w = _readonly(w[:, None])
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("calibration weights must be finite and > 0")
        object.__setattr__(self, "weights", w)
        ref = w.mean(axis=0, keepdims=True) if self.reference is None else np.asarray(self.reference, dtype=np.float64)
        if ref.ndim == 1:
            ref = ref[:, None]
        object.__setattr__(self, "reference", _readonly(np.broadcast_to(ref, w.shape)))
        if self.white_frame is not None:
            wf = _readonly(self.white_frame)
            if wf.ndim == 2:
                wf = _readonly(wf[:, :, None])
            if np.any(wf <= 0):
                raise ValueError("white frame must be strictly positive")
            object.__setattr__(self, "white_frame", wf)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def channels(self) -> int:
        return self.weights.shape[1]

    @property
    def reference_level(self) -> np.ndarray:
        """Mean white weight per channel."""
        return self.weights.mean(axis=0)

    @property
    def gain_map(self) -> np.ndarray | None:
        """Per-pixel gain of the supersampled frame (the all-on white frame)."""
        return self.white_frame


@dataclass(frozen=True, eq=False)
class ReconImage:
    """Reconstructed image, ``data`` shaped (n, W, C)."""

    data: np.ndarray
    mode: str
    pattern_digest: str
    normalized: bool = True
    edge_columns: tuple = ()
    shear_corrected: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = _readonly(self.data)
        if d.ndim == 2:
            d = _readonly(d[:, :, None])
        object.__setattr__(self, "data", d)
        object.__setattr__(self, "edge_columns", tuple(int(k) for k in self.edge_columns))


def check_digest(expected, got, what):
    if expected != got:
        raise DigestMismatchError(f"{what} digest mismatch: expected {expected}, got {got}")


# -- stream CSV ---------------------------------------------------------------

_STREAM_FIELDS = ("n", "W", "T", "C", "pattern_digest", "config_digest",
                  "readout", "step_error", "corrections")


def stream_to_csv(stream: MeasurementStream) -> str:
    buf = io.StringIO()
    buf.write(STREAM_MAGIC + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_STREAM_FIELDS)
    w.writerow([stream.n, stream.width, stream.steps, stream.channels,
                stream.pattern_digest, stream.config_digest, stream.readout,
                repr(float(stream.step_error)), "+".join(stream.corrections) or "none"])
    w.writerow(["t", "channel"] + [f"s{i}" for i in range(stream.n)])
    for t in range(stream.steps):
        for c in range(stream.channels):
            w.writerow([t, c] + [repr(float(v)) for v in stream.data[t, :, c]])
    return buf.getvalue()


def stream_from_csv(text: str) -> MeasurementStream:
    if not text.startswith(STREAM_MAGIC + "\n"):
        raise FormatError(f"missing '{STREAM_MAGIC}' header", 0)
    rows = list(csv.reader(io.StringIO(text[len(STREAM_MAGIC) + 1:])))
    if len(rows) < 3 or tuple(rows[0]) != _STREAM_FIELDS:
        raise FormatError("bad stream metadata header", len(STREAM_MAGIC) + 1)
    meta = dict(zip(_STREAM_FIELDS, rows[1]))
    try:
        n, W, T, C = (int(meta[k]) for k in ("n", "W", "T", "C"))
        step_error = float(meta["step_error"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad stream metadata: {exc}") from None
    body = rows[3:]
    if len(body) != T * C:
        raise FormatError(f"expected {T * C} data rows, found {len(body)}")
    data = np.empty((T, n, C))
    for r, row in enumerate(body):
        if len(row) != n + 2:
            raise FormatError(f"data row {r} has {len(row)} fields, expected {n + 2}")
        try:
            t, c = int(row[0]), int(row[1])
            values = [float(v) for v in row[2:]]
        except ValueError as exc:
            raise FormatError(f"data row {r}: {exc}") from None
        if t != r // C or c != r % C:
            raise FormatError(f"data row {r} out of order (t={t}, channel={c})")
        data[t, :, c] = values
    corr = () if meta["corrections"] == "none" else tuple(meta["corrections"].split("+"))
    try:
        return MeasurementStream(data, W, meta["pattern_digest"], meta["config_digest"],
                                 meta["readout"], step_error, corr)
    except ValueError as exc:
        raise FormatError(f"inconsistent stream: {exc}") from None


def save_stream(stream, path) -> None:
    Path(path).write_text(stream_to_csv(stream), encoding="ascii", newline="\n")


def load_stream(path) -> MeasurementStream:
    return stream_from_csv(Path(path).read_text(encoding="ascii"))


# -- raw float dumps ----------------------------------------------------------

def raw_dumps(arr) -> bytes:
    arr = np.asarray(arr, dtype="<f8")
    header = f"{RAW_MAGIC} {' '.join(str(s) for s in arr.shape)}\n".encode("ascii")
    return header + np.ascontiguousarray(arr).tobytes()


def raw_loads(data: bytes) -> np.ndarray:
    nl = data.find(b"\n")
    head = data[:nl].decode("ascii", "replace").split() if nl >= 0 else []
    if head[:2] != RAW_MAGIC.split():
        raise FormatError(f"missing '{RAW_MAGIC}' header", 0)
    try:
        shape = tuple(int(s) for s in head[2:])
    except ValueError:
        raise FormatError("bad raw shape", 0) from None
    count = int(np.prod(shape)) if shape else 1
    if len(data) - nl - 1 != 8 * count:
        raise FormatError(f"raw payload has {len(data) - nl - 1} bytes, expected {8 * count}", nl + 1)
    return np.frombuffer(data, dtype="<f8", offset=nl + 1).reshape(shape).astype(np.float64)


def save_raw(arr, path) -> None:
    Path(path).write_bytes(raw_dumps(arr))


def load_raw(path) -> np.ndarray:
    return raw_loads(Path(path).read_bytes())


# -- key = value metadata files -----------------------------------------------

def dump_kv(magic, items) -> str:
    lines = [magic]
    lines += [f"{k} = {v}" for k, v in items]
    return "\n".join(lines) + "\n"


def parse_kv(text, magic=None):
    """Parse ``key = value`` lines with '#' comments; optional leading magic."""
    lines = text.splitlines()
    if magic is not None:
        if not lines or lines[0].strip() != magic:
            raise FormatError(f"missing '{magic}' header", 0)
        lines = lines[1:]
    out = {}
    offset = len(magic) + 1 if magic else 0
    for line in lines:
        stripped = line.split("#", 1)[0].strip()
        if stripped:
            if "=" not in stripped:
                raise FormatError(f"expected 'key = value', got {line!r}", offset)
            k, _, v = stripped.partition("=")
            out[k.strip()] = v.strip()
        offset += len(line) + 1
    return out


# -- calibration files --------------------------------------------------------

def save_calibration(calib: CalibrationData, path) -> None:
    path = Path(path)
    items = [
        ("pattern_digest", calib.pattern_digest),
        ("n", calib.n),
        ("channels", calib.channels),
        ("white_column", calib.white_column),
        ("supersample", calib.supersample),
        ("readout", calib.readout),
    ]
    for c in range(calib.channels):
        items.append((f"weights.{c}", ",".join(repr(float(v)) for v in calib.weights[:, c])))
        items.append((f"reference.{c}", ",".join(repr(float(v)) for v in calib.reference[:, c])))
    if calib.white_frame is not None:
        frame_name = path.name + ".white.raw"
        save_raw(calib.white_frame, path.with_name(frame_name))
        items.append(("white_frame", frame_name))
    path.write_text(dump_kv(CALIB_MAGIC, items), encoding="ascii", newline="\n")


def load_calibration(path) -> CalibrationData:
    path = Path(path)
    kv = parse_kv(path.read_text(encoding="ascii"), CALIB_MAGIC)
    try:
        C = int(kv["channels"])
        weights = np.array([[float(v) for v in kv[f"weights.{c}"].split(",")] for c in range(C)]).T
        reference = np.array([[float(v) for v in kv[f"reference.{c}"].split(",")] for c in range(C)]).T
        frame = load_raw(path.with_name(kv["white_frame"])) if "white_frame" in kv else None
        return CalibrationData(weights, kv["pattern_digest"], int(kv["white_column"]),
                               reference, frame, int(kv["supersample"]), kv["readout"])
    except KeyError as exc:
        raise FormatError(f"calibration file missing field {exc}") from None


# -- reconstructed images -----------------------------------------------------

def save_recon(img: ReconImage, path, raw: bool = False, comment: str | None = None) -> None:
    """Write a 16-bit PGM/PPM scaled to its min/max window plus a ``.meta`` sidecar."""
    path = Path(path)
    lo = float(img.data.min())
    hi = float(img.data.max())
    span = hi - lo if hi > lo else 1.0
    q = np.rint((img.data - lo) / span * 65535).astype(np.uint16)
    netpbm.write(path, q, 65535, comment)
    items = [
        ("image", path.name),
        ("window_min", repr(lo)),
        ("window_max", repr(hi)),
        ("mode", img.mode),
        ("pattern_digest", img.pattern_digest),
        ("normalized", str(img.normalized).lower()),
        ("shear_corrected", repr(float(img.shear_corrected))),
        ("edge_columns", ",".join(str(k) for k in img.edge_columns) or "none"),
    ]
    items += [(k, v) for k, v in sorted(img.meta.items())]
    if raw:
        save_raw(img.data, path.with_suffix(".raw"))
        items.append(("raw", path.with_suffix(".raw").name))
    path.with_name(path.name + ".meta").write_text(dump_kv(META_MAGIC, items), encoding="ascii",
                                                    newline="\n")


def load_recon(path) -> ReconImage:
    """Read back an image written by :func:`save_recon` (exact if a raw dump exists)."""
    path = Path(path)
    kv = parse_kv(path.with_name(path.name + ".meta").read_text(encoding="ascii"), META_MAGIC)
    if "raw" in kv:
        data = load_raw(path.with_name(kv["raw"]))
    else:
        q, maxval = netpbm.read(path)
        lo, hi = float(kv["window_min"]), float(kv["window_max"])
        span = hi - lo if hi > lo else 1.0
        data = q.astype(np.float64) / maxval * span + lo
    edges = () if kv["edge_columns"] == "none" else tuple(int(k) for k in kv["edge_columns"].split(","))
    known = {"image", "window_min", "window_max", "mode", "pattern_digest", "normalized",
             "shear_corrected", "edge_columns", "raw"}
    meta = {k: v for k, v in kv.items() if k not in known}
    return ReconImage(data, kv["mode"], kv["pattern_digest"], kv["normalized"] == "true", edges,
                      float(kv["shear_corrected"]), meta)
