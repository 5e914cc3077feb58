"""Binary Netpbm (P5 graymap / P6 pixmap) reading and writing, 8 and 16 bit."""

from __future__ import annotations

import numpy as np

from .errors import FormatError

_WHITESPACE = b" \t\r\n\v\f"


def _header_token(data, pos):
    """Read one header token, skipping whitespace and '#' comments."""
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c in (b" ", b"\t", b"\r", b"\n", b"\v", b"\f"):
            pos += 1
        elif c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos:pos + 1] not in (b" ", b"\t", b"\r", b"\n", b"\v", b"\f", b"#"):
        pos += 1
    if start == pos:
        raise FormatError("truncated header", start)
    return data[start:pos], start, pos


def decode(data: bytes):
    """Decode a P5/P6 image. Returns ``(array, maxval)``; array is (H, W, C) uint."""
    if data[:2] not in (b"P5", b"P6"):
        raise FormatError(f"unsupported magic {data[:2]!r}; expected P5 or P6", 0)
    channels = 1 if data[:2] == b"P5" else 3
    pos = 2
    values = []
    for name in ("width", "height", "maxval"):
        tok, start, pos = _header_token(data, pos)
        try:
            v = int(tok)
        except ValueError:
            raise FormatError(f"bad {name} {tok!r}", start) from None
        if v <= 0:
            raise FormatError(f"{name} must be positive, got {v}", start)
        values.append(v)
    width, height, maxval = values
    if maxval > 65535:
        raise FormatError(f"unsupported depth: maxval {maxval} exceeds 65535", start)
    if pos >= len(data) or data[pos:pos + 1] not in (b" ", b"\t", b"\r", b"\n", b"\v", b"\f"):
        raise FormatError("missing whitespace after maxval", pos)
    pos += 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * channels * dtype.itemsize
    if len(data) - pos < need:
        raise FormatError(
            f"truncated payload: need {need} bytes, have {len(data) - pos}", len(data)
        )
    arr = np.frombuffer(data, dtype=dtype, count=width * height * channels, offset=pos)
    arr = arr.reshape(height, width, channels)
    if arr.max(initial=0) > maxval:
        bad = int(np.flatnonzero(arr.ravel() > maxval)[0])
        raise FormatError(f"sample exceeds maxval {maxval}", pos + bad * dtype.itemsize)
    return arr.astype(np.uint16 if maxval > 255 else np.uint8), maxval


def encode(arr, maxval: int, comment: str | None = None) -> bytes:
    """Encode integer samples (H, W) or (H, W, 1|3) as P5/P6."""
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W, 1|3) samples, got shape {arr.shape}")
    if not 1 <= maxval <= 65535:
        raise ValueError(f"maxval must be in [1, 65535], got {maxval}")
    if arr.size and (arr.min() < 0 or arr.max() > maxval):
        raise ValueError("samples outside [0, maxval]")
    magic = b"P5" if arr.shape[2] == 1 else b"P6"
    header = magic + b"\n"
    if comment:
        for line in comment.splitlines():
            header += b"# " + line.encode("ascii") + b"\n"
    header += f"{arr.shape[1]} {arr.shape[0]}\n{maxval}\n".encode("ascii")
    dtype = ">u2" if maxval > 255 else "u1"
    return header + np.ascontiguousarray(arr, dtype=dtype).tobytes()


def read(path):
    with open(path, "rb") as fh:
        return decode(fh.read())


def write(path, arr, maxval: int, comment: str | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(arr, maxval, comment))
