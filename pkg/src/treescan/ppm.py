"""Binary PPM (P6) reading and writing."""
from __future__ import annotations

import numpy as np


class PPMError(ValueError):
    """Malformed or unsupported PPM data."""


def _tokens(buf: bytes, count: int):
    """Parse ``count`` header tokens; return them and the offset of the raster."""
    out = []
    pos = 0
    n = len(buf)
    while len(out) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PPMError("truncated PPM header")
        out.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    if pos >= n or not buf[pos:pos + 1].isspace():
        raise PPMError("truncated PPM header")
    return out, pos + 1


def decode_ppm(buf: bytes) -> tuple[np.ndarray, int]:
    """Return ``(pixels, maxval)`` with pixels shaped ``(height, width, 3)``."""
    toks, offset = _tokens(buf, 4)
    if toks[0] != b"P6":
        raise PPMError(f"not a binary PPM (magic {toks[0][:8]!r})")
    try:
        width, height, maxval = (int(t) for t in toks[1:])
    except ValueError:
        raise PPMError("non-integer PPM header field") from None
    if width < 1 or height < 1 or not 1 <= maxval <= 65535:
        raise PPMError(f"invalid PPM dimensions {width}x{height} maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * 3 * dtype.itemsize
    raster = buf[offset:offset + need]
    if len(raster) < need:
        raise PPMError(f"PPM raster truncated: {len(raster)} of {need} bytes")
    pixels = np.frombuffer(raster, dtype=dtype).reshape(height, width, 3)
    if pixels.max(initial=0) > maxval:
        raise PPMError("pixel value exceeds maxval")
    return pixels.astype(np.int64), maxval


def read_ppm(path) -> tuple[np.ndarray, int]:
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise PPMError(f"cannot read {path}: {exc.strerror}") from exc
    return decode_ppm(buf)


def encode_ppm(pixels: np.ndarray, maxval: int = 255) -> bytes:
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError(f"expected (height, width, 3) pixels, got {pixels.shape}")
    h, w = pixels.shape[:2]
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P6\n{w} {h}\n{maxval}\n".encode("ascii")
    return header + np.clip(pixels, 0, maxval).astype(dtype).tobytes()


def write_ppm(path, pixels: np.ndarray, maxval: int = 255) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_ppm(pixels, maxval))


def to_unit(pixels: np.ndarray, maxval: int) -> np.ndarray:
    """Scale integer pixels to floats in [0, 1]."""
    return np.asarray(pixels, dtype=float) / maxval
