"""Grayscale image handling: decoding, bilinear resizing, illumination flattening.

An image is a 2-D float64 array in row-major order with intensities in
[0, 1].  Binary PGM (P5, maxval 255) is parsed and written natively since it
doubles as the debug-dump format; PNG decoding is delegated to Pillow with
the luminance math kept in float64 on our side.
"""

from __future__ import annotations

import io
import logging
import re

import numpy as np

from .errors import IoFailureError, MalformedPayloadError, UnsupportedDepthError

log = logging.getLogger(__name__)

# ITU-R BT.601 luminance weights for colour PNG input
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_PGM_MAGIC = b"P5"
_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def decode_image(payload: bytes, fmt: str | None = None) -> np.ndarray:
    """Decode a PGM or PNG byte stream into a [0,1] float64 grid.

    ``fmt`` may be "pgm8" or "png-gray"; left as None the format is sniffed
    from the magic bytes.
    """
    if fmt is None:
        if payload[:2] == _PGM_MAGIC:
            fmt = "pgm8"
        elif payload[: len(_PNG_MAGIC)] == _PNG_MAGIC:
            fmt = "png-gray"
        else:
            raise MalformedPayloadError("unrecognized image payload (not P5 PGM or PNG)")
    if fmt == "pgm8":
        return decode_pgm(payload)
    if fmt == "png-gray":
        return decode_png(payload)
    raise MalformedPayloadError(f"unknown image format {fmt!r}")


def decode_pgm(payload: bytes) -> np.ndarray:
    """Parse a binary P5 PGM with maxval 255."""
    if payload[:2] != _PGM_MAGIC:
        raise MalformedPayloadError("missing P5 magic")
    # header: magic, width, height, maxval separated by whitespace; '#' comments
    pos = 2
    fields = []
    while len(fields) < 3:
        token, pos = _next_token(payload, pos)
        if token is None:
            raise MalformedPayloadError("truncated PGM header")
        fields.append(token)
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise MalformedPayloadError(f"non-numeric PGM header field: {exc}") from exc
    if width < 1 or height < 1:
        raise MalformedPayloadError(f"bad PGM dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedDepthError(f"PGM maxval {maxval}; only 8-bit (255) supported")
    data = payload[pos + 1 : pos + 1 + width * height]
    if len(data) != width * height:
        raise MalformedPayloadError(
            f"PGM payload holds {len(data)} bytes, expected {width * height}"
        )
    grid = np.frombuffer(data, dtype=np.uint8).astype(np.float64) / 255.0
    return grid.reshape(height, width)


def _next_token(payload: bytes, pos: int):
    """Return (token, position after it), skipping whitespace and # comments."""
    n = len(payload)
    while pos < n:
        c = payload[pos : pos + 1]
        if c == b"#":
            while pos < n and payload[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        return None, pos
    m = re.match(rb"[^\s#]+", payload[pos:])
    token = m.group(0)
    return token.decode("ascii", "replace"), pos + len(token)


def encode_pgm(img: np.ndarray) -> bytes:
    """Write a [0,1] grid as binary P5, rounding to the nearest 8-bit level."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise MalformedPayloadError("encode_pgm expects a 2-D grid")
    levels = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + levels.tobytes()


def decode_png(payload: bytes) -> np.ndarray:
    """Decode an 8-bit PNG; colour input is collapsed with BT.601 weights."""
    from PIL import Image as _PILImage

    try:
        pil = _PILImage.open(io.BytesIO(payload))
        pil.load()
    except Exception as exc:  # Pillow raises a zoo of types
        raise MalformedPayloadError(f"undecodable PNG: {exc}") from exc
    if pil.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
        raise UnsupportedDepthError(f"PNG mode {pil.mode}; only 8-bit supported")
    if pil.mode == "P":
        pil = pil.convert("RGB")
    if pil.mode == "L":
        arr = np.asarray(pil, dtype=np.float64)
        return arr / 255.0
    if pil.mode == "LA":
        arr = np.asarray(pil, dtype=np.float64)[..., 0]
        return arr / 255.0
    if pil.mode in ("RGB", "RGBA"):
        arr = np.asarray(pil, dtype=np.float64)[..., :3]
        luma = arr @ np.asarray(LUMA_WEIGHTS, dtype=np.float64)
        return luma / 255.0
    raise UnsupportedDepthError(f"unsupported PNG mode {pil.mode}")


def resize_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resample to out_w x out_h.

    Source coordinates follow the half-pixel convention
    src = (i + 0.5) * (in/out) - 0.5, clamped to the valid range, so an
    identity resize reproduces the input bitwise.
    """
    img = np.asarray(img, dtype=np.float64)
    in_h, in_w = img.shape
    if out_w < 1 or out_h < 1:
        raise ValueError(f"bad target size {out_w}x{out_h}")
    if (out_w, out_h) == (in_w, in_h):
        return img.copy()

    def axis(n_in: int, n_out: int):
        src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, float(n_in - 1))
        lo = np.floor(src).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    x0, x1, fx = axis(in_w, out_w)
    y0, y1, fy = axis(in_h, out_h)
    rows = img[:, x0] * (1.0 - fx) + img[:, x1] * fx
    return rows[y0, :] * (1.0 - fy)[:, None] + rows[y1, :] * fy[:, None]


def illum_normalize(img: np.ndarray) -> np.ndarray:
    """Histogram equalization over 256 levels.

    Intensities are quantized to 8-bit bins, and each pixel is mapped to
    cdf(level)/N so the output again lives in (0, 1].  A constant image has a
    degenerate histogram and is returned unchanged.
    """
    img = np.asarray(img, dtype=np.float64)
    q = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.int64)
    hist = np.bincount(q.ravel(), minlength=256)
    if np.count_nonzero(hist) <= 1:
        return img.copy()
    lut = np.cumsum(hist) / float(q.size)
    return lut[q]


def load_image(path, size: int | None = None, illum: str = "none") -> np.ndarray:
    """Read, optionally resize to size x size, optionally equalize."""
    try:
        with open(path, "rb") as fh:
            payload = fh.read()
    except OSError as exc:
        raise IoFailureError(f"cannot read image {path}: {exc}") from exc
    img = decode_image(payload)
    if size is not None and img.shape != (size, size):
        img = resize_bilinear(img, size, size)
    if illum == "histeq":
        img = illum_normalize(img)
    elif illum != "none":
        raise ValueError(f"unknown illumination mode {illum!r}")
    return img
