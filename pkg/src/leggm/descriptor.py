"""Descriptor chain: composite pattern -> Gabor magnitudes -> block
down-sampling -> per-map standardization -> one long feature vector.

Also owns the feature-file format (magic ``LEGF``): little-endian header
(magic, u32 version, u32 count, u32 dim), count*dim float32 in row order,
then count newline-terminated UTF-8 sample identifiers.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    IndivisibleDimsError,
    IoFailureError,
    MalformedPayloadError,
    NonSquareFactorError,
)
from .gabor import GaborBank, GaborParams, build_bank
from .imaging import illum_normalize, resize_bilinear
from .pisp import PispParams, embed, extract_pisp
from .spectral import conv_freq, magnitude

log = logging.getLogger(__name__)

ZNORM_SIGMA_FLOOR = 1e-12

FEATURE_MAGIC = b"LEGF"
FEATURE_VERSION = 1


@dataclass(frozen=True)
class DescriptorParams:
    pisp: PispParams = field(default_factory=PispParams)
    gabor: GaborParams = field(default_factory=GaborParams)
    p: int = 64                       # block area: 64 -> 8x8 blocks
    downsample_mode: str = "blockmean"
    normalize: bool = True

    def __post_init__(self):
        root = math.isqrt(self.p)
        if root * root != self.p:
            raise NonSquareFactorError(f"p must be a perfect square, got {self.p}")
        if self.downsample_mode not in ("blockmean", "bilinear"):
            raise ValueError(f"unknown downsample mode {self.downsample_mode!r}")
        if self.gabor.grid_w % root or self.gabor.grid_h % root:
            raise IndivisibleDimsError(
                f"sqrt(p)={root} must divide the {self.gabor.grid_w}x{self.gabor.grid_h} grid"
            )

    @property
    def feature_dim(self) -> int:
        root = math.isqrt(self.p)
        return (
            self.gabor.bank_size
            * (self.gabor.grid_w // root)
            * (self.gabor.grid_h // root)
        )


def gabor_transform(composite: np.ndarray, bank: GaborBank) -> list[np.ndarray]:
    """Magnitude responses of the composite pattern under every bank kernel."""
    p = bank.params
    if composite.shape != (p.grid_h, p.grid_w):
        raise DimensionMismatchError(
            f"composite {composite.shape} vs bank grid {(p.grid_h, p.grid_w)}"
        )
    spectrum = np.fft.fft2(composite)
    maps = []
    for ks in bank.kernel_spectra:
        maps.append(magnitude(np.fft.ifft2(spectrum * ks)))
    return maps


def downsample(m: np.ndarray, p: int, mode: str = "blockmean") -> np.ndarray:
    """Shrink a map by the area factor p (sqrt(p) per axis)."""
    m = np.asarray(m, dtype=np.float64)
    root = math.isqrt(p)
    if root * root != p:
        raise NonSquareFactorError(f"p must be a perfect square, got {p}")
    h, w = m.shape
    if h % root or w % root:
        raise IndivisibleDimsError(f"sqrt(p)={root} must divide {w}x{h}")
    if mode == "blockmean":
        return m.reshape(h // root, root, w // root, root).mean(axis=(1, 3))
    if mode == "bilinear":
        return resize_bilinear(m, w // root, h // root)
    raise ValueError(f"unknown downsample mode {mode!r}")


def znorm(m: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-variance map (population sigma); zeros when degenerate."""
    m = np.asarray(m, dtype=np.float64)
    mu = m.mean()
    sigma = m.std()
    if sigma < ZNORM_SIGMA_FLOOR:
        return np.zeros_like(m)
    return (m - mu) / sigma


def augment(maps: list[np.ndarray]) -> np.ndarray:
    """Concatenate maps, row-major, in bank order, into one vector."""
    if not maps:
        raise DimensionMismatchError("augment needs at least one map")
    return np.concatenate([np.asarray(m, dtype=np.float64).ravel() for m in maps])


def extract(
    img: np.ndarray,
    params: DescriptorParams = DescriptorParams(),
    bank: GaborBank | None = None,
    illum: str = "histeq",
) -> np.ndarray:
    """Full chain from a working-size grey image to the feature vector."""
    img = np.asarray(img, dtype=np.float64)
    g = params.gabor
    if img.shape != (g.grid_h, g.grid_w):
        raise DimensionMismatchError(
            f"image {img.shape} does not match working grid {(g.grid_h, g.grid_w)}"
        )
    if bank is None:
        bank = build_bank(g)
    elif bank.params != g:
        raise DimensionMismatchError("bank was built with different parameters")
    gray = illum_normalize(img) if illum == "histeq" else img
    composite = embed(extract_pisp(gray, params.pisp), gray)
    maps = gabor_transform(composite, bank)
    maps = [downsample(m, params.p, params.downsample_mode) for m in maps]
    if params.normalize:
        maps = [znorm(m) for m in maps]
    return augment(maps)


# --- feature file I/O --------------------------------------------------------

def write_features(path, vectors: np.ndarray, ids: list[str]) -> None:
    """Write an LEGF feature file (float32 payload, little-endian)."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if vectors.shape[0] != len(ids):
        raise DimensionMismatchError(
            f"{vectors.shape[0]} vectors vs {len(ids)} identifiers"
        )
    count, dim = vectors.shape
    try:
        with open(path, "wb") as fh:
            fh.write(FEATURE_MAGIC)
            fh.write(struct.pack("<III", FEATURE_VERSION, count, dim))
            fh.write(vectors.astype("<f4").tobytes())
            for sample_id in ids:
                fh.write(sample_id.encode("utf-8") + b"\n")
    except OSError as exc:
        raise IoFailureError(f"cannot write features to {path}: {exc}") from exc


def read_features(path):
    """Read an LEGF file; returns (float64 array of shape (count, dim), ids)."""
    try:
        with open(path, "rb") as fh:
            payload = fh.read()
    except OSError as exc:
        raise IoFailureError(f"cannot read features from {path}: {exc}") from exc
    if payload[:4] != FEATURE_MAGIC:
        raise MalformedPayloadError("not an LEGF feature file (bad magic)")
    if len(payload) < 16:
        raise MalformedPayloadError("truncated LEGF header")
    version, count, dim = struct.unpack("<III", payload[4:16])
    if version != FEATURE_VERSION:
        raise MalformedPayloadError(f"unsupported LEGF version {version}")
    body_end = 16 + 4 * count * dim
    if len(payload) < body_end:
        raise MalformedPayloadError("truncated LEGF vector payload")
    vectors = np.frombuffer(payload[16:body_end], dtype="<f4").astype(np.float64)
    vectors = vectors.reshape(count, dim)
    tail = payload[body_end:]
    if count and not tail.endswith(b"\n"):
        raise MalformedPayloadError("LEGF identifier block not newline-terminated")
    ids = tail.decode("utf-8").split("\n")[:-1] if count else []
    if len(ids) != count:
        raise MalformedPayloadError(
            f"LEGF holds {len(ids)} identifiers for {count} vectors"
        )
    return vectors, ids
