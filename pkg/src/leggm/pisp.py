"""Pattern-of-interest structural pattern (PISP) extraction.

A smoothed negative-Laplacian kernel is built at two Gaussian scales; the
coarse band-pass response is subtracted from the fine one to give a
structure map that keeps local edge gradients and drops global intensity.
Adding the map back onto the source image yields the composite pattern the
Gabor stage consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    DimensionMismatchError,
    EvenSizeError,
    NonPositiveSigmaError,
)


@dataclass(frozen=True)
class PispParams:
    """Scales of the two band-pass kernels; coarse must dominate fine."""

    sigma1: float = 1.0
    sigma2: float = 2.0
    size1: int = 7
    size2: int = 13

    def __post_init__(self):
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise NonPositiveSigmaError(f"sigmas must be positive, got {self.sigma1}, {self.sigma2}")
        if self.sigma2 <= self.sigma1:
            raise NonPositiveSigmaError(
                f"sigma2 ({self.sigma2}) must exceed sigma1 ({self.sigma1})"
            )
        for name in ("size1", "size2"):
            s = getattr(self, name)
            if s < 1 or s % 2 == 0:
                raise EvenSizeError(f"{name} must be odd and >= 1, got {s}")
        if self.size2 <= self.size1:
            raise EvenSizeError(
                f"size2 ({self.size2}) must exceed size1 ({self.size1})"
            )


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Isotropic Gaussian taps on a size x size lattice, normalized to unit mass."""
    if sigma <= 0:
        raise NonPositiveSigmaError(f"sigma must be positive, got {sigma}")
    if size < 1 or size % 2 == 0:
        raise EvenSizeError(f"size must be odd and >= 1, got {size}")
    half = size // 2
    ax = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma * sigma))
    return g / g.sum()


def laplacian_kernel() -> np.ndarray:
    """3x3 four-neighbour negative Laplacian (centre +4)."""
    return np.array(
        [[0.0, -1.0, 0.0],
         [-1.0, 4.0, -1.0],
         [0.0, -1.0, 0.0]]
    )


def conv2_replicate(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Same-size correlation with clamp-to-edge borders.

    output[y, x] = sum_k kernel[k] * img[clamp(y + dy, x + dx)].  No kernel
    flip is applied; every kernel used here is 180-degree symmetric so
    correlation and convolution coincide.
    """
    img = np.asarray(img, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if img.ndim != 2 or kernel.ndim != 2:
        raise DimensionMismatchError("conv2_replicate expects 2-D operands")
    kh, kw = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise EvenSizeError(f"kernel must have odd dimensions, got {kh}x{kw}")
    padded = np.pad(img, ((kh // 2, kh // 2), (kw // 2, kw // 2)), mode="edge")
    windows = sliding_window_view(padded, (kh, kw))
    return np.einsum("ijkl,kl->ij", windows, kernel)


def dog_kernel(size: int, sigma: float) -> np.ndarray:
    """Gaussian-smoothed negative Laplacian, corrected to an exact zero sum.

    The Gaussian taps are treated as a tiny image and run through the same
    replicate-border correlation as real data; the result is mean-subtracted
    and then nudged until the floating-point lattice sum is 0.0.  The nudge
    lands on the smallest-magnitude taps first: the leftover residue (a few
    1e-18) is below one ulp of the large taps, so absorbing it there is the
    only way the subtraction can take effect at all.
    """
    k = conv2_replicate(gaussian_kernel(size, sigma), laplacian_kernel())
    k -= k.mean()
    flat = k.ravel()
    order = np.argsort(np.abs(flat), kind="stable")
    for idx in np.tile(order, 3):
        residue = flat.sum()
        if residue == 0.0:
            break
        flat[idx] -= residue
    return k


def _bandpass(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Window-minus-centre application of a zero-sum kernel.  Algebraically the
    # same as conv2_replicate (the centre contribution multiplies sum(k) = 0)
    # but constants and exactly-representable offsets cancel before any
    # product rounds, keeping the invariances exact in floating point.
    kh, kw = kernel.shape
    padded = np.pad(img, ((kh // 2, kh // 2), (kw // 2, kw // 2)), mode="edge")
    windows = sliding_window_view(padded, (kh, kw))
    centered = windows - img[:, :, None, None]
    return np.einsum("ijkl,kl->ij", centered, kernel)


def extract_pisp(img: np.ndarray, params: PispParams = PispParams()) -> np.ndarray:
    """Fine minus coarse band-pass response of the image."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionMismatchError("extract_pisp expects a 2-D image")
    fine = _bandpass(img, dog_kernel(params.size1, params.sigma1))
    coarse = _bandpass(img, dog_kernel(params.size2, params.sigma2))
    return fine - coarse


def embed(structure: np.ndarray, gray: np.ndarray) -> np.ndarray:
    """Composite pattern: structure map added back onto the grey image."""
    structure = np.asarray(structure, dtype=np.float64)
    gray = np.asarray(gray, dtype=np.float64)
    if structure.shape != gray.shape:
        raise DimensionMismatchError(
            f"structure {structure.shape} vs image {gray.shape}"
        )
    return structure + gray
