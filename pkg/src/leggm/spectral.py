"""2-D spectra: forward/inverse transforms, spectrum-product filtering,
magnitude maps and a high-frequency energy summary.

Convention: unnormalized forward DFT, 1/(NM) on the inverse (numpy's).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError


def fft2(grid: np.ndarray) -> np.ndarray:
    """Unnormalized forward DFT of a real or complex 2-D grid."""
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise DimensionMismatchError("fft2 expects a 2-D grid")
    return np.fft.fft2(grid)


def ifft2(spec: np.ndarray) -> np.ndarray:
    """Inverse DFT with the 1/(NM) factor; ifft2(fft2(x)) == x."""
    spec = np.asarray(spec)
    if spec.ndim != 2:
        raise DimensionMismatchError("ifft2 expects a 2-D spectrum")
    return np.fft.ifft2(spec)


def conv_freq(image: np.ndarray, kernel_spectrum: np.ndarray) -> np.ndarray:
    """Circular convolution with a pre-transformed kernel.

    The kernel spectrum is expected with its zero-frequency tap at (0,0),
    i.e. the spatial kernel was rolled so its centre sits at the origin, so
    the output is the centred filter response with no phase shift.
    """
    image = np.asarray(image)
    kernel_spectrum = np.asarray(kernel_spectrum)
    if image.shape != kernel_spectrum.shape:
        raise DimensionMismatchError(
            f"image {image.shape} vs kernel spectrum {kernel_spectrum.shape}"
        )
    return np.fft.ifft2(np.fft.fft2(image) * kernel_spectrum)


def magnitude(resp: np.ndarray) -> np.ndarray:
    """Per-pixel modulus sqrt(re^2 + im^2) of a complex response."""
    return np.abs(np.asarray(resp))


def highfreq_energy_ratio(img: np.ndarray, radius_frac: float) -> float:
    """Fraction of non-DC spectral energy beyond radius_frac of Nyquist.

    Frequencies are measured in cycles/sample per axis (Nyquist = 0.5) and
    combined radially.  A constant image has no non-DC energy; the ratio is
    defined as 0 there.
    """
    if not 0.0 < radius_frac < 1.0:
        raise ValueError(f"radius_frac must lie in (0, 1), got {radius_frac}")
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionMismatchError("highfreq_energy_ratio expects a 2-D image")
    energy = np.abs(np.fft.fft2(img)) ** 2
    energy[0, 0] = 0.0
    total = energy.sum()
    if total <= 0.0:
        return 0.0
    fy = np.fft.fftfreq(img.shape[0])
    fx = np.fft.fftfreq(img.shape[1])
    radial = np.hypot(fy[:, None], fx[None, :])
    high = energy[radial > radius_frac * 0.5].sum()
    return float(high / total)
