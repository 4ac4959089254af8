"""Complex Gabor kernel family over a scale/orientation grid.

Each kernel is

    psi(c) = (|l|^2 / sigma^2) * exp(-|l|^2 |c|^2 / (2 sigma^2))
             * (exp(i l.c) - exp(-sigma^2 / 2))

sampled on the full working lattice with c measured from the centre tap at
floor(n/2).  Wave magnitudes form a geometric ladder l_max / s_f^mu and
orientations step by pi/n_orients.  The subtracted constant removes the DC
response exactly in the continuum; on the finite lattice a small residue
remains (and grows at the coarsest scale, where the envelope outruns the
grid -- `bank inspect` reports it per kernel).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRangeError, NonPositiveSigmaError

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class GaborParams:
    sigma: float = SQRT2
    l_max: float = 0.25
    s_f: float = SQRT2
    n_scales: int = 5
    n_orients: int = 8
    grid_w: int = 128
    grid_h: int = 128

    def __post_init__(self):
        if self.sigma <= 0 or self.l_max <= 0 or self.s_f <= 0:
            raise NonPositiveSigmaError("sigma, l_max and s_f must all be positive")
        if self.n_scales < 1 or self.n_orients < 1:
            raise IndexOutOfRangeError("need at least one scale and one orientation")
        if self.grid_w < 1 or self.grid_h < 1:
            raise IndexOutOfRangeError("grid dimensions must be positive")

    @property
    def bank_size(self) -> int:
        return self.n_scales * self.n_orients


def wave_magnitude(mu: int, p: GaborParams = GaborParams()) -> float:
    """|l| at scale mu: successive division so the ladder ratio is exact."""
    if not 0 <= mu < p.n_scales:
        raise IndexOutOfRangeError(f"scale index {mu} outside 0..{p.n_scales - 1}")
    lm = p.l_max
    for _ in range(mu):
        lm = lm / p.s_f
    return lm


def orientation_angle(nu: int, p: GaborParams = GaborParams()) -> float:
    if not 0 <= nu < p.n_orients:
        raise IndexOutOfRangeError(f"orientation index {nu} outside 0..{p.n_orients - 1}")
    return math.pi * nu / p.n_orients


def gabor_kernel(mu: int, nu: int, p: GaborParams = GaborParams()) -> np.ndarray:
    """Sample one complex kernel on the grid_h x grid_w lattice."""
    lm = wave_magnitude(mu, p)
    phi = orientation_angle(nu, p)
    cy, cx = p.grid_h // 2, p.grid_w // 2
    x = np.arange(p.grid_w, dtype=np.float64) - cx
    y = np.arange(p.grid_h, dtype=np.float64) - cy
    xx, yy = np.meshgrid(x, y)
    s2 = p.sigma * p.sigma
    l2 = lm * lm
    envelope = (l2 / s2) * np.exp(-l2 * (xx * xx + yy * yy) / (2.0 * s2))
    phase = lm * (xx * math.cos(phi) + yy * math.sin(phi))
    return envelope * (np.exp(1j * phase) - math.exp(-s2 / 2.0))


@dataclass(frozen=True)
class GaborBank:
    """All kernels in (mu-major, nu-minor) order plus their spectra.

    Spectra are fft2 of each kernel circularly rolled so the centre tap sits
    at index (0,0): multiplying an image spectrum by one of these and
    inverting yields the centred, zero-phase-shift filter response.
    """

    params: GaborParams
    kernels: tuple
    kernel_spectra: tuple

    def __len__(self) -> int:
        return len(self.kernels)

    def index(self, mu: int, nu: int) -> int:
        if not (0 <= mu < self.params.n_scales and 0 <= nu < self.params.n_orients):
            raise IndexOutOfRangeError(f"(mu={mu}, nu={nu}) outside the bank")
        return mu * self.params.n_orients + nu


def build_bank(p: GaborParams = GaborParams()) -> GaborBank:
    cy, cx = p.grid_h // 2, p.grid_w // 2
    kernels = []
    spectra = []
    for mu in range(p.n_scales):
        for nu in range(p.n_orients):
            k = gabor_kernel(mu, nu, p)
            kernels.append(k)
            spectra.append(np.fft.fft2(np.roll(k, (-cy, -cx), axis=(0, 1))))
    return GaborBank(params=p, kernels=tuple(kernels), kernel_spectra=tuple(spectra))


def dc_residue(kernel: np.ndarray) -> float:
    """|lattice sum| / sum|psi| -- how far the sampled kernel is from DC-free."""
    return float(abs(kernel.sum()) / np.abs(kernel).sum())
