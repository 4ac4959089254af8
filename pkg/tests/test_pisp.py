"""Band-pass kernels and the structural-pattern extraction.

The replicate-border convolution is checked against a nested-loop oracle
written directly from the definition, with explicit index clamping.
"""

import math

import numpy as np
import pytest

from leggm.errors import EvenSizeError, NonPositiveSigmaError, DimensionMismatchError
from leggm.pisp import (
    PispParams,
    conv2_replicate,
    dog_kernel,
    embed,
    extract_pisp,
    gaussian_kernel,
    laplacian_kernel,
)


def conv_oracle(img, kernel):
    """Direct correlation with clamp-to-edge indexing, one tap at a time."""
    ih, iw = img.shape
    kh, kw = kernel.shape
    hy, hx = kh // 2, kw // 2
    out = np.zeros_like(img, dtype=np.float64)
    for y in range(ih):
        for x in range(iw):
            acc = 0.0
            for dy in range(-hy, hy + 1):
                for dx in range(-hx, hx + 1):
                    sy = min(max(y + dy, 0), ih - 1)
                    sx = min(max(x + dx, 0), iw - 1)
                    acc += kernel[dy + hy, dx + hx] * img[sy, sx]
            out[y, x] = acc
    return out


class TestGaussianKernel:
    def test_single_tap(self):
        np.testing.assert_array_equal(gaussian_kernel(1, 3.0), [[1.0]])

    def test_unit_mass(self):
        for size, sigma in ((3, 1.0), (7, 1.0), (13, 2.0)):
            assert abs(gaussian_kernel(size, sigma).sum() - 1.0) < 1e-15

    def test_center_weight_size3(self):
        # hand normalization: 1 / (1 + 4 e^{-1/2} + 4 e^{-1})
        k = gaussian_kernel(3, 1.0)
        expected = 1.0 / (1.0 + 4.0 * math.exp(-0.5) + 4.0 * math.exp(-1.0))
        assert abs(k[1, 1] - expected) < 1e-15

    def test_validation(self):
        with pytest.raises(NonPositiveSigmaError):
            gaussian_kernel(3, 0.0)
        with pytest.raises(EvenSizeError):
            gaussian_kernel(4, 1.0)


def test_laplacian_taps():
    k = laplacian_kernel()
    np.testing.assert_array_equal(k, [[0, -1, 0], [-1, 4, -1], [0, -1, 0]])
    assert k.sum() == 0.0
    assert k[1, 1] == 4.0


def test_laplacian_kills_constants():
    out = conv2_replicate(np.full((9, 9), 0.37), laplacian_kernel())
    assert np.all(out == 0.0)


class TestConv2Replicate:
    def test_matches_oracle_small(self, rng):
        img = rng.random((8, 8))
        kernel = rng.random((3, 3)) - 0.5
        np.testing.assert_allclose(
            conv2_replicate(img, kernel), conv_oracle(img, kernel), atol=1e-12
        )

    def test_matches_oracle_batch(self, rng):
        for _ in range(20):
            ih, iw = rng.integers(3, 20, size=2)
            kh, kw = rng.choice([1, 3, 5, 7], size=2)
            img = rng.random((ih, iw))
            kernel = rng.random((kh, kw)) - 0.5
            np.testing.assert_allclose(
                conv2_replicate(img, kernel), conv_oracle(img, kernel), atol=1e-12
            )

    def test_even_kernel_rejected(self, rng):
        with pytest.raises(EvenSizeError):
            conv2_replicate(rng.random((5, 5)), rng.random((2, 2)))

    def test_non_2d_rejected(self):
        with pytest.raises(DimensionMismatchError):
            conv2_replicate(np.zeros(5), np.zeros((3, 3)))


class TestDogKernel:
    def test_exact_zero_sum(self):
        for size, sigma in ((7, 1.0), (13, 2.0), (5, 0.8), (9, 1.3), (21, 3.4)):
            assert dog_kernel(size, sigma).sum() == 0.0

    def test_center_positive_maximum(self):
        k = dog_kernel(7, 1.0)
        assert k[3, 3] > 0.0
        assert k[3, 3] == k.max()

    def test_radial_symmetry(self):
        # the zero-sum nudge perturbs the smallest taps by a few 1e-18
        k = dog_kernel(7, 1.0)
        assert np.abs(k - k.T).max() <= 1e-15
        assert np.abs(k - k[::-1, :]).max() <= 1e-15
        assert np.abs(k - k[:, ::-1]).max() <= 1e-15

    def test_constant_image_annihilated(self):
        out = conv2_replicate(np.full((15, 15), 0.61803), dog_kernel(7, 1.0))
        np.testing.assert_allclose(out, 0.0, atol=1e-15)


class TestPispParams:
    def test_defaults(self):
        p = PispParams()
        assert (p.sigma1, p.sigma2, p.size1, p.size2) == (1.0, 2.0, 7, 13)

    def test_sigma_ordering(self):
        with pytest.raises(NonPositiveSigmaError):
            PispParams(sigma1=1.0, sigma2=0.5)

    def test_size_ordering(self):
        with pytest.raises(EvenSizeError):
            PispParams(size1=13, size2=7)

    def test_even_size(self):
        with pytest.raises(EvenSizeError):
            PispParams(size1=6)


class TestExtractPisp:
    def test_constant_exactly_zero(self):
        out = extract_pisp(np.full((20, 20), 0.61803))
        assert np.all(out == 0.0)

    def test_offset_invariance_exact(self, rng):
        # dyadic-grid intensities so img + c carries no rounding of its own
        img = np.floor(rng.random((32, 32)) * (1 << 20)) / (1 << 20)
        for c in (0.25, 1.0, -0.125):
            np.testing.assert_array_equal(extract_pisp(img + c), extract_pisp(img))

    def test_linearity(self, rng):
        a = rng.random((24, 24))
        b = rng.random((24, 24))
        combined = extract_pisp(0.6 * a + 0.4 * b)
        separate = 0.6 * extract_pisp(a) + 0.4 * extract_pisp(b)
        np.testing.assert_allclose(combined, separate, atol=1e-12)

    def test_impulse_reproduces_kernel_difference(self):
        img = np.zeros((31, 31))
        img[15, 15] = 1.0
        out = extract_pisp(img)
        expected = np.zeros((31, 31))
        expected[15 - 3 : 15 + 4, 15 - 3 : 15 + 4] += dog_kernel(7, 1.0)
        expected[15 - 6 : 15 + 7, 15 - 6 : 15 + 7] -= dog_kernel(13, 2.0)
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_step_edge(self):
        step = np.zeros((31, 31))
        step[:, 16:] = 1.0
        out = extract_pisp(step)
        # beyond the widest kernel's reach both half-planes are constant
        far = np.concatenate([out[:, :9].ravel(), out[:, 23:].ravel()])
        assert np.all(far == 0.0)
        # the band along the edge swings through both signs
        band = out[15, 9:23]
        assert band.max() > 0.0
        assert band.min() < 0.0

    def test_matches_plain_convolution(self, rng):
        # the centered-window evaluation is algebraically the same filter
        img = rng.random((16, 16))
        plain = conv2_replicate(img, dog_kernel(7, 1.0)) - conv2_replicate(
            img, dog_kernel(13, 2.0)
        )
        np.testing.assert_allclose(extract_pisp(img), plain, atol=1e-13)


class TestEmbed:
    def test_additive(self, rng):
        s = rng.random((8, 8))
        g = rng.random((8, 8))
        np.testing.assert_array_equal(embed(s, g), s + g)

    def test_step_edge_leaves_unit_range(self):
        step = np.zeros((31, 31))
        step[:, 16:] = 1.0
        chi = embed(extract_pisp(step), step)
        assert chi.min() < 0.0
        assert chi.max() > 1.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            embed(np.zeros((4, 4)), np.zeros((5, 5)))
