"""Descriptor chain: responses, pooling, standardization, concatenation,
and the feature-file round trip."""

import numpy as np
import pytest

from leggm.descriptor import (
    DescriptorParams,
    augment,
    downsample,
    extract,
    gabor_transform,
    read_features,
    write_features,
    znorm,
)
from leggm.errors import (
    DimensionMismatchError,
    IndivisibleDimsError,
    MalformedPayloadError,
    NonSquareFactorError,
)
from leggm.gabor import GaborParams, build_bank


class TestParams:
    def test_default_feature_dim(self):
        assert DescriptorParams().feature_dim == 10240

    def test_three_scale_feature_dim(self):
        p = DescriptorParams(gabor=GaborParams(n_scales=3))
        assert p.feature_dim == 3 * 8 * 16 * 16

    def test_p_must_be_square(self):
        with pytest.raises(NonSquareFactorError):
            DescriptorParams(p=50)

    def test_root_must_divide_grid(self):
        with pytest.raises(IndivisibleDimsError):
            DescriptorParams(gabor=GaborParams(grid_w=100, grid_h=100), p=64)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            DescriptorParams(downsample_mode="nearest")


class TestGaborTransform:
    def test_zero_image(self, small_bank):
        maps = gabor_transform(np.zeros((16, 16)), small_bank)
        assert len(maps) == 40
        for m in maps:
            assert np.abs(m).max() < 1e-12

    def test_nonnegative_and_scaling(self, small_bank, rng):
        chi = rng.random((16, 16))
        maps = gabor_transform(chi, small_bank)
        scaled = gabor_transform(2.5 * chi, small_bank)
        for m, s in zip(maps, scaled):
            assert m.min() >= 0.0
            np.testing.assert_allclose(s, 2.5 * m, atol=1e-10)

    def test_first_response_matches_spatial_oracle(self, small_bank, rng):
        img = rng.random((16, 16))
        resp = gabor_transform(img, small_bank)[0]
        rolled = np.roll(small_bank.kernels[0], (-8, -8), axis=(0, 1))
        oracle = np.zeros((16, 16), dtype=complex)
        for y in range(16):
            for x in range(16):
                acc = 0.0 + 0.0j
                for u in range(16):
                    for v in range(16):
                        acc += img[u, v] * rolled[(y - u) % 16, (x - v) % 16]
                oracle[y, x] = acc
        assert np.abs(resp - np.abs(oracle)).max() < 1e-9

    def test_shape_mismatch(self, small_bank):
        with pytest.raises(DimensionMismatchError):
            gabor_transform(np.zeros((8, 8)), small_bank)


class TestDownsample:
    def test_shape_128_to_16(self, rng):
        out = downsample(rng.random((128, 128)), 64)
        assert out.shape == (16, 16)

    def test_constant(self):
        np.testing.assert_array_equal(downsample(np.full((8, 8), 0.3), 16), 0.3)

    def test_row_index_map(self):
        m = np.tile(np.arange(16, dtype=np.float64)[:, None], (1, 16))
        out = downsample(m, 4)
        expected = np.tile((2 * np.arange(8) + 0.5)[:, None], (1, 8))
        np.testing.assert_allclose(out, expected, atol=1e-15)

    def test_blockmean_is_mean(self, rng):
        m = rng.random((8, 8))
        out = downsample(m, 16)
        assert abs(out[1, 0] - m[4:8, 0:4].mean()) < 1e-15

    def test_bilinear_mode(self, rng):
        m = rng.random((16, 16))
        out = downsample(m, 4, mode="bilinear")
        assert out.shape == (8, 8)
        from leggm.imaging import resize_bilinear

        np.testing.assert_array_equal(out, resize_bilinear(m, 8, 8))

    def test_validation(self, rng):
        with pytest.raises(NonSquareFactorError):
            downsample(rng.random((8, 8)), 5)
        with pytest.raises(IndivisibleDimsError):
            downsample(rng.random((9, 9)), 4)


class TestZnorm:
    def test_two_point(self):
        np.testing.assert_allclose(znorm(np.array([[1.0, 3.0]])), [[-1.0, 1.0]])

    def test_constant_is_zeros(self):
        np.testing.assert_array_equal(znorm(np.full((4, 4), 2.5)), 0.0)

    def test_moments(self, rng):
        out = znorm(rng.random((16, 16)))
        assert abs(out.mean()) <= 1e-12
        assert abs(out.var() - 1.0) <= 1e-9


class TestAugment:
    def test_row_major_flatten(self):
        v = augment([np.array([[1.0, 2.0], [3.0, 4.0]])])
        np.testing.assert_array_equal(v, [1.0, 2.0, 3.0, 4.0])

    def test_swap_permutes_blocks(self, rng):
        maps = [rng.random((4, 4)) for _ in range(3)]
        a = augment(maps)
        b = augment([maps[1], maps[0], maps[2]])
        np.testing.assert_array_equal(b[:16], a[16:32])
        np.testing.assert_array_equal(b[16:32], a[:16])
        np.testing.assert_array_equal(b[32:], a[32:])

    def test_empty_rejected(self):
        with pytest.raises(DimensionMismatchError):
            augment([])


class TestExtract:
    def test_dim_and_determinism(self, small_bank, rng):
        params = DescriptorParams(gabor=small_bank.params, p=4)
        img = rng.random((16, 16))
        v1 = extract(img, params, small_bank)
        v2 = extract(img.copy(), params, small_bank)
        assert v1.shape == (params.feature_dim,) == (40 * 8 * 8,)
        np.testing.assert_array_equal(v1, v2)

    def test_default_chain_dim(self, rng):
        img = rng.random((128, 128))
        v = extract(img)
        assert v.shape == (10240,)

    def test_zero_image_all_zero_vector(self, small_bank):
        params = DescriptorParams(gabor=small_bank.params, p=4)
        v = extract(np.zeros((16, 16)), params, small_bank, illum="none")
        np.testing.assert_array_equal(v, 0.0)

    def test_per_map_moments(self, small_bank, rng):
        params = DescriptorParams(gabor=small_bank.params, p=4)
        v = extract(rng.random((16, 16)), params, small_bank)
        for block in v.reshape(40, 64):
            if np.any(block != 0.0):
                assert abs(block.mean()) <= 1e-12
                assert abs(block.var() - 1.0) <= 1e-9

    def test_wrong_image_size(self, small_bank):
        params = DescriptorParams(gabor=small_bank.params, p=4)
        with pytest.raises(DimensionMismatchError):
            extract(np.zeros((8, 8)), params, small_bank)

    def test_foreign_bank_rejected(self, small_bank):
        params = DescriptorParams(p=4)  # default 128-grid params
        with pytest.raises(DimensionMismatchError):
            extract(np.zeros((128, 128)), params, small_bank)


class TestFeatureFile:
    def test_roundtrip(self, tmp_path, rng):
        vectors = rng.random((3, 7)).astype(np.float32).astype(np.float64)
        ids = ["s000/a.pgm", "s000/b.pgm", "s001/c.pgm"]
        path = tmp_path / "f.legf"
        write_features(path, vectors, ids)
        back, back_ids = read_features(path)
        np.testing.assert_array_equal(back, vectors)
        assert back_ids == ids

    def test_float32_quantization_is_the_only_loss(self, tmp_path, rng):
        vectors = rng.random((2, 5))
        path = tmp_path / "f.legf"
        write_features(path, vectors, ["x/1", "x/2"])
        back, _ = read_features(path)
        np.testing.assert_array_equal(back, vectors.astype(np.float32).astype(np.float64))

    def test_header_layout(self, tmp_path):
        path = tmp_path / "f.legf"
        write_features(path, np.zeros((2, 3)), ["a/1", "a/2"])
        raw = path.read_bytes()
        assert raw[:4] == b"LEGF"
        assert int.from_bytes(raw[4:8], "little") == 1
        assert int.from_bytes(raw[8:12], "little") == 2
        assert int.from_bytes(raw[12:16], "little") == 3
        assert raw.endswith(b"a/1\na/2\n")

    def test_count_mismatch(self, tmp_path):
        with pytest.raises(DimensionMismatchError):
            write_features(tmp_path / "f.legf", np.zeros((2, 3)), ["only-one"])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "f.legf"
        path.write_bytes(b"NOPE" + bytes(12))
        with pytest.raises(MalformedPayloadError):
            read_features(path)

    def test_truncated_vectors(self, tmp_path):
        path = tmp_path / "f.legf"
        write_features(path, np.zeros((2, 3)), ["a/1", "a/2"])
        path.write_bytes(path.read_bytes()[:20])
        with pytest.raises(MalformedPayloadError):
            read_features(path)

    def test_unterminated_ids(self, tmp_path):
        path = tmp_path / "f.legf"
        write_features(path, np.zeros((1, 2)), ["a/1"])
        path.write_bytes(path.read_bytes()[:-1])
        with pytest.raises(MalformedPayloadError):
            read_features(path)
