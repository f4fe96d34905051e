import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from segcond.conditioning import (
    ConditionTokens,
    build_bias,
    encode_contour,
    filter_tokens,
)
from segcond.errors import GammaOutOfRangeError


def black(h, w):
    return np.zeros((h, w, 3), dtype=np.uint8)


class TestEncodeContour:
    def test_black_image_all_zero_tokens(self):
        cond = encode_contour(black(4, 4), f=2, d=8)
        assert len(cond) == 4
        assert not cond.tokens.any()

    def test_single_white_pixel(self):
        img = black(4, 4)
        img[0, 0] = 255
        cond = encode_contour(img, f=2, d=8)
        assert cond.tokens[0, 0] == 1.0
        assert cond.tokens[0, 1:].sum() == 0
        assert not cond.tokens[1:].any()

    def test_identity_at_f1_d1(self):
        img = black(2, 3)
        img[1, 2] = 255
        cond = encode_contour(img, f=1, d=1)
        assert cond.tokens.ravel().tolist() == [0, 0, 0, 0, 0, 1]

    def test_positions_raster_order(self):
        cond = encode_contour(black(4, 6), f=2, d=4)
        assert cond.source_positions.tolist() == [
            [0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]
        assert cond.kept_indices.tolist() == list(range(6))

    def test_dim_too_small(self):
        with pytest.raises(ValueError):
            encode_contour(black(4, 4), f=4, d=8)


class TestFilterTokens:
    def test_all_zero_gives_empty(self):
        cond = encode_contour(black(4, 4), f=2, d=4)
        filtered = filter_tokens(cond)
        assert len(filtered) == 0

    def test_no_zero_tokens_is_identity(self):
        tokens = np.ones((3, 2))
        cond = ConditionTokens(tokens=tokens,
                               source_positions=np.zeros((3, 2), dtype=int),
                               kept_indices=np.arange(3))
        filtered = filter_tokens(cond)
        assert np.array_equal(filtered.tokens, tokens)
        assert filtered.kept_indices.tolist() == [0, 1, 2]

    def test_kept_indices_track_survivors(self):
        tokens = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 2.0]])
        cond = ConditionTokens(tokens=tokens,
                               source_positions=np.array([[0, 0], [0, 1], [1, 0], [1, 1]]),
                               kept_indices=np.arange(4))
        filtered = filter_tokens(cond)
        assert filtered.kept_indices.tolist() == [1, 3]
        assert filtered.source_positions.tolist() == [[0, 1], [1, 1]]

    @given(arrays(np.float64, (8, 3), elements=st.sampled_from([0.0, 0.5, -1.0])))
    @settings(max_examples=100)
    def test_keeps_exactly_nonzero_rows(self, tokens):
        cond = ConditionTokens(tokens=tokens,
                               source_positions=np.zeros((8, 2), dtype=int),
                               kept_indices=np.arange(8))
        filtered = filter_tokens(cond)
        expected = [i for i in range(8) if np.abs(tokens[i]).max() > 0]
        assert filtered.kept_indices.tolist() == expected
        twice = filter_tokens(filtered)
        assert np.array_equal(twice.tokens, filtered.tokens)
        assert np.array_equal(twice.kept_indices, filtered.kept_indices)


class TestBuildBias:
    def test_gamma_one_is_zero_matrix(self):
        bias = build_bias(2, 3, 4, 1.0)
        assert bias.values.shape == (9, 9)
        assert not bias.values.any()

    def test_block_placement(self):
        bias = build_bias(2, 2, 2, 0.5)
        v = math.log(0.5)
        expected = np.zeros((6, 6))
        expected[2:4, 4:6] = v
        expected[4:6, 2:4] = v
        assert np.allclose(bias.values, expected)
        assert bias.values[2, 4] == pytest.approx(-0.6931471805599453)

    def test_no_condition_tokens(self):
        bias = build_bias(2, 3, 0, 0.3)
        assert bias.values.shape == (5, 5)
        assert not bias.values.any()

    def test_symmetry_and_count(self, rng):
        for _ in range(20):
            lt, li, lc = rng.integers(1, 6, size=3)
            gamma = float(rng.uniform(0.05, 1.0))
            bias = build_bias(int(lt), int(li), int(lc), gamma)
            assert np.array_equal(bias.values, bias.values.T)
            nonzero = bias.values[bias.values != 0]
            assert len(nonzero) <= 2 * li * lc
            assert np.allclose(nonzero, math.log(gamma))

    @pytest.mark.parametrize("gamma", [0.0, -0.5, 1.5])
    def test_gamma_out_of_range(self, gamma):
        with pytest.raises(GammaOutOfRangeError):
            build_bias(1, 1, 1, gamma)
