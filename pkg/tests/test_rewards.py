import numpy as np
import pytest

from vsumrl import rewards
from vsumrl.errors import ConfigError
from vsumrl.frames import SyntheticSpec, generate_synthetic
from vsumrl.numerics import make_rng
from vsumrl.rewards import (RewardWeights, SsimSignal, WEIGHT_PRESETS, compute_ssim,
                            normalized_dissimilarity, reward_clsf, reward_div,
                            reward_rep, reward_ssim, reward_total, ssim_matrix,
                            ssim_pipeline, summary_reward)

import oracles


def random_frame(seed, h=16, w=16):
    return np.float64(np.float32(make_rng(seed).uniform(0, 255, (h, w))))


class TestComputeSsim:
    def test_self_similarity_is_one(self):
        a = random_frame(1)
        assert compute_ssim(a, a) == pytest.approx(1.0, abs=1e-9)

    def test_constant_images_closed_form(self):
        black = np.zeros((16, 16))
        white = np.full((16, 16), 255.0)
        c1 = (0.01 * 255) ** 2
        expected = c1 / (255.0 ** 2 + c1)
        assert compute_ssim(black, white) == pytest.approx(expected, abs=1e-12)

    def test_symmetric(self):
        a, b = random_frame(2), random_frame(3)
        assert compute_ssim(a, b) == pytest.approx(compute_ssim(b, a), abs=1e-12)

    def test_matches_windowed_loop_oracle(self):
        a, b = random_frame(4, 12, 12), random_frame(5, 12, 12)
        assert compute_ssim(a, b) == pytest.approx(oracles.ssim_loops(a, b), abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            compute_ssim(np.zeros((8, 8)), np.zeros((8, 9)))

    def test_range(self):
        vals = [compute_ssim(random_frame(i), random_frame(i + 100)) for i in range(6)]
        assert all(-1.0 <= v <= 1.0 for v in vals)


class TestSsimMatrix:
    def test_symmetric_unit_diagonal(self):
        video = np.stack([random_frame(i) for i in range(6)])
        m = ssim_matrix(video)
        np.testing.assert_allclose(m, m.T, atol=1e-6)
        np.testing.assert_allclose(np.diag(m), 1.0, atol=1e-6)

    def test_row_sums_match_full_matrix_oracle(self):
        video = np.stack([random_frame(i + 10) for i in range(7)])
        sig = ssim_matrix(video).sum(axis=1)
        full = np.empty((7, 7))
        for i in range(7):
            for j in range(7):
                full[i, j] = oracles.ssim_loops(video[i], video[j], size=11, sigma=1.5)
        np.testing.assert_allclose(sig, full.sum(axis=1), atol=1e-9)


class TestSsimPipeline:
    def test_identical_frames_flat_signal(self):
        video = np.tile(random_frame(20), (12, 1, 1))
        signal = ssim_pipeline(video)
        np.testing.assert_allclose(signal.sig, 12.0, atol=1e-9)
        np.testing.assert_allclose(signal.slope, 0.0, atol=1e-12)
        assert not signal.keyframe_mask.any()

    def test_boundary_flagged(self):
        spec = SyntheticSpec(frame_count=60, height=32, width=32, boundaries=(30,),
                             patterns=("uniform", "bright-vertical-lines"),
                             noise_amplitude=4.0, seed=21)
        video, _, _ = generate_synthetic(spec)
        signal = ssim_pipeline(video)
        assert signal.keyframe_mask[20:41].any()

    def test_slope_tail_padding(self):
        video = np.stack([random_frame(i + 30) for i in range(15)])
        signal = ssim_pipeline(video, slope_window=10)
        assert signal.slope.shape == (15,)
        np.testing.assert_array_equal(signal.slope[5:], signal.slope[5])

    def test_short_video_single_slope(self, caplog):
        video = np.stack([random_frame(i + 50) for i in range(4)])
        with caplog.at_level("WARNING"):
            signal = ssim_pipeline(video, slope_window=10)
        assert signal.slope.shape == (4,)
        assert np.unique(signal.slope).size == 1


def fabricated_signal(sig):
    sig = np.asarray(sig, dtype=float)
    n = sig.size
    return SsimSignal(matrix=np.eye(n), sig=sig, slope=np.zeros(n),
                      keyframe_mask=np.zeros(n, dtype=bool))


class TestRewardComponents:
    def test_rep_all_selected(self):
        feats = make_rng(22).standard_normal((6, 4))
        assert reward_rep(feats, np.ones(6, dtype=bool)) == pytest.approx(1.0)

    def test_rep_identical_frames_one_selected(self):
        feats = np.tile(make_rng(23).standard_normal(4), (2, 1))
        mask = np.array([True, False])
        assert reward_rep(feats, mask) == pytest.approx(1.0)

    def test_rep_empty_mask_penalty(self):
        assert reward_rep(np.ones((3, 2)), np.zeros(3, dtype=bool)) == 0.0

    def test_rep_matches_loop_oracle(self):
        rng = make_rng(24)
        feats = rng.standard_normal((10, 4))
        mask = rng.random(10) < 0.4
        mask[0] = True
        assert reward_rep(feats, mask) == pytest.approx(
            oracles.rep_loops(feats, mask), abs=1e-9)

    def test_rep_monotone_in_mask(self):
        rng = make_rng(25)
        for _ in range(20):
            feats = rng.standard_normal((8, 3))
            mask = rng.random(8) < 0.5
            mask[int(rng.integers(8))] = True
            before = reward_rep(feats, mask)
            grown = mask.copy()
            grown[int(rng.integers(8))] = True
            assert reward_rep(feats, grown) >= before - 1e-12

    def test_div_orthogonal_pair(self):
        feats = np.zeros((6, 2))
        feats[1] = [1.0, 0.0]
        feats[4] = [0.0, 1.0]
        mask = np.array([False, True, False, False, True, False])
        assert reward_div(feats, mask) == pytest.approx(1.0)

    def test_div_identical_pair(self):
        feats = np.tile([[0.5, 0.5]], (6, 1))
        mask = np.array([False, True, False, False, True, False])
        assert reward_div(feats, mask) == pytest.approx(0.0)

    def test_div_distant_pair_maximal(self):
        feats = np.tile([[0.5, 0.5]], (60, 1))  # identical features
        mask = np.zeros(60, dtype=bool)
        mask[[0, 50]] = True  # 50 frames apart, beyond the 20-frame span
        assert reward_div(feats, mask) == pytest.approx(1.0)

    def test_div_degenerate_masks(self):
        feats = make_rng(26).standard_normal((5, 3))
        assert reward_div(feats, np.zeros(5, dtype=bool)) == 0.0
        only_one = np.eye(5, dtype=bool)[2]
        assert reward_div(feats, only_one) == 0.0

    def test_div_matches_loop_oracle(self):
        rng = make_rng(27)
        for _ in range(10):
            feats = rng.standard_normal((12, 4))
            mask = rng.random(12) < 0.5
            assert reward_div(feats, mask, span=4) == pytest.approx(
                oracles.div_loops(feats, mask, span=4), abs=1e-9)

    def test_clsf_examples(self):
        scores = np.array([1.0, 1.0, 0.0, 1.0])
        assert reward_clsf(scores, np.array([True, True, False, True])) == 1.0
        assert reward_clsf(scores, np.array([False, True, True, False])) == 0.5
        assert reward_clsf(scores, np.zeros(4, dtype=bool)) == 0.0

    def test_clsf_matches_loop_oracle(self):
        rng = make_rng(28)
        scores = rng.uniform(0, 1, 9)
        mask = rng.random(9) < 0.6
        assert reward_clsf(scores, mask) == pytest.approx(
            oracles.clsf_loops(scores, mask), abs=1e-12)

    def test_ssim_reward_flat_signal_mask_independent(self):
        signal = fabricated_signal(np.full(8, 3.25))
        vals = {reward_ssim(signal, m) for m in oracles.all_masks(8) if m.any()}
        assert vals == {0.0}

    def test_ssim_reward_minimum_scores_one(self):
        signal = fabricated_signal([5.0, 2.0, 4.0, 3.0])
        mask = np.array([False, True, False, False])
        assert reward_ssim(signal, mask) == pytest.approx(1.0)

    def test_ssim_reward_literal_orientation(self):
        signal = fabricated_signal([5.0, 2.0, 4.0, 3.0])
        mask = np.array([True, False, False, False])
        assert reward_ssim(signal, mask, literal=True) == pytest.approx(1.0)
        assert reward_ssim(signal, mask) == pytest.approx(0.0)

    def test_ssim_reward_matches_loop_oracle(self):
        rng = make_rng(29)
        sig = rng.uniform(10, 20, 11)
        signal = fabricated_signal(sig)
        mask = rng.random(11) < 0.5
        assert reward_ssim(signal, mask) == pytest.approx(
            oracles.ssim_reward_loops(sig, mask), abs=1e-12)


class TestRewardTotal:
    def test_all_ones(self):
        assert reward_total(1.0, 1.0, 1.0, 1.0).r_total == pytest.approx(1.0)

    def test_classifier_only(self):
        assert reward_total(0.0, 0.0, 1.0, 0.0).r_total == pytest.approx(2 / 3)

    def test_everything_but_classifier(self):
        assert reward_total(1.0, 1.0, 0.0, 1.0).r_total == pytest.approx(1 / 3)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ConfigError, match="sum"):
            RewardWeights(clsf=0.5, ssim=0.5, rep=0.5, div=0.5)

    def test_presets(self):
        assert WEIGHT_PRESETS["clsf-ssim"].rep == 0.0
        assert WEIGHT_PRESETS["rep-div"].clsf == 0.0
        assert WEIGHT_PRESETS["full"].clsf == pytest.approx(2 / 3)


class TestRangeInvariant:
    def test_all_components_within_unit_interval(self):
        rng = make_rng(30)
        video = np.stack([random_frame(i + 70, 12, 12) for i in range(8)])
        signal = ssim_pipeline(video, slope_window=5)
        feats = rng.standard_normal((8, 4))
        scores = rng.uniform(0, 1, 8)
        for mask in oracles.all_masks(8):
            b = summary_reward(feats, scores, signal, mask)
            for value in (b.r_rep, b.r_div, b.r_clsf, b.r_ssim, b.r_total):
                assert 0.0 <= value <= 1.0

    def test_enumeration_finds_argmax(self):
        rng = make_rng(31)
        video = np.stack([random_frame(i + 90, 12, 12) for i in range(8)])
        signal = ssim_pipeline(video, slope_window=5)
        feats = rng.standard_normal((8, 4))
        scores = rng.uniform(0, 1, 8)
        best = max(oracles.all_masks(8),
                   key=lambda m: summary_reward(feats, scores, signal, m).r_total)
        assert best.any()
        best_val = summary_reward(feats, scores, signal, best).r_total
        assert 0.0 < best_val <= 1.0


class TestNormalizedDissimilarity:
    def test_endpoints(self):
        sig = np.array([4.0, 1.0, 3.0])
        out = normalized_dissimilarity(sig)
        np.testing.assert_allclose(out, [0.0, 1.0, 1 / 3])

    def test_flat_signal(self):
        np.testing.assert_array_equal(normalized_dissimilarity(np.full(5, 2.0)), 0.0)
