import numpy as np
import pytest

from vsumrl import features, tensorio
from vsumrl.errors import DataError
from vsumrl.features import (FeatureEnsemble, FeatureStream, encode_builtin,
                             load_stream, mix_segmentation_features, normalize,
                             save_stream)
from vsumrl.frames import SyntheticSpec, generate_synthetic
from vsumrl.numerics import cosine_similarity, make_rng


def random_stream(n=6, f=8, seed=0, name="enc"):
    return FeatureStream(name, make_rng(seed).standard_normal((n, f)))


class TestLoadStream:
    def test_aligned_load(self, tmp_path):
        arr = make_rng(1).standard_normal((100, 32)).astype(np.float32)
        tensorio.save_tensor(tmp_path / "enc.vstf", arr)
        stream = load_stream(tmp_path / "enc.vstf", 100)
        assert stream.frame_count == 100 and stream.width == 32
        assert stream.encoder_name == "enc"

    def test_row_mismatch(self, tmp_path):
        tensorio.save_tensor(tmp_path / "enc.vstf", np.zeros((99, 16)))
        with pytest.raises(DataError, match="align"):
            load_stream(tmp_path / "enc.vstf", 100)

    def test_rank_check(self, tmp_path):
        tensorio.save_tensor(tmp_path / "enc.vstf", np.zeros(16))
        with pytest.raises(DataError, match="rank"):
            load_stream(tmp_path / "enc.vstf", 16)

    def test_round_trip_bit_exact(self, tmp_path):
        stream = random_stream(5, 7)
        save_stream(stream, tmp_path / "a.vstf")
        loaded = load_stream(tmp_path / "a.vstf", 5)
        save_stream(loaded, tmp_path / "b.vstf")
        assert (tmp_path / "a.vstf").read_bytes() == (tmp_path / "b.vstf").read_bytes()

    def test_width_projection(self, tmp_path):
        tensorio.save_tensor(tmp_path / "enc.vstf", np.ones((4, 6)))
        padded = load_stream(tmp_path / "enc.vstf", 4, width=10)
        assert padded.width == 10
        np.testing.assert_array_equal(padded.features[:, 6:], 0.0)
        truncated = load_stream(tmp_path / "enc.vstf", 4, width=3)
        assert truncated.width == 3


class TestEnsemble:
    def test_mismatched_streams_rejected(self):
        with pytest.raises(DataError):
            FeatureEnsemble((random_stream(6, 8), random_stream(5, 8, seed=1)))

    def test_stack_shape(self):
        ens = FeatureEnsemble((random_stream(6, 8), random_stream(6, 8, seed=1)))
        assert ens.stack().shape == (6, 2, 8)


class TestEncodeBuiltin:
    def test_identical_frames_identical_rows(self):
        video = np.tile(make_rng(2).uniform(0, 255, (1, 16, 16)), (3, 1, 1))
        for kind in features.BUILTIN_KINDS:
            rows = encode_builtin(video, kind, width=64).features
            np.testing.assert_array_equal(rows[0], rows[1])
            np.testing.assert_array_equal(rows[0], rows[2])

    def test_histogram_disjoint_extremes(self):
        video = np.stack([np.zeros((16, 16)), np.full((16, 16), 255.0)])
        rows = encode_builtin(video, "histogram", width=128).features
        assert cosine_similarity(rows[0], rows[1]) == pytest.approx(0.0)

    def test_histogram_rows_are_distributions(self):
        video, _, _ = generate_synthetic(SyntheticSpec(frame_count=4, height=16, width=16))
        rows = encode_builtin(video, "histogram", width=64).features
        np.testing.assert_allclose(rows.sum(axis=1), 1.0)

    def test_downsample_width_padding(self):
        video = np.full((2, 16, 16), 7.0)
        rows = encode_builtin(video, "downsample", width=300).features
        np.testing.assert_allclose(rows[:, :256], 7.0)
        np.testing.assert_array_equal(rows[:, 256:], 0.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="encoder"):
            encode_builtin(np.zeros((1, 8, 8)), "vgg")

    def test_segment_structure_visible(self):
        # within-segment similarity must beat across-segment similarity
        spec = SyntheticSpec(frame_count=40, height=32, width=32, boundaries=(20,),
                             patterns=("uniform", "bright-vertical-lines"),
                             noise_amplitude=2.0, seed=4)
        video, _, _ = generate_synthetic(spec)
        for kind in features.BUILTIN_KINDS:
            rows = encode_builtin(video, kind, width=64).features
            within, across = [], []
            for i in range(0, 40, 3):
                for j in range(0, 40, 3):
                    if i >= j:
                        continue
                    sim = cosine_similarity(rows[i], rows[j])
                    (within if (i < 20) == (j < 20) else across).append(sim)
            assert np.mean(within) > np.mean(across), kind


class TestMixing:
    def test_equal_inputs_unchanged(self):
        s = random_stream(4, 6)
        mixed = mix_segmentation_features(s, s)
        np.testing.assert_allclose(mixed.features, s.features)

    def test_default_weights(self):
        ones = FeatureStream("img", np.ones((3, 5)))
        zeros = FeatureStream("mask", np.zeros((3, 5)))
        np.testing.assert_allclose(
            mix_segmentation_features(ones, zeros).features, 0.7)

    def test_matches_scalar_oracle(self):
        a, b = random_stream(5, 4, seed=5), random_stream(5, 4, seed=6)
        mixed = mix_segmentation_features(a, b, 0.6, 0.4).features
        for i in range(5):
            for j in range(4):
                assert mixed[i, j] == pytest.approx(
                    0.6 * a.features[i, j] + 0.4 * b.features[i, j], abs=1e-15)

    def test_exact_combination(self):
        a, b = random_stream(6, 3, seed=7), random_stream(6, 3, seed=8)
        mixed = mix_segmentation_features(a, b).features
        np.testing.assert_array_equal(mixed, 0.7 * a.features + 0.3 * b.features)

    def test_misaligned(self):
        with pytest.raises(DataError, match="misaligned"):
            mix_segmentation_features(random_stream(4, 6), random_stream(5, 6, seed=1))


class TestNormalize:
    def test_unit_rows(self):
        out = normalize(random_stream(8, 5)).features
        np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-6)

    def test_zero_row_preserved(self):
        s = FeatureStream("z", np.vstack([np.zeros(4), np.ones(4)]))
        out = normalize(s).features
        np.testing.assert_array_equal(out[0], 0.0)

    def test_idempotent(self):
        once = normalize(random_stream(6, 9, seed=9))
        twice = normalize(once)
        np.testing.assert_allclose(twice.features, once.features, atol=1e-12)

    def test_preserves_cosine(self):
        s = random_stream(6, 9, seed=10)
        out = normalize(s)
        for i in range(5):
            before = cosine_similarity(s.features[i], s.features[i + 1])
            after = cosine_similarity(out.features[i], out.features[i + 1])
            assert after == pytest.approx(before, abs=1e-6)
