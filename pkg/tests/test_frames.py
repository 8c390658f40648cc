import numpy as np
import pytest

from vsumrl import frames, rewards, tensorio
from vsumrl.errors import DataError
from vsumrl.frames import SyntheticSpec, generate_synthetic


def make_video(n=4, h=8, w=8, seed=0):
    rng = np.random.default_rng(seed)
    return np.float64(np.float32(rng.uniform(0, 255, size=(n, h, w))))


class TestTensorFile:
    def test_round_trip_values(self, tmp_path):
        arr = make_video(2)[0]
        tensorio.save_tensor(tmp_path / "a.vstf", arr)
        np.testing.assert_array_equal(tensorio.load_tensor(tmp_path / "a.vstf"), arr)

    def test_round_trip_bytes(self, tmp_path):
        arr = np.random.default_rng(1).uniform(size=(3, 5))
        p1, p2 = tmp_path / "a.vstf", tmp_path / "b.vstf"
        tensorio.save_tensor(p1, arr)
        tensorio.save_tensor(p2, tensorio.load_tensor(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.vstf"
        p.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(DataError, match="magic"):
            tensorio.load_tensor(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "short.vstf"
        tensorio.save_tensor(p, np.zeros((2, 2)))
        p.write_bytes(p.read_bytes()[:-4])
        with pytest.raises(DataError, match="size mismatch"):
            tensorio.load_tensor(p)


class TestPgm:
    def test_round_trip(self, tmp_path):
        frame = np.round(make_video(1)[0])
        tensorio.save_pgm(tmp_path / "f.pgm", frame)
        np.testing.assert_array_equal(tensorio.load_pgm(tmp_path / "f.pgm"), frame)

    def test_header_comment(self, tmp_path):
        p = tmp_path / "c.pgm"
        p.write_bytes(b"P5\n# comment line\n2 2\n255\n" + bytes([0, 1, 2, 3]))
        np.testing.assert_array_equal(tensorio.load_pgm(p), [[0, 1], [2, 3]])

    def test_garbled_header(self, tmp_path):
        p = tmp_path / "bad.pgm"
        p.write_bytes(b"P5\nxx yy\n")
        with pytest.raises(DataError):
            tensorio.load_pgm(p)


class TestVideoIo:
    def test_load_pgm_directory(self, tmp_path):
        video = np.round(make_video(10, 64, 64))
        frames.save_video(video, tmp_path / "v", fmt="pgm")
        loaded = frames.load_video(tmp_path / "v")
        assert loaded.shape == (10, 64, 64)
        np.testing.assert_array_equal(loaded, video)

    def test_numeric_filename_order(self, tmp_path):
        d = tmp_path / "v"
        d.mkdir()
        for stem, value in (("10", 10.0), ("2", 2.0), ("0", 0.0)):
            tensorio.save_tensor(d / f"{stem}.vstf", np.full((8, 8), value))
        loaded = frames.load_video(d)
        np.testing.assert_array_equal(loaded[:, 0, 0], [0.0, 2.0, 10.0])

    def test_empty_directory(self, tmp_path):
        d = tmp_path / "v"
        d.mkdir()
        with pytest.raises(DataError, match="no .vstf or .pgm"):
            frames.load_video(d)

    def test_mixed_dimensions(self, tmp_path):
        d = tmp_path / "v"
        d.mkdir()
        tensorio.save_tensor(d / "0.vstf", np.zeros((8, 8)))
        tensorio.save_tensor(d / "1.vstf", np.zeros((8, 9)))
        with pytest.raises(DataError, match="differs"):
            frames.load_video(d)

    def test_save_load_round_trip_bit_identical(self, tmp_path):
        video, _, _ = generate_synthetic(SyntheticSpec(frame_count=6, height=16, width=16))
        frames.save_video(video, tmp_path / "v1")
        loaded = frames.load_video(tmp_path / "v1")
        np.testing.assert_array_equal(loaded, video)
        frames.save_video(loaded, tmp_path / "v2")
        for a, b in zip(sorted((tmp_path / "v1").iterdir()),
                        sorted((tmp_path / "v2").iterdir())):
            assert a.read_bytes() == b.read_bytes()


class TestSyntheticSpec:
    def test_zero_segments_rejected(self):
        with pytest.raises(ValueError, match="segments"):
            SyntheticSpec(frame_count=10, patterns=())

    def test_boundary_pattern_count_mismatch(self):
        with pytest.raises(ValueError):
            SyntheticSpec(frame_count=10, boundaries=(5,), patterns=("uniform",))

    def test_decreasing_boundaries_rejected(self):
        with pytest.raises(ValueError):
            SyntheticSpec(frame_count=20, boundaries=(9, 5),
                          patterns=("uniform", "moving-band", "uniform"))

    def test_unknown_pattern(self):
        with pytest.raises(ValueError, match="pattern"):
            SyntheticSpec(frame_count=10, patterns=("sparkles",))


TWO_SEGMENT = SyntheticSpec(frame_count=100, height=64, width=64, boundaries=(50,),
                            patterns=("uniform", "bright-vertical-lines"),
                            noise_amplitude=4.0, seed=11)


class TestGenerateSynthetic:
    def test_ground_truth_construction(self):
        _, gt, _ = generate_synthetic(TWO_SEGMENT)
        assert gt[48:53].all()          # boundary window
        assert gt[50:].all()            # abnormal segment
        assert not gt[:48].any()

    def test_deterministic(self):
        v1, g1, s1 = generate_synthetic(TWO_SEGMENT)
        v2, g2, s2 = generate_synthetic(TWO_SEGMENT)
        np.testing.assert_array_equal(v1, v2)
        np.testing.assert_array_equal(g1, g2)
        np.testing.assert_array_equal(s1, s2)

    def test_scores_track_patterns(self):
        _, _, scores = generate_synthetic(TWO_SEGMENT)
        assert np.all(scores[:48] < 0.5)
        assert np.all(scores[50:] >= 0.5)
        assert np.all((scores >= 0) & (scores <= 1))

    def test_pixels_in_range(self):
        video, _, _ = generate_synthetic(TWO_SEGMENT)
        assert video.min() >= 0 and video.max() <= 255

    def test_ssim_signal_dips_at_boundary(self):
        # independent localization: the minimum of the collapsed SSIM signal
        # falls inside the boundary transition zone
        video, _, _ = generate_synthetic(TWO_SEGMENT)
        sig = rewards.ssim_pipeline(video).sig
        assert 48 <= int(np.argmin(sig)) <= 52

    def test_gt_bounded_by_frames(self):
        _, gt, scores = generate_synthetic(TWO_SEGMENT)
        assert gt.sum() <= TWO_SEGMENT.frame_count
        assert np.all(scores[50:] >= 0.5)  # abnormal frames score high


class TestCorpusSpecs:
    def test_layout_and_determinism(self):
        a = frames.corpus_specs(4, frame_count=80, seed=3)
        b = frames.corpus_specs(4, frame_count=80, seed=3)
        assert a == b
        for spec in a:
            assert spec.patterns[1] == frames.PATTERN_LINES
            lo, hi = spec.boundaries
            assert 0 < lo < hi < spec.frame_count

    def test_abnormal_fraction_moderate(self):
        for spec in frames.corpus_specs(6, frame_count=100, seed=0):
            lo, hi = spec.boundaries
            assert 5 <= hi - lo <= 20
