import numpy as np
import pytest

from bandverify.features import FeatureSequence
from bandverify.verify import (SpeakerModel, Trial, ahs_distance,
                               distance_to_probability, score_trials,
                               second_moment, train_speaker_model,
                               trials_from_csv, trials_to_csv)


def random_spd(dim, rng):
    A = rng.standard_normal((dim, dim))
    return A @ A.T + dim * np.eye(dim)


class TestSecondMoment:
    def test_identity_rows(self):
        C = second_moment(np.eye(4))
        assert np.allclose(C, np.eye(4) / 4)

    def test_repeated_vector_regularized(self):
        v = np.array([1.0, 2.0, 3.0])
        C = second_moment(np.tile(v, (5, 1)))
        # rank-1 outer product plus the diagonal regularization
        assert np.allclose(C - np.diag(np.diag(C - np.outer(v, v))),
                           np.outer(v, v), atol=1e-6)
        np.linalg.cholesky(C)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((50, 6))
        C = second_moment(X)
        brute = sum(np.outer(x, x) for x in X) / 50
        assert np.allclose(C, brute, atol=1e-12)

    def test_mean_removal(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((100, 4)) + 5.0
        C = second_moment(X, mean_removal=True)
        assert np.allclose(C, np.cov(X, rowvar=False, bias=True), atol=1e-12)

    def test_rejects_single_frame(self):
        with pytest.raises(ValueError):
            second_moment(np.ones((1, 3)))


class TestAhsDistance:
    def test_identical_matrices(self):
        rng = np.random.default_rng(2)
        for l in [4, 12, 18, 27]:
            C = random_spd(l, rng)
            assert abs(ahs_distance(C, C)) < 1e-10

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        C = random_spd(8, rng)
        assert abs(ahs_distance(3.7 * C, C)) < 1e-10
        B = random_spd(8, rng)
        assert abs(ahs_distance(5.0 * C, B) - ahs_distance(C, B)) < 1e-10

    def test_hand_case(self):
        # tr(A B^-1) = 1 + 4 = 5, tr(B A^-1) = 1 + 1/4 = 1.25,
        # d = log(5 * 1.25) - 2 log 2 = log(25/16)
        d = ahs_distance(np.diag([1.0, 4.0]), np.eye(2))
        assert np.isclose(d, np.log(25.0 / 16.0), atol=1e-12)
        # dense-matrix oracle
        A, B = np.diag([1.0, 4.0]), np.eye(2)
        oracle = np.log(np.trace(A @ np.linalg.inv(B))
                        * np.trace(B @ np.linalg.inv(A))) - 2 * np.log(2)
        assert np.isclose(d, oracle, atol=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        A, B = random_spd(6, rng), random_spd(6, rng)
        assert abs(ahs_distance(A, B) - ahs_distance(B, A)) < 1e-10

    def test_non_negativity(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            A, B = random_spd(5, rng), random_spd(5, rng)
            assert ahs_distance(A, B) >= -1e-10

    def test_joint_transform_invariance(self):
        rng = np.random.default_rng(6)
        A, B = random_spd(7, rng), random_spd(7, rng)
        T = rng.standard_normal((7, 7)) + 3 * np.eye(7)
        d1 = ahs_distance(A, B)
        d2 = ahs_distance(T @ A @ T.T, T @ B @ T.T)
        assert abs(d1 - d2) < 1e-8

    def test_ratio_form_flag(self):
        rng = np.random.default_rng(7)
        C = random_spd(5, rng)
        assert np.isclose(ahs_distance(C, C, ratio_form=True),
                          -2 * np.log(5), atol=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            ahs_distance(np.eye(3), np.eye(4))


class TestProbability:
    def test_zero_distance(self):
        assert distance_to_probability(0.0) == 1.0

    def test_half(self):
        assert np.isclose(distance_to_probability(2 * np.log(2)), 0.5)

    def test_strictly_decreasing(self):
        ds = np.linspace(0, 10, 50)
        ps = [distance_to_probability(d) for d in ds]
        assert all(b < a for a, b in zip(ps, ps[1:]))


class TestScoring:
    def _features(self, rng, n=60, l=5, shift=0.0):
        return FeatureSequence(rng.standard_normal((n, l)) + shift, "LPCC")

    def test_trial_counts(self):
        rng = np.random.default_rng(8)
        models = [train_speaker_model(f"s{i}", self._features(rng, shift=i))
                  for i in range(4)]
        trials = score_trials(models, [("u0", "s1", self._features(rng))])
        assert len(trials) == 4
        assert sum(t.is_target for t in trials) == 1
        assert all(t.score > 0 for t in trials)

    def test_own_training_data_scores_one(self):
        rng = np.random.default_rng(9)
        feats = self._features(rng)
        model = train_speaker_model("s0", feats)
        trials = score_trials([model], [("u0", "s0", feats)])
        assert np.isclose(trials[0].score, 1.0, atol=1e-9)

    def test_deterministic_ordering(self):
        rng = np.random.default_rng(10)
        models = [train_speaker_model(f"s{i}", self._features(rng))
                  for i in range(3)]
        tests = [("u0", "s0", self._features(rng)),
                 ("u1", "s2", self._features(rng))]
        t1 = score_trials(models, tests)
        t2 = score_trials(models, tests)
        assert t1 == t2

    def test_short_utterance_skipped(self):
        rng = np.random.default_rng(11)
        model = train_speaker_model("s0", self._features(rng))
        short = FeatureSequence(np.ones((1, 5)), "LPCC")
        assert score_trials([model], [("u0", "s0", short)]) == []


class TestSerialization:
    def test_model_roundtrip(self, tmp_path):
        rng = np.random.default_rng(12)
        model = train_speaker_model(
            "spk7", FeatureSequence(rng.standard_normal((40, 6)), "MELCEPST"))
        path = tmp_path / "m.json"
        model.save(path)
        back = SpeakerModel.load(path)
        assert back.speaker_id == "spk7"
        assert np.array_equal(back.C, model.C)
        assert back.kind == "MELCEPST"
        assert back.n_frames == 40

    def test_trials_csv_roundtrip(self, tmp_path):
        trials = [Trial("u0", "s0", 0.75, True), Trial("u0", "s1", 0.1, False)]
        path = tmp_path / "t.csv"
        trials_to_csv(trials, path)
        assert trials_from_csv(path) == trials
