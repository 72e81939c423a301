"""Covariance speaker models and the arithmetic-harmonic sphericity score.

A speaker is modeled by the second-moment matrix of their frame features.
Test utterances are scored by d = log(tr(A B^-1) * tr(B A^-1)) - 2 log(l),
which is zero iff the matrices are proportional, then converted to a
probability p = exp(-0.5 d). The ratio-of-traces variant is available
behind a flag for comparison; it is not self-consistent (d(C, C) != 0).
"""

import csv
import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass
class SpeakerModel:
    speaker_id: str
    C: np.ndarray  # (l, l) second-moment matrix
    n_frames: int
    kind: str
    dim: int

    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "speaker_id": self.speaker_id,
            "matrix": self.C.tolist(),
            "n_frames": self.n_frames,
            "kind": self.kind,
            "dim": self.dim,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError("unsupported speaker model format version")
        return cls(d["speaker_id"], np.array(d["matrix"]), d["n_frames"],
                   d["kind"], d["dim"])

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class Trial:
    test_utterance_id: str
    claimed_speaker_id: str
    score: float
    is_target: bool


def second_moment(vectors: np.ndarray, mean_removal: bool = False) -> np.ndarray:
    """C = (1/N) sum x x^T, optionally mean-centered; regularized if the
    result is not positive definite."""
    X = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    n, l = X.shape
    if n < 2:
        raise ValueError("need at least 2 frames for a covariance estimate")
    if mean_removal:
        X = X - X.mean(axis=0)
    C = X.T @ X / n
    C = 0.5 * (C + C.T)
    try:
        np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        log.warning("rank-deficient second moment; regularizing")
        C = C + 1e-8 * (np.trace(C) / l + 1e-30) * np.eye(l)
    if n < l:
        log.warning("fewer frames (%d) than feature dimension (%d)", n, l)
    return C


def train_speaker_model(speaker_id: str, features, mean_removal: bool = False
                        ) -> SpeakerModel:
    C = second_moment(features.vectors, mean_removal)
    return SpeakerModel(speaker_id, C, len(features), features.kind,
                        features.dim)


def ahs_distance(C_test: np.ndarray, C_model: np.ndarray,
                 ratio_form: bool = False) -> float:
    """Arithmetic-harmonic sphericity distance between SPD matrices."""
    A = np.asarray(C_test, dtype=np.float64)
    B = np.asarray(C_model, dtype=np.float64)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrices must be square and of equal dimension")
    l = A.shape[0]
    fa = cho_factor(A)
    fb = cho_factor(B)
    tr_ab = float(np.trace(cho_solve(fb, A)))  # tr(A B^-1)
    tr_ba = float(np.trace(cho_solve(fa, B)))  # tr(B A^-1)
    if ratio_form:
        return float(np.log(tr_ab / tr_ba) - 2.0 * np.log(l))
    return float(np.log(tr_ab * tr_ba) - 2.0 * np.log(l))


def distance_to_probability(d: float) -> float:
    """p = exp(-0.5 d), in (0, 1] for d >= 0."""
    return float(np.exp(-0.5 * d))


def score_trials(models, test_features, mean_removal: bool = False):
    """All-vs-all scoring: every test utterance against every model.

    models: list of SpeakerModel; test_features: list of
    (utterance_id, true_speaker_id, FeatureSequence). Utterances too short
    for a covariance estimate are skipped and logged.
    """
    trials = []
    for utt_id, true_spk, feats in test_features:
        try:
            C_test = second_moment(feats.vectors, mean_removal)
        except ValueError:
            log.warning("utterance %s too short to score; skipped", utt_id)
            continue
        for model in models:
            d = ahs_distance(C_test, model.C)
            trials.append(Trial(utt_id, model.speaker_id,
                                distance_to_probability(d),
                                model.speaker_id == true_spk))
    return trials


def trials_to_csv(trials, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["utt", "claimed", "score", "is_target"])
        for t in trials:
            w.writerow([t.test_utterance_id, t.claimed_speaker_id,
                        repr(t.score), int(t.is_target)])


def trials_from_csv(path):
    trials = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        next(reader)
        for row in reader:
            trials.append(Trial(row[0], row[1], float(row[2]), bool(int(row[3]))))
    return trials
