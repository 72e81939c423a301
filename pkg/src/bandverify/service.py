"""HTTP service exposing the toolkit pipeline.

Each endpoint wraps one batch operation on server-local paths; the CLI is
a thin client for these routes. Requests are synchronous: corpus jobs run
to completion before the response is returned.
"""

import logging
from pathlib import Path
from typing import List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__, bwe as bwe_mod
from .audio import read_wav
from .detcurve import DcfParams, det_curve, eer, export_det, min_dcf
from .experiment import (ExperimentConfig, extend_corpus, extract_multi_l,
                         prepare_narrowband, run_experiment)
from .features import FrameConfig
from .manifest import CorpusManifest
from .synthcorpus import generate_corpus
from .verify import (SpeakerModel, score_trials, train_speaker_model,
                     trials_from_csv, trials_to_csv)
from .features import FeatureSequence
import numpy as np

log = logging.getLogger(__name__)

app = FastAPI(title="bandverify", version=__version__)


class SynthCorpusRequest(BaseModel):
    out_dir: str
    n_speakers: int = Field(ge=2)
    utterances_per_speaker: int = Field(ge=1)
    seed: int = 0
    train_seconds: float = 60.0
    test_seconds: float = 2.0


class NarrowbandRequest(BaseModel):
    in_dir: str
    out_dir: str
    with_alaw: bool = False


class TrainBweRequest(BaseModel):
    manifest_path: str
    components: int = 8
    seed: int = 0
    model_out: str


class ExtendRequest(BaseModel):
    manifest_path: str
    model_path: str
    lam: float = Field(default=2.0, ge=1.0)
    out_dir: str


class FeaturesRequest(BaseModel):
    wav_path: str
    kind: str = "LPCC"
    dim: int = Field(default=15, ge=1)
    csv_out: str


class TrainSpeakersRequest(BaseModel):
    manifest_path: str
    kind: str = "LPCC"
    dim: int = Field(default=15, ge=1)
    out_dir: str
    mean_removal: bool = False


class ScoreRequest(BaseModel):
    manifest_path: str
    models_dir: str
    kind: str = "LPCC"
    dim: int = Field(default=15, ge=1)
    trials_out: str
    mean_removal: bool = False


class DetRequest(BaseModel):
    trials_path: str
    out_base: str
    p_true: float = Field(default=0.5, gt=0.0, lt=1.0)
    v_miss: float = Field(default=1.0, gt=0.0)
    v_fa: float = Field(default=1.0, gt=0.0)


class ExperimentRequest(BaseModel):
    corpus_dir: str
    work_dir: str
    scenarios: List[str] = ["wide", "narrow", "extended"]
    feature_kinds: List[str] = ["LPCC", "MELCEPST"]
    l_values: List[int] = [4, 12, 18, 27]
    frame_len_ms: float = 30.0
    overlap_fraction: float = 2.0 / 3.0
    bwe_components: int = 8
    bwe_lambda: float = 2.0
    seed: int = 1234
    p_true: float = 0.5
    mean_removal: bool = False


class CorpusResponse(BaseModel):
    manifest_path: str
    n_files: int


def _bad_request(exc: Exception):
    log.warning("request failed: %s", exc)
    return HTTPException(status_code=400, detail=str(exc))


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/synth-corpus", response_model=CorpusResponse)
def synth_corpus(req: SynthCorpusRequest):
    try:
        manifest = generate_corpus(req.out_dir, req.n_speakers,
                                   req.utterances_per_speaker, req.seed,
                                   req.train_seconds, req.test_seconds)
    except ValueError as exc:
        raise _bad_request(exc)
    return CorpusResponse(manifest_path=str(Path(req.out_dir) / "manifest.jsonl"),
                          n_files=len(manifest.entries))


@app.post("/narrowband", response_model=CorpusResponse)
def narrowband(req: NarrowbandRequest):
    try:
        manifest = prepare_narrowband(req.in_dir, req.out_dir, req.with_alaw)
    except (ValueError, FileNotFoundError) as exc:
        raise _bad_request(exc)
    return CorpusResponse(manifest_path=str(Path(req.out_dir) / "manifest.jsonl"),
                          n_files=len(manifest.entries))


@app.post("/train-bwe")
def train_bwe(req: TrainBweRequest):
    try:
        manifest = CorpusManifest.load(req.manifest_path)
        model = bwe_mod.train_bwe_model(manifest, req.components, req.seed)
    except (ValueError, FileNotFoundError) as exc:
        raise _bad_request(exc)
    model.save(req.model_out)
    trace = model.joint_gmm.train_log_likelihoods
    return {"model_path": req.model_out, "n_iterations": len(trace),
            "log_likelihood_trace": trace}


@app.post("/extend", response_model=CorpusResponse)
def extend(req: ExtendRequest):
    try:
        manifest = extend_corpus(req.manifest_path, req.model_path, req.lam,
                                 req.out_dir)
    except (ValueError, FileNotFoundError) as exc:
        raise _bad_request(exc)
    return CorpusResponse(manifest_path=str(Path(req.out_dir) / "manifest.jsonl"),
                          n_files=len(manifest.entries))


@app.post("/features")
def features(req: FeaturesRequest):
    try:
        buf = read_wav(req.wav_path)
        seqs = extract_multi_l(buf, req.kind, [req.dim], FrameConfig())
    except (ValueError, FileNotFoundError) as exc:
        raise _bad_request(exc)
    seq = seqs[req.dim]
    seq.to_csv(req.csv_out)
    return {"csv_path": req.csv_out, "n_frames": len(seq), "dim": seq.dim}


@app.post("/train-speakers")
def train_speakers(req: TrainSpeakersRequest):
    try:
        manifest = CorpusManifest.load(req.manifest_path)
        out = Path(req.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for spk in manifest.speakers():
            vecs = []
            for e in manifest.by_role("train"):
                if e.spk != spk:
                    continue
                seqs = extract_multi_l(read_wav(e.path), req.kind, [req.dim],
                                       FrameConfig())
                vecs.append(seqs[req.dim].vectors)
            if not vecs:
                continue
            model = train_speaker_model(
                spk, FeatureSequence(np.vstack(vecs), req.kind),
                req.mean_removal)
            path = out / f"{spk}.json"
            model.save(path)
            paths.append(str(path))
    except (ValueError, FileNotFoundError) as exc:
        raise _bad_request(exc)
    return {"model_paths": paths}


@app.post("/score")
def score(req: ScoreRequest):
    try:
        manifest = CorpusManifest.load(req.manifest_path)
        models = [SpeakerModel.load(p)
                  for p in sorted(Path(req.models_dir).glob("*.json"))]
        if not models:
            raise ValueError(f"no speaker models in {req.models_dir}")
        tests = []
        for e in manifest.by_role("test"):
            seqs = extract_multi_l(read_wav(e.path), req.kind, [req.dim],
                                   FrameConfig())
            tests.append((e.utt, e.spk, seqs[req.dim]))
        trials = score_trials(models, tests, req.mean_removal)
    except (ValueError, FileNotFoundError) as exc:
        raise _bad_request(exc)
    trials_to_csv(trials, req.trials_out)
    return {"trials_path": req.trials_out, "n_trials": len(trials)}


@app.post("/det")
def det(req: DetRequest):
    try:
        trials = trials_from_csv(req.trials_path)
        targets = [t.score for t in trials if t.is_target]
        nontargets = [t.score for t in trials if not t.is_target]
        curve = det_curve(targets, nontargets)
        params = DcfParams(v_miss=req.v_miss, v_fa=req.v_fa, p_true=req.p_true)
    except (ValueError, FileNotFoundError) as exc:
        raise _bad_request(exc)
    value, thr, pm, pf = min_dcf(curve, params)
    csv_path, svg_path = export_det(curve, params, req.out_base)
    return {"min_dcf": value, "threshold": thr, "p_miss": pm, "p_fa": pf,
            "eer": eer(curve), "csv_path": csv_path, "svg_path": svg_path}


@app.post("/run-experiment")
def run_experiment_endpoint(req: ExperimentRequest):
    try:
        config = ExperimentConfig.from_dict(req.model_dump())
        report = run_experiment(config)
    except (ValueError, FileNotFoundError) as exc:
        raise _bad_request(exc)
    return report
