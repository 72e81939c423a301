"""Batch pipeline: scenario preparation, model training, scoring, and the
experiment report generator.

Scenarios mirror the three bandwidth conditions: "wide" (original 16 kHz),
"narrow" (potsband-filtered telephone band), and "extended" (narrowband
passed through the bandwidth extender). A report sweeps feature kind and
dimension and tabulates the minimum DCF per cell.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bwe as bwe_mod
from .audio import read_wav, write_wav
from .detcurve import DcfParams, det_curve, eer, export_det, min_dcf
from .features import (FrameConfig, FeatureSequence, frame_signal,
                       levinson_batch, lpc_to_cepstrum_batch, melcepst_frames)
from .filters import downsample_2x, potsband, preemphasize
from .manifest import CorpusManifest, ManifestEntry
from .verify import train_speaker_model, score_trials, trials_to_csv

log = logging.getLogger(__name__)

SCENARIOS = ("wide", "narrow", "extended")
FEATURE_KINDS = ("LPCC", "MELCEPST")


@dataclass
class ExperimentConfig:
    corpus_dir: str
    work_dir: str
    scenarios: tuple = SCENARIOS
    feature_kinds: tuple = FEATURE_KINDS
    l_values: tuple = (4, 12, 18, 27)
    frame: FrameConfig = field(default_factory=FrameConfig)
    bwe_components: int = 8
    bwe_lambda: float = 2.0
    seed: int = 1234
    dcf: DcfParams = field(default_factory=DcfParams)
    mean_removal: bool = False

    def __post_init__(self):
        for l in self.l_values:
            if not 4 <= l <= 27:
                raise ValueError(f"feature dimension {l} outside [4, 27]")
        for s in self.scenarios:
            if s not in SCENARIOS:
                raise ValueError(f"unknown scenario {s!r}")
        for k in self.feature_kinds:
            if k not in FEATURE_KINDS:
                raise ValueError(f"unknown feature kind {k!r}")

    def to_dict(self):
        return {
            "corpus_dir": str(self.corpus_dir),
            "work_dir": str(self.work_dir),
            "scenarios": list(self.scenarios),
            "feature_kinds": list(self.feature_kinds),
            "l_values": list(self.l_values),
            "frame_len_ms": self.frame.frame_len_ms,
            "overlap_fraction": self.frame.overlap_fraction,
            "bwe_components": self.bwe_components,
            "bwe_lambda": self.bwe_lambda,
            "seed": self.seed,
            "p_true": self.dcf.p_true,
            "v_miss": self.dcf.v_miss,
            "v_fa": self.dcf.v_fa,
            "mean_removal": self.mean_removal,
        }

    @classmethod
    def from_dict(cls, d):
        frame = FrameConfig(frame_len_ms=d.get("frame_len_ms", 30.0),
                            overlap_fraction=d.get("overlap_fraction", 2 / 3))
        dcf = DcfParams(v_miss=d.get("v_miss", 1.0), v_fa=d.get("v_fa", 1.0),
                        p_true=d.get("p_true", 0.5))
        return cls(
            corpus_dir=d["corpus_dir"], work_dir=d["work_dir"],
            scenarios=tuple(d.get("scenarios", SCENARIOS)),
            feature_kinds=tuple(d.get("feature_kinds", FEATURE_KINDS)),
            l_values=tuple(d.get("l_values", (4, 12, 18, 27))),
            frame=frame, bwe_components=d.get("bwe_components", 8),
            bwe_lambda=d.get("bwe_lambda", 2.0), seed=d.get("seed", 1234),
            dcf=dcf, mean_removal=d.get("mean_removal", False))


def _load_dir_manifest(in_dir) -> CorpusManifest:
    path = Path(in_dir) / "manifest.jsonl"
    if path.exists():
        return CorpusManifest.load(path)
    entries = [ManifestEntry(p.stem, p.stem.split("_")[0], str(p), "train", "wide")
               for p in sorted(Path(in_dir).glob("*.wav"))]
    if not entries:
        log.warning("no wav files found in %s", in_dir)
    return CorpusManifest(entries)


def prepare_narrowband(in_dir, out_dir, with_alaw: bool = False
                       ) -> CorpusManifest:
    """Potsband-filter a corpus; with_alaw additionally downsamples to
    8 kHz and stores 8-bit A-law (ISDN simulation)."""
    manifest = _load_dir_manifest(in_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    failures = 0
    scenario = "narrow-alaw" if with_alaw else "narrow"
    for e in manifest.entries:
        try:
            buf = potsband(read_wav(e.path))
            if with_alaw:
                if buf.sample_rate_hz == 16000:
                    buf = downsample_2x(buf)
                path = out / f"{e.utt}.wav"
                write_wav(buf, path, "8-alaw")
            else:
                path = out / f"{e.utt}.wav"
                write_wav(buf, path, "16-pcm")
            entries.append(ManifestEntry(e.utt, e.spk, str(path), e.role,
                                         scenario))
        except Exception:
            log.exception("failed to process %s", e.path)
            failures += 1
    CorpusManifest(entries).save(out / "manifest.jsonl")
    if failures:
        raise RuntimeError(f"{failures} file(s) failed during narrowband prep")
    return CorpusManifest(entries)


def extend_corpus(manifest_path, model_path, lam, out_dir) -> CorpusManifest:
    """Bandwidth-extend every utterance of a narrowband corpus."""
    manifest = CorpusManifest.load(manifest_path)
    model = bwe_mod.BweModel.load(model_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for e in manifest.entries:
        buf = read_wav(e.path)
        if buf.sample_rate_hz == 16000:
            buf = downsample_2x(buf)
        extended = bwe_mod.extend(buf, model, lam)
        path = out / f"{e.utt}.wav"
        write_wav(extended, path, "16-pcm")
        entries.append(ManifestEntry(e.utt, e.spk, str(path), e.role,
                                     "extended"))
    result = CorpusManifest(entries)
    result.save(out / "manifest.jsonl")
    return result


def extract_multi_l(buffer, kind: str, l_values, config: FrameConfig):
    """FeatureSequences for several dimensions at once, sharing the framing
    and (for LPCC) the autocorrelation work."""
    fs = buffer.sample_rate_hz
    frames = frame_signal(preemphasize(buffer), config, window=True)
    out = {}
    if frames.shape[0] == 0:
        return {l: FeatureSequence(np.zeros((0, l)), kind) for l in l_values}
    if kind == "LPCC":
        lmax = max(l_values)
        n = frames.shape[1]
        R = np.stack([np.correlate(f, f, "full")[n - 1:n + lmax]
                      for f in frames])
        for l in l_values:
            A, _ = levinson_batch(R[:, :l + 1], l)
            out[l] = FeatureSequence(lpc_to_cepstrum_batch(A, l), "LPCC")
    elif kind == "MELCEPST":
        lmax = max(l_values)
        vecs = melcepst_frames(frames, lmax, config.fft_size(fs),
                               config.filter_count(fs), fs)
        for l in l_values:
            out[l] = FeatureSequence(vecs[:, :l], "MELCEPST")
    else:
        raise ValueError(f"unknown feature kind {kind!r}")
    return out


def _fingerprint(*payloads) -> str:
    h = hashlib.sha256()
    for p in payloads:
        h.update(p if isinstance(p, bytes) else str(p).encode())
    return h.hexdigest()[:16]


def run_experiment(config: ExperimentConfig) -> dict:
    """Train, score, and evaluate the full scenario grid; returns the
    report dict (also written to work_dir/report.json and report.txt)."""
    corpus = Path(config.corpus_dir)
    work = Path(config.work_dir)
    work.mkdir(parents=True, exist_ok=True)
    wide_manifest_path = corpus / "manifest.jsonl"
    if not wide_manifest_path.exists():
        raise FileNotFoundError(
            f"no manifest.jsonl in {corpus}; run synth-corpus or provide one")
    wide = CorpusManifest.load(wide_manifest_path)

    manifests = {}
    if "wide" in config.scenarios:
        manifests["wide"] = wide
    model_hash = ""
    if "narrow" in config.scenarios or "extended" in config.scenarios:
        narrow_dir = work / "narrow"
        manifests["narrow"] = prepare_narrowband(corpus, narrow_dir)
    if "extended" in config.scenarios:
        model_path = work / "bwe_model.json"
        model = bwe_mod.train_bwe_model(wide, config.bwe_components,
                                        config.seed, config.frame)
        model.save(model_path)
        model_hash = _fingerprint(model_path.read_bytes())
        manifests["extended"] = extend_corpus(
            work / "narrow" / "manifest.jsonl", model_path,
            config.bwe_lambda, work / "extended")

    results = {}
    for scenario in config.scenarios:
        manifest = manifests[scenario]
        results[scenario] = {}
        feature_cache = {}
        for e in manifest.entries:
            buf = read_wav(e.path)
            for kind in config.feature_kinds:
                feature_cache[(e.utt, kind)] = extract_multi_l(
                    buf, kind, config.l_values, config.frame)
        for kind in config.feature_kinds:
            results[scenario][kind] = {}
            for l in config.l_values:
                models = []
                for spk in manifest.speakers():
                    vecs = np.vstack([
                        feature_cache[(e.utt, kind)][l].vectors
                        for e in manifest.by_role("train") if e.spk == spk])
                    models.append(train_speaker_model(
                        spk, FeatureSequence(vecs, kind),
                        config.mean_removal))
                tests = [(e.utt, e.spk, feature_cache[(e.utt, kind)][l])
                         for e in manifest.by_role("test")]
                trials = score_trials(models, tests, config.mean_removal)
                targets = [t.score for t in trials if t.is_target]
                nontargets = [t.score for t in trials if not t.is_target]
                curve = det_curve(targets, nontargets)
                value, thr, pm, pf = min_dcf(curve, config.dcf)
                base = work / f"det_{scenario}_{kind}_l{l}"
                export_det(curve, config.dcf, base)
                trials_to_csv(trials, work / f"trials_{scenario}_{kind}_l{l}.csv")
                results[scenario][kind][str(l)] = {
                    "min_dcf": value,
                    "threshold": thr,
                    "p_miss": pm,
                    "p_fa": pf,
                    "eer": eer(curve),
                    "n_trials": len(trials),
                }

    relative = {}
    if "narrow" in results and "extended" in results:
        for kind in config.feature_kinds:
            relative[kind] = {}
            for l in config.l_values:
                nv = results["narrow"][kind][str(l)]["min_dcf"]
                ev = results["extended"][kind][str(l)]["min_dcf"]
                relative[kind][str(l)] = (
                    (ev - nv) / nv * 100.0 if nv > 0 else 0.0)

    report = {
        "config": config.to_dict(),
        "config_fingerprint": _fingerprint(
            json.dumps(config.to_dict(), sort_keys=True), model_hash),
        "bwe_model_hash": model_hash,
        "results": results,
        "extended_vs_narrow_relative_change_pct": relative,
    }
    with open(work / "report.json", "w") as f:
        json.dump(report, f, sort_keys=True, indent=1)
    (work / "report.txt").write_text(render_report_table(report))
    return report


def render_report_table(report: dict) -> str:
    """Text table of min-DCF values: rows are dimensions, columns are
    scenario x feature kind."""
    results = report["results"]
    scenarios = list(results.keys())
    kinds = sorted({k for s in results.values() for k in s})
    l_values = sorted({int(l) for s in results.values()
                       for k in s.values() for l in k}, key=int)
    cols = [(s, k) for k in kinds for s in scenarios]
    lines = ["Minimum DCF per feature dimension",
             "fingerprint: " + report["config_fingerprint"], ""]
    header = "l    " + "  ".join(f"{k[:8]}/{s[:8]:<8}" for s, k in cols)
    lines.append(header)
    for l in l_values:
        cells = []
        for s, k in cols:
            cell = results[s].get(k, {}).get(str(l))
            cells.append(f"{cell['min_dcf']:.4f}".center(17)
                         if cell else "-".center(17))
        lines.append(f"{l:<4} " + "".join(cells))
    rel = report.get("extended_vs_narrow_relative_change_pct") or {}
    if rel:
        lines.append("")
        lines.append("Extended vs narrow min-DCF change (%), for inspection:")
        for kind, by_l in rel.items():
            row = ", ".join(f"l={l}: {v:+.1f}" for l, v in sorted(
                by_l.items(), key=lambda kv: int(kv[0])))
            lines.append(f"  {kind}: {row}")
    return "\n".join(lines) + "\n"
