"""Seeded synthetic wideband speech corpus.

Each speaker is a randomized source-filter voice: a mean pitch, four
formant resonators, and a speaker-specific high-band signature (resonance
frequency, bandwidth, and level). Utterances are built from random
voiced/unvoiced segments with per-utterance perturbation of the speaker
parameters, so speakers are separable but not trivially so. Fully
deterministic per seed.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .audio import AudioBuffer, write_wav
from .filters import highpass_half
from .manifest import CorpusManifest, ManifestEntry

FS = 16000


@dataclass(frozen=True)
class VoiceProfile:
    pitch_hz: float
    formants: tuple  # ((freq, bandwidth) x 4)
    hb_freq: float
    hb_bandwidth: float
    hb_level_db: float


def sample_voice(rng: np.random.Generator) -> VoiceProfile:
    formants = (
        (rng.uniform(320, 780), rng.uniform(60, 120)),
        (rng.uniform(950, 1900), rng.uniform(80, 160)),
        (rng.uniform(2250, 2950), rng.uniform(100, 200)),
        (rng.uniform(3300, 3900), rng.uniform(150, 250)),
    )
    return VoiceProfile(
        pitch_hz=rng.uniform(90, 230),
        formants=formants,
        hb_freq=rng.uniform(4600, 7200),
        hb_bandwidth=rng.uniform(400, 1200),
        hb_level_db=rng.uniform(-14, -4),
    )


def _resonator(x, freq, bandwidth, fs=FS):
    r = np.exp(-np.pi * bandwidth / fs)
    theta = 2.0 * np.pi * freq / fs
    return lfilter([1.0], [1.0, -2.0 * r * np.cos(theta), r * r], x)


def _segment(voice: VoiceProfile, n: int, rng: np.random.Generator,
             voiced: bool) -> np.ndarray:
    if voiced:
        pitch = voice.pitch_hz * rng.uniform(0.92, 1.08)
        period = max(int(round(FS / pitch)), 16)
        exc = np.zeros(n)
        phase = rng.integers(period)
        exc[phase::period] = 1.0
        exc += 0.02 * rng.standard_normal(n)
    else:
        exc = 0.25 * rng.standard_normal(n)
    y = exc
    for freq, bw in voice.formants:
        y = _resonator(y, freq * rng.uniform(0.96, 1.04),
                       bw * rng.uniform(0.9, 1.1))
    # low-band envelope drives the high band so the two are correlated
    env = np.abs(lfilter([1.0 - 0.995], [1.0, -0.995], np.abs(y)))
    hb_noise = rng.standard_normal(n) * env
    hb = _resonator(hb_noise, voice.hb_freq, voice.hb_bandwidth)
    hb = highpass_half(AudioBuffer(hb, FS)).samples
    y_rms = np.sqrt(np.mean(y * y)) + 1e-12
    hb_rms = np.sqrt(np.mean(hb * hb)) + 1e-12
    level = 10.0 ** (voice.hb_level_db / 20.0) * rng.uniform(0.9, 1.1)
    return y + hb * (y_rms * level / hb_rms)


def synth_utterance(voice: VoiceProfile, seconds: float,
                    rng: np.random.Generator) -> AudioBuffer:
    total = int(round(seconds * FS))
    parts = []
    produced = 0
    while produced < total:
        n = int(rng.uniform(0.12, 0.25) * FS)
        n = min(n, total - produced)
        voiced = rng.random() < 0.7
        parts.append(_segment(voice, n, rng, voiced))
        produced += n
    x = np.concatenate(parts)
    peak = np.max(np.abs(x)) + 1e-12
    return AudioBuffer(0.5 * x / peak, FS)


def generate_corpus(out_dir, n_speakers: int, utterances_per_speaker: int,
                    seed: int, train_seconds: float = 60.0,
                    test_seconds: float = 2.0) -> CorpusManifest:
    """Write a wideband corpus plus manifest.jsonl into out_dir.

    The first utterance of each speaker is the training utterance
    (train_seconds long); the rest are test utterances.
    """
    if n_speakers < 2:
        raise ValueError("need at least 2 speakers")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    root = np.random.default_rng(seed)
    entries = []
    for s in range(n_speakers):
        spk = f"spk{s:03d}"
        spk_rng = np.random.default_rng(root.integers(2 ** 63))
        voice = sample_voice(spk_rng)
        for u in range(utterances_per_speaker):
            role = "train" if u == 0 else "test"
            seconds = train_seconds if u == 0 else test_seconds
            buf = synth_utterance(voice, seconds, spk_rng)
            name = f"{spk}_u{u:02d}.wav"
            write_wav(buf, out / name, "16-pcm")
            entries.append(ManifestEntry(
                f"{spk}_u{u:02d}", spk, str(out / name), role, "wide"))
    manifest = CorpusManifest(entries)
    manifest.save(out / "manifest.jsonl")
    return manifest
