"""Statistical bandwidth extension from 8 kHz narrowband to 16 kHz.

A joint full-covariance GMM links 16 narrowband features (15 LPCC plus a
voicing degree) to 9 high-band features (8 envelope LPCC of the
baseband-folded high band plus the high/narrow log-energy ratio). At
synthesis time the energy ratio is estimated under the asymmetric cost
(over-estimates penalized), the envelope by conditional MMSE, and the high
band is built by filtering a spectral-folded LPC residual, highpass
restricting it to 4-8 kHz, gain matching, and Hann overlap-add onto the
interpolated narrowband signal.
"""

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window, lfilter

from .audio import AudioBuffer
from .features import (ENERGY_FLOOR, FrameConfig, autocorrelation,
                       cepstrum_to_lpc, hamming, levinson_durbin,
                       log_energy_ratio, lpc_to_cepstrum, voicing_degree)
from .filters import (band_split, downsample_2x, highpass_half, potsband,
                      preemphasize_frame, spectral_fold_2x, upsample_2x_interp)
from .gmm import GaussianMixture, asymmetric_cost_estimate, conditional_mmse, em_fit
from .manifest import CorpusManifest

log = logging.getLogger(__name__)

NB_ORDER = 15
HB_ORDER = 8
NB_DIM = NB_ORDER + 1  # cepstra + voicing
HB_DIM = HB_ORDER + 1  # cepstra + energy ratio
GAIN_SMOOTHING = 0.7
MODEL_FORMAT_VERSION = 1


@dataclass
class BweModel:
    joint_gmm: GaussianMixture
    frame_config: FrameConfig = FrameConfig()
    gain_smoothing: float = GAIN_SMOOTHING

    def __post_init__(self):
        if self.joint_gmm.split_dim != NB_DIM:
            raise ValueError("joint mixture must split after the narrowband block")
        if self.joint_gmm.dim != NB_DIM + HB_DIM:
            raise ValueError("joint mixture has the wrong dimension")

    def save(self, path):
        d = {
            "format_version": MODEL_FORMAT_VERSION,
            "gmm": self.joint_gmm.to_dict(),
            "frame_len_ms": self.frame_config.frame_len_ms,
            "overlap_fraction": self.frame_config.overlap_fraction,
            "gain_smoothing": self.gain_smoothing,
        }
        with open(path, "w") as f:
            json.dump(d, f, sort_keys=True)

    @classmethod
    def load(cls, path) -> "BweModel":
        with open(path) as f:
            d = json.load(f)
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError("unsupported model format version")
        cfg = FrameConfig(frame_len_ms=d["frame_len_ms"],
                          overlap_fraction=d["overlap_fraction"])
        return cls(GaussianMixture.from_dict(d["gmm"]), cfg,
                   d["gain_smoothing"])


def _frame_lpcc(frame: np.ndarray, order: int, n_ceps: int,
                pre_emphasis: bool) -> np.ndarray:
    f = preemphasize_frame(frame) if pre_emphasis else np.asarray(frame, float)
    f = f * hamming(len(f))
    r = autocorrelation(f, order)
    if r[0] <= ENERGY_FLOOR:
        return np.zeros(n_ceps)
    a, _ = levinson_durbin(r, order)
    return lpc_to_cepstrum(a, n_ceps)


def extract_nb_features(nb_frame: np.ndarray) -> np.ndarray:
    """16-vector: order-15 LPCC of the pre-emphasized frame plus the
    voicing degree of the raw frame."""
    frame = np.asarray(nb_frame, dtype=np.float64)
    if np.dot(frame, frame) <= ENERGY_FLOOR:
        return np.zeros(NB_DIM)
    ceps = _frame_lpcc(frame, NB_ORDER, NB_ORDER, pre_emphasis=True)
    return np.concatenate([ceps, [voicing_degree(frame)]])


def extract_hb_features(wb_frame: np.ndarray) -> np.ndarray:
    """9-vector: order-8 LPCC of the baseband-folded high band plus the
    high/narrow log-energy ratio. Frame must be at 16 kHz."""
    buf = AudioBuffer(np.asarray(wb_frame, dtype=np.float64), 16000)
    low, high = band_split(buf)
    ceps = _frame_lpcc(high.samples, HB_ORDER, HB_ORDER, pre_emphasis=False)
    ratio = log_energy_ratio(high.samples, low.samples)
    return np.concatenate([ceps, [ratio]])


def joint_feature_matrix(wb: AudioBuffer, config: FrameConfig) -> np.ndarray:
    """Aligned 25-dim joint vectors for one wideband utterance.

    The narrowband side is the potsband-filtered, downsampled signal; all
    filters are delay compensated so frame k spans the same time interval
    in both signals.
    """
    if wb.sample_rate_hz != 16000:
        raise ValueError("training audio must be at 16 kHz")
    nb = downsample_2x(potsband(wb))
    ln, hopn = config.frame_len(8000), config.hop(8000)
    lw, hopw = config.frame_len(16000), config.hop(16000)
    n_frames = min((len(nb) - ln) // hopn + 1 if len(nb) >= ln else 0,
                   (len(wb) - lw) // hopw + 1 if len(wb) >= lw else 0)
    rows = []
    for k in range(max(n_frames, 0)):
        nb_frame = nb.samples[k * hopn:k * hopn + ln]
        wb_frame = wb.samples[k * hopw:k * hopw + lw]
        rows.append(np.concatenate([extract_nb_features(nb_frame),
                                    extract_hb_features(wb_frame)]))
    return np.array(rows).reshape(-1, NB_DIM + HB_DIM)


def train_bwe_model(manifest: CorpusManifest, K: int, seed: int,
                    config: FrameConfig = FrameConfig()) -> BweModel:
    """Fit the joint narrowband/high-band mixture on a wideband corpus."""
    from .audio import read_wav
    blocks = []
    for entry in manifest.by_role("train"):
        blocks.append(joint_feature_matrix(read_wav(entry.path), config))
    data = np.vstack(blocks) if blocks else np.zeros((0, NB_DIM + HB_DIM))
    if data.shape[0] < 10 * K:
        raise ValueError(
            f"only {data.shape[0]} training frames; need {10 * K} for K={K}")
    gmm = em_fit(data, K, seed, split_dim=NB_DIM)
    return BweModel(gmm, config)


def _stabilize_lpc(a: np.ndarray, radius: float = 0.98) -> np.ndarray:
    """Pull poles of 1/A(z) inside the given radius."""
    poly = np.concatenate([[1.0], -np.asarray(a)])
    roots = np.roots(poly)
    if len(roots) == 0 or np.max(np.abs(roots)) <= radius:
        return a
    mags = np.abs(roots)
    roots = np.where(mags > radius, roots * (radius / mags), roots)
    poly = np.real(np.poly(roots))
    return -poly[1:]


def extend(nb: AudioBuffer, model: BweModel, lam: float = 2.0) -> AudioBuffer:
    """Reconstruct a 16 kHz wideband signal from 8 kHz narrowband input."""
    if nb.sample_rate_hz != 8000:
        raise ValueError(f"extend expects 8 kHz input, got {nb.sample_rate_hz}")
    length = model.frame_config.frame_len(8000)
    hop = length // 2  # 50%-overlap synthesis frames
    up = upsample_2x_interp(nb)
    high = np.zeros(len(up))
    if len(nb) < length:
        return AudioBuffer(up.samples, 16000)

    window = get_window("hann", length, fftbins=True)
    smoothed_gain = None
    gmm = model.joint_gmm
    for pos in range(0, len(nb) - length + 1, hop):
        frame = nb.samples[pos:pos + length]
        windowed = frame * window
        energy = float(np.dot(windowed, windowed))
        if energy <= ENERGY_FLOOR:
            continue
        x = extract_nb_features(frame)
        gain_db = asymmetric_cost_estimate(gmm, x, HB_ORDER, lam)
        if smoothed_gain is None:
            smoothed_gain = gain_db
        else:
            smoothed_gain = (model.gain_smoothing * smoothed_gain
                             + (1.0 - model.gain_smoothing) * gain_db)
        envelope = conditional_mmse(gmm, x)[:HB_ORDER]

        # whitened excitation: LPC residual of the windowed frame, folded
        emphasized = preemphasize_frame(frame) * window
        r = autocorrelation(emphasized, NB_ORDER)
        if r[0] <= ENERGY_FLOOR:
            continue
        a_nb, _ = levinson_durbin(r, NB_ORDER)
        residual = lfilter(np.concatenate([[1.0], -a_nb]), [1.0], emphasized)
        excitation = spectral_fold_2x(AudioBuffer(residual, 8000))

        # envelope shaping: baseband all-pole mirrored into the upper band
        a_hb = _stabilize_lpc(cepstrum_to_lpc(envelope, HB_ORDER))
        poly = np.concatenate([[1.0], -a_hb])
        poly *= (-1.0) ** np.arange(HB_ORDER + 1)  # z -> -z spectral flip
        shaped = lfilter([1.0], poly, excitation.samples)
        hb_frame = highpass_half(AudioBuffer(shaped, 16000)).samples

        cur = float(np.dot(hb_frame, hb_frame))
        if cur <= ENERGY_FLOOR:
            continue
        # folding to baseband halves summed energy, hence the factor 2
        target = 2.0 * (10.0 ** (smoothed_gain / 10.0)) * energy
        hb_frame = hb_frame * np.sqrt(target / cur)
        high[2 * pos:2 * pos + 2 * length] += hb_frame
    return AudioBuffer(up.samples + high, 16000)
