"""Frame-level analysis: windowing, linear prediction, cepstra, voicing.

Feature extraction is deterministic; identical inputs give bit-identical
outputs. Two cepstral front ends are provided: LPCC (autocorrelation ->
Levinson-Durbin -> cepstrum recursion, LPC order equal to the requested
cepstrum count) and mel cepstra (power spectrum -> triangular mel
filterbank -> log -> DCT-II, coefficient 0 excluded so the features are
invariant to input gain).
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.fft import dct, rfft

from .audio import AudioBuffer
from .filters import preemphasize

log = logging.getLogger(__name__)

ENERGY_FLOOR = 1e-10
LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class FrameConfig:
    frame_len_ms: float = 30.0
    overlap_fraction: float = 2.0 / 3.0
    fft_len: Optional[int] = None  # default: next power of two >= frame len
    n_filters: Optional[int] = None  # default: 20 at 8 kHz, 26 at 16 kHz

    def frame_len(self, fs: int) -> int:
        return int(round(self.frame_len_ms * fs / 1000.0))

    def hop(self, fs: int) -> int:
        h = int(round(self.frame_len(fs) * (1.0 - self.overlap_fraction)))
        if h < 1:
            raise ValueError("overlap leaves a hop below one sample")
        return h

    def fft_size(self, fs: int) -> int:
        if self.fft_len is not None:
            return self.fft_len
        return 1 << (self.frame_len(fs) - 1).bit_length()

    def filter_count(self, fs: int) -> int:
        if self.n_filters is not None:
            return self.n_filters
        return 26 if fs >= 16000 else 20


@dataclass
class FeatureSequence:
    vectors: np.ndarray  # (n_frames, l)
    kind: str  # "LPCC" | "MELCEPST"

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("feature vectors must be finite")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return self.vectors.shape[0]

    def to_csv(self, path):
        np.savetxt(path, self.vectors, delimiter=",")


def hamming(length: int) -> np.ndarray:
    n = np.arange(length)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))


def frame_signal(buffer: AudioBuffer, config: FrameConfig,
                 window: bool = True, pad_to_fft: bool = False) -> np.ndarray:
    """Slice a signal into (optionally Hamming-windowed) overlapping frames.

    Returns an (n_frames, frame_len) array; frame k starts at k * hop.
    """
    fs = buffer.sample_rate_hz
    length = config.frame_len(fs)
    hop = config.hop(fs)
    x = buffer.samples
    if len(x) < length:
        warnings.warn("buffer shorter than one frame; no frames produced")
        return np.zeros((0, config.fft_size(fs) if pad_to_fft else length))
    n_frames = (len(x) - length) // hop + 1
    idx = np.arange(length)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx]
    if window:
        frames = frames * hamming(length)
    if pad_to_fft:
        out = np.zeros((n_frames, config.fft_size(fs)))
        out[:, :length] = frames
        frames = out
    return frames


def autocorrelation(frame: np.ndarray, max_lag: int) -> np.ndarray:
    """r[k] = sum_n x[n] x[n+k] for k = 0..max_lag."""
    x = np.asarray(frame, dtype=np.float64)
    if max_lag >= len(x):
        raise ValueError("max_lag must be below the frame length")
    full = np.correlate(x, x, mode="full")
    return full[len(x) - 1:len(x) + max_lag]


def levinson_durbin(r: np.ndarray, order: int):
    """Solve the Toeplitz normal equations for the forward predictor.

    Returns (a, E): a[k-1] are the predictor coefficients of
    x_hat[n] = sum_k a_k x[n-k] and E is the residual energy. Near-singular
    systems (|reflection| >= 1) are retried with r[0] scaled up by 1e-9.
    """
    r = np.asarray(r, dtype=np.float64)
    if r[0] <= 0:
        raise ValueError("r[0] must be positive")
    for attempt in range(2):
        a = np.zeros(order)
        e = r[0]
        ok = True
        for i in range(1, order + 1):
            k = (r[i] - np.dot(a[:i - 1], r[i - 1:0:-1])) / e
            if abs(k) >= 1.0:
                ok = False
                break
            a[i - 1] = k
            if i > 1:
                a[:i - 1] -= k * a[i - 2::-1]
            e *= 1.0 - k * k
        if ok:
            return a, e
        log.warning("ill-conditioned autocorrelation; regularizing r[0]")
        r = r.copy()
        r[0] *= 1.0 + 1e-9
    # still unstable after regularization: clamp the offending step
    a = np.zeros(order)
    e = r[0]
    for i in range(1, order + 1):
        k = (r[i] - np.dot(a[:i - 1], r[i - 1:0:-1])) / e
        k = np.clip(k, -0.999999, 0.999999)
        a[i - 1] = k
        if i > 1:
            a[:i - 1] -= k * a[i - 2::-1]
        e *= 1.0 - k * k
    return a, e


def levinson_batch(R: np.ndarray, order: int):
    """Levinson-Durbin over many frames at once.

    R is (n_frames, order+1). Frames whose r[0] is below the energy floor
    yield zero coefficients; ill-conditioned frames fall back to the scalar
    path. Returns (A, E) with A of shape (n_frames, order).
    """
    R = np.asarray(R, dtype=np.float64)
    n = R.shape[0]
    A = np.zeros((n, order))
    live = R[:, 0] > ENERGY_FLOOR
    E = np.where(live, R[:, 0], 1.0)
    bad = np.zeros(n, dtype=bool)
    for i in range(1, order + 1):
        acc = np.einsum("fj,fj->f", A[:, :i - 1], R[:, i - 1:0:-1])
        k = np.where(live, (R[:, i] - acc) / E, 0.0)
        bad |= np.abs(k) >= 1.0
        k = np.clip(k, -0.999999, 0.999999)
        if i > 1:
            A[:, :i - 1] -= k[:, None] * A[:, i - 2::-1]
        A[:, i - 1] = k
        E = E * (1.0 - k * k)
    for f in np.nonzero(bad & live)[0]:
        A[f], E[f] = levinson_durbin(R[f], order)
    E = np.where(live, E, 0.0)
    return A, E


def lpc_to_cepstrum(a: np.ndarray, n_ceps: int) -> np.ndarray:
    """Cepstrum of the all-pole model 1/A(z) via the standard recursion."""
    a = np.asarray(a, dtype=np.float64)
    p = len(a)
    c = np.zeros(n_ceps)
    for n in range(1, n_ceps + 1):
        acc = a[n - 1] if n <= p else 0.0
        lo = max(1, n - p)
        for k in range(lo, n):
            acc += (k / n) * c[k - 1] * a[n - k - 1]
        c[n - 1] = acc
    return c


def lpc_to_cepstrum_batch(A: np.ndarray, n_ceps: int) -> np.ndarray:
    F, p = A.shape
    C = np.zeros((F, n_ceps))
    for n in range(1, n_ceps + 1):
        acc = A[:, n - 1].copy() if n <= p else np.zeros(F)
        lo = max(1, n - p)
        if lo < n:
            ks = np.arange(lo, n)
            acc += np.einsum("fk,fk->f", C[:, ks - 1] * (ks / n), A[:, n - ks - 1])
        C[:, n - 1] = acc
    return C


def cepstrum_to_lpc(c: np.ndarray, order: int) -> np.ndarray:
    """Invert the cepstrum recursion, truncated at the given LPC order."""
    c = np.asarray(c, dtype=np.float64)
    a = np.zeros(order)
    for n in range(1, order + 1):
        acc = c[n - 1] if n <= len(c) else 0.0
        for k in range(1, n):
            acc -= (k / n) * c[k - 1] * a[n - k - 1]
        a[n - 1] = acc
    return a


def mel_scale(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_filters: int, fft_len: int, fs: int) -> np.ndarray:
    """Triangular mel-spaced filters on rfft bins, each normalized to unit
    weight so a flat power spectrum gives equal filter outputs."""
    n_bins = fft_len // 2 + 1
    freqs = np.arange(n_bins) * fs / fft_len
    edges = mel_to_hz(np.linspace(0.0, mel_scale(fs / 2.0), n_filters + 2))
    bank = np.zeros((n_filters, n_bins))
    for m in range(n_filters):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        tri = np.maximum(0.0, np.minimum(up, down))
        s = tri.sum()
        if s > 0:
            bank[m] = tri / s
    return bank


def melcepst_frames(frames: np.ndarray, n_coeffs: int, fft_len: int,
                    n_filters: int, fs: int) -> np.ndarray:
    """Mel cepstra (coefficients 1..n_coeffs) for padded frames."""
    spectrum = np.abs(rfft(frames, n=fft_len, axis=-1)) ** 2
    energies = spectrum @ mel_filterbank(n_filters, fft_len, fs).T
    logs = np.log(np.maximum(energies, LOG_FLOOR))
    ceps = dct(logs, type=2, axis=-1)
    return ceps[..., 1:n_coeffs + 1]


def melcepst(frame: np.ndarray, n_coeffs: int, fft_len: int,
             n_filters: int, fs: int) -> np.ndarray:
    return melcepst_frames(np.atleast_2d(frame), n_coeffs, fft_len,
                           n_filters, fs)[0]


def voicing_degree(frame: np.ndarray, fs: int = 8000,
                   lag_min: int = 20, lag_max: int = 160) -> float:
    """Degree of periodicity in [0, 1]: the peak normalized autocorrelation
    over pitch lags 50-400 Hz (20..160 samples at 8 kHz)."""
    x = np.asarray(frame, dtype=np.float64)
    if len(x) <= lag_max:
        raise ValueError("frame shorter than the pitch lag range")
    r0 = np.dot(x, x)
    if r0 < ENERGY_FLOOR:
        return 0.0
    best = 0.0
    for k in range(lag_min, lag_max + 1):
        head = x[:len(x) - k]
        tail = x[k:]
        denom = np.sqrt(np.dot(head, head) * np.dot(tail, tail))
        if denom < ENERGY_FLOOR:
            continue
        best = max(best, np.dot(head, tail) / denom)
    return float(np.clip(best, 0.0, 1.0))


def log_energy_ratio(high_frame: np.ndarray, nb_frame: np.ndarray,
                     eps: float = 1e-10) -> float:
    """High-band to narrowband energy ratio in dB."""
    eh = float(np.dot(high_frame, high_frame))
    en = float(np.dot(nb_frame, nb_frame))
    return 10.0 * np.log10((eh + eps) / (en + eps))


def lpcc_sequence(buffer: AudioBuffer, l: int,
                  config: FrameConfig = FrameConfig()) -> FeatureSequence:
    """LPCC features of dimension l (LPC order l) per frame, after
    pre-emphasis of the whole utterance."""
    emphasized = preemphasize(buffer)
    frames = frame_signal(emphasized, config, window=True)
    if frames.shape[0] == 0:
        return FeatureSequence(np.zeros((0, l)), "LPCC")
    R = np.stack([np.correlate(f, f, "full")[len(f) - 1:len(f) + l]
                  for f in frames])
    A, _ = levinson_batch(R, l)
    return FeatureSequence(lpc_to_cepstrum_batch(A, l), "LPCC")


def mfcc_sequence(buffer: AudioBuffer, l: int,
                  config: FrameConfig = FrameConfig()) -> FeatureSequence:
    """Mel-cepstral features of dimension l per frame (coefficient 0
    excluded), after pre-emphasis of the whole utterance."""
    fs = buffer.sample_rate_hz
    emphasized = preemphasize(buffer)
    frames = frame_signal(emphasized, config, window=True)
    if frames.shape[0] == 0:
        return FeatureSequence(np.zeros((0, l)), "MELCEPST")
    vecs = melcepst_frames(frames, l, config.fft_size(fs),
                           config.filter_count(fs), fs)
    return FeatureSequence(vecs, "MELCEPST")
