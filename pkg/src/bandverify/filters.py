"""Channel simulation and rate conversion.

All filters are linear-phase FIR (Kaiser-windowed sinc) applied with
explicit group-delay compensation, so the output of every stage stays
time-aligned with its input. Designs are cached per sample rate.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve, firwin, kaiserord

from .audio import AudioBuffer


@dataclass(frozen=True)
class FirFilter:
    taps: np.ndarray
    nominal_delay_samples: int

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Filter and remove the group delay; output length equals input."""
        y = fftconvolve(np.asarray(x, dtype=np.float64), self.taps, mode="full")
        d = self.nominal_delay_samples
        return y[d:d + len(x)]

    def to_csv(self, path):
        np.savetxt(path, self.taps, delimiter=",")


def _kaiser_fir(cutoffs, fs, atten_db, width_hz, pass_zero):
    numtaps, beta = kaiserord(atten_db, width_hz / (fs / 2))
    numtaps |= 1  # odd length, type-I linear phase
    taps = firwin(numtaps, cutoffs, window=("kaiser", beta),
                  pass_zero=pass_zero, fs=fs)
    return FirFilter(taps, (numtaps - 1) // 2)


@lru_cache(maxsize=None)
def potsband_filter(fs: int) -> FirFilter:
    # mask: <=0.5 dB ripple in [400, 3000], >=30 dB below 150 Hz,
    # >=40 dB above 4 kHz; cutoffs midway through each transition band
    if fs < 6800:
        raise ValueError(f"sample rate {fs} too low for a 300-3400 Hz band")
    return _kaiser_fir([275.0, 3700.0], fs, 50.0, 250.0, pass_zero=False)


@lru_cache(maxsize=None)
def _halfband_lowpass(fs: int) -> FirFilter:
    # -6 dB point at fs/4; used by band_split and decimation
    return _kaiser_fir(fs / 4, fs, 60.0, 0.025 * fs, pass_zero=True)


@lru_cache(maxsize=None)
def _interp_lowpass(fs_out: int) -> FirFilter:
    # stopband starts at the original Nyquist (fs_out/4); gain 2 restores
    # the amplitude lost to zero insertion
    width = 0.01875 * fs_out
    f = _kaiser_fir(fs_out / 4 - width / 2, fs_out, 60.0, width, pass_zero=True)
    return FirFilter(2.0 * f.taps, f.nominal_delay_samples)


def preemphasize(buffer: AudioBuffer, alpha: float = 0.95) -> AudioBuffer:
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must be in [0, 1)")
    x = buffer.samples
    y = np.concatenate(([x[0]], x[1:] - alpha * x[:-1])) if len(x) else x
    return AudioBuffer(y, buffer.sample_rate_hz)


def preemphasize_frame(frame: np.ndarray, alpha: float = 0.95) -> np.ndarray:
    f = np.asarray(frame, dtype=np.float64)
    if len(f) == 0:
        return f
    return np.concatenate(([f[0]], f[1:] - alpha * f[:-1]))


def potsband(buffer: AudioBuffer) -> AudioBuffer:
    """Simulate the 300-3400 Hz telephone channel."""
    filt = potsband_filter(buffer.sample_rate_hz)
    return AudioBuffer(filt.apply(buffer.samples), buffer.sample_rate_hz)


def upsample_2x_interp(buffer: AudioBuffer) -> AudioBuffer:
    """Double the sample rate with an interpolating lowpass."""
    fs_out = 2 * buffer.sample_rate_hz
    up = np.zeros(2 * len(buffer.samples))
    up[::2] = buffer.samples
    return AudioBuffer(_interp_lowpass(fs_out).apply(up), fs_out)


def spectral_fold_2x(buffer: AudioBuffer) -> AudioBuffer:
    """Zero-insertion upsampling with no interpolation filter: the baseband
    spectrum plus its mirror image about the original Nyquist."""
    up = np.zeros(2 * len(buffer.samples))
    up[::2] = buffer.samples
    return AudioBuffer(up, 2 * buffer.sample_rate_hz)


def downsample_2x(buffer: AudioBuffer) -> AudioBuffer:
    """Halve the sample rate (anti-alias lowpass, then decimate)."""
    low = _halfband_lowpass(buffer.sample_rate_hz).apply(buffer.samples)
    return AudioBuffer(low[::2], buffer.sample_rate_hz // 2)


def highpass_half(buffer: AudioBuffer) -> AudioBuffer:
    """Keep only content above fs/4 (the upper octave)."""
    fs = buffer.sample_rate_hz
    low = _halfband_lowpass(fs).apply(buffer.samples)
    return AudioBuffer(buffer.samples - low, fs)


def band_split(buffer: AudioBuffer):
    """Split a 16 kHz signal into its low [0, 4] kHz and high [4, 8] kHz
    bands, both folded down to an 8 kHz rate.

    The high band is translated to baseband by (-1)^n modulation (a tone at
    f appears at 8000 - f) before lowpass filtering and decimation.
    """
    fs = buffer.sample_rate_hz
    if fs != 16000:
        raise ValueError(f"band_split expects 16 kHz input, got {fs}")
    filt = _halfband_lowpass(fs)
    x = buffer.samples
    mod = x * np.where(np.arange(len(x)) % 2 == 0, 1.0, -1.0)
    low = AudioBuffer(filt.apply(x)[::2], fs // 2)
    high = AudioBuffer(filt.apply(mod)[::2], fs // 2)
    return low, high
