"""WAV file I/O and the in-memory audio representation.

All DSP stages operate on float samples normalized to [-1, 1]; quantization
happens only at the file boundary. Supported containers are RIFF/WAVE with
16-bit PCM (format tag 1) or 8-bit G.711 A-law (format tag 6).
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .alaw import alaw_decode_array, alaw_encode_array


class WavFormatError(ValueError):
    """Raised for malformed or unsupported WAV files."""


@dataclass
class AudioBuffer:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample_rate_hz must be positive")
        self.sample_rate_hz = int(self.sample_rate_hz)

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def _find_chunk(data: bytes, name: bytes, start: int = 12):
    pos = start
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        if cid == name:
            return pos + 8, size
        pos += 8 + size + (size & 1)
    return None, None


def read_wav(path) -> AudioBuffer:
    """Read a PCM-16 or A-law WAV file into a normalized AudioBuffer."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")
    fmt_pos, fmt_size = _find_chunk(data, b"fmt ")
    if fmt_pos is None or fmt_size < 16:
        raise WavFormatError(f"{path}: missing fmt chunk")
    tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", data, fmt_pos)
    if channels != 1:
        raise WavFormatError(f"{path}: only mono supported, got {channels} channels")
    data_pos, data_size = _find_chunk(data, b"data")
    if data_pos is None:
        raise WavFormatError(f"{path}: missing data chunk")
    if data_pos + data_size > len(data):
        raise WavFormatError(f"{path}: truncated data chunk")
    raw = data[data_pos:data_pos + data_size]
    if tag == 1 and bits == 16:
        ints = np.frombuffer(raw[: len(raw) - (len(raw) % 2)], dtype="<i2")
        samples = ints.astype(np.float64) / 32768.0
    elif tag == 6 and bits == 8:
        codes = np.frombuffer(raw, dtype=np.uint8)
        samples = alaw_decode_array(codes).astype(np.float64) / 32768.0
    else:
        raise WavFormatError(
            f"{path}: unsupported encoding (format tag {tag}, {bits} bits)")
    return AudioBuffer(samples, rate)


def write_wav(buffer: AudioBuffer, path, bit_depth: str = "16-pcm") -> int:
    """Write an AudioBuffer to a WAV file.

    bit_depth is "16-pcm" or "8-alaw". Samples outside [-1, 1] saturate;
    the clip count is returned.
    """
    x = buffer.samples
    clipped = int(np.sum((x > 1.0) | (x < -1.0)))
    ints = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    if bit_depth == "16-pcm":
        payload = ints.astype("<i2").tobytes()
        tag, bits, block = 1, 16, 2
    elif bit_depth == "8-alaw":
        payload = alaw_encode_array(ints).tobytes()
        tag, bits, block = 6, 8, 1
    else:
        raise ValueError(f"unknown bit_depth {bit_depth!r}")
    rate = buffer.sample_rate_hz
    fmt = struct.pack("<HHIIHH", tag, 1, rate, rate * block, block, bits)
    chunks = b"".join([
        b"fmt ", struct.pack("<I", len(fmt)), fmt,
        b"data", struct.pack("<I", len(payload)), payload,
        b"\x00" if len(payload) % 2 else b"",
    ])
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks)
    return clipped
