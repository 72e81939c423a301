"""ITU-T G.711 A-law companding.

A-law maps 13-bit linear samples (16-bit input truncated by 3 bits) onto
8-bit codes with a sign bit, a 3-bit segment number and a 4-bit mantissa,
followed by even-bit inversion (XOR 0x55). Encode and decode are total
functions over their input ranges.
"""

import numpy as np

SIGN_BIT = 0x80
SEG_SHIFT = 4
QUANT_MASK = 0x0F
EVEN_BIT_MASK = 0x55


def alaw_encode(sample: int) -> int:
    """Encode a 16-bit signed linear sample to an 8-bit A-law code."""
    x = int(sample)
    if x >= 0:
        sign = SIGN_BIT
        mag = x
    else:
        sign = 0
        mag = -x
    if mag > 32767:
        mag = 32767
    # 12-bit magnitude (16-bit input truncated to A-law precision)
    mag >>= 3
    if mag < 32:
        seg = 0
        mant = mag >> 1
    else:
        seg = mag.bit_length() - 5
        mant = (mag >> seg) - 16
    code = sign | (seg << SEG_SHIFT) | mant
    return code ^ EVEN_BIT_MASK


def alaw_decode(code: int) -> int:
    """Decode an 8-bit A-law code to a 16-bit signed linear sample."""
    c = (int(code) & 0xFF) ^ EVEN_BIT_MASK
    seg = (c & 0x70) >> SEG_SHIFT
    mant = c & QUANT_MASK
    # reconstruct at the segment midpoint, on the 13-bit scale, then x8
    if seg == 0:
        mag = (mant << 1) + 1
    else:
        mag = ((mant << 1) + 33) << (seg - 1)
    mag <<= 3
    return mag if c & SIGN_BIT else -mag


_DECODE_TABLE = np.array([alaw_decode(c) for c in range(256)], dtype=np.int16)


def alaw_encode_array(samples: np.ndarray) -> np.ndarray:
    """Vectorized encode of an int16 array to uint8 A-law codes."""
    x = np.asarray(samples, dtype=np.int64)
    sign = np.where(x >= 0, SIGN_BIT, 0)
    mag = np.minimum(np.abs(x), 32767) >> 3
    # segment = position of the highest set bit above the linear range
    seg = np.zeros_like(mag)
    for s in range(1, 8):
        seg = np.where(mag >= (32 << (s - 1)), s, seg)
    mant = np.where(seg == 0, mag >> 1, (mag >> seg) - 16)
    code = (sign | (seg << SEG_SHIFT) | mant) ^ EVEN_BIT_MASK
    return code.astype(np.uint8)


def alaw_decode_array(codes: np.ndarray) -> np.ndarray:
    """Vectorized decode of uint8 A-law codes to int16 samples."""
    return _DECODE_TABLE[np.asarray(codes, dtype=np.uint8)]
