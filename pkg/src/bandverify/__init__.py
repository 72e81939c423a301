"""Telephone-channel simulation, GMM bandwidth extension, and covariance
speaker verification toolkit."""

__version__ = "0.1.0"

from .audio import AudioBuffer, read_wav, write_wav
from .features import FrameConfig, FeatureSequence

__all__ = [
    "AudioBuffer",
    "read_wav",
    "write_wav",
    "FrameConfig",
    "FeatureSequence",
    "__version__",
]
