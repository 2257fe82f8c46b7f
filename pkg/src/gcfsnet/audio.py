"""Planar multichannel PCM buffers and 16 kHz WAV I/O."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

ENGINE_SAMPLE_RATE = 16000


@dataclass
class MultichannelAudio:
    """Planar sample buffer: ``samples`` has shape (channels, n_samples).

    Values are nominally in [-1, 1]; out-of-range samples are legal and
    tracked by the processors' clipping counters, non-finite samples are not.
    """

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self) -> None:
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def validate(self) -> None:
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio contains non-finite samples")

    def copy(self) -> "MultichannelAudio":
        return MultichannelAudio(self.sample_rate, self.samples.copy())


def read_wav(path) -> MultichannelAudio:
    """Read a PCM WAV file (float32/float64, int16 or int32) as planar float."""
    rate, data = wavfile.read(path)
    if data.ndim == 1:
        data = data[:, None]
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample format: {data.dtype}")
    return MultichannelAudio(int(rate), samples.T)


def write_wav(path, audio: MultichannelAudio, dtype: str = "float32") -> None:
    """Write planar audio as an interleaved WAV file (float32 or int16)."""
    data = audio.samples.T
    if dtype == "float32":
        wavfile.write(path, audio.sample_rate, data.astype(np.float32))
    elif dtype == "int16":
        clipped = np.clip(data, -1.0, 1.0)
        wavfile.write(path, audio.sample_rate, np.round(clipped * 32767.0).astype(np.int16))
    else:
        raise ValueError("dtype must be 'float32' or 'int16'")
