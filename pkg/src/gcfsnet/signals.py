"""Probe signal generators for tests, demos and the evaluation harness."""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

#: Denominator of the fixed 8-pole all-pole filter used to shape white noise
#: into a speech-like long-term spectrum (flat to ~250 Hz, about -8 dB at
#: 1 kHz and -25 dB at 4 kHz). Derivation: Yule-Walker fit to a smoothed
#: speech spectrum template, see docs/probe-signal.md.
SPEECH_AR_COEFFS = np.array(
    [
        1.0,
        -1.50864517,
        0.70127382,
        -0.22238742,
        0.13254691,
        -0.06991944,
        0.05084143,
        -0.03446096,
        0.0260592,
    ]
)


def white_noise(n_samples: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(n_samples)


def tone(freq_hz: float, n_samples: int, sample_rate: int = 16000,
         amplitude: float = 0.5) -> np.ndarray:
    n = np.arange(n_samples)
    return amplitude * np.sin(2.0 * np.pi * freq_hz * n / sample_rate)


def speech_shaped_noise(n_samples: int, rng: np.random.Generator,
                        sample_rate: int = 16000, modulated: bool = False,
                        rms: float = 0.1) -> np.ndarray:
    """Stationary speech-spectrum noise; optionally 4 Hz amplitude modulated.

    Modulation gives the probe a syllable-like envelope without changing its
    long-term spectrum much; the modulator never gates fully to zero.
    """
    x = lfilter([1.0], SPEECH_AR_COEFFS, rng.standard_normal(n_samples))
    if modulated:
        phase = rng.uniform(0.0, 2.0 * np.pi)
        mod = 0.55 + 0.45 * np.sin(2.0 * np.pi * 4.0 * np.arange(n_samples) / sample_rate + phase)
        x = x * mod
    return x * (rms / np.sqrt(np.mean(x**2)))


def make_signal(kind: str, n_samples: int, rng: np.random.Generator,
                sample_rate: int = 16000, **kwargs) -> np.ndarray:
    """Dispatch used by the scene-spec file format: white | speech_noise | tone."""
    if kind == "white":
        return 0.1 * white_noise(n_samples, rng)
    if kind == "speech_noise":
        return speech_shaped_noise(n_samples, rng, sample_rate,
                                   modulated=bool(kwargs.get("modulated", False)))
    if kind == "tone":
        return tone(float(kwargs.get("freq", 1000.0)), n_samples, sample_rate)
    raise ValueError(f"unknown signal kind: {kind!r}")
