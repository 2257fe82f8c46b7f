"""Low-latency streaming STFT: 4 ms Hann analysis, 2 ms hop, FFT size 128.

The 64-sample analysis frame is zero-padded symmetrically to the FFT size
before an unnormalized forward transform. A periodic Hann at 50% overlap
sums to one, so plain overlap-add with no synthesis window reconstructs the
input exactly; the unmodified analysis/synthesis chain delays the signal by
one window length (64 samples).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StftConfig:
    """Framing parameters shared by every frequency-domain processor."""

    sample_rate: int = 16000
    window_len: int = 64
    hop: int = 32
    nfft: int = 128

    def __post_init__(self) -> None:
        if self.window_len % 2 or self.window_len != 2 * self.hop:
            raise ValueError("window_len must be even and equal 2 * hop")
        if self.nfft < self.window_len or (self.nfft - self.window_len) % 2:
            raise ValueError("nfft must leave equal front/back padding")

    @property
    def pad_front(self) -> int:
        return (self.nfft - self.window_len) // 2

    @property
    def pad_back(self) -> int:
        return (self.nfft - self.window_len) // 2

    @property
    def n_bins(self) -> int:
        return self.nfft // 2 + 1

    def bin_freqs(self) -> np.ndarray:
        """Center frequency in Hz of each of the n_bins spectrum bins."""
        return np.arange(self.n_bins) * (self.sample_rate / self.nfft)


@dataclass
class SpectralFrame:
    """One analysis frame: per-channel complex spectra, bins 0..nfft/2."""

    bins: np.ndarray  # (channels, n_bins) complex
    frame_index: int

    @property
    def channels(self) -> int:
        return self.bins.shape[0]

    @property
    def n_bins(self) -> int:
        return self.bins.shape[1]


def make_analysis_window(cfg: StftConfig) -> np.ndarray:
    """Periodic Hann window; shifted copies at 50% overlap sum to one."""
    n = np.arange(cfg.window_len)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / cfg.window_len)


class StftAnalyzer:
    """Streaming analysis: consumes hop-sized blocks, emits SpectralFrames.

    The internal tail buffer keeps the previous window_len - hop samples per
    channel, so feeding a long signal in any block partition yields frames
    bit-identical to feeding it at once.
    """

    def __init__(self, cfg: StftConfig = StftConfig(), n_channels: int = 1):
        self.cfg = cfg
        self.n_channels = n_channels
        self.window = make_analysis_window(cfg)
        self.reset()

    def reset(self) -> None:
        self._tail = np.zeros((self.n_channels, self.cfg.window_len - self.cfg.hop))
        self._frame_index = 0

    def step(self, block: np.ndarray) -> SpectralFrame:
        """Analyze one hop of new samples, shape (n_channels, hop)."""
        cfg = self.cfg
        block = np.asarray(block, dtype=np.float64)
        if block.shape != (self.n_channels, cfg.hop):
            raise ValueError(
                f"expected block of shape {(self.n_channels, cfg.hop)}, got {block.shape}"
            )
        frame = np.concatenate([self._tail, block], axis=1) * self.window
        self._tail = block.copy()
        padded = np.zeros((self.n_channels, cfg.nfft))
        padded[:, cfg.pad_front : cfg.pad_front + cfg.window_len] = frame
        bins = np.fft.rfft(padded, axis=1)
        out = SpectralFrame(bins=bins, frame_index=self._frame_index)
        self._frame_index += 1
        return out

    def process(self, samples: np.ndarray) -> list[SpectralFrame]:
        """Analyze a (n_channels, k*hop) signal; loops `step` internally."""
        samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        if samples.shape[1] % self.cfg.hop:
            raise ValueError("signal length must be a multiple of hop")
        return [
            self.step(samples[:, i : i + self.cfg.hop])
            for i in range(0, samples.shape[1], self.cfg.hop)
        ]


class StftSynthesizer:
    """Streaming inverse: consumes one spectrum per channel, emits one hop.

    Inverse transform uses 1/nfft scaling and the full nfft-long frame
    (window plus both pad regions) is overlap-added. For unmodified spectra
    the pads are exactly zero; for filtered spectra they carry the filter
    kernel tails, which plain windowed-core OLA would truncate. Either way
    the round trip comes out delayed by exactly window_len samples.
    """

    def __init__(self, cfg: StftConfig = StftConfig(), n_channels: int = 1):
        self.cfg = cfg
        self.n_channels = n_channels
        self.reset()

    def reset(self) -> None:
        self._acc = np.zeros((self.n_channels, self.cfg.nfft))

    def step(self, bins: np.ndarray) -> np.ndarray:
        """Synthesize one frame, shape (n_channels, n_bins) -> (n_channels, hop)."""
        cfg = self.cfg
        bins = np.atleast_2d(np.asarray(bins))
        if bins.shape != (self.n_channels, cfg.n_bins):
            raise ValueError(
                f"expected bins of shape {(self.n_channels, cfg.n_bins)}, got {bins.shape}"
            )
        self._acc += np.fft.irfft(bins, n=cfg.nfft, axis=1)
        out = self._acc[:, : cfg.hop].copy()
        self._acc[:, : -cfg.hop] = self._acc[:, cfg.hop :]
        self._acc[:, -cfg.hop :] = 0.0
        return out


def fractional_delay_fir(delay: float, n_taps: int = 32) -> np.ndarray:
    """Windowed-sinc FIR whose group delay is `delay` samples.

    Accuracy is best with `delay` near n_taps/2; integer delays come out as
    exact unit impulses. The window is a Hann lobe centered on the sinc peak.
    """
    if not 1.0 <= delay <= n_taps - 2.0:
        raise ValueError(f"delay {delay} outside usable range [1, {n_taps - 2}]")
    x = np.arange(n_taps) - delay
    half = n_taps / 2.0
    lobe = np.where(np.abs(x) < half, 0.5 * (1.0 + np.cos(np.pi * x / half)), 0.0)
    return np.sinc(x) * lobe


def delay_signal(x: np.ndarray, delay: float, n_taps: int = 32) -> np.ndarray:
    """Delay a 1-D signal by `delay` >= 0 samples with a windowed-sinc FIR.

    Output has the same length as the input; samples shifted past the end
    are dropped, the head is zero-filled. Phase accuracy is limited by the
    FIR length (about 0.01 rad at 4 kHz for 32 taps); use
    :func:`delay_signal_exact` where that matters.
    """
    if delay < 0:
        raise ValueError("delay must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    d_int = int(round(delay)) - n_taps // 2
    tau = delay - d_int
    h = fractional_delay_fir(tau, n_taps)
    full = np.convolve(x, h)
    out = np.zeros_like(x)
    n = len(x)
    if d_int >= 0:
        out[d_int:] = full[: n - d_int]
    else:
        out[:] = full[-d_int : n - d_int]
    return out


def delay_signal_exact(x: np.ndarray, delay: float) -> np.ndarray:
    """Delay a 1-D signal by `delay` >= 0 samples via an FFT phase ramp.

    Exact linear phase at every frequency. The transform is zero-padded far
    enough that nothing wraps back into the output range; output length
    equals input length.
    """
    if delay < 0:
        raise ValueError("delay must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    nfft = int(2 ** np.ceil(np.log2(n + int(np.ceil(delay)) + 1)))
    spectrum = np.fft.rfft(x, n=nfft)
    k = np.arange(len(spectrum))
    spectrum *= np.exp(-2j * np.pi * k * delay / nfft)
    return np.fft.irfft(spectrum, n=nfft)[:n]
