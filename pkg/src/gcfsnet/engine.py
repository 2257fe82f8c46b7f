"""Frame-processor contract, streaming driver and real-time-factor benchmark.

Every processor consumes hop-sized (2 ms) multichannel blocks and emits two
output channels (left ear, right ear). Time-domain processors work on the
blocks directly; frequency-domain processors derive from
:class:`StftFilterProcessor`, which owns the analysis/synthesis states and
adds one window length (64 samples) of algorithmic latency.
"""

from __future__ import annotations

import platform
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .audio import MultichannelAudio
from .dsp import StftAnalyzer, StftConfig, StftSynthesizer

N_EARS = 2


class FrameProcessor(ABC):
    """Causal block processor: output at block k depends on blocks <= k only.

    Stateful subclasses must implement reset() such that two runs from reset
    state on identical input are bit-identical.
    """

    n_in_channels: int = 4
    n_out_channels: int = N_EARS
    algorithmic_latency: int = 0  # samples
    hop: int = 32

    def __init__(self) -> None:
        self.clip_count = 0        # output samples beyond [-1, 1]
        self.input_clip_count = 0  # input samples beyond [-1, 1] (flagged, accepted)

    @abstractmethod
    def process_block(self, block: np.ndarray) -> np.ndarray:
        """Process one (n_in_channels, hop) block into a (2, hop) block."""

    def reset(self) -> None:
        self.clip_count = 0
        self.input_clip_count = 0


class BypassProcessor(FrameProcessor):
    """Passes the two front microphones straight to the ears (no delay)."""

    def __init__(self, n_in_channels: int = 4, ear_channels: tuple[int, int] = (0, 1)):
        super().__init__()
        self.n_in_channels = n_in_channels
        self.ear_channels = ear_channels
        self.algorithmic_latency = 0

    def process_block(self, block: np.ndarray) -> np.ndarray:
        return block[list(self.ear_channels)].copy()


class GainProcessor(FrameProcessor):
    """Broadband gain on the front microphones, with output clip counting."""

    def __init__(self, gain_db: float, n_in_channels: int = 4,
                 ear_channels: tuple[int, int] = (0, 1)):
        super().__init__()
        if not np.isfinite(gain_db):
            raise ValueError("gain_db must be finite")
        self.gain_db = gain_db
        self.gain = 10.0 ** (gain_db / 20.0)
        self.n_in_channels = n_in_channels
        self.ear_channels = ear_channels

    def process_block(self, block: np.ndarray) -> np.ndarray:
        out = block[list(self.ear_channels)] * self.gain
        self.clip_count += int(np.count_nonzero(np.abs(out) > 1.0))
        return out


class StftFilterProcessor(FrameProcessor):
    """Base for frequency-domain processors.

    Subclasses implement filter_frame(), mapping the per-channel analysis
    spectra of one frame to two ear spectra. Analysis and synthesis state is
    handled here; latency is one window length.
    """

    def __init__(self, n_in_channels: int = 4, cfg: StftConfig = StftConfig()):
        super().__init__()
        self.cfg = cfg
        self.n_in_channels = n_in_channels
        self.algorithmic_latency = cfg.window_len
        self._analyzer = StftAnalyzer(cfg, n_in_channels)
        self._synthesizer = StftSynthesizer(cfg, N_EARS)

    @abstractmethod
    def filter_frame(self, bins: np.ndarray, frame_index: int) -> np.ndarray:
        """Map (n_in_channels, n_bins) spectra to (2, n_bins) ear spectra."""

    def reset(self) -> None:
        super().reset()
        self._analyzer.reset()
        self._synthesizer.reset()

    def process_block(self, block: np.ndarray) -> np.ndarray:
        frame = self._analyzer.step(block)
        ears = self.filter_frame(frame.bins, frame.frame_index)
        return self._synthesizer.step(ears)


class StftIdentityProcessor(StftFilterProcessor):
    """Identity filter: analysis then synthesis of the ear channels.

    Useful as the reference for round-trip fidelity; output is the selected
    input channels delayed by window_len samples.
    """

    def __init__(self, n_in_channels: int = 2, ear_channels: tuple[int, int] = (0, 1),
                 cfg: StftConfig = StftConfig()):
        super().__init__(n_in_channels, cfg)
        self.ear_channels = ear_channels

    def filter_frame(self, bins: np.ndarray, frame_index: int) -> np.ndarray:
        return bins[list(self.ear_channels)]


def process_stream(proc: FrameProcessor, audio: MultichannelAudio) -> MultichannelAudio:
    """Drive a processor over a whole signal; output length equals input length.

    The trailing partial block is zero-padded. Input must be finite and match
    the processor's channel count.
    """
    if audio.channels != proc.n_in_channels:
        raise ValueError(
            f"processor expects {proc.n_in_channels} channels, got {audio.channels}"
        )
    audio.validate()
    proc.input_clip_count += int(np.count_nonzero(np.abs(audio.samples) > 1.0))
    hop = proc.hop
    n = audio.n_samples
    n_blocks = -(-n // hop)
    padded = np.zeros((audio.channels, n_blocks * hop))
    padded[:, :n] = audio.samples
    out = np.empty((N_EARS, n_blocks * hop))
    for k in range(n_blocks):
        sl = slice(k * hop, (k + 1) * hop)
        out[:, sl] = proc.process_block(padded[:, sl])
    return MultichannelAudio(audio.sample_rate, out[:, :n])


@dataclass
class RtfReport:
    """Wall-clock statistics of a processing run.

    rtf = wall_seconds / audio_seconds; a frame misses its deadline when it
    takes longer than the hop duration (2 ms). Statistics come from the
    fastest repetition.
    """

    audio_seconds: float
    wall_seconds: float
    rtf: float
    per_frame_p50_us: float
    per_frame_p95_us: float
    per_frame_p99_us: float
    deadline_misses: int
    machine: str


def measure_rtf(proc: FrameProcessor, audio: MultichannelAudio,
                repetitions: int = 3) -> RtfReport:
    """Benchmark a processor single-threaded over `repetitions` passes."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    hop = proc.hop
    n_blocks = audio.n_samples // hop
    blocks = audio.samples[:, : n_blocks * hop]
    deadline_s = hop / audio.sample_rate

    best_wall = np.inf
    best_times = None
    for _ in range(repetitions):
        proc.reset()
        times = np.empty(n_blocks)
        t_start = time.perf_counter()
        for k in range(n_blocks):
            t0 = time.perf_counter()
            proc.process_block(blocks[:, k * hop : (k + 1) * hop])
            times[k] = time.perf_counter() - t0
        wall = time.perf_counter() - t_start
        if wall < best_wall:
            best_wall = wall
            best_times = times

    audio_seconds = n_blocks * hop / audio.sample_rate
    p50, p95, p99 = np.percentile(best_times, [50, 95, 99]) * 1e6
    return RtfReport(
        audio_seconds=audio_seconds,
        wall_seconds=best_wall,
        rtf=best_wall / audio_seconds,
        per_frame_p50_us=float(p50),
        per_frame_p95_us=float(p95),
        per_frame_p99_us=float(p99),
        deadline_misses=int(np.count_nonzero(best_times > deadline_s)),
        machine=f"{platform.machine()} / {platform.processor() or 'unknown cpu'} / "
                f"python {platform.python_version()}",
    )
