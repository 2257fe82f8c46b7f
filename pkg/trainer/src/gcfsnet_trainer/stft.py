"""Torch STFT framing matching the engine's deployment chain.

Analysis: periodic-Hann frames (window = 2 * hop) starting one hop early
(the first frame sees hop leading zeros), zero-padded symmetrically to the
FFT size, unnormalized rfft. Synthesis: 1/nfft irfft of the full frame,
overlap-add at hop stride; the identity round trip is the input delayed by
one window length. Mirrors the engine operation for operation so that an
exported container reproduces the trainer's forward pass. The default
parameters are the deployment framing (4 ms / 2 ms / 128 at 16 kHz).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass(frozen=True)
class StftParams:
    window_len: int = 64
    hop: int = 32
    nfft: int = 128

    def __post_init__(self) -> None:
        if self.window_len != 2 * self.hop:
            raise ValueError("window_len must equal 2 * hop")
        if self.nfft < self.window_len or (self.nfft - self.window_len) % 2:
            raise ValueError("nfft must leave equal front/back padding")

    @property
    def pad(self) -> int:
        return (self.nfft - self.window_len) // 2

    @property
    def n_bins(self) -> int:
        return self.nfft // 2 + 1

    @property
    def delay(self) -> int:
        """Round-trip delay of analyze->synthesize in samples."""
        return self.window_len - self.hop + self.pad


DEPLOY = StftParams()


def hann_window(win: int, dtype=torch.float64) -> torch.Tensor:
    n = torch.arange(win, dtype=dtype)
    return 0.5 - 0.5 * torch.cos(2.0 * torch.pi * n / win)


def analyze(x: torch.Tensor, params: StftParams = DEPLOY) -> torch.Tensor:
    """(channels, n) real -> (frames, channels, n_bins) complex; n % hop == 0."""
    if x.shape[-1] % params.hop:
        raise ValueError("signal length must be a multiple of the hop")
    c, _ = x.shape
    padded = torch.cat([torch.zeros(c, params.hop, dtype=x.dtype), x], dim=1)
    frames = padded.unfold(dimension=1, size=params.window_len, step=params.hop)
    frames = frames * hann_window(params.window_len, x.dtype)
    stacked = torch.zeros(c, frames.shape[1], params.nfft, dtype=x.dtype)
    stacked[:, :, params.pad : params.pad + params.window_len] = frames
    return torch.fft.rfft(stacked, n=params.nfft, dim=-1).permute(1, 0, 2)


def synthesize(spec: torch.Tensor, params: StftParams = DEPLOY) -> torch.Tensor:
    """(frames, channels, n_bins) complex -> (channels, frames * hop) real.

    Full-frame overlap-add; output sample m holds the reconstruction of
    input sample m - window_len (the first two blocks are the warm-up).
    """
    t, c, _ = spec.shape
    frames = torch.fft.irfft(spec, n=params.nfft, dim=-1)  # (T, c, nfft)
    cols = frames.permute(1, 2, 0).reshape(c, params.nfft, t)
    out = torch.nn.functional.fold(
        cols, output_size=(1, (t - 1) * params.hop + params.nfft),
        kernel_size=(1, params.nfft), stride=(1, params.hop),
    ).reshape(c, -1)
    return out[:, : t * params.hop]
