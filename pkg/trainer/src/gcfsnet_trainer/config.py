"""Model and training configuration."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; mirrors the engine's configuration."""

    variant: str = "binaural"
    n_bins: int = 65
    latent: int = 128
    groups: int = 8
    hidden: int = 32

    def __post_init__(self) -> None:
        if self.variant not in ("monaural", "binaural"):
            raise ValueError("variant must be 'monaural' or 'binaural'")
        if self.latent % self.groups:
            raise ValueError("latent must be divisible by groups")

    @property
    def m_feat(self) -> int:
        return 2 if self.variant == "monaural" else 4

    @property
    def m_filter(self) -> int:
        return 2

    @property
    def feature_size(self) -> int:
        return self.m_feat * 2 * self.n_bins

    @property
    def group_size(self) -> int:
        return self.latent // self.groups


@dataclass(frozen=True)
class LossConfig:
    """Compressed spectral MSE: exponent c, complex/magnitude blend alpha,
    evaluated on a 20 ms / 10 ms / 320-point STFT after reconstruction."""

    compression: float = 0.3   # c
    alpha: float = 0.3
    stft_win: int = 320
    stft_hop: int = 160
    stft_nfft: int = 320

    def __post_init__(self) -> None:
        if not 0.0 < self.compression <= 1.0:
            raise ValueError("compression exponent must lie in (0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


@dataclass(frozen=True)
class SceneRatios:
    """Interference composition of training scenes; must sum to one."""

    speech_only: float = 0.30
    noise_only: float = 0.30
    both: float = 0.40

    def __post_init__(self) -> None:
        if abs(self.speech_only + self.noise_only + self.both - 1.0) > 1e-9:
            raise ValueError("scene ratios must sum to 1")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    lr_init: float = 2e-3
    lr_decay_per_epoch: float = 0.98
    plateau_patience: int = 5
    plateau_factor: float = 0.5
    autoclip_percentile: float = 10.0
    loss: LossConfig = field(default_factory=LossConfig)
    ratios: SceneRatios = field(default_factory=SceneRatios)
