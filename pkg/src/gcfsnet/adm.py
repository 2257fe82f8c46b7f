"""Bilateral adaptive differential microphone (2-mic, first order).

Each side combines its front/back pair into forward and backward cardioids
using a sub-sample internal delay T = spacing / c, forms y = cF - beta * cB
and adapts beta per sample by normalized gradient descent on the output
power, clamped to [0, 1] so the null stays in the rear hemisphere. A first
order low-pass equalizer compensates the 6 dB/oct high-pass tilt of the
differential pair, calibrated for unity frontal response at 1 kHz.

Left and right sides run independently; the processor's latency equals the
bulk group delay of the fractional-delay filters (16 samples).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import bilinear, freqz, lfilter, lfilter_zi

from .dsp import fractional_delay_fir
from .engine import FrameProcessor
from .geometry import BACK_LEFT, BACK_RIGHT, FRONT_LEFT, FRONT_RIGHT

N_TAPS = 32
BULK_DELAY = N_TAPS // 2  # samples


@dataclass(frozen=True)
class AdmConfig:
    mic_spacing: float = 0.011          # m
    sample_rate: int = 16000
    beta_init: float = 0.5
    step_size: float = 0.01             # NLMS mu
    power_smoothing: float = 0.999      # per-sample coefficient alpha
    eq_cutoff: float = 100.0            # Hz
    speed_of_sound: float = 343.0

    def __post_init__(self) -> None:
        if self.mic_spacing <= 0:
            raise ValueError("mic_spacing must be positive")
        if not 0.0 <= self.beta_init <= 1.0:
            raise ValueError("beta_init must lie in [0, 1]")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not 0.0 < self.power_smoothing < 1.0:
            raise ValueError("power_smoothing must lie in (0, 1)")
        if self.delay_samples > 10.0:
            raise ValueError(
                f"mic spacing {self.mic_spacing} m implies an internal delay of "
                f"{self.delay_samples:.1f} samples (> 10); misconfigured geometry"
            )

    @property
    def delay_samples(self) -> float:
        return self.mic_spacing / self.speed_of_sound * self.sample_rate


def null_angle_deg(beta: float) -> float:
    """Low-frequency null direction of y = cF - beta * cB, in degrees."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    return float(np.degrees(np.arccos((beta - 1.0) / (beta + 1.0))))


def _equalizer_coeffs(cfg: AdmConfig) -> tuple[np.ndarray, np.ndarray]:
    """One-pole low-pass 1/(1 + j f/f_c), gain set for unity at 1 kHz."""
    wc = 2.0 * np.pi * cfg.eq_cutoff
    b, a = bilinear([wc], [1.0, wc], fs=cfg.sample_rate)
    f_match = 1000.0
    _, h = freqz(b, a, worN=[f_match], fs=cfg.sample_rate)
    t_sec = cfg.mic_spacing / cfg.speed_of_sound
    pair_gain = 2.0 * np.sin(2.0 * np.pi * f_match * t_sec)
    g = 1.0 / (pair_gain * np.abs(h[0]))
    return g * np.asarray(b), np.asarray(a)


class AdmSide:
    """One ear's adaptive differential pair; single-stream, stateful."""

    def __init__(self, cfg: AdmConfig = AdmConfig()):
        self.cfg = cfg
        self.h_bulk = fractional_delay_fir(float(BULK_DELAY), N_TAPS)
        self.h_frac = fractional_delay_fir(BULK_DELAY + cfg.delay_samples, N_TAPS)
        self.eq_b, self.eq_a = _equalizer_coeffs(cfg)
        self.adapt = True
        self.reset()

    def reset(self) -> None:
        self.beta = self.cfg.beta_init
        self.power = 0.0
        self._zi_front_bulk = np.zeros(N_TAPS - 1)
        self._zi_back_bulk = np.zeros(N_TAPS - 1)
        self._zi_front_frac = np.zeros(N_TAPS - 1)
        self._zi_back_frac = np.zeros(N_TAPS - 1)
        self._zi_eq = np.zeros(max(len(self.eq_a), len(self.eq_b)) - 1)

    def cardioids(self, front: np.ndarray, back: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Advance the delay-line states and return (cF, cB) for this block."""
        fb, self._zi_front_bulk = lfilter(self.h_bulk, 1.0, front, zi=self._zi_front_bulk)
        bb, self._zi_back_bulk = lfilter(self.h_bulk, 1.0, back, zi=self._zi_back_bulk)
        ff, self._zi_front_frac = lfilter(self.h_frac, 1.0, front, zi=self._zi_front_frac)
        bf, self._zi_back_frac = lfilter(self.h_frac, 1.0, back, zi=self._zi_back_frac)
        return fb - bf, bb - ff

    def process(self, front: np.ndarray, back: np.ndarray) -> np.ndarray:
        front = np.asarray(front, dtype=np.float64)
        back = np.asarray(back, dtype=np.float64)
        c_forward, c_backward = self.cardioids(front, back)
        y = np.empty_like(c_forward)
        beta = self.beta
        power = self.power
        if self.adapt:
            mu = self.cfg.step_size
            alpha = self.cfg.power_smoothing
            one_minus_alpha = 1.0 - alpha
            eps = 1e-8
            cf_list = c_forward.tolist()
            cb_list = c_backward.tolist()
            y_list = y.tolist()
            for i, (cf, cb) in enumerate(zip(cf_list, cb_list)):
                yi = cf - beta * cb
                y_list[i] = yi
                power = alpha * power + one_minus_alpha * cb * cb
                beta += mu * yi * cb / (eps + power)
                if beta < 0.0:
                    beta = 0.0
                elif beta > 1.0:
                    beta = 1.0
            y = np.asarray(y_list)
        else:
            y = c_forward - beta * c_backward
        self.beta = beta
        self.power = power
        out, self._zi_eq = lfilter(self.eq_b, self.eq_a, y, zi=self._zi_eq)
        return out

    def step(self, front: float, back: float) -> float:
        """Single-sample update; returns the equalized output sample."""
        return float(self.process(np.array([front]), np.array([back]))[0])


class AdmProcessor(FrameProcessor):
    """Bilateral ADM: independent AdmSide per ear on its local mic pair."""

    def __init__(self, cfg: AdmConfig = AdmConfig()):
        super().__init__()
        self.cfg = cfg
        self.n_in_channels = 4
        self.algorithmic_latency = BULK_DELAY
        self.left = AdmSide(cfg)
        self.right = AdmSide(cfg)

    def reset(self) -> None:
        super().reset()
        self.left.reset()
        self.right.reset()

    def process_block(self, block: np.ndarray) -> np.ndarray:
        out_l = self.left.process(block[FRONT_LEFT], block[BACK_LEFT])
        out_r = self.right.process(block[FRONT_RIGHT], block[BACK_RIGHT])
        return np.stack([out_l, out_r])
