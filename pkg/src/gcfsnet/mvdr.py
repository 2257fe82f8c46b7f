"""Fixed binaural MVDR beamformer steered to the front.

All four microphones feed both ear outputs. Weights are computed once at
startup per frequency bin under an isotropic diffuse noise model with
diagonal loading; the left and right ear share steering direction and noise
model and differ only in the reference microphone used to normalize the
steering vector, which preserves the target's interaural cues.

Steering defaults to the free-field plane-wave model; a measured acoustic
transfer function table (CSV, one row per microphone and bin) can override
it, see :func:`load_atf_csv`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dsp import StftConfig
from .engine import StftFilterProcessor
from .geometry import (
    FRONT_LEFT,
    FRONT_RIGHT,
    ArrayGeometry,
    default_geometry,
    diffuse_covariance,
    steering_vector,
)


@dataclass(frozen=True)
class MvdrConfig:
    """diagonal_loading is the base loading; wng_limit caps ||w||^2 per bin.

    The cap bounds the white-noise gain at 0 dB (array gain never below the
    reference mic for spatially white noise) and keeps the weight spectrum
    smooth across bins, which the superdirective low-frequency solution under
    small loading is not. Set wng_limit=None to disable the cap.
    """

    steer_azimuth: float = 0.0
    diagonal_loading: float = 0.01
    wng_limit: float | None = 1.0
    reference_mics: tuple[int, int] = (FRONT_LEFT, FRONT_RIGHT)  # (left, right)

    def __post_init__(self) -> None:
        if self.diagonal_loading <= 0:
            raise ValueError("diagonal_loading must be positive")
        if self.wng_limit is not None and self.wng_limit <= 0:
            raise ValueError("wng_limit must be positive")


def mvdr_weights(d: np.ndarray, gamma: np.ndarray, loading: float) -> np.ndarray:
    """Distortionless minimum-variance weights w = R^-1 d / (d^H R^-1 d).

    R is the loaded noise model gamma + loading * I. The constraint
    w^H d = 1 holds to numerical precision by construction.
    """
    if loading <= 0:
        raise ValueError("loading must be positive")
    gamma = np.asarray(gamma, dtype=complex)
    d = np.asarray(d, dtype=complex)
    loaded = gamma + loading * np.eye(len(d))
    try:
        r_inv_d = np.linalg.solve(loaded, d)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"MVDR solve failed (noise model singular even with loading {loading})"
        ) from exc
    return r_inv_d / (d.conj() @ r_inv_d)


def constrained_loading(d: np.ndarray, gamma: np.ndarray, base_loading: float,
                        wng_limit: float | None) -> float:
    """Smallest loading >= base_loading with ||w||^2 <= wng_limit (bisection).

    ||w(loading)||^2 decreases monotonically with loading, approaching
    ||d||^-2 <= 1 for the normalized steering vector, so a cap >= 1 is always
    reachable.
    """
    if wng_limit is None:
        return base_loading
    if np.sum(np.abs(mvdr_weights(d, gamma, base_loading)) ** 2) <= wng_limit:
        return base_loading
    lo, hi = base_loading, base_loading
    while np.sum(np.abs(mvdr_weights(d, gamma, hi)) ** 2) > wng_limit:
        hi *= 4.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.sum(np.abs(mvdr_weights(d, gamma, mid)) ** 2) > wng_limit:
            lo = mid
        else:
            hi = mid
    return hi


def load_atf_csv(path, n_bins: int = 65, n_mics: int = 4) -> np.ndarray:
    """Read a target-direction acoustic transfer function table.

    CSV columns: ``mic,bin,re,im`` with one row per (mic, bin); values are
    the complex transfer factors from the target source to each microphone.
    Returns a (n_mics, n_bins) complex array. Every (mic, bin) pair must be
    present exactly once.
    """
    table = np.full((n_mics, n_bins), np.nan, dtype=complex)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            m, b = int(row["mic"]), int(row["bin"])
            if not (0 <= m < n_mics and 0 <= b < n_bins):
                raise ValueError(f"ATF entry out of range: mic {m}, bin {b}")
            table[m, b] = float(row["re"]) + 1j * float(row["im"])
    if np.any(np.isnan(table)):
        raise ValueError("ATF table is missing (mic, bin) entries")
    return table


def save_atf_csv(path, atf: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mic", "bin", "re", "im"])
        for m in range(atf.shape[0]):
            for b in range(atf.shape[1]):
                writer.writerow([m, b, f"{atf[m, b].real:.17g}", f"{atf[m, b].imag:.17g}"])


def build_weight_table(geom: ArrayGeometry, cfg: MvdrConfig,
                       stft: StftConfig = StftConfig(),
                       atf: np.ndarray | None = None) -> np.ndarray:
    """Per-ear, per-bin weights, shape (2, n_bins, 4).

    With `atf` given (shape (4, n_bins) complex), the steering vectors come
    from the measured transfer functions instead of the plane-wave model;
    bins where the reference mic's ATF is zero are rejected.
    """
    if atf is not None and atf.shape != (geom.n_mics, stft.n_bins):
        raise ValueError(f"ATF table must have shape {(geom.n_mics, stft.n_bins)}")
    table = np.empty((2, stft.n_bins, geom.n_mics), dtype=complex)
    for b, f in enumerate(stft.bin_freqs()):
        gamma = diffuse_covariance(geom, f)
        for ear, ref in enumerate(cfg.reference_mics):
            if atf is None:
                d = steering_vector(geom, cfg.steer_azimuth, f, ref_mic=ref)
            else:
                if atf[ref, b] == 0:
                    raise ValueError(f"ATF is zero at reference mic {ref}, bin {b}")
                d = atf[:, b] / atf[ref, b]
            loading = constrained_loading(d, gamma, cfg.diagonal_loading, cfg.wng_limit)
            table[ear, b] = mvdr_weights(d, gamma, loading)
    return table


class MvdrProcessor(StftFilterProcessor):
    """Time-invariant beamformer: ear output = sum_m conj(w_ear_m) Y_m per bin."""

    def __init__(self, geom: ArrayGeometry | None = None,
                 cfg: MvdrConfig = MvdrConfig(), stft: StftConfig = StftConfig(),
                 atf: np.ndarray | None = None):
        super().__init__(n_in_channels=4, cfg=stft)
        self.geom = geom if geom is not None else default_geometry()
        self.mvdr_cfg = cfg
        self.weights = build_weight_table(self.geom, cfg, stft, atf=atf)
        self._w_conj = self.weights.conj()

    def filter_frame(self, bins: np.ndarray, frame_index: int) -> np.ndarray:
        # (2, n_bins, 4) x (4, n_bins) -> (2, n_bins)
        return np.einsum("ebm,mb->eb", self._w_conj, bins)
