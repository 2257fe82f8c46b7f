"""Microphone array geometry, plane-wave steering and diffuse-field coherence.

Head-centered coordinates: x points to the front, y to the left, z up.
Azimuth is measured from the front, positive toward the left ear, so a
source at +60 deg is on the listener's left. Channel order everywhere is
[front-left, front-right, back-left, back-right].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FRONT_LEFT, FRONT_RIGHT, BACK_LEFT, BACK_RIGHT = range(4)

#: channel indices after mirroring the scene about the median plane
MIRRORED_CHANNELS = [FRONT_RIGHT, FRONT_LEFT, BACK_RIGHT, BACK_LEFT]


@dataclass(frozen=True)
class ArrayGeometry:
    """Positions of the four hearing-aid microphones in meters."""

    mic_positions: np.ndarray  # (4, 3)
    speed_of_sound: float = 343.0

    def __post_init__(self) -> None:
        pos = np.asarray(self.mic_positions, dtype=np.float64)
        if pos.shape != (4, 3):
            raise ValueError("mic_positions must have shape (4, 3)")
        object.__setattr__(self, "mic_positions", pos)

    @property
    def n_mics(self) -> int:
        return 4

    def pair_distances(self) -> np.ndarray:
        """Euclidean distance matrix between microphones, shape (4, 4)."""
        p = self.mic_positions
        return np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)

    def is_mirror_symmetric(self, tol: float = 1e-9) -> bool:
        """Left/right symmetry about the median (y = 0) plane."""
        mirrored = self.mic_positions.copy()
        mirrored[:, 1] *= -1.0
        return bool(np.allclose(mirrored[MIRRORED_CHANNELS], self.mic_positions, atol=tol))


def default_geometry(mic_spacing: float = 0.011, head_width: float = 0.15) -> ArrayGeometry:
    """Behind-the-ear pairs `mic_spacing` apart front-to-back, ears `head_width` apart."""
    dx = mic_spacing / 2.0
    dy = head_width / 2.0
    pos = np.array(
        [
            [+dx, +dy, 0.0],  # front-left
            [+dx, -dy, 0.0],  # front-right
            [-dx, +dy, 0.0],  # back-left
            [-dx, -dy, 0.0],  # back-right
        ]
    )
    return ArrayGeometry(pos)


def azimuth_unit_vector(azimuth_deg: float) -> np.ndarray:
    """Unit propagation direction of a source at the given azimuth (toward array)."""
    a = np.deg2rad(azimuth_deg)
    return np.array([np.cos(a), np.sin(a), 0.0])


def plane_wave_delays(geom: ArrayGeometry, azimuth_deg: float) -> np.ndarray:
    """Per-mic arrival times tau_m = -(u . p_m) / c in seconds (relative)."""
    u = azimuth_unit_vector(azimuth_deg)
    return -(geom.mic_positions @ u) / geom.speed_of_sound


def steering_vector(geom: ArrayGeometry, azimuth_deg: float, f: float,
                    ref_mic: int = FRONT_LEFT) -> np.ndarray:
    """Far-field steering vector d_m(f) = exp(-j 2 pi f tau_m), ref entry 1+0j."""
    tau = plane_wave_delays(geom, azimuth_deg)
    d = np.exp(-2j * np.pi * f * tau)
    return d / d[ref_mic]


def diffuse_covariance(geom: ArrayGeometry, f: float) -> np.ndarray:
    """Spatial coherence of an isotropic diffuse field: sinc(2 pi f d_ij / c)."""
    if f < 0:
        raise ValueError("frequency must be non-negative")
    x = 2.0 * np.pi * f * geom.pair_distances() / geom.speed_of_sound
    # sin(x)/x with the removable singularity at x = 0
    return np.sinc(x / np.pi)
