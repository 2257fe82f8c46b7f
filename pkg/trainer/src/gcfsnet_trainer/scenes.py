"""Training-scene sampling and rendering through the engine's CLI.

Scene draws follow the mixing recipe: the interference class is
speech-only / noise-only / both with probabilities 0.30 / 0.30 / 0.40; the
target azimuth is uniform in [-10, 10] degrees; two interfering speakers
sit outside the +-20 degree cone with at least 10 degrees pairwise
separation; each speaker's better-ear SNR is uniform in [-8, 8] dB (applied
as a relative level offset); the localized/diffuse noise pair is offset by
a N(0, 5^2) dB relative SNR; the overall better-ear SNR is uniform in
[-8, 8] dB and the mix level is N(-28, 10^2) dBFS.

Rendering shells out to `python -m gcfsnet simulate` and reads the WAVs
back, so the trainer only touches the engine's public file interfaces.
"""

from __future__ import annotations

import json
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .config import SceneRatios

SPEECH_ONLY, NOISE_ONLY, BOTH = "speech_only", "noise_only", "both"


def sample_training_scene(rng: np.random.Generator,
                          ratios: SceneRatios = SceneRatios(),
                          duration_seconds: float = 2.0,
                          better_ear_snr: float | None = None,
                          max_tries: int = 1000) -> dict:
    """Draw one scene spec (engine JSON schema plus a level_dbfs field)."""
    u = rng.random()
    if u < ratios.speech_only:
        scene_class = SPEECH_ONLY
    elif u < ratios.speech_only + ratios.noise_only:
        scene_class = NOISE_ONLY
    else:
        scene_class = BOTH

    target_azimuth = rng.uniform(-10.0, 10.0)
    interferers = []

    if scene_class in (SPEECH_ONLY, BOTH):
        azimuths: list[float] = []
        for _ in range(max_tries):
            cand = rng.uniform(-180.0, 180.0)
            if cand >= 180.0 or abs(cand) < 20.0:
                continue
            if any(abs(cand - a) < 10.0 for a in azimuths):
                continue
            azimuths.append(cand)
            if len(azimuths) == 2:
                break
        else:
            raise RuntimeError(f"azimuth rejection sampling failed after {max_tries} tries")
        for az in azimuths:
            speaker_snr = rng.uniform(-8.0, 8.0)
            interferers.append({
                "azimuth": az,
                "signal": {"kind": "speech_noise", "modulated": True},
                "snr_offset": -speaker_snr,
            })

    diffuse = None
    if scene_class in (NOISE_ONLY, BOTH):
        noise_rel_snr = rng.normal(0.0, 5.0)
        noise_azimuth = rng.uniform(-180.0, 179.0)
        interferers.append({
            "azimuth": noise_azimuth,
            "signal": {"kind": "white"},
            "snr_offset": -4.0,  # localized noise sits below the speakers
        })
        diffuse = {"signal": {"kind": "white"}, "level": -4.0 - noise_rel_snr,
                   "n_virtual": 24}

    return {
        "class": scene_class,
        "seed": int(rng.integers(0, 2**31 - 1)),
        "duration_seconds": duration_seconds,
        "better_ear_snr": (rng.uniform(-8.0, 8.0)
                           if better_ear_snr is None else better_ear_snr),
        "target": {"azimuth": target_azimuth,
                   "signal": {"kind": "speech_noise", "modulated": True}},
        "interferers": interferers,
        "diffuse": diffuse,
        "level_dbfs": float(rng.normal(-28.0, 10.0)),
    }


@dataclass
class RenderedScene:
    mixture: np.ndarray     # (4, n)
    target_ref: np.ndarray  # (2, n)
    spec: dict


def _read_wav(path) -> np.ndarray:
    rate, data = wavfile.read(path)
    if rate != 16000:
        raise ValueError(f"expected 16 kHz, got {rate}")
    return np.atleast_2d(data.astype(np.float64).T if data.ndim > 1 else data[None, :].astype(np.float64))


def render_scene(spec: dict, workdir: Path | None = None) -> RenderedScene:
    """Render a scene spec via the engine CLI; applies the level_dbfs scale."""
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        tmp = Path(tmp)
        spec_path = tmp / "scene.json"
        spec_path.write_text(json.dumps(spec))
        mix, ref = tmp / "mix.wav", tmp / "ref.wav"
        result = subprocess.run(
            [sys.executable, "-m", "gcfsnet", "simulate", "--spec", str(spec_path),
             "--out-mix", str(mix), "--out-ref", str(ref)],
            capture_output=True, text=True,
        )
        if result.returncode != 0:
            raise RuntimeError(f"scene rendering failed: {result.stderr.strip()}")
        mixture = _read_wav(mix)
        target_ref = _read_wav(ref)

    # scale mixture and references together to the drawn absolute level
    level = spec.get("level_dbfs")
    if level is not None:
        rms = np.sqrt(np.mean(mixture[:2] ** 2))
        if rms > 0:
            gain = 10.0 ** (level / 20.0) / rms
            mixture = mixture * gain
            target_ref = target_ref * gain
    return RenderedScene(mixture=mixture, target_ref=target_ref, spec=spec)
