"""Free-field 4-microphone scene synthesis with SNR-controlled mixing.

Point sources are rendered with spherical (or, for ``distance=inf``,
plane-wave) delays realized as windowed-sinc fractional-delay filters.
Pseudo-diffuse noise is the sum of decorrelated copies of one noise signal
arriving as plane waves from a Fibonacci-sphere grid of directions, which
drives the inter-mic coherence toward the isotropic sinc model.

Scenes are deterministic: all randomness (signal generators, decorrelation
phases) derives from the spec's seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .audio import MultichannelAudio
from .dsp import delay_signal_exact
from .geometry import (
    FRONT_LEFT,
    FRONT_RIGHT,
    ArrayGeometry,
    azimuth_unit_vector,
    default_geometry,
    plane_wave_delays,
)
from .signals import make_signal

#: common causal headroom (samples) for plane-wave rendering, where relative
#: delays can be negative
PLANE_WAVE_BULK_DELAY = 32.0


@dataclass
class SourceSpec:
    """One localized source: azimuth in degrees, mono signal, distance in m.

    ``signal`` is either a 1-D sample array or a generator dict such as
    {"kind": "speech_noise", "modulated": true}; generators are resolved with
    the scene's seeded RNG. ``distance=inf`` renders a plane wave.
    """

    azimuth: float
    signal: object
    distance: float = np.inf
    snr_offset: float = 0.0

    def __post_init__(self) -> None:
        if not -180.0 <= self.azimuth < 180.0:
            raise ValueError("azimuth must lie in [-180, 180)")
        if not np.isfinite(self.snr_offset):
            raise ValueError("snr_offset must be finite")


@dataclass
class DiffuseSpec:
    """Pseudo-diffuse noise bed: signal, level in dB, number of virtual sources."""

    signal: object
    level: float = 0.0
    n_virtual: int = 36

    def __post_init__(self) -> None:
        if self.n_virtual < 8:
            raise ValueError("n_virtual must be >= 8")


@dataclass
class SceneSpec:
    """Recipe for one rendered scene; the seed fixes all randomness.

    reverb_t60 (seconds, default off) convolves every rendered bus with a
    per-mic exponentially decaying noise tail: a smoke-test knob for
    reverberation robustness, not a room model.
    """

    target: SourceSpec
    interferers: list[SourceSpec] = field(default_factory=list)
    diffuse: DiffuseSpec | None = None
    better_ear_snr: float = 0.0
    seed: int = 0
    duration_seconds: float | None = None
    sample_rate: int = 16000
    reverb_t60: float | None = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.better_ear_snr):
            raise ValueError("better_ear_snr must be finite")
        if self.reverb_t60 is not None and self.reverb_t60 <= 0:
            raise ValueError("reverb_t60 must be positive when set")


@dataclass
class RenderedScene:
    """Mixture plus the time-aligned references used by the metrics.

    mixture = target_full + noise_ref, sample exact; target_ref is the
    front-mic (ear level) pair of target_full.
    """

    mixture: MultichannelAudio       # 4 channels
    target_ref: MultichannelAudio    # 2 channels: clean, scaled front mics
    noise_ref: MultichannelAudio     # 4 channels
    target_full: MultichannelAudio   # 4 channels, clean scaled target render


def render_point_source(geom: ArrayGeometry, azimuth_deg: float, distance: float,
                        signal: np.ndarray) -> MultichannelAudio:
    """Render a mono signal as seen by the 4 mics from one direction.

    Spherical propagation: per-mic delay |src - p_m| / c and 1/r amplitude.
    With ``distance=inf`` the source is a unit-amplitude plane wave (delays
    from the far-field model plus a fixed causal bulk delay).
    """
    signal = np.asarray(signal, dtype=np.float64)
    fs = 16000
    if np.isinf(distance):
        taus = plane_wave_delays(geom, azimuth_deg) * fs + PLANE_WAVE_BULK_DELAY
        gains = np.ones(geom.n_mics)
    else:
        if distance < 0.5:
            raise ValueError("source distance must be >= 0.5 m (or inf)")
        src = distance * azimuth_unit_vector(azimuth_deg)
        dists = np.linalg.norm(src[None, :] - geom.mic_positions, axis=1)
        taus = dists / geom.speed_of_sound * fs
        gains = 1.0 / np.maximum(dists, 0.1)
    out = np.stack([g * delay_signal_exact(signal, t) for g, t in zip(gains, taus)])
    return MultichannelAudio(fs, out)


def _fibonacci_sphere(n: int) -> np.ndarray:
    """n near-uniform unit vectors on the sphere (spiral construction)."""
    k = np.arange(n)
    z = 1.0 - 2.0 * (k + 0.5) / n
    r = np.sqrt(1.0 - z * z)
    phi = k * np.pi * (3.0 - np.sqrt(5.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def render_diffuse(geom: ArrayGeometry, noise_signal: np.ndarray, n_virtual: int,
                   rng: np.random.Generator) -> MultichannelAudio:
    """Pseudo-diffuse field: decorrelated plane waves from a sphere of directions.

    Each virtual source replays the noise with independently randomized
    spectral phase (magnitude preserved), so the copies are mutually
    incoherent while keeping the original spectrum.
    """
    if n_virtual < 8:
        raise ValueError("n_virtual must be >= 8")
    noise_signal = np.asarray(noise_signal, dtype=np.float64)
    fs = 16000
    n = len(noise_signal)
    nfft = int(2 ** np.ceil(np.log2(n + 64)))
    spectrum = np.fft.rfft(noise_signal, n=nfft)
    k = np.arange(len(spectrum))
    directions = _fibonacci_sphere(n_virtual)
    out = np.zeros((geom.n_mics, n))
    for u in directions:
        phases = np.exp(2j * np.pi * rng.random(len(spectrum)))
        phases[0] = 1.0
        phases[-1] = 1.0
        copy_spectrum = spectrum * phases
        taus = -(geom.mic_positions @ u) / geom.speed_of_sound * fs + PLANE_WAVE_BULK_DELAY
        for m in range(geom.n_mics):
            ramp = np.exp(-2j * np.pi * k * taus[m] / nfft)
            out[m] += np.fft.irfft(copy_spectrum * ramp, n=nfft)[:n]
    out /= np.sqrt(n_virtual)
    return MultichannelAudio(fs, out)


def front_mic_power(samples: np.ndarray) -> float:
    """Mean power over the two front (ear-level) microphones."""
    return float(np.mean(samples[[FRONT_LEFT, FRONT_RIGHT]] ** 2))


def better_ear_snr_db(target: np.ndarray, noise: np.ndarray) -> float:
    """max of the broadband SNRs at the two front microphones, in dB."""
    snrs = []
    for m in (FRONT_LEFT, FRONT_RIGHT):
        et = np.sum(target[m] ** 2)
        en = np.sum(noise[m] ** 2)
        if en <= 0.0:
            raise ValueError("noise has zero energy at a front microphone")
        snrs.append(10.0 * np.log10(et / en))
    return max(snrs)


def _resolve_signal(spec_signal, n_samples: int | None, rng: np.random.Generator,
                    sample_rate: int) -> np.ndarray:
    if isinstance(spec_signal, dict):
        if n_samples is None:
            raise ValueError("generator signals need duration_seconds in the scene spec")
        kwargs = {k: v for k, v in spec_signal.items() if k != "kind"}
        return make_signal(spec_signal["kind"], n_samples, rng, sample_rate, **kwargs)
    sig = np.asarray(spec_signal, dtype=np.float64).ravel()
    if sig.size == 0:
        raise ValueError("empty source signal")
    return sig


def _fit_length(sig: np.ndarray, n: int) -> np.ndarray:
    """Trim or tile a signal to exactly n samples."""
    if len(sig) >= n:
        return sig[:n]
    reps = -(-n // len(sig))
    return np.tile(sig, reps)[:n]


def _reverb_tails(t60: float, n_mics: int, fs: int, rng: np.random.Generator,
                  direct_to_reverb_db: float = 3.0) -> np.ndarray:
    """Per-mic impulse responses: unit direct path plus a decaying noise tail."""
    n = int(round(t60 * fs))
    decay = np.exp(-6.908 * np.arange(1, n + 1) / n)  # -60 dB over t60
    irs = np.zeros((n_mics, n + 1))
    irs[:, 0] = 1.0
    for m in range(n_mics):
        tail = rng.standard_normal(n) * decay
        tail *= 10.0 ** (-direct_to_reverb_db / 20.0) / np.sqrt(np.sum(tail**2))
        irs[m, 1:] = tail
    return irs


def _apply_reverb(bus: np.ndarray, irs: np.ndarray) -> np.ndarray:
    out = np.empty_like(bus)
    for m in range(bus.shape[0]):
        out[m] = np.convolve(bus[m], irs[m])[: bus.shape[1]]
    return out


def mix_scene(spec: SceneSpec, geom: ArrayGeometry | None = None) -> RenderedScene:
    """Render and mix one scene at the requested better-ear SNR.

    Interferer renders are normalized to unit mean front-mic power and then
    scaled by their snr_offset; the diffuse bed likewise by its level. The
    target render is scaled so that the larger of the two front-mic SNRs
    equals ``better_ear_snr`` exactly. The returned mixture is the sample
    exact sum of the scaled target render and the noise bus.
    """
    if geom is None:
        geom = default_geometry()
    if spec.target is None:
        raise ValueError("scene has no target source")
    rng = np.random.default_rng(spec.seed)
    n_samples = (
        int(round(spec.duration_seconds * spec.sample_rate))
        if spec.duration_seconds
        else None
    )

    target_sig = _resolve_signal(spec.target.signal, n_samples, rng, spec.sample_rate)
    if n_samples is None:
        n_samples = len(target_sig)
    target_sig = _fit_length(target_sig, n_samples)
    target = render_point_source(geom, spec.target.azimuth, spec.target.distance,
                                 target_sig).samples

    noise = np.zeros((geom.n_mics, n_samples))
    for interf in spec.interferers:
        sig = _fit_length(_resolve_signal(interf.signal, n_samples, rng,
                                          spec.sample_rate), n_samples)
        rendered = render_point_source(geom, interf.azimuth, interf.distance, sig).samples
        power = front_mic_power(rendered)
        if power > 0.0:
            rendered *= 10.0 ** (interf.snr_offset / 20.0) / np.sqrt(power)
        noise += rendered
    if spec.diffuse is not None:
        sig = _fit_length(_resolve_signal(spec.diffuse.signal, n_samples, rng,
                                          spec.sample_rate), n_samples)
        rendered = render_diffuse(geom, sig, spec.diffuse.n_virtual, rng).samples
        power = front_mic_power(rendered)
        if power > 0.0:
            rendered *= 10.0 ** (spec.diffuse.level / 20.0) / np.sqrt(power)
        noise += rendered

    if not np.any(noise):
        raise ValueError("scene has no noise source; better-ear SNR would be infinite")

    if spec.reverb_t60 is not None:
        irs = _reverb_tails(spec.reverb_t60, geom.n_mics, spec.sample_rate, rng)
        target = _apply_reverb(target, irs)
        noise = _apply_reverb(noise, irs)

    gain_db = spec.better_ear_snr - better_ear_snr_db(target, noise)
    target *= 10.0 ** (gain_db / 20.0)

    fs = spec.sample_rate
    return RenderedScene(
        mixture=MultichannelAudio(fs, target + noise),
        target_ref=MultichannelAudio(fs, target[[FRONT_LEFT, FRONT_RIGHT]].copy()),
        noise_ref=MultichannelAudio(fs, noise),
        target_full=MultichannelAudio(fs, target.copy()),
    )


def scene_spec_from_json(source) -> SceneSpec:
    """Build a SceneSpec from a JSON file path, file object or dict.

    Schema::

        {
          "seed": 7,
          "duration_seconds": 2.0,
          "better_ear_snr": 0.0,
          "target": {"azimuth": 0, "signal": {"kind": "speech_noise"}},
          "interferers": [
            {"azimuth": 60, "signal": {"kind": "speech_noise"}, "snr_offset": 0}
          ],
          "diffuse": {"signal": {"kind": "white"}, "level": -5, "n_virtual": 36}
        }

    A "signal" may instead be a string path to a mono 16 kHz WAV file.
    """
    if isinstance(source, dict):
        data = source
    elif hasattr(source, "read"):
        data = json.load(source)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            data = json.load(fh)

    def load_signal(sig):
        if isinstance(sig, str):
            from .audio import read_wav

            audio = read_wav(sig)
            if audio.sample_rate != 16000:
                raise ValueError(f"scene signals must be 16 kHz, got {audio.sample_rate}")
            return audio.samples[0]
        return sig

    def source_spec(d):
        return SourceSpec(
            azimuth=float(d["azimuth"]),
            signal=load_signal(d["signal"]),
            distance=float(d.get("distance", np.inf)),
            snr_offset=float(d.get("snr_offset", 0.0)),
        )

    diffuse = None
    if data.get("diffuse") is not None:
        d = data["diffuse"]
        diffuse = DiffuseSpec(
            signal=load_signal(d["signal"]),
            level=float(d.get("level", 0.0)),
            n_virtual=int(d.get("n_virtual", 36)),
        )
    reverb = data.get("reverb_t60")
    return SceneSpec(
        target=source_spec(data["target"]),
        interferers=[source_spec(d) for d in data.get("interferers", [])],
        diffuse=diffuse,
        better_ear_snr=float(data.get("better_ear_snr", 0.0)),
        seed=int(data.get("seed", 0)),
        duration_seconds=data.get("duration_seconds"),
        reverb_t60=float(reverb) if reverb is not None else None,
    )
