"""Deep filter-and-sum inference demo: containers, filtering and throughput.

A network estimates, per 2 ms frame and per ear, complex filter weights for
the two ipsilateral microphones plus a single-frame postfilter; real and
imaginary parts are tanh-bounded and scaled by the learned range r. Both
ears share one weight set and differ only in channel ordering. Weights ship
in a quantized `.gcfs` container (int8 weights, int16 biases); inference
math is floating point on the dequantized values.

This demo uses random weights: structure and speed are meaningful, the
enhancement itself is not (see the trainer package for that).
"""

import tempfile
import time
from pathlib import Path

import numpy as np

from gcfsnet.audio import MultichannelAudio
from gcfsnet.engine import measure_rtf, process_stream
from gcfsnet.gcfs import GcfsConfig, GcfsModel, GcfsProcessor, GcfsState, infer_frame, param_count
from gcfsnet.weights_io import container_from_params, load_container, save_container

for variant in ("monaural", "binaural"):
    cfg = GcfsConfig(variant=variant)
    print(f"{variant:8s}: feature size {cfg.feature_size:3d}, "
          f"{param_count(cfg):,} trainable scalars")

cfg = GcfsConfig(variant="binaural")
model = GcfsModel.random(cfg, seed=0, scale=0.3)

# container round trip
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "random.gcfs"
    save_container(path, container_from_params(cfg, model.params,
                                               model.input_scale, model.filter_range))
    loaded = GcfsModel.from_container(load_container(path))
    print(f"\ncontainer size on disk: {path.stat().st_size / 1024:.0f} kiB "
          f"(float64 in memory would be {8 * param_count(cfg) / 1024:.0f} kiB)")

# one frame of inference
rng = np.random.default_rng(1)
bins = 0.2 * (rng.standard_normal((4, 65)) + 1j * rng.standard_normal((4, 65)))
filters = infer_frame(loaded, GcfsState(cfg), bins[cfg.feature_channel_indices("left")])
print(f"filter range r = {filters.r}; max |Re W| = {np.max(np.abs(filters.w.real)):.3f}, "
      f"bounded: {filters.in_range()}")

# throughput on 10 s of 4-channel noise
audio = MultichannelAudio(16000, 0.1 * rng.standard_normal((4, 10 * 16000)))
report = measure_rtf(GcfsProcessor(loaded), audio, repetitions=2)
print(f"\nreal-time factor {report.rtf:.3f} "
      f"(p50 {report.per_frame_p50_us:.0f} us/frame, deadline misses "
      f"{report.deadline_misses} of {int(report.audio_seconds * 500)})")

t0 = time.perf_counter()
out = process_stream(GcfsProcessor(loaded), audio)
print(f"processed {audio.duration:.0f} s of audio into {out.channels} ear channels "
      f"in {time.perf_counter() - t0:.2f} s")
