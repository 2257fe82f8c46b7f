"""Toy training demo: overfit one scene, export, evaluate in the engine.

Renders a single static scene (frontal speech target, white-noise
interferer at 90 degrees, -5 dB better-ear SNR) through the engine CLI,
trains the binaural model on it with the full recipe (compressed spectral
loss, Adam + decay, percentile clipping, fake-quantized weights), exports a
`.gcfs` container and measures the enhancement with the engine's own
processor and metrics. Takes a few minutes on a laptop CPU.
"""

import tempfile
from pathlib import Path

import numpy as np
import torch

from gcfsnet_trainer.config import ModelConfig, TrainConfig
from gcfsnet_trainer.scenes import render_scene
from gcfsnet_trainer.train import export_weights, train_toy

from gcfsnet.audio import MultichannelAudio
from gcfsnet.engine import BypassProcessor, process_stream
from gcfsnet.evaluation import si_sdr
from gcfsnet.gcfs import GcfsModel, GcfsProcessor
from gcfsnet.weights_io import load_container

spec = {
    "seed": 21,
    "duration_seconds": 1.0,
    "better_ear_snr": -5.0,
    "target": {"azimuth": 0, "signal": {"kind": "speech_noise", "modulated": True}},
    "interferers": [{"azimuth": 90, "signal": {"kind": "white"}, "snr_offset": 0}],
    "diffuse": None,
    "level_dbfs": -20.0,
}
print("rendering the training scene via the engine CLI ...")
scene = render_scene(spec)

steps = 200
print(f"training the binaural model for {steps} steps (quantization-aware) ...")
result = train_toy(ModelConfig("binaural"), TrainConfig(), [scene], steps=steps,
                   seed=0)
print(f"loss: {result.losses[0]:.1f} -> {result.final_loss:.1f}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "toy.gcfs"
    export_weights(result.model, path)
    model = GcfsModel.from_container(load_container(path))

    mixture = MultichannelAudio(16000, scene.mixture)
    enhanced = process_stream(GcfsProcessor(model), mixture).samples
    bypassed = process_stream(BypassProcessor(), mixture).samples
    lat = 64
    ref = scene.target_ref
    si_model = max(si_sdr(enhanced[e, lat:], ref[e, :-lat]) for e in range(2))
    si_bypass = max(si_sdr(bypassed[e], ref[e]) for e in range(2))
    print(f"better-ear SI-SDR: bypass {si_bypass:.2f} dB, "
          f"trained model {si_model:.2f} dB ({si_model - si_bypass:+.2f} dB)")
