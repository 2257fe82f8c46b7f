"""Secondary acceptance criteria: engine/trainer parity and toy learning.

These tests consume the inference engine as an installed package: the
trainer writes `.gcfs` containers with its own serializer and the engine
loads and runs them, which makes the parity numbers a genuine
cross-implementation oracle. Run with -s to see the per-criterion lines.
"""

import time

import numpy as np
import pytest
import torch

torch.set_num_threads(1)

from gcfsnet_trainer import stft as tstft
from gcfsnet_trainer.config import ModelConfig, TrainConfig
from gcfsnet_trainer.model import GcfsNet, features_from_spec
from gcfsnet_trainer.scenes import render_scene
from gcfsnet_trainer.train import export_weights, train_toy

from gcfsnet.audio import MultichannelAudio
from gcfsnet.engine import BypassProcessor, process_stream
from gcfsnet.evaluation import si_sdr
from gcfsnet.gcfs import GcfsConfig, GcfsModel, GcfsProcessor, GcfsState, forward_frame
from gcfsnet.weights_io import load_container


def test_criterion_10_trainer_engine_parity(tmp_path):
    t0 = time.perf_counter()
    cfg = ModelConfig(variant="binaural")
    trainer_model = GcfsNet(cfg, seed=42, dtype=torch.float64)
    path = tmp_path / "parity.gcfs"
    export_weights(trainer_model, path)
    engine_model = GcfsModel.from_container(load_container(path))

    rng = np.random.default_rng(0)
    x = rng.standard_normal((4, 10 * 32))
    with torch.no_grad():
        spec = tstft.analyze(torch.as_tensor(x))
        feats = features_from_spec(spec, cfg.variant)  # (10, 2, B)
        w_t, c_t = trainer_model.forward_sequence(feats, quantized=True)

    state = GcfsState(GcfsConfig(variant="binaural"), n_streams=2)
    worst = 0.0
    for t in range(10):
        w_e, c_e = forward_frame(engine_model, state, feats[t].numpy())
        worst = max(worst, float(np.max(np.abs(w_e - w_t[t].numpy()))),
                    float(np.max(np.abs(c_e - c_t[t].numpy()))))
    assert worst < 1e-4, worst

    # gradient correctness: the full miniature-model finite-difference sweep
    # (every parameter; the instance and step size are validated in
    # test_gradcheck.py, where FD error was shown to shrink as h^2)
    from test_gradcheck import test_analytic_gradients_match_finite_differences

    test_analytic_gradients_match_finite_differences()

    print(f"[PASS] criterion 10: trainer/engine forward parity "
          f"(max diff {worst:.1e}) and gradient check [{time.perf_counter() - t0:.1f} s]")


def test_criterion_11_toy_learning(tmp_path):
    t0 = time.perf_counter()
    spec = {
        "seed": 21,
        "duration_seconds": 1.0,
        "better_ear_snr": -5.0,
        "target": {"azimuth": 0, "signal": {"kind": "speech_noise", "modulated": True}},
        "interferers": [{"azimuth": 90, "signal": {"kind": "white"}, "snr_offset": 0}],
        "diffuse": None,
        "level_dbfs": -20.0,
    }
    scene = render_scene(spec)

    result = train_toy(ModelConfig(variant="binaural"), TrainConfig(), [scene],
                       steps=200, seed=0, log_path=tmp_path / "train.csv")
    initial = result.losses[0]
    final = result.final_loss
    assert final <= 0.5 * initial, (initial, final)

    path = tmp_path / "toy.gcfs"
    export_weights(result.model, path)
    engine_model = GcfsModel.from_container(load_container(path))

    mixture = MultichannelAudio(16000, scene.mixture)
    enhanced = process_stream(GcfsProcessor(engine_model), mixture).samples
    bypassed = process_stream(BypassProcessor(), mixture).samples
    ref = scene.target_ref
    lat = 64
    si_model = max(si_sdr(enhanced[e, lat:], ref[e, :-lat]) for e in range(2))
    si_bypass = max(si_sdr(bypassed[e], ref[e]) for e in range(2))
    improvement = si_model - si_bypass
    assert improvement >= 3.0, (si_bypass, si_model)

    print(f"[PASS] criterion 11: toy overfit (loss {initial:.1f} -> {final:.1f}), "
          f"engine SI-SDR {si_bypass:.2f} -> {si_model:.2f} dB "
          f"(+{improvement:.2f} dB) [{time.perf_counter() - t0:.0f} s]")
