"""Toy-scale training loop with quantization-aware forward and export.

Deliberately small (tens of scenes, <= a few thousand steps): the point is
end-to-end correctness of the recipe - cMSE loss on reconstructed signals,
Adam with per-epoch decay and plateau halving, percentile gradient
clipping, straight-through fake quantization - and a container the engine
loads with bit-exact forward parity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import container
from .clipping import AutoClip
from .config import ModelConfig, TrainConfig
from .loss import cmse_loss
from .model import GcfsNet, enhance
from .scenes import RenderedScene
from .schedule import PlateauTracker, lr_at
from .stft import DEPLOY, StftParams


def training_loss(model: GcfsNet, mixture: torch.Tensor, target: torch.Tensor,
                  train_cfg: TrainConfig, quantized: bool = True,
                  stft_params: StftParams = DEPLOY) -> torch.Tensor:
    """cMSE between the enhanced mixture and the latency-aligned target.

    The enhancement chain delays its output by one window length, so the
    estimate's head and the target's tail are trimmed before the loss;
    otherwise the model would be asked for a non-causal (time-advanced)
    output.
    """
    est = enhance(model, mixture, quantized=quantized, stft_params=stft_params)
    lat = stft_params.delay
    return cmse_loss(est[:, lat:], target[:, :-lat], train_cfg.loss)


@dataclass
class TrainResult:
    model: GcfsNet
    losses: list[float]
    initial_loss: float
    final_loss: float
    log_rows: list[dict]


def export_weights(model: GcfsNet, path) -> container.Container:
    """Quantize and write the model as a `.gcfs` container.

    Out-of-range parameters clamp onto the [-1, 1] grid; the clamp count is
    recorded on the returned container.
    """
    packed = container.pack(
        model.cfg, model.param_arrays(),
        float(model.input_scale.detach()), float(model.r.detach()),
    )
    container.write(path, packed)
    if packed.n_clipped:
        print(f"export: clamped {packed.n_clipped} parameters to [-1, 1]")
    return packed


def train_toy(model_cfg: ModelConfig, train_cfg: TrainConfig,
              scenes: list[RenderedScene], steps: int, seed: int = 0,
              log_path: Path | None = None, quantized: bool = True,
              passthrough_init: bool = True,
              dtype: torch.dtype = torch.float32) -> TrainResult:
    """Train on a fixed small scene set for a fixed number of steps.

    One "epoch" of the schedule is one pass over the scene list; the scene
    list doubles as the dev set for plateau tracking (toy scale by contract:
    at most 64 scenes, at most 2000 steps). float32 is plenty for training;
    the parity and gradient checks run the model in float64.
    """
    if not scenes:
        raise ValueError("no scenes")
    if len(scenes) > 64 or steps > 2000:
        raise ValueError("toy scale exceeded (<= 64 scenes, <= 2000 steps)")

    torch.manual_seed(seed)
    torch.set_num_threads(1)
    model = GcfsNet(model_cfg, seed=seed, dtype=dtype,
                    passthrough_init=passthrough_init)
    optimizer = torch.optim.Adam(model.parameters(), lr=train_cfg.lr_init)
    clipper = AutoClip(train_cfg.autoclip_percentile)
    plateau = PlateauTracker(train_cfg.plateau_patience)

    tensors = [
        (torch.as_tensor(s.mixture, dtype=dtype),
         torch.as_tensor(s.target_ref, dtype=dtype))
        for s in scenes
    ]

    losses: list[float] = []
    log_rows: list[dict] = []
    steps_per_epoch = len(tensors)
    epoch_losses: list[float] = []

    for step in range(steps):
        epoch = step // steps_per_epoch
        lr = lr_at(epoch, plateau.events, train_cfg)
        for group in optimizer.param_groups:
            group["lr"] = lr

        mixture, target = tensors[step % steps_per_epoch]
        loss = training_loss(model, mixture, target, train_cfg, quantized=quantized)
        value = float(loss.detach())
        if not np.isfinite(value):
            raise RuntimeError(f"training diverged at step {step}: loss={value}")

        optimizer.zero_grad()
        loss.backward()
        norm, threshold = clipper.clip(model.parameters())
        optimizer.step()

        losses.append(value)
        log_rows.append({"step": step, "loss": value, "lr": lr,
                         "clip_threshold": threshold, "grad_norm": norm})
        epoch_losses.append(value)
        if (step + 1) % steps_per_epoch == 0:
            plateau.update(float(np.mean(epoch_losses)))
            epoch_losses = []

    if log_path is not None:
        with open(log_path, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["step", "loss", "lr", "clip_threshold", "grad_norm"]
            )
            writer.writeheader()
            writer.writerows(log_rows)

    window = max(1, min(10, len(losses) // 10))
    return TrainResult(
        model=model,
        losses=losses,
        initial_loss=float(np.mean(losses[:window])),
        final_loss=float(np.mean(losses[-window:])),
        log_rows=log_rows,
    )
