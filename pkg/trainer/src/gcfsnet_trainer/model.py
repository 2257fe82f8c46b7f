"""Differentiable filter-and-sum network with quantization-aware forward.

The parameter set, shapes and naming follow the container's canonical table
exactly. In quantization-aware mode every weight (int8 grid) and bias
(int16 grid) passes through fake quantization with a straight-through
gradient, so the exported integer container reproduces the trained forward
pass bit-for-bit in float math. The two scalars (input scale, filter range
r) stay unquantized.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from . import stft
from .config import ModelConfig
from .container import QUANT_SCALE, param_table

FEATURE_CHANNELS = {
    "monaural": {"left": [0, 2], "right": [1, 3]},
    "binaural": {"left": [0, 1, 2, 3], "right": [1, 0, 3, 2]},
}
FILTER_CHANNELS = {"left": [0, 2], "right": [1, 3]}


def fake_quantize(x: torch.Tensor, scale: int) -> torch.Tensor:
    """Round-half-away-from-zero onto the symmetric grid, straight-through grad."""
    q = torch.clamp(torch.sign(x) * torch.floor(torch.abs(x) * scale + 0.5),
                    -scale, scale) / scale
    return x + (q - x).detach()


def _key(name: str) -> str:
    return name.replace(".", "__")


class GcfsNet(nn.Module):
    def __init__(self, cfg: ModelConfig, seed: int = 0, init_scale: float | None = None,
                 input_scale_init: float = 1.0, r_init: float = 2.0,
                 passthrough_init: bool = False, dtype: torch.dtype = torch.float64):
        """passthrough_init biases the output heads so the initial filters are
        approximately W = [1, 0], C = 1 (pass the front ipsilateral mic):
        training then starts from bypass quality instead of random filtering.
        """
        super().__init__()
        self.cfg = cfg
        self.dtype_ = dtype
        rng = np.random.default_rng(seed)
        for name, (shape, _) in param_table(cfg).items():
            if init_scale is not None:
                a = init_scale
            else:
                fan_in = shape[0] if len(shape) > 1 else shape[0]
                a = min(0.5, 1.0 / np.sqrt(fan_in)) if len(shape) > 1 else 0.25
            if name.endswith(".b"):
                values = np.zeros(shape)
            else:
                values = rng.uniform(-a, a, size=shape)
                if passthrough_init and name in ("w_head.w", "c_head.w"):
                    values = values * 0.1
            self.register_parameter(
                _key(name), nn.Parameter(torch.as_tensor(values, dtype=dtype))
            )
        self.input_scale = nn.Parameter(torch.tensor(input_scale_init, dtype=dtype))
        self.r = nn.Parameter(torch.tensor(r_init, dtype=dtype))
        if passthrough_init:
            unit = float(np.arctanh(1.0 / r_init))  # tanh(bias) * r = 1
            with torch.no_grad():
                getattr(self, _key("w_head.b"))[: cfg.n_bins] = unit   # Re(W), mic 0
                getattr(self, _key("c_head.b"))[: cfg.n_bins] = unit   # Re(C)

    def weight(self, name: str, quantized: bool) -> torch.Tensor:
        p = getattr(self, _key(name))
        if not quantized:
            return p
        scale = QUANT_SCALE["int16" if name.endswith(".b") else "int8"]
        return fake_quantize(p, scale)

    def param_arrays(self) -> dict[str, np.ndarray]:
        """Raw (latent, unquantized) parameters as numpy, canonical names."""
        return {
            name: getattr(self, _key(name)).detach().numpy().copy()
            for name in param_table(self.cfg)
        }

    def load_param_arrays(self, params: dict[str, np.ndarray]) -> None:
        with torch.no_grad():
            for name in param_table(self.cfg):
                getattr(self, _key(name)).copy_(
                    torch.as_tensor(params[name], dtype=self.dtype_)
                )

    def forward_sequence(self, feats: torch.Tensor, quantized: bool = True
                         ) -> tuple[torch.Tensor, torch.Tensor]:
        """(T, S, feature_size) real -> W (T, S, 2, F) complex, C (T, S, F) complex."""
        cfg = self.cfg
        t_len, s, b = feats.shape
        if b != cfg.feature_size:
            raise ValueError(f"expected feature size {cfg.feature_size}, got {b}")
        g, gs, u, f = cfg.groups, cfg.group_size, cfg.hidden, cfg.n_bins
        rows = s * g
        w = {name: self.weight(name, quantized) for name in param_table(cfg)}

        ds5_buf = [torch.zeros(rows, u, dtype=self.dtype_) for _ in range(4)]
        ds3_buf = [torch.zeros(rows, u, dtype=self.dtype_) for _ in range(2)]
        h1 = torch.zeros(rows, u, dtype=self.dtype_)
        h2 = torch.zeros(rows, u, dtype=self.dtype_)

        def gc_block(tag: str, x: torch.Tensor) -> torch.Tensor:
            pre = torch.tanh(x @ w[f"{tag}.pre.w"] + w[f"{tag}.pre.b"])
            mixed = torch.tanh(pre.reshape(s, cfg.latent) @ w[f"{tag}.mix.w"]
                               + w[f"{tag}.mix.b"])
            post = torch.tanh(mixed.reshape(rows, gs) @ w[f"{tag}.post.w"]
                              + w[f"{tag}.post.b"])
            return post + x

        def gru(tag: str, x: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
            gx = x @ w[f"{tag}.wx"] + w[f"{tag}.b"]
            gh_zr = h @ w[f"{tag}.wh"][:, : 2 * u]
            z = torch.sigmoid(gx[:, :u] + gh_zr[:, :u])
            rr = torch.sigmoid(gx[:, u : 2 * u] + gh_zr[:, u:])
            cand = torch.tanh(gx[:, 2 * u :] + (rr * h) @ w[f"{tag}.wh"][:, 2 * u :])
            return (1.0 - z) * h + z * cand

        w_frames = []
        c_frames = []
        for t in range(t_len):
            x = feats[t] * self.input_scale
            latent = torch.tanh(x @ w["input_fc.w"] + w["input_fc.b"])
            grouped = latent.reshape(rows, gs)
            h0 = torch.tanh(grouped @ w["conv.fc.w"] + w["conv.fc.b"])

            window5 = torch.stack(ds5_buf + [h0], dim=1)  # (rows, 5, u)
            ds5_buf = ds5_buf[1:] + [h0]
            d5 = torch.einsum("rkw,kw->rw", window5, w["conv.ds5.dw.w"]) + w["conv.ds5.dw.b"]
            c5 = torch.tanh(d5 @ w["conv.ds5.pw.w"] + w["conv.ds5.pw.b"])

            window3 = torch.stack(ds3_buf + [c5], dim=1)  # (rows, 3, u)
            ds3_buf = ds3_buf[1:] + [c5]
            d3 = torch.einsum("rkw,kw->rw", window3, w["conv.ds3.dw.w"]) + w["conv.ds3.dw.b"]
            c3 = torch.tanh(d3 @ w["conv.ds3.pw.w"] + w["conv.ds3.pw.b"])

            conv_out = c3 + h0 * w["conv.skip.w"]
            gc1 = gc_block("gc1", conv_out)
            h1 = gru("gru1", gc1, h1)
            h2 = gru("gru2", h1, h2)
            gru_out = h2 + gc1 * w["gru.skip.w"]
            gc2 = gc_block("gc2", gru_out)

            out_latent = (gc2 @ w["out_fc.w"] + w["out_fc.b"]).reshape(s, cfg.latent)
            w_flat = torch.tanh(out_latent @ w["w_head.w"] + w["w_head.b"]) * self.r
            c_flat = torch.tanh(out_latent @ w["c_head.w"] + w["c_head.b"]) * self.r
            w_parts = w_flat.reshape(s, cfg.m_filter, 2, f)
            c_parts = c_flat.reshape(s, 2, f)
            w_frames.append(torch.complex(w_parts[:, :, 0, :], w_parts[:, :, 1, :]))
            c_frames.append(torch.complex(c_parts[:, 0, :], c_parts[:, 1, :]))
        return torch.stack(w_frames), torch.stack(c_frames)


def features_from_spec(spec: torch.Tensor, variant: str) -> torch.Tensor:
    """(T, 4, F) complex frames -> (T, 2, feature_size) real, ears batched.

    Per ear: channels in ipsilateral-first order, each contributing its real
    parts then its imaginary parts.
    """
    feats = []
    for ear in ("left", "right"):
        ordered = spec[:, FEATURE_CHANNELS[variant][ear], :]
        feats.append(torch.cat([ordered.real, ordered.imag], dim=-1).flatten(1))
    return torch.stack(feats, dim=1)


def enhance(model: GcfsNet, mixture: torch.Tensor, quantized: bool = True,
            stft_params: stft.StftParams = stft.DEPLOY) -> torch.Tensor:
    """Full differentiable pipeline: (4, n) mixture -> (2, n) ear signals."""
    if stft_params.n_bins != model.cfg.n_bins:
        raise ValueError("STFT bin count does not match the model configuration")
    spec = stft.analyze(mixture, stft_params)  # (T, 4, F)
    feats = features_from_spec(spec, model.cfg.variant)
    w, c = model.forward_sequence(feats, quantized=quantized)
    ears = []
    for e, ear in enumerate(("left", "right")):
        local = spec[:, FILTER_CHANNELS[ear], :]
        ears.append((local * w[:, e]).sum(dim=1) * c[:, e])
    return stft.synthesize(torch.stack(ears, dim=1), stft_params)
