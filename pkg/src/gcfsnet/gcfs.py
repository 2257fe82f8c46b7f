"""Deep filter-and-sum network: per-frame spatial filter and postfilter estimation.

Per ear and frame, the spectra of the feature microphones (2 for the
monaural variant, all 4 for the binaural variant) are flattened into a real
feature vector, projected into a grouped latent space, processed by shared
per-group conv/recurrent blocks with two group-mixing exchanges, and mapped
to complex filter weights for the two ipsilateral microphones plus a single
frame postfilter. Real and imaginary filter parts are tanh-bounded and
scaled by the learned range r.

Left and right ears run the same weights; each ear orders its input
channels ipsilateral-first, which mirrors the model across the head.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import StftConfig
from .engine import StftFilterProcessor
from .geometry import BACK_LEFT, BACK_RIGHT, FRONT_LEFT, FRONT_RIGHT

VARIANTS = ("monaural", "binaural")

#: per-ear input channel order (ipsi front, [contra front,] ipsi back, [contra back])
FEATURE_CHANNELS = {
    "monaural": {
        "left": [FRONT_LEFT, BACK_LEFT],
        "right": [FRONT_RIGHT, BACK_RIGHT],
    },
    "binaural": {
        "left": [FRONT_LEFT, FRONT_RIGHT, BACK_LEFT, BACK_RIGHT],
        "right": [FRONT_RIGHT, FRONT_LEFT, BACK_RIGHT, BACK_LEFT],
    },
}

#: the two ipsilateral microphones each ear's spatial filter is applied to
FILTER_CHANNELS = {
    "left": [FRONT_LEFT, BACK_LEFT],
    "right": [FRONT_RIGHT, BACK_RIGHT],
}

CHANNEL_ROLES = {
    "monaural": ["front-ipsilateral", "back-ipsilateral"],
    "binaural": ["front-ipsilateral", "front-contralateral",
                 "back-ipsilateral", "back-contralateral"],
}


@dataclass(frozen=True)
class GcfsConfig:
    variant: str = "binaural"
    n_bins: int = 65
    latent: int = 128   # latent size split into groups
    groups: int = 8
    hidden: int = 32    # per-group hidden size

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.latent % self.groups:
            raise ValueError("latent size must be divisible by the group count")

    @property
    def m_feat(self) -> int:
        return 2 if self.variant == "monaural" else 4

    @property
    def m_filter(self) -> int:
        return 2

    @property
    def feature_size(self) -> int:
        """Input size: real+imag of n_bins for each feature channel."""
        return self.m_feat * 2 * self.n_bins

    @property
    def group_size(self) -> int:
        return self.latent // self.groups

    @property
    def channel_order(self) -> list[str]:
        return CHANNEL_ROLES[self.variant]

    def feature_channel_indices(self, ear: str) -> list[int]:
        return FEATURE_CHANNELS[self.variant][ear]

    def filter_channel_indices(self, ear: str) -> list[int]:
        return FILTER_CHANNELS[ear]


def param_shapes(cfg: GcfsConfig) -> dict[str, tuple[tuple[int, ...], str]]:
    """Canonical parameter table: name -> (shape, container dtype).

    Weights quantize to int8, biases to int16; the two learned scalars
    (input scale, filter range r) live outside this table.
    """
    b, p, u, gs = cfg.feature_size, cfg.latent, cfg.hidden, cfg.group_size
    f = cfg.n_bins
    shapes: dict[str, tuple[tuple[int, ...], str]] = {}

    def w(name, shape):
        shapes[name] = (shape, "int8")

    def bias(name, shape):
        shapes[name] = (shape, "int16")

    w("input_fc.w", (b, p)); bias("input_fc.b", (p,))
    w("conv.fc.w", (gs, u)); bias("conv.fc.b", (u,))
    w("conv.ds5.dw.w", (5, u)); bias("conv.ds5.dw.b", (u,))
    w("conv.ds5.pw.w", (u, u)); bias("conv.ds5.pw.b", (u,))
    w("conv.ds3.dw.w", (3, u)); bias("conv.ds3.dw.b", (u,))
    w("conv.ds3.pw.w", (u, u)); bias("conv.ds3.pw.b", (u,))
    w("conv.skip.w", (u,))
    for gc in ("gc1", "gc2"):
        w(f"{gc}.pre.w", (u, gs)); bias(f"{gc}.pre.b", (gs,))
        w(f"{gc}.mix.w", (p, p)); bias(f"{gc}.mix.b", (p,))
        w(f"{gc}.post.w", (gs, u)); bias(f"{gc}.post.b", (u,))
    for gru in ("gru1", "gru2"):
        w(f"{gru}.wx", (u, 3 * u))   # packed gates [update | reset | candidate]
        w(f"{gru}.wh", (u, 3 * u))
        bias(f"{gru}.b", (3 * u,))
    w("gru.skip.w", (u,))
    w("out_fc.w", (u, gs)); bias("out_fc.b", (gs,))
    w("w_head.w", (p, cfg.m_filter * 2 * f)); bias("w_head.b", (cfg.m_filter * 2 * f,))
    w("c_head.w", (p, 2 * f)); bias("c_head.b", (2 * f,))
    return shapes


def param_count(cfg: GcfsConfig) -> int:
    """Number of trainable scalars, including the input scale and the range r."""
    total = sum(int(np.prod(shape)) for shape, _ in param_shapes(cfg).values())
    return total + 2


@dataclass
class FilterSet:
    """Spatial filter weights and postfilter for one frame, bounded by r."""

    w: np.ndarray    # (m_filter, n_bins) complex
    c: np.ndarray    # (n_bins,) complex
    r: float

    def in_range(self) -> bool:
        limit = self.r + 1e-12
        return bool(
            np.all(np.abs(self.w.real) <= limit) and np.all(np.abs(self.w.imag) <= limit)
            and np.all(np.abs(self.c.real) <= limit) and np.all(np.abs(self.c.imag) <= limit)
        )


class GcfsModel:
    """Immutable weight holder; share freely across streams and threads."""

    def __init__(self, cfg: GcfsConfig, params: dict[str, np.ndarray],
                 input_scale: float, filter_range: float):
        expected = param_shapes(cfg)
        missing = expected.keys() - params.keys()
        extra = params.keys() - expected.keys()
        if missing or extra:
            raise ValueError(f"parameter set mismatch: missing {sorted(missing)}, "
                             f"unexpected {sorted(extra)}")
        for name, (shape, _) in expected.items():
            if params[name].shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {params[name].shape}")
        self.cfg = cfg
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        self.input_scale = float(input_scale)
        self.filter_range = float(filter_range)

    @classmethod
    def random(cls, cfg: GcfsConfig, seed: int = 0, scale: float = 0.2,
               input_scale: float = 1.0, filter_range: float = 2.0) -> "GcfsModel":
        """Random weights uniform in [-scale, scale]; handy for structure tests."""
        rng = np.random.default_rng(seed)
        params = {
            name: rng.uniform(-scale, scale, size=shape)
            for name, (shape, _) in param_shapes(cfg).items()
        }
        return cls(cfg, params, input_scale, filter_range)

    @classmethod
    def from_container(cls, container) -> "GcfsModel":
        """Build from a loaded WeightContainer (weights dequantized once)."""
        from .weights_io import dequantize

        params = {name: dequantize(t) for name, t in container.tensors.items()}
        return cls(container.config, params, container.input_scale, container.r)


class GcfsState:
    """Per-stream recurrent state: conv delay lines and GRU hidden vectors.

    Rows are (stream, group) pairs flattened to stream * groups + group.
    """

    def __init__(self, cfg: GcfsConfig, n_streams: int = 1):
        self.cfg = cfg
        self.n_streams = n_streams
        self.reset()

    def reset(self) -> None:
        rows, u = self.n_streams * self.cfg.groups, self.cfg.hidden
        self.ds5_buf = np.zeros((rows, 4, u))
        self.ds3_buf = np.zeros((rows, 2, u))
        self.h1 = np.zeros((rows, u))
        self.h2 = np.zeros((rows, u))

    def is_finite(self) -> bool:
        return bool(all(np.all(np.isfinite(a))
                        for a in (self.ds5_buf, self.ds3_buf, self.h1, self.h2)))


def fc_tanh(x: np.ndarray, weight: np.ndarray, bias_vec: np.ndarray) -> np.ndarray:
    """tanh(x @ weight + bias); outputs strictly inside (-1, 1)."""
    if x.shape[-1] != weight.shape[0] or weight.shape[1] != bias_vec.shape[0]:
        raise ValueError("fc_tanh shape mismatch")
    return np.tanh(x @ weight + bias_vec)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def gru_cell(x: np.ndarray, h: np.ndarray, wx: np.ndarray, wh: np.ndarray,
             b: np.ndarray) -> np.ndarray:
    """One GRU step with packed gates [update | reset | candidate].

    z = sigma(Wz x + Uz h + bz), r = sigma(Wr x + Ur h + br),
    cand = tanh(Wc x + Uc (r*h) + bc), h' = (1-z) h + z cand.
    """
    u = h.shape[-1]
    gx = x @ wx + b
    gh_zr = h @ wh[:, : 2 * u]
    z = _sigmoid(gx[:, :u] + gh_zr[:, :u])
    r = _sigmoid(gx[:, u : 2 * u] + gh_zr[:, u:])
    cand = np.tanh(gx[:, 2 * u :] + (r * h) @ wh[:, 2 * u :])
    return (1.0 - z) * h + z * cand


def ds_conv_step(buf: np.ndarray, x: np.ndarray, dw_w: np.ndarray, dw_b: np.ndarray,
                 pw_w: np.ndarray, pw_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Causal depthwise-separable conv step.

    buf holds the previous kernel_size-1 inputs per row; the depthwise kernel
    runs over time per feature, the pointwise mix applies tanh.
    Returns (output, advanced buffer).
    """
    window = np.concatenate([buf, x[:, None, :]], axis=1)
    depthwise = np.einsum("rkw,kw->rw", window, dw_w) + dw_b
    out = np.tanh(depthwise @ pw_w + pw_b)
    return out, window[:, 1:, :]


def group_communicate(x: np.ndarray, n_streams: int, cfg: GcfsConfig,
                      pre_w, pre_b, mix_w, mix_b, post_w, post_b) -> np.ndarray:
    """Group mixing block: shared down-map, full-latent mix, shared up-map, skip.

    x has shape (n_streams * groups, hidden); the skip adds the block input.
    """
    pre = np.tanh(x @ pre_w + pre_b)
    latent = pre.reshape(n_streams, cfg.latent)
    mixed = np.tanh(latent @ mix_w + mix_b)
    post = np.tanh(mixed.reshape(x.shape[0], cfg.group_size) @ post_w + post_b)
    return post + x


def forward_frame(model: GcfsModel, state: GcfsState, features: np.ndarray
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Run one frame for a batch of streams.

    features: (n_streams, feature_size) real. Returns (W, C) with
    W: (n_streams, m_filter, n_bins) complex, C: (n_streams, n_bins) complex.
    """
    cfg = model.cfg
    p = model.params
    s = state.n_streams
    if features.shape != (s, cfg.feature_size):
        raise ValueError(
            f"expected features of shape {(s, cfg.feature_size)}, got {features.shape}"
        )

    x = features * model.input_scale
    latent = np.tanh(x @ p["input_fc.w"] + p["input_fc.b"])
    grouped = latent.reshape(s * cfg.groups, cfg.group_size)

    h0 = np.tanh(grouped @ p["conv.fc.w"] + p["conv.fc.b"])
    c5, state.ds5_buf = ds_conv_step(state.ds5_buf, h0, p["conv.ds5.dw.w"],
                                     p["conv.ds5.dw.b"], p["conv.ds5.pw.w"],
                                     p["conv.ds5.pw.b"])
    c3, state.ds3_buf = ds_conv_step(state.ds3_buf, c5, p["conv.ds3.dw.w"],
                                     p["conv.ds3.dw.b"], p["conv.ds3.pw.w"],
                                     p["conv.ds3.pw.b"])
    conv_out = c3 + h0 * p["conv.skip.w"]

    gc1 = group_communicate(conv_out, s, cfg, p["gc1.pre.w"], p["gc1.pre.b"],
                            p["gc1.mix.w"], p["gc1.mix.b"], p["gc1.post.w"],
                            p["gc1.post.b"])

    state.h1 = gru_cell(gc1, state.h1, p["gru1.wx"], p["gru1.wh"], p["gru1.b"])
    state.h2 = gru_cell(state.h1, state.h2, p["gru2.wx"], p["gru2.wh"], p["gru2.b"])
    gru_out = state.h2 + gc1 * p["gru.skip.w"]

    gc2 = group_communicate(gru_out, s, cfg, p["gc2.pre.w"], p["gc2.pre.b"],
                            p["gc2.mix.w"], p["gc2.mix.b"], p["gc2.post.w"],
                            p["gc2.post.b"])

    out_latent = (gc2 @ p["out_fc.w"] + p["out_fc.b"]).reshape(s, cfg.latent)
    r = model.filter_range
    w_flat = np.tanh(out_latent @ p["w_head.w"] + p["w_head.b"]) * r
    c_flat = np.tanh(out_latent @ p["c_head.w"] + p["c_head.b"]) * r

    w_parts = w_flat.reshape(s, cfg.m_filter, 2, cfg.n_bins)
    c_parts = c_flat.reshape(s, 2, cfg.n_bins)
    w = w_parts[:, :, 0, :] + 1j * w_parts[:, :, 1, :]
    c = c_parts[:, 0, :] + 1j * c_parts[:, 1, :]
    return w, c


def features_from_bins(ordered_bins: np.ndarray) -> np.ndarray:
    """Flatten (channels, n_bins) complex spectra to the real feature layout.

    Per channel: n_bins real parts then n_bins imaginary parts, channels
    concatenated in the given order.
    """
    return np.concatenate([ordered_bins.real, ordered_bins.imag], axis=1).ravel()


def infer_frame(model: GcfsModel, state: GcfsState, ordered_bins: np.ndarray) -> FilterSet:
    """Single-stream inference: feature channels in the ear's order -> FilterSet."""
    if state.n_streams != 1:
        raise ValueError("infer_frame expects a single-stream state")
    feats = features_from_bins(np.asarray(ordered_bins))[None, :]
    w, c = forward_frame(model, state, feats)
    return FilterSet(w=w[0], c=c[0], r=model.filter_range)


def apply_filters(local_bins: np.ndarray, filters: FilterSet) -> np.ndarray:
    """Filter-and-sum then postfilter: sum_m Y_m W_m, times C, per bin."""
    local_bins = np.asarray(local_bins)
    if local_bins.shape != filters.w.shape:
        raise ValueError("channel/bin shape mismatch between spectra and filters")
    return (local_bins * filters.w).sum(axis=0) * filters.c


class GcfsProcessor(StftFilterProcessor):
    """Streaming enhancement with shared left/right weights.

    Each ear builds its feature vector in its own channel order, both ears
    run through the network as one batch, and each ear's filters apply to
    its two ipsilateral microphones.
    """

    def __init__(self, model: GcfsModel, stft: StftConfig = StftConfig()):
        super().__init__(n_in_channels=4, cfg=stft)
        if model.cfg.n_bins != stft.n_bins:
            raise ValueError("model bin count does not match the STFT configuration")
        self.model = model
        mc = model.cfg
        self._feat_idx = (mc.feature_channel_indices("left"),
                          mc.feature_channel_indices("right"))
        self._filt_idx = (mc.filter_channel_indices("left"),
                          mc.filter_channel_indices("right"))
        self.state = GcfsState(mc, n_streams=2)

    def reset(self) -> None:
        super().reset()
        self.state.reset()

    def filter_frame(self, bins: np.ndarray, frame_index: int) -> np.ndarray:
        feats = np.stack([features_from_bins(bins[idx]) for idx in self._feat_idx])
        w, c = forward_frame(self.model, self.state, feats)
        out = np.empty((2, bins.shape[1]), dtype=complex)
        for ear in range(2):
            local = bins[self._filt_idx[ear]]
            out[ear] = (local * w[ear]).sum(axis=0) * c[ear]
        return out
