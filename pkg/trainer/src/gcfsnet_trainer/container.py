"""Independent `.gcfs` container reader/writer.

Implements the documented byte format (magic, version, CRC32, length-prefixed
config block, f32 scalars, named little-endian tensors) without touching the
engine's code, so container-level compatibility is an actual interface test.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .config import ModelConfig

MAGIC = b"GCFS"
FORMAT_VERSION = 1
QUANT_SCALE = {"int8": 127, "int16": 32767}
DTYPE_CODE = {"int8": 0, "int16": 1}
CODE_DTYPE = {0: "int8", 1: "int16"}


def param_table(cfg: ModelConfig) -> dict[str, tuple[tuple[int, ...], str]]:
    """Canonical tensor order, shapes and storage dtypes of the architecture."""
    b, p, u, gs = cfg.feature_size, cfg.latent, cfg.hidden, cfg.group_size
    f = cfg.n_bins
    t: dict[str, tuple[tuple[int, ...], str]] = {}
    t["input_fc.w"] = ((b, p), "int8"); t["input_fc.b"] = ((p,), "int16")
    t["conv.fc.w"] = ((gs, u), "int8"); t["conv.fc.b"] = ((u,), "int16")
    t["conv.ds5.dw.w"] = ((5, u), "int8"); t["conv.ds5.dw.b"] = ((u,), "int16")
    t["conv.ds5.pw.w"] = ((u, u), "int8"); t["conv.ds5.pw.b"] = ((u,), "int16")
    t["conv.ds3.dw.w"] = ((3, u), "int8"); t["conv.ds3.dw.b"] = ((u,), "int16")
    t["conv.ds3.pw.w"] = ((u, u), "int8"); t["conv.ds3.pw.b"] = ((u,), "int16")
    t["conv.skip.w"] = ((u,), "int8")
    for gc in ("gc1", "gc2"):
        t[f"{gc}.pre.w"] = ((u, gs), "int8"); t[f"{gc}.pre.b"] = ((gs,), "int16")
        t[f"{gc}.mix.w"] = ((p, p), "int8"); t[f"{gc}.mix.b"] = ((p,), "int16")
        t[f"{gc}.post.w"] = ((gs, u), "int8"); t[f"{gc}.post.b"] = ((u,), "int16")
    for gru in ("gru1", "gru2"):
        t[f"{gru}.wx"] = ((u, 3 * u), "int8")
        t[f"{gru}.wh"] = ((u, 3 * u), "int8")
        t[f"{gru}.b"] = ((3 * u,), "int16")
    t["gru.skip.w"] = ((u,), "int8")
    t["out_fc.w"] = ((u, gs), "int8"); t["out_fc.b"] = ((gs,), "int16")
    t["w_head.w"] = ((p, cfg.m_filter * 2 * f), "int8")
    t["w_head.b"] = ((cfg.m_filter * 2 * f,), "int16")
    t["c_head.w"] = ((p, 2 * f), "int8"); t["c_head.b"] = ((2 * f,), "int16")
    return t


def quantize_values(values: np.ndarray, dtype: str) -> tuple[np.ndarray, int]:
    """Symmetric [-1, 1] quantization, round half away from zero.

    Returns (integer array, number of clamped inputs).
    """
    scale = QUANT_SCALE[dtype]
    values = np.asarray(values, dtype=np.float64)
    clipped = int(np.count_nonzero(np.abs(values) > 1.0))
    q = np.sign(values) * np.floor(np.abs(values) * scale + 0.5)
    q = np.clip(q, -scale, scale)
    return q.astype(np.int8 if dtype == "int8" else np.int16), clipped


def dequantize_values(q: np.ndarray, dtype: str) -> np.ndarray:
    return np.asarray(q, dtype=np.float64) / QUANT_SCALE[dtype]


@dataclass
class Container:
    config: ModelConfig
    input_scale: float
    r: float
    tensors: dict[str, np.ndarray]  # integer arrays in canonical order
    n_clipped: int = 0


def pack(cfg: ModelConfig, params: dict[str, np.ndarray], input_scale: float,
         r: float) -> Container:
    """Quantize float parameters into a container."""
    table = param_table(cfg)
    missing = table.keys() - params.keys()
    if missing:
        raise ValueError(f"missing parameters: {sorted(missing)}")
    tensors = {}
    clipped = 0
    for name, (shape, dtype) in table.items():
        arr = np.asarray(params[name], dtype=np.float64)
        if arr.shape != shape:
            raise ValueError(f"{name}: expected {shape}, got {arr.shape}")
        q, c = quantize_values(arr, dtype)
        tensors[name] = q
        clipped += c
    return Container(cfg, float(input_scale), float(r), tensors, clipped)


def unpack(container: Container) -> dict[str, np.ndarray]:
    """Dequantize a container back to float parameters."""
    table = param_table(container.config)
    return {
        name: dequantize_values(container.tensors[name], dtype)
        for name, (_, dtype) in table.items()
    }


def _config_block(cfg: ModelConfig) -> bytes:
    return (
        f"variant={cfg.variant}\n"
        f"n_bins={cfg.n_bins}\n"
        f"latent={cfg.latent}\n"
        f"groups={cfg.groups}\n"
        f"hidden={cfg.hidden}\n"
    ).encode("utf-8")


def write(path, container: Container) -> None:
    parts = []
    block = _config_block(container.config)
    parts.append(struct.pack("<I", len(block)))
    parts.append(block)
    parts.append(struct.pack("<ff", container.input_scale, container.r))
    parts.append(struct.pack("<I", len(container.tensors)))
    for name, data in container.tensors.items():
        nb = name.encode("utf-8")
        dtype = "int8" if data.dtype == np.int8 else "int16"
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<BB", DTYPE_CODE[dtype], data.ndim))
        parts.append(struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(data.astype("<i1" if dtype == "int8" else "<i2").tobytes())
    payload = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQ", FORMAT_VERSION, zlib.crc32(payload), len(payload)))
        fh.write(payload)


def read(path) -> Container:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError("bad magic")
    version, crc, payload_len = struct.unpack("<IIQ", blob[4:20])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported version {version}")
    payload = blob[20:]
    if len(payload) != payload_len or zlib.crc32(payload) != crc:
        raise ValueError("corrupted container")
    pos = 0

    def take(n):
        nonlocal pos
        out = payload[pos : pos + n]
        if len(out) != n:
            raise ValueError("truncated container")
        pos += n
        return out

    (config_len,) = struct.unpack("<I", take(4))
    fields = dict(
        line.split("=", 1) for line in take(config_len).decode().splitlines() if line
    )
    cfg = ModelConfig(variant=fields["variant"], n_bins=int(fields["n_bins"]),
                      latent=int(fields["latent"]), groups=int(fields["groups"]),
                      hidden=int(fields["hidden"]))
    input_scale, r = struct.unpack("<ff", take(8))
    (n_tensors,) = struct.unpack("<I", take(4))
    tensors = {}
    for _ in range(n_tensors):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode()
        code, rank = struct.unpack("<BB", take(2))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        dtype = CODE_DTYPE[code]
        itemsize = 1 if dtype == "int8" else 2
        raw = take(int(np.prod(dims)) * itemsize)
        data = np.frombuffer(raw, dtype="<i1" if dtype == "int8" else "<i2")
        tensors[name] = data.astype(np.int8 if dtype == "int8" else np.int16).reshape(dims)
    return Container(cfg, float(input_scale), float(r), tensors)
