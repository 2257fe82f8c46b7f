"""Bit-exact binary container for quantized model weights (`.gcfs` files).

Quantization is symmetric over the fixed range [-1, 1]: weights map to int8
with q = clamp(round(v * 127), -127, 127), biases to int16 with scale 32767,
rounding half away from zero. Values outside [-1, 1] clamp (counted, not
fatal). Dequantization is q / scale; inference math stays floating point.

File layout (all integers little-endian), documented with a hex-annotated
example in docs/weights-format.md::

    0   magic "GCFS" (4 bytes)
    4   format_version u32
    8   CRC32 of payload u32
    12  payload length u64
    20  payload:
        config_len u32, config block (UTF-8 "key=value\\n" lines:
            variant, n_bins, latent, groups, hidden)
        input_scale f32, r f32
        tensor_count u32
        per tensor: name_len u16, name UTF-8, dtype u8 (0=int8, 1=int16),
            rank u8, dims u32 * rank, raw values (int8 bytes / int16 LE)

Tensors appear in the canonical order of gcfs.param_shapes, making the file
byte-for-byte reproducible for identical inputs.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .gcfs import GcfsConfig, param_shapes

MAGIC = b"GCFS"
FORMAT_VERSION = 1

_QUANT_SCALE = {"int8": 127, "int16": 32767}
_DTYPE_CODE = {"int8": 0, "int16": 1}
_CODE_DTYPE = {v: k for k, v in _DTYPE_CODE.items()}
_NP_DTYPE = {"int8": np.int8, "int16": np.int16}


class ContainerFormatError(ValueError):
    """Malformed, corrupted or incompatible `.gcfs` file."""


@dataclass
class QuantTensor:
    name: str
    dtype: str  # "int8" | "int16"
    data: np.ndarray
    n_clipped: int = 0

    def __post_init__(self) -> None:
        if self.dtype not in _QUANT_SCALE:
            raise ValueError(f"unsupported dtype {self.dtype!r}")
        scale = _QUANT_SCALE[self.dtype]
        if np.any(np.abs(self.data.astype(np.int64)) > scale):
            raise ValueError(f"{self.name}: values exceed the symmetric {self.dtype} range")


def quantize(values: np.ndarray, dtype: str, name: str = "") -> QuantTensor:
    """Symmetric linear quantization over [-1, 1], round half away from zero."""
    scale = _QUANT_SCALE[dtype]
    values = np.asarray(values, dtype=np.float64)
    n_clipped = int(np.count_nonzero(np.abs(values) > 1.0))
    q = np.sign(values) * np.floor(np.abs(values) * scale + 0.5)
    q = np.clip(q, -scale, scale).astype(_NP_DTYPE[dtype])
    return QuantTensor(name=name, dtype=dtype, data=q, n_clipped=n_clipped)


def dequantize(t: QuantTensor) -> np.ndarray:
    """Back to float: q / scale; round-trip error <= 1/(2*scale) in range."""
    return t.data.astype(np.float64) / _QUANT_SCALE[t.dtype]


@dataclass
class WeightContainer:
    config: GcfsConfig
    input_scale: float
    r: float
    tensors: dict[str, QuantTensor] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION


def container_from_params(cfg: GcfsConfig, params: dict[str, np.ndarray],
                          input_scale: float, r: float) -> WeightContainer:
    """Quantize a float parameter set into a container (canonical order)."""
    table = param_shapes(cfg)
    missing = table.keys() - params.keys()
    if missing:
        raise ValueError(f"missing parameters: {sorted(missing)}")
    tensors = {}
    for name, (shape, dtype) in table.items():
        arr = np.asarray(params[name])
        if arr.shape != shape:
            raise ValueError(f"{name}: expected shape {shape}, got {arr.shape}")
        tensors[name] = quantize(arr, dtype, name)
    return WeightContainer(cfg, float(input_scale), float(r), tensors)


def total_clipped(wc: WeightContainer) -> int:
    return sum(t.n_clipped for t in wc.tensors.values())


def _config_block(cfg: GcfsConfig) -> bytes:
    lines = (
        f"variant={cfg.variant}\n"
        f"n_bins={cfg.n_bins}\n"
        f"latent={cfg.latent}\n"
        f"groups={cfg.groups}\n"
        f"hidden={cfg.hidden}\n"
    )
    return lines.encode("utf-8")


def _parse_config_block(raw: bytes) -> GcfsConfig:
    fields: dict[str, str] = {}
    for line in raw.decode("utf-8").splitlines():
        if not line:
            continue
        key, _, value = line.partition("=")
        fields[key] = value
    try:
        return GcfsConfig(
            variant=fields["variant"],
            n_bins=int(fields["n_bins"]),
            latent=int(fields["latent"]),
            groups=int(fields["groups"]),
            hidden=int(fields["hidden"]),
        )
    except (KeyError, ValueError) as exc:
        raise ContainerFormatError(f"invalid config block: {exc}") from exc


def _build_payload(wc: WeightContainer) -> bytes:
    parts = []
    config = _config_block(wc.config)
    parts.append(struct.pack("<I", len(config)))
    parts.append(config)
    parts.append(struct.pack("<ff", wc.input_scale, wc.r))
    parts.append(struct.pack("<I", len(wc.tensors)))
    for name, tensor in wc.tensors.items():
        name_bytes = name.encode("utf-8")
        parts.append(struct.pack("<H", len(name_bytes)))
        parts.append(name_bytes)
        parts.append(struct.pack("<BB", _DTYPE_CODE[tensor.dtype], tensor.data.ndim))
        parts.append(struct.pack(f"<{tensor.data.ndim}I", *tensor.data.shape))
        parts.append(
            np.ascontiguousarray(tensor.data, dtype=_NP_DTYPE[tensor.dtype])
            .astype("<" + ("i1" if tensor.dtype == "int8" else "i2"))
            .tobytes()
        )
    return b"".join(parts)


def save_container(path, wc: WeightContainer) -> None:
    payload = _build_payload(wc)
    header = MAGIC + struct.pack("<IIQ", wc.format_version, zlib.crc32(payload),
                                 len(payload))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ContainerFormatError("truncated file")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_container(path, validate_architecture: bool = True) -> WeightContainer:
    """Load and validate a `.gcfs` file.

    Raises ContainerFormatError on bad magic, unknown version, checksum
    mismatch, truncation, duplicate tensors or (when validate_architecture)
    a tensor set that does not exactly cover the declared config.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 20:
        raise ContainerFormatError("truncated file")
    if blob[:4] != MAGIC:
        raise ContainerFormatError("bad magic (not a .gcfs container)")
    version, crc, payload_len = struct.unpack("<IIQ", blob[4:20])
    if version != FORMAT_VERSION:
        raise ContainerFormatError(f"unsupported format version {version}")
    payload = blob[20:]
    if len(payload) != payload_len:
        raise ContainerFormatError("truncated file (payload length mismatch)")
    if zlib.crc32(payload) != crc:
        raise ContainerFormatError("checksum mismatch (corrupted file)")

    reader = _Reader(payload)
    (config_len,) = reader.unpack("<I")
    cfg = _parse_config_block(reader.take(config_len))
    input_scale, r = reader.unpack("<ff")
    (n_tensors,) = reader.unpack("<I")
    tensors: dict[str, QuantTensor] = {}
    for _ in range(n_tensors):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        dtype_code, rank = reader.unpack("<BB")
        if dtype_code not in _CODE_DTYPE:
            raise ContainerFormatError(f"unknown tensor dtype code {dtype_code}")
        dims = reader.unpack(f"<{rank}I")
        dtype = _CODE_DTYPE[dtype_code]
        count = int(np.prod(dims)) if dims else 1
        itemsize = 1 if dtype == "int8" else 2
        raw = reader.take(count * itemsize)
        data = np.frombuffer(raw, dtype="<" + ("i1" if dtype == "int8" else "i2"))
        data = data.astype(_NP_DTYPE[dtype]).reshape(dims)
        if name in tensors:
            raise ContainerFormatError(f"duplicate tensor {name!r}")
        tensors[name] = QuantTensor(name=name, dtype=dtype, data=data)
    if reader.pos != len(payload):
        raise ContainerFormatError("trailing bytes after the last tensor")

    wc = WeightContainer(cfg, float(input_scale), float(r), tensors, version)
    if validate_architecture:
        validate_container(wc)
    return wc


def validate_container(wc: WeightContainer) -> None:
    """Check the tensor set exactly covers the architecture for the config."""
    expected = param_shapes(wc.config)
    missing = expected.keys() - wc.tensors.keys()
    extra = wc.tensors.keys() - expected.keys()
    if missing or extra:
        raise ContainerFormatError(
            f"tensor set mismatch vs config: missing {sorted(missing)}, "
            f"unexpected {sorted(extra)}"
        )
    for name, (shape, dtype) in expected.items():
        t = wc.tensors[name]
        if t.data.shape != shape or t.dtype != dtype:
            raise ContainerFormatError(
                f"tensor set mismatch vs config: {name} expected {dtype}{shape}, "
                f"got {t.dtype}{t.data.shape}"
            )
