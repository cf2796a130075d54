"""Binary model checkpoints.

Layout (little-endian):

    "APLC" | u32 version | u32 header_len | header (canonical JSON, UTF-8)
    u32 n_params
    per parameter: u32 name_len | name | u32 ndim | u32 dims... | float64 values

The JSON header holds ``{"config": ..., "preprocessing": ...}``; parameters
follow the model's registry order.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from ..config import apl_config_from_dict, apl_config_to_dict
from ..errors import CheckpointError, ConfigError
from ..fileio import atomic_write_bytes, canonical_json
from .apl import AplModel, init_model

log = logging.getLogger(__name__)

MAGIC = b"APLC"
VERSION = 1


def encode_checkpoint(model: AplModel, preprocessing: Optional[dict] = None) -> bytes:
    header = canonical_json({
        "config": apl_config_to_dict(model.config),
        "preprocessing": preprocessing or {},
    }).encode("utf-8")
    chunks = [MAGIC, struct.pack("<II", VERSION, len(header)), header]
    params = model.parameters()
    chunks.append(struct.pack("<I", len(params)))
    for p in params:
        name = p.name.encode("utf-8")
        chunks.append(struct.pack("<I", len(name)))
        chunks.append(name)
        chunks.append(struct.pack(f"<I{len(p.shape)}I", len(p.shape), *p.shape))
        chunks.append(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    return b"".join(chunks)


def save_checkpoint(path: Path, model: AplModel, preprocessing: Optional[dict] = None) -> None:
    """Write a checkpoint atomically."""
    atomic_write_bytes(path, encode_checkpoint(model, preprocessing))
    log.info("Checkpoint written to %s", path)


class _Reader:
    def __init__(self, raw: bytes, source: str):
        self.raw = raw
        self.pos = 0
        self.source = source

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise CheckpointError(f"{self.source}: truncated at byte {self.pos}")
        chunk = self.raw[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def decode_checkpoint(raw: bytes, source: str = "<bytes>") -> tuple[AplModel, dict]:
    """Rebuild a model from checkpoint bytes.

    The header config is used to build a fresh model, whose parameter
    names and shapes the stored parameters must match exactly.

    Returns:
        Tuple of (model in eval mode, preprocessing dict)

    Raises:
        CheckpointError: On a bad magic/version, truncation or any mismatch
    """
    reader = _Reader(raw, source)
    if reader.take(4) != MAGIC:
        raise CheckpointError(f"{source}: not an APL checkpoint (bad magic)")
    version = reader.u32()
    if version != VERSION:
        raise CheckpointError(f"{source}: unsupported checkpoint version {version}")
    try:
        header = json.loads(reader.take(reader.u32()).decode("utf-8"))
        config = apl_config_from_dict(header["config"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, ConfigError) as e:
        raise CheckpointError(f"{source}: invalid header: {e}") from e

    try:
        model = init_model(config)
    except ConfigError as e:
        raise CheckpointError(f"{source}: stored config cannot build a model: {e}") from e
    expected = model.named_parameters()

    count = reader.u32()
    if count != len(expected):
        raise CheckpointError(f"{source}: holds {count} parameters, config implies {len(expected)}")
    seen: set[str] = set()
    for _ in range(count):
        name = reader.take(reader.u32()).decode("utf-8")
        ndim = reader.u32()
        shape = tuple(reader.u32() for _ in range(ndim))
        if name not in expected:
            raise CheckpointError(f"{source}: unexpected parameter {name}")
        if name in seen:
            raise CheckpointError(f"{source}: parameter {name} appears twice")
        seen.add(name)
        param = expected[name]
        if shape != param.shape:
            raise CheckpointError(f"{source}: {name} has shape {shape}, config implies {param.shape}")
        n_values = int(np.prod(shape))
        param.tensor.data[...] = np.frombuffer(reader.take(8 * n_values), dtype="<f8").reshape(shape)
    if reader.pos != len(raw):
        raise CheckpointError(f"{source}: {len(raw) - reader.pos} trailing bytes")
    missing = [name for name in expected if name not in seen]
    if missing:
        raise CheckpointError(f"{source}: missing parameters {', '.join(missing)}")
    return model.eval(), header.get("preprocessing", {})


def load_checkpoint(path: Path) -> tuple[AplModel, dict]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    return decode_checkpoint(raw, str(path))
