"""Weight checkpoints and model config files.

Binary weight layout (little-endian)::

    magic   b"DGBW"
    u32     format version
    u32     tensor count
    per tensor:
        u32 name length, name bytes (utf-8)
        u32 rank, u32 extent * rank
        f32 values * prod(extents), row-major
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from degbench.models import config as config_io
from degbench.models.config import ModelConfig
from degbench.models.network import Network

MAGIC = b"DGBW"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dump_weights(weights: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(weights))]
    for name, arr in weights.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f4")
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def load_weights_bytes(buf: bytes) -> dict[str, np.ndarray]:
    if buf[:4] != MAGIC:
        raise CheckpointError("not a weight checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    off = 12
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", buf, off)
            off += 4
            name = buf[off:off + nlen].decode("utf-8")
            off += nlen
            (rank,) = struct.unpack_from("<I", buf, off)
            off += 4
            shape = struct.unpack_from(f"<{rank}I", buf, off)
            off += 4 * rank
            n = int(np.prod(shape)) if rank else 1
            arr = np.frombuffer(buf, dtype="<f4", count=n, offset=off).reshape(shape)
            off += 4 * n
            out[name] = arr.astype(np.float32)
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from None
    return out


def save_model(model: Network, stem: str | Path) -> tuple[Path, Path]:
    """Write ``<stem>.dgw`` (weights) and ``<stem>.cfg`` (key=value config)."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    wpath, cpath = stem.with_suffix(".dgw"), stem.with_suffix(".cfg")
    wpath.write_bytes(dump_weights(model.params))
    cpath.write_text(config_io.dumps(model.cfg))
    return wpath, cpath


def load_model(stem: str | Path) -> Network:
    stem = Path(stem)
    wpath, cpath = stem.with_suffix(".dgw"), stem.with_suffix(".cfg")
    if not wpath.exists() or not cpath.exists():
        raise FileNotFoundError(f"missing checkpoint {wpath} / {cpath}")
    cfg: ModelConfig = config_io.loads(cpath.read_text())
    model = Network(cfg)
    model.load_state(load_weights_bytes(wpath.read_bytes()))
    return model
