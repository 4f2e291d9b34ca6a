import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from .errors import BadMagic, ChecksumMismatch, IoError, TruncatedFile, UnsupportedDtype
from .logging_utils import get_logger

# Initialize logger
logger = get_logger(__name__)

# b"CTN1" | u32 header length | UTF-8 JSON header | f32 payload | u64 FNV-1a(payload)
# Header: tensor name -> {shape, dtype, offset (bytes into payload), len (elements)}, plus "config"
MAGIC = b"CTN1"
CONFIG_KEY = "config"
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF
CHECKSUM_BLOCK = 1 << 20


def fnv1a64(data, h: int = FNV_OFFSET) -> int:
    """FNV-1a over any bytes-like object; pass the previous result as h to continue a stream."""
    view = memoryview(data).cast("B")
    prime = FNV_PRIME
    mask = _MASK64
    for start in range(0, len(view), CHECKSUM_BLOCK):
        for byte in view[start:start + CHECKSUM_BLOCK].tobytes():
            h = ((h ^ byte) * prime) & mask
    return h


@dataclass
class WeightStore:
    """Named float32 tensors plus the config they were produced for"""

    tensors: Dict[str, np.ndarray] = field(default_factory=dict)
    config: Optional[Dict[str, Any]] = None

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self):
        return list(self.tensors.keys())

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.tensors.values())


def save_weights(store: WeightStore, path: Union[str, Path]) -> None:
    """Write a store in the CTN1 container format."""
    header: Dict[str, Any] = {}
    chunks = []
    offset = 0
    for name, tensor in store.tensors.items():
        data = np.ascontiguousarray(tensor, dtype="<f4")
        raw = data.tobytes()
        header[name] = {"shape": list(data.shape), "dtype": "f32", "offset": offset, "len": int(data.size)}
        chunks.append(raw)
        offset += len(raw)
    if store.config is not None:
        header[CONFIG_KEY] = store.config

    header_bytes = json.dumps(header, sort_keys=False).encode("utf-8")
    checksum = FNV_OFFSET
    try:
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", len(header_bytes)))
            f.write(header_bytes)
            for raw in chunks:
                f.write(raw)
                checksum = fnv1a64(raw, checksum)
            f.write(struct.pack("<Q", checksum))
    except OSError as e:
        raise IoError(f"failed writing {path}: {e}") from e
    logger.info(f"Saved {len(store.tensors)} tensors ({offset} payload bytes) to {path}")


def load_weights(path: Union[str, Path]) -> WeightStore:
    """
    Read a CTN1 container.

    Raises:
        BadMagic: file does not start with CTN1 or the header is unreadable
        TruncatedFile: file ends before the declared header/tensors
        UnsupportedDtype: a tensor is not f32
        ChecksumMismatch: payload does not match the stored FNV-1a checksum
    """
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e

    if blob[:4] != MAGIC:
        raise BadMagic(f"{path}: expected magic {MAGIC!r}, found {blob[:4]!r}")
    if len(blob) < 8:
        raise TruncatedFile(f"{path}: missing header length")
    (header_len,) = struct.unpack("<I", blob[4:8])
    header_end = 8 + header_len
    if len(blob) < header_end + 8:
        raise TruncatedFile(f"{path}: file ends inside the header or checksum")

    try:
        header = json.loads(blob[8:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise BadMagic(f"{path}: unreadable header: {e}") from e

    payload = memoryview(blob)[header_end:-8]
    (stored_checksum,) = struct.unpack("<Q", blob[-8:])

    config = header.pop(CONFIG_KEY, None)
    tensors: Dict[str, np.ndarray] = {}
    for name, entry in header.items():
        if entry.get("dtype") != "f32":
            raise UnsupportedDtype(f"{path}: tensor {name} has dtype {entry.get('dtype')!r}")
        offset = int(entry["offset"])
        count = int(entry["len"])
        shape = tuple(int(d) for d in entry["shape"])
        if int(np.prod(shape, dtype=np.int64)) != count:
            raise TruncatedFile(f"{path}: tensor {name} shape {shape} does not hold {count} elements")
        end = offset + 4 * count
        if offset < 0 or end > len(payload):
            raise TruncatedFile(f"{path}: tensor {name} needs bytes {offset}..{end}, payload has {len(payload)}")
        tensors[name] = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape).astype(np.float32)

    if fnv1a64(payload) != stored_checksum:
        raise ChecksumMismatch(f"{path}: payload checksum does not match")

    logger.info(f"Loaded {len(tensors)} tensors from {path}")
    return WeightStore(tensors, config)
