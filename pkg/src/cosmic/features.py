"""Binary feature store ("CSMF" v1): a bit-exact container of fixed-width
float32 vectors keyed by string.

File layout, little-endian, no padding::

    magic "CSMF" | version u32 = 1 | dim u32 | count u32 | count * record
    record = key_len u16 | key bytes (UTF-8) | dim * f32

Records are written in ascending lexicographic byte order of the key, so
serialization is canonical: equal stores produce byte-identical files.

Keying convention: image vectors are stored under "img:<image_key>", caption
vectors under "txt:<hash>" where <hash> is the lowercase 16-digit hex of the
64-bit FNV-1a hash of the exact caption text (UTF-8). This keeps free text
out of keys while making caption features content-addressable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Sequence

import numpy as np

from .errors import StoreError

MAGIC = b"CSMF"
VERSION = 1
MAX_KEY_BYTES = 0xFFFF

_MASK64 = 0xFFFFFFFFFFFFFFFF
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash, fixed-width integer arithmetic only."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def text_key(text: str) -> str:
    """Content key for a caption: 'txt:' + hex FNV-1a of the exact text."""
    return "txt:%016x" % fnv1a64(text.encode("utf-8"))


def image_feature_key(image_key: str) -> str:
    """Store key for an image vector: 'img:<image_key>'."""
    return "img:" + image_key


class SplitMix64:
    """SplitMix64 PRNG; documented so other implementations can reproduce
    synthetic vectors bit-exactly."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return (z ^ (z >> 31)) & _MASK64

    def uniform_signed(self) -> float:
        # 53 high bits -> [0, 1), then affine to [-1, 1).
        u = (self.next_u64() >> 11) * 2.0**-53
        return 2.0 * u - 1.0


@dataclass
class FeatureStore:
    """In-memory store: every vector has exactly ``dim`` finite float32
    entries; keys are unique, non-empty, and at most 65535 UTF-8 bytes."""

    dim: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim <= 0:
            raise StoreError(f"dim must be positive, got {self.dim}")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def add(self, key: str, vector) -> None:
        _check_key(key)
        if key in self.entries:
            raise StoreError(f"duplicate key {key!r}")
        vec = np.asarray(vector, dtype=np.float32)
        if vec.shape != (self.dim,):
            raise StoreError(f"vector for {key!r} has shape {vec.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(vec)):
            raise StoreError(f"vector for {key!r} contains non-finite values")
        self.entries[key] = vec

    def vector(self, key: str) -> np.ndarray:
        try:
            return self.entries[key]
        except KeyError:
            raise StoreError(f"feature key not found: {key!r}") from None


class FeatureSet:
    """Read-only union of stores with possibly different dims (e.g. one
    2048-d image store plus one 1024-d caption store). Lookup tries each
    member in order; overlapping keys are rejected."""

    def __init__(self, *stores: FeatureStore):
        self.stores = stores
        seen: set[str] = set()
        for store in stores:
            dup = seen.intersection(store.entries)
            if dup:
                raise StoreError(f"key {sorted(dup)[0]!r} present in more than one store")
            seen.update(store.entries)

    def __contains__(self, key: str) -> bool:
        return any(key in s for s in self.stores)

    def vector(self, key: str) -> np.ndarray:
        for store in self.stores:
            if key in store:
                return store.entries[key]
        raise StoreError(f"feature key not found: {key!r}")


def _check_key(key: str) -> None:
    if not key:
        raise StoreError("empty key")
    if len(key.encode("utf-8")) > MAX_KEY_BYTES:
        raise StoreError(f"key longer than {MAX_KEY_BYTES} UTF-8 bytes")


def get_vector(store, key: str) -> np.ndarray:
    """Return the vector for ``key`` or fail naming the missing key."""
    return store.vector(key)


def write_store(store: FeatureStore, sink: BinaryIO) -> int:
    """Serialize ``store`` canonically; returns the number of bytes written."""
    keys = sorted(store.entries, key=lambda k: k.encode("utf-8"))
    written = sink.write(MAGIC)
    written += sink.write(struct.pack("<III", VERSION, store.dim, len(keys)))
    for key in keys:
        _check_key(key)
        vec = store.entries[key]
        if vec.shape != (store.dim,):
            raise StoreError(f"vector for {key!r} has shape {vec.shape}, expected ({store.dim},)")
        if not np.all(np.isfinite(vec)):
            raise StoreError(f"vector for {key!r} contains non-finite values")
        raw = key.encode("utf-8")
        written += sink.write(struct.pack("<H", len(raw)))
        written += sink.write(raw)
        written += sink.write(np.ascontiguousarray(vec, dtype="<f4").tobytes())
    return written


def _read_exact(source: BinaryIO, n: int, offset: int, what: str) -> bytes:
    data = source.read(n)
    if len(data) != n:
        raise StoreError(f"truncated {what} at offset {offset}")
    return data


def read_store(source: BinaryIO) -> FeatureStore:
    """Parse a CSMF stream back into a store; payloads decode bit-exactly.

    Corruption (bad magic, unknown version, truncation, duplicate keys,
    trailing bytes) is fatal and the error reports the byte offset.
    """
    offset = 0
    magic = _read_exact(source, 4, offset, "magic")
    if magic != MAGIC:
        raise StoreError(f"bad magic at offset 0: {magic!r}")
    offset += 4
    header = _read_exact(source, 12, offset, "header")
    version, dim, count = struct.unpack("<III", header)
    if version != VERSION:
        raise StoreError(f"unsupported version {version} at offset {offset}")
    if dim == 0:
        raise StoreError(f"zero dim at offset {offset + 4}")
    offset += 12
    store = FeatureStore(dim=dim)
    for _ in range(count):
        record_offset = offset
        (key_len,) = struct.unpack("<H", _read_exact(source, 2, offset, "key length"))
        offset += 2
        try:
            key = _read_exact(source, key_len, offset, "key").decode("utf-8")
        except UnicodeDecodeError:
            raise StoreError(f"invalid UTF-8 key at offset {offset}") from None
        offset += key_len
        payload = _read_exact(source, 4 * dim, offset, f"vector for {key!r}")
        offset += 4 * dim
        vec = np.frombuffer(payload, dtype="<f4").copy()
        if key in store.entries:
            raise StoreError(f"duplicate key {key!r} at offset {record_offset}")
        if not key:
            raise StoreError(f"empty key at offset {record_offset}")
        if not np.all(np.isfinite(vec)):
            raise StoreError(f"non-finite vector for {key!r} at offset {record_offset}")
        store.entries[key] = vec
    if source.read(1):
        raise StoreError(f"trailing data at offset {offset}")
    return store


def save_store(store: FeatureStore, path) -> int:
    with open(path, "wb") as f:
        return write_store(store, f)


def load_store(path) -> FeatureStore:
    with open(path, "rb") as f:
        return read_store(f)


def synth_store(keys: Sequence[str], dim: int, seed: int) -> FeatureStore:
    """Deterministic synthetic feature store.

    Each vector depends only on (key, dim, seed): a SplitMix64 stream is
    seeded with fnv1a64(le64(seed) || utf8(key)) and ``dim`` values are
    drawn uniform in [-1, 1). Reproducible across platforms and independent
    of the key list's order.
    """
    if len(set(keys)) != len(keys):
        seen: set[str] = set()
        for key in keys:
            if key in seen:
                raise StoreError(f"duplicate key {key!r}")
            seen.add(key)
    store = FeatureStore(dim=dim)
    seed_bytes = struct.pack("<Q", seed & _MASK64)
    for key in keys:
        rng = SplitMix64(fnv1a64(seed_bytes + key.encode("utf-8")))
        vec = np.array([rng.uniform_signed() for _ in range(dim)], dtype=np.float32)
        store.add(key, vec)
    return store
