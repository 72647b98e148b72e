"""Fixed-dimension message encoders.

Two kinds: a self-contained signed feature-hashing encoder (deterministic
across platforms), and file-backed stores of precomputed vectors written in
the little-endian "REMB" binary format. Stored vectors are served verbatim;
encoders are frozen and never trained.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .corpus import PostRecord
from .errors import DataError
from .ioutil import atomic_write_bytes

STORE_MAGIC = b"REMB"
STORE_VERSION = 1

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_UINT64 = 1 << 64
_SIGN_BIT = 1 << 63

DEFAULT_DIM = 256
DEFAULT_MAX_TOKENS = 256

ENCODER_KINDS = ("hashing", "file")


class EncoderError(DataError):
    """Invalid encoder configuration or usage."""


class StoreError(DataError):
    """Base class for embedding-store problems."""


class StoreMagicError(StoreError):
    """File does not start with the REMB magic bytes."""


class StoreVersionError(StoreError):
    """Unsupported store format version."""


class StoreDimError(StoreError):
    """Vector dimension disagrees with the store or encoder declaration."""


class StoreTruncatedError(StoreError):
    """File ends before the declared payload."""


class StoreDuplicateIdError(StoreError):
    """The same record id appears twice."""


class MissingEmbeddingError(StoreError):
    """A file-backed encoder has no vector for the requested record."""


@dataclass(frozen=True)
class EncoderSpec:
    """One encoder in a fusion configuration."""

    name: str
    dim: int
    kind: str

    def __post_init__(self) -> None:
        if not self.name or any(c.isspace() or c in ":;," for c in self.name):
            raise EncoderError(f"bad encoder name {self.name!r}")
        if self.dim < 1:
            raise EncoderError(f"encoder {self.name!r}: dim must be >= 1, got {self.dim}")
        if self.kind not in ENCODER_KINDS:
            raise EncoderError(f"encoder {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """One encoder's representation of one message."""

    encoder_name: str
    values: np.ndarray


class EmbeddingStore:
    """Map from record id to one encoder's vectors, float32, insertion-ordered."""

    def __init__(self, name: str, dim: int):
        if dim < 1:
            raise StoreDimError(f"store dim must be >= 1, got {dim}")
        self.name = name
        self.dim = int(dim)
        self._vectors: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._vectors

    def ids(self) -> Iterator[str]:
        return iter(self._vectors)

    def add(self, record_id: str, values) -> None:
        arr = np.asarray(values, dtype=np.float32)
        if arr.shape != (self.dim,):
            raise StoreDimError(
                f"store {self.name!r}: vector for {record_id!r} has shape {arr.shape}, want ({self.dim},)"
            )
        if not np.all(np.isfinite(arr)):
            raise StoreError(f"store {self.name!r}: non-finite values for {record_id!r}")
        if record_id in self._vectors:
            raise StoreDuplicateIdError(f"store {self.name!r}: duplicate id {record_id!r}")
        self._vectors[record_id] = arr

    def get(self, record_id: str) -> np.ndarray:
        try:
            return self._vectors[record_id]
        except KeyError:
            raise MissingEmbeddingError(
                f"store {self.name!r} has no embedding for id {record_id!r}"
            ) from None


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a over raw bytes."""
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) % _UINT64
    return h


@lru_cache(maxsize=1 << 16)
def _feature_hash(feature: str) -> int:
    return fnv1a_64(feature.encode("utf-8"))


def hash_encode(
    message: str,
    dim: int = DEFAULT_DIM,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    name: str = "hashing",
) -> EmbeddingVector:
    """Signed feature hashing over unigrams and bigrams.

    The message is lowercased and split on whitespace, keeping the first
    ``max_tokens`` tokens. Bigram features are adjacent tokens joined by a
    single space. Each feature is hashed with 64-bit FNV-1a over its UTF-8
    bytes; the bucket is hash mod dim and the sign is +1 when bit 63 is
    clear. The result is L2-normalized (an empty message stays zero).
    """
    if dim < 1:
        raise EncoderError(f"dim must be >= 1, got {dim}")
    tokens = message.lower().split()[:max_tokens]
    vec = np.zeros(dim, dtype=np.float64)
    for i, token in enumerate(tokens):
        h = _feature_hash(token)
        vec[h % dim] += 1.0 if h < _SIGN_BIT else -1.0
        if i + 1 < len(tokens):
            h = _feature_hash(f"{token} {tokens[i + 1]}")
            vec[h % dim] += 1.0 if h < _SIGN_BIT else -1.0
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return EmbeddingVector(name, vec)


def write_store(store: EmbeddingStore, path) -> None:
    """Serialize a store in the REMB format (all integers little-endian)."""
    name_bytes = store.name.encode("utf-8")
    out = bytearray()
    out += STORE_MAGIC
    out += struct.pack("<H", STORE_VERSION)
    out += struct.pack("<H", len(name_bytes))
    out += name_bytes
    out += struct.pack("<I", store.dim)
    out += struct.pack("<Q", len(store))
    for record_id in store.ids():
        id_bytes = record_id.encode("utf-8")
        out += struct.pack("<H", len(id_bytes))
        out += id_bytes
        out += store.get(record_id).astype("<f4").tobytes()
    atomic_write_bytes(path, bytes(out))


class _Cursor:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise StoreTruncatedError(
                f"{self.path}: truncated store (needed {n} bytes at offset {self.offset})"
            )
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str) -> int:
        (value,) = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return value


def read_store(path, expected_dim: Optional[int] = None) -> EmbeddingStore:
    """Read a REMB store; the inverse of write_store on every field."""
    path = str(path)
    data = Path(path).read_bytes()
    cur = _Cursor(data, path)

    if cur.take(4) != STORE_MAGIC:
        raise StoreMagicError(f"{path}: not an embedding store (bad magic)")
    version = cur.unpack("<H")
    if version != STORE_VERSION:
        raise StoreVersionError(f"{path}: unsupported store version {version}")
    name = cur.take(cur.unpack("<H")).decode("utf-8")
    dim = cur.unpack("<I")
    if dim < 1:
        raise StoreDimError(f"{path}: store declares dim {dim}")
    if expected_dim is not None and dim != expected_dim:
        raise StoreDimError(f"{path}: store dim {dim} does not match expected {expected_dim}")
    count = cur.unpack("<Q")

    store = EmbeddingStore(name, dim)
    for _ in range(count):
        record_id = cur.take(cur.unpack("<H")).decode("utf-8")
        payload = cur.take(4 * dim)
        store.add(record_id, np.frombuffer(payload, dtype="<f4").copy())
    if cur.offset != len(data):
        raise StoreError(f"{path}: {len(data) - cur.offset} trailing bytes after last record")
    return store


def encode_record(
    record: PostRecord,
    spec: EncoderSpec,
    store: EmbeddingStore | None = None,
) -> EmbeddingVector:
    """Produce one encoder's vector for a record.

    Hashing encoders run on the message; file-backed encoders return the
    stored vector unmodified.
    """
    if spec.kind == "hashing":
        return hash_encode(record.post_message, dim=spec.dim, name=spec.name)
    if store is None:
        raise EncoderError(f"encoder {spec.name!r} is file-backed and requires a store")
    if store.dim != spec.dim:
        raise StoreDimError(
            f"encoder {spec.name!r} declares dim {spec.dim} but store has dim {store.dim}"
        )
    return EmbeddingVector(spec.name, store.get(record.id))
