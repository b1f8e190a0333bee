"""The partially randomized energy model.

A fitted model bundles the shared network, the fixed orthogonal matrix B
(columns are the per-subset coefficient vectors), the covariate partition
and the standardization statistics of the training representations. The
per-subset score is the inner product of a B column with the network
output; the normalizer of the implied density is never materialized.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    ChecksumError,
    DimensionError,
    TruncatedFileError,
    UntrainedModelError,
    VersionMismatchError,
)
from .numerics import Mlp
from .partition import PartitionModel

_MAGIC = b"PREB"
_VERSION = 1


@dataclass
class ModelFingerprint:
    d: int
    k: int
    corruption_hash: int
    seed: int

    def compatible_with(self, other: "ModelFingerprint") -> bool:
        """Same data shape and same fixed B (seed covers the B draw)."""
        return self.d == other.d and self.k == other.k and self.seed == other.seed


class EbmModel:
    def __init__(self, net: Mlp, b_matrix: np.ndarray, partition: PartitionModel,
                 repr_mean=None, repr_std=None, fingerprint: ModelFingerprint | None = None):
        k = b_matrix.shape[0]
        if b_matrix.shape != (k, k):
            raise DimensionError("B must be square")
        if net.out_dim != k or partition.k != k:
            raise DimensionError(
                f"net output {net.out_dim}, B dimension {k} and partition size "
                f"{partition.k} must agree"
            )
        err = np.max(np.abs(b_matrix @ b_matrix.T - np.eye(k)))
        if err > 1e-8:
            raise ValueError(f"B is not orthogonal (max deviation {err:.2e})")
        if repr_std is not None and np.any(np.asarray(repr_std) <= 0):
            raise ValueError("repr_std entries must be positive")
        self.net = net
        self.b_matrix = np.asarray(b_matrix, dtype=float)
        self.partition = partition
        self.repr_mean = None if repr_mean is None else np.asarray(repr_mean, dtype=float)
        self.repr_std = None if repr_std is None else np.asarray(repr_std, dtype=float)
        self.fingerprint = fingerprint
        self.history = []  # (epoch, train_loss, val_loss) rows, not serialized

    @property
    def k(self) -> int:
        return self.b_matrix.shape[0]

    @property
    def d(self) -> int:
        return self.net.in_dim

    def energy(self, x, j: int) -> float:
        """Per-subset score: inner product of B column j with the net output."""
        if not 0 <= j < self.k:
            raise DimensionError(f"subset index {j} out of range [0, {self.k})")
        out = self.net.forward(np.asarray(x, dtype=float))
        if out.ndim != 1:
            raise DimensionError("energy takes a single covariate vector")
        return float(self.b_matrix[:, j] @ out)

    def represent(self, x, use_train_stats: bool = True) -> np.ndarray:
        """Network outputs, standardized with training statistics by default."""
        out = self.net.forward(np.asarray(x, dtype=float))
        if not use_train_stats:
            return out
        if self.repr_mean is None or self.repr_std is None:
            raise UntrainedModelError("model carries no standardization statistics")
        return (out - self.repr_mean) / self.repr_std


def _pack_array(a: np.ndarray) -> bytes:
    a = np.ascontiguousarray(np.asarray(a, dtype="<f8"))
    return struct.pack("<I", a.ndim) + b"".join(
        struct.pack("<I", s) for s in a.shape
    ) + a.tobytes()


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFileError("model file ended mid-section")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def array(self) -> np.ndarray:
        ndim = self.u32()
        shape = tuple(self.u32() for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        raw = self.take(8 * count)
        return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()


def save_model(model: EbmModel, path) -> None:
    """Versioned binary container, little-endian doubles, trailing CRC32."""
    sections = []

    part = struct.pack("<d", model.partition.inertia) + _pack_array(model.partition.centroids)
    sections.append(part)
    sections.append(_pack_array(model.b_matrix))

    net = struct.pack("<I", len(model.net.widths))
    net += b"".join(struct.pack("<I", w) for w in model.net.widths)
    for p in model.net.params:
        net += _pack_array(p)
    sections.append(net)

    has_stats = model.repr_mean is not None and model.repr_std is not None
    stats = struct.pack("<B", 1 if has_stats else 0)
    if has_stats:
        stats += _pack_array(model.repr_mean) + _pack_array(model.repr_std)
    sections.append(stats)

    fp = model.fingerprint or ModelFingerprint(model.d, model.k, 0, 0)
    sections.append(struct.pack("<IIIQ", fp.d, fp.k, fp.corruption_hash, fp.seed))

    body = _MAGIC + struct.pack("<H", _VERSION)
    for sec in sections:
        body += struct.pack("<I", len(sec)) + sec
    body += struct.pack("<I", zlib.crc32(body))
    with open(path, "wb") as fh:
        fh.write(body)


def load_model(path) -> EbmModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 10:
        raise TruncatedFileError("file shorter than header")
    if raw[:4] != _MAGIC:
        raise BadMagicError("not a model file (bad magic)")
    version = struct.unpack("<H", raw[4:6])[0]
    if version != _VERSION:
        raise VersionMismatchError(f"format version {version}, expected {_VERSION}")
    stored_crc = struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(raw[:-4]) != stored_crc:
        raise ChecksumError("CRC32 mismatch")

    rd = _Reader(raw[6:-4])
    secs = []
    for _ in range(5):
        length = rd.u32()
        secs.append(_Reader(rd.take(length)))

    part_rd = secs[0]
    inertia = struct.unpack("<d", part_rd.take(8))[0]
    centroids = part_rd.array()
    partition = PartitionModel(centroids=centroids, inertia=inertia)

    b_matrix = secs[1].array()

    net_rd = secs[2]
    n_widths = net_rd.u32()
    widths = [net_rd.u32() for _ in range(n_widths)]
    net = Mlp(widths)
    net.params = [net_rd.array() for _ in range(2 * (n_widths - 1))]

    stats_rd = secs[3]
    has_stats = struct.unpack("<B", stats_rd.take(1))[0]
    mean = std = None
    if has_stats:
        mean = stats_rd.array()
        std = stats_rd.array()

    d, k, chash, seed = struct.unpack("<IIIQ", secs[4].take(20))
    fp = ModelFingerprint(d=d, k=k, corruption_hash=chash, seed=seed)

    return EbmModel(net=net, b_matrix=b_matrix, partition=partition,
                    repr_mean=mean, repr_std=std, fingerprint=fp)
