"""Binary datasets: loading, saving, binarization, splitting, synthetic data.

File formats
------------
csv01
    One sample per line, comma-separated 0/1 entries.
packed
    Little-endian header ``b"RBM1"``, u32 M, u32 n_visible, u32 rows,
    u32 cols (``0, 0`` when there is no image shape), followed by the
    row-major bit stream packed LSB-first, last byte zero-padded.
idx
    IDX ("MNIST-style") unsigned-byte arrays. Entries must already be 0/1
    unless a binarization threshold is given.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (DimensionError, DomainError, EmptyDatasetError, FormatError,
                     GenerationError, ValidationError)
from ._io import atomic_write
from .rng import SeedSpec

PACKED_MAGIC = b"RBM1"
_PACKED_HEADER = struct.Struct("<4sIIII")
FORMATS = ("csv01", "packed", "idx")


@dataclass(frozen=True, eq=False)
class BinaryDataset:
    samples: np.ndarray = field(repr=False)
    image_shape: tuple[int, int] | None = None
    name: str = ""
    split: str = "train"

    def __post_init__(self):
        s = np.ascontiguousarray(self.samples)
        if s.ndim != 2:
            raise DimensionError(f"samples must be a matrix, got shape {s.shape}")
        if not np.all((s == 0) | (s == 1)):
            raise DomainError("samples must be exactly 0 or 1")
        s = s.astype(np.uint8)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if self.image_shape is not None:
            shape = tuple(int(x) for x in self.image_shape)
            if len(shape) != 2 or shape[0] * shape[1] != s.shape[1]:
                raise DimensionError(f"image shape {shape} does not match {s.shape[1]} visible units")
            object.__setattr__(self, "image_shape", shape)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def n_visible(self) -> int:
        return self.samples.shape[1]

    def with_samples(self, samples, split=None) -> "BinaryDataset":
        return BinaryDataset(samples, self.image_shape, self.name, split or self.split)


def binarize(x, threshold: float = 0.5, **meta) -> BinaryDataset:
    """Entries >= threshold become 1, others 0."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError("cannot binarize non-finite entries")
    if arr.ndim == 1:
        arr = arr[None, :]
    return BinaryDataset((arr >= threshold).astype(np.uint8), **meta)


def split(data: BinaryDataset, n_train: int, seed: SeedSpec) -> tuple[BinaryDataset, BinaryDataset]:
    """Shuffle rows under ``seed``; the first ``n_train`` go to train, the rest to test."""
    m = len(data)
    if not 0 < n_train < m:
        raise ValidationError(f"n_train must be in [1, {m - 1}], got {n_train}")
    perm = seed.generator().permutation(m)
    return (data.with_samples(data.samples[perm[:n_train]], "train"),
            data.with_samples(data.samples[perm[n_train:]], "test"))


def synth_modes(n_visible: int, n_modes: int, flip_prob: float, samples_per_mode: int,
                seed: SeedSpec, min_separation: int | None = None,
                max_tries: int = 10_000) -> BinaryDataset:
    """Noisy copies of random prototypes that are pairwise far apart.

    Prototypes are uniform random binary vectors accepted only when their
    Hamming distance to every earlier prototype is at least
    ``min_separation`` (default ``n_visible / 4``). Samples flip each
    prototype bit independently with probability ``flip_prob``; rows are
    grouped by mode.
    """
    if n_modes < 2:
        raise ValidationError("n_modes must be >= 2")
    if not 0.0 <= flip_prob < 0.5:
        raise ValidationError("flip_prob must be in [0, 0.5)")
    if samples_per_mode < 1:
        raise ValidationError("samples_per_mode must be >= 1")
    sep = int(np.ceil(n_visible / 4)) if min_separation is None else min_separation
    rng = seed.generator()
    protos: list[np.ndarray] = []
    tries = 0
    while len(protos) < n_modes:
        if tries >= max_tries:
            raise GenerationError(
                f"could not place {n_modes} prototypes {sep} bits apart in {max_tries} tries")
        tries += 1
        cand = rng.integers(0, 2, n_visible, dtype=np.uint8)
        if all(np.count_nonzero(cand != p) >= sep for p in protos):
            protos.append(cand)
    prototypes = np.array(protos)
    base = np.repeat(prototypes, samples_per_mode, axis=0)
    flips = rng.random(base.shape) < flip_prob
    return BinaryDataset(base ^ flips.astype(np.uint8), name=f"synth_modes{n_modes}")


# ---------------------------------------------------------------- file I/O

def pack_bits(samples: np.ndarray, image_shape=None) -> bytes:
    s = np.ascontiguousarray(samples, dtype=np.uint8)
    rows, cols = image_shape if image_shape is not None else (0, 0)
    header = _PACKED_HEADER.pack(PACKED_MAGIC, s.shape[0], s.shape[1], rows, cols)
    return header + np.packbits(s.ravel(), bitorder="little").tobytes()


def unpack_bits(raw: bytes, name: str = "") -> BinaryDataset:
    if len(raw) < _PACKED_HEADER.size:
        raise FormatError(f"{name}: truncated header ({len(raw)} bytes)")
    magic, m, n, rows, cols = _PACKED_HEADER.unpack_from(raw)
    if magic != PACKED_MAGIC:
        raise FormatError(f"{name}: bad magic {magic!r} at offset 0")
    nbits = m * n
    need = _PACKED_HEADER.size + (nbits + 7) // 8
    if len(raw) != need:
        raise FormatError(f"{name}: payload is {len(raw) - _PACKED_HEADER.size} bytes, "
                          f"expected {need - _PACKED_HEADER.size}")
    if m == 0:
        raise EmptyDatasetError(f"{name}: dataset has no rows")
    bits = np.unpackbits(np.frombuffer(raw, np.uint8, offset=_PACKED_HEADER.size),
                         bitorder="little", count=nbits)
    shape = (rows, cols) if rows or cols else None
    return BinaryDataset(bits.reshape(m, n), shape, name=os.path.basename(name))


def save_packed(data, path, image_shape=None) -> None:
    samples = getattr(data, "samples", data)
    if image_shape is None:
        image_shape = getattr(data, "image_shape", None)
    atomic_write(path, pack_bits(samples, image_shape))


def save_csv01(data, path) -> None:
    samples = np.asarray(getattr(data, "samples", data), dtype=np.uint8)
    text = "\n".join(",".join("1" if x else "0" for x in row) for row in samples)
    atomic_write(path, (text + "\n").encode())


def _parse_csv01(text: str, name: str) -> np.ndarray:
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        for col, f in enumerate(fields, start=1):
            if f not in ("0", "1"):
                try:
                    float(f)
                except ValueError:
                    raise FormatError(f"{name}:{lineno}:{col}: cannot parse {f!r}") from None
                raise DomainError(f"{name}:{lineno}:{col}: entry {f!r} is not 0 or 1")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise FormatError(f"{name}:{lineno}: expected {width} fields, got {len(fields)}")
        rows.append([f == "1" for f in fields])
    if not rows:
        raise EmptyDatasetError(f"{name}: no samples")
    return np.array(rows, dtype=np.uint8)


_IDX_TYPES = {0x08: np.uint8, 0x09: np.int8, 0x0B: ">i2", 0x0C: ">i4", 0x0D: ">f4", 0x0E: ">f8"}


def read_idx(raw: bytes, name: str = "") -> np.ndarray:
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0 or raw[2] not in _IDX_TYPES:
        raise FormatError(f"{name}: not an IDX file (offset 0)")
    ndim = raw[3]
    if len(raw) < 4 + 4 * ndim:
        raise FormatError(f"{name}: truncated IDX dimensions")
    dims = struct.unpack(f">{ndim}I", raw[4:4 + 4 * ndim])
    dtype = np.dtype(_IDX_TYPES[raw[2]])
    count = int(np.prod(dims)) if dims else 0
    offset = 4 + 4 * ndim
    if len(raw) - offset != count * dtype.itemsize:
        raise FormatError(f"{name}: IDX payload size mismatch at offset {offset}")
    return np.frombuffer(raw, dtype, count=count, offset=offset).reshape(dims)


def load_binary_matrix(path, format: str = "csv01", threshold: float | None = None) -> BinaryDataset:
    """Load a dataset from ``path`` in one of :data:`FORMATS`.

    For ``idx`` files, ``threshold`` (applied after scaling unsigned bytes
    to [0, 1]) binarizes grayscale data; without it entries must be 0/1.
    """
    if format not in FORMATS:
        raise ValidationError(f"unknown format {format!r}; expected one of {FORMATS}")
    name = str(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read {name}: {exc}") from exc
    if not raw:
        raise EmptyDatasetError(f"{name}: file is empty")
    base = os.path.basename(name)
    if format == "packed":
        return unpack_bits(raw, name)
    if format == "csv01":
        try:
            text = raw.decode("ascii")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{name}: offset {exc.start}: not ASCII") from None
        return BinaryDataset(_parse_csv01(text, name), name=base)
    arr = read_idx(raw, name)
    if arr.ndim < 2 or arr.shape[0] == 0:
        raise EmptyDatasetError(f"{name}: IDX array has no samples")
    shape = tuple(arr.shape[1:3]) if arr.ndim == 3 else None
    flat = arr.reshape(arr.shape[0], -1)
    if threshold is not None:
        scale = 255.0 if arr.dtype == np.uint8 else 1.0
        return binarize(flat / scale, threshold, image_shape=shape, name=base)
    if not np.all((flat == 0) | (flat == 1)):
        raise DomainError(f"{name}: IDX entries are not binary; pass a threshold")
    return BinaryDataset(flat.astype(np.uint8), shape, name=base)
