"""Checkpoint files: one JSON header line followed by a little-endian binary payload.

The header lists every payload section with its dtype and shape, in
payload order. Files contain no timestamps, so rerunning with the same
seed reproduces them byte for byte.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ._io import atomic_write
from .errors import FormatError
from .model import RbmModel
from .sampler import ChainEnsemble
from .trainer import Checkpoint, TrainConfig

MAGIC = "rbmlab-checkpoint"
VERSION = 1


def _sections(ck: Checkpoint) -> list[tuple[str, np.ndarray]]:
    m = ck.model
    out = [("weights", m.weights.astype("<f8")),
           ("visible_bias", m.visible_bias.astype("<f8")),
           ("hidden_bias", m.hidden_bias.astype("<f8"))]
    if ck.offsets is not None:
        out += [("offset_visible", np.asarray(ck.offsets[0], dtype="<f8")),
                ("offset_hidden", np.asarray(ck.offsets[1], dtype="<f8"))]
    p = ck.persistent
    if p is not None:
        out += [("chain_visible", p.visible_states.astype("u1")),
                ("chain_hidden", p.hidden_states.astype("u1")),
                ("chain_means", p.visible_means.astype("<f8")),
                ("chain_keys", p.keys.astype("<u8"))]
    return out


def encode(ck: Checkpoint) -> bytes:
    sections = _sections(ck)
    header = {
        "format": MAGIC,
        "version": VERSION,
        "n_visible": ck.model.n_visible,
        "n_hidden": ck.model.n_hidden,
        "t_age": int(ck.t_age),
        "config": ck.config.summary(),
        "chain_step": None if ck.persistent is None else int(ck.persistent.step_counter),
        "sections": [{"name": n, "dtype": a.dtype.str, "shape": list(a.shape)} for n, a in sections],
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n"
    return head + b"".join(np.ascontiguousarray(a).tobytes() for _, a in sections)


def decode(raw: bytes) -> Checkpoint:
    nl = raw.find(b"\n")
    if nl < 0:
        raise FormatError("checkpoint has no header line")
    try:
        header = json.loads(raw[:nl])
    except json.JSONDecodeError as exc:
        raise FormatError(f"checkpoint header is not JSON: {exc}") from None
    if not isinstance(header, dict) or header.get("format") != MAGIC:
        raise FormatError("not an rbmlab checkpoint")
    if header.get("version") != VERSION:
        raise FormatError(f"unsupported checkpoint version {header.get('version')}")
    arrays = {}
    pos = nl + 1
    for sec in header["sections"]:
        dt = np.dtype(sec["dtype"])
        count = int(np.prod(sec["shape"], dtype=np.int64))
        end = pos + count * dt.itemsize
        if end > len(raw):
            raise FormatError(f"payload truncated in section {sec['name']!r} at byte {len(raw)}")
        arrays[sec["name"]] = np.frombuffer(raw, dtype=dt, count=count, offset=pos).reshape(sec["shape"])
        pos = end
    if pos != len(raw):
        raise FormatError(f"{len(raw) - pos} trailing bytes after payload")
    try:
        model = RbmModel(arrays["weights"], arrays["visible_bias"], arrays["hidden_bias"])
    except KeyError as exc:
        raise FormatError(f"missing section {exc}") from None
    offsets = None
    if "offset_visible" in arrays:
        offsets = (arrays["offset_visible"].astype(np.float64), arrays["offset_hidden"].astype(np.float64))
    persistent = None
    if "chain_visible" in arrays:
        persistent = ChainEnsemble(arrays["chain_visible"], arrays["chain_hidden"],
                                   arrays["chain_means"], arrays["chain_keys"], header["chain_step"])
    return Checkpoint(model, int(header["t_age"]), TrainConfig.from_summary(header["config"]),
                      persistent, offsets)


def save_checkpoint(ck: Checkpoint, path) -> None:
    atomic_write(path, encode(ck))


def load_checkpoint(path) -> Checkpoint:
    return decode(Path(path).read_bytes())


def checkpoint_name(t_age: int) -> str:
    return f"ckpt_{t_age:09d}.rbm"
