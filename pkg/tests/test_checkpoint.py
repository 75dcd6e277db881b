import json

import numpy as np
import pytest

from rbmlab.checkpoint import checkpoint_name, decode, encode, load_checkpoint, save_checkpoint
from rbmlab.data import synth_modes
from rbmlab.errors import FormatError
from rbmlab.rng import SeedSpec
from rbmlab.trainer import TrainConfig, train, with_updates


@pytest.fixture(scope="module")
def data():
    return synth_modes(12, 2, 0.1, 20, SeedSpec(0))


def _train(data, scheme, centered, n_updates=12):
    cfg = TrainConfig(scheme=scheme, k=2, learning_rate=0.05, minibatch_size=8, n_updates=n_updates,
                      n_hidden=5, centered=centered, n_checkpoints=3, seed=SeedSpec(4))
    return cfg, train(data, cfg)


def _same(a, b):
    assert a.t_age == b.t_age and a.config == b.config
    for x, y in ((a.model.weights, b.model.weights), (a.model.visible_bias, b.model.visible_bias),
                 (a.model.hidden_bias, b.model.hidden_bias)):
        assert np.array_equal(x, y)
    assert (a.offsets is None) == (b.offsets is None)
    if a.offsets is not None:
        assert all(np.array_equal(x, y) for x, y in zip(a.offsets, b.offsets))
    assert (a.persistent is None) == (b.persistent is None)
    if a.persistent is not None:
        p, q = a.persistent, b.persistent
        assert p.step_counter == q.step_counter
        for name in ("visible_states", "hidden_states", "visible_means", "keys"):
            assert np.array_equal(getattr(p, name), getattr(q, name))


@pytest.mark.parametrize("scheme,centered", [("Rdm", True), ("CD", False), ("PCD", True), ("PCD", False)])
def test_round_trip(tmp_path, data, scheme, centered):
    _, cks = _train(data, scheme, centered)
    for ck in cks:
        path = tmp_path / checkpoint_name(ck.t_age)
        save_checkpoint(ck, path)
        _same(ck, load_checkpoint(path))


def test_encoding_is_byte_identical_across_runs(data):
    _, a = _train(data, "PCD", True)
    _, b = _train(data, "PCD", True)
    assert [encode(x) for x in a] == [encode(x) for x in b]


def test_resuming_from_a_loaded_checkpoint_matches_one_run(tmp_path, data):
    cfg, full = _train(data, "PCD", True, n_updates=20)
    _, head = _train(data, "PCD", True, n_updates=8)
    save_checkpoint(head[-1], tmp_path / "c.rbm")
    rest = train(data, with_updates(cfg, 20), resume=load_checkpoint(tmp_path / "c.rbm"))
    assert encode(rest[-1]) == encode(full[-1])


def test_header_is_one_json_line(data):
    _, cks = _train(data, "PCD", True)
    raw = encode(cks[-1])
    header = json.loads(raw[:raw.index(b"\n")])
    assert header["format"] == "rbmlab-checkpoint" and header["t_age"] == cks[-1].t_age
    assert [s["name"] for s in header["sections"]][:3] == ["weights", "visible_bias", "hidden_bias"]


def test_checkpoint_name_sorts_by_age():
    names = [checkpoint_name(t) for t in (3, 40, 1000, 7)]
    assert sorted(names) == [checkpoint_name(t) for t in (3, 7, 40, 1000)]


@pytest.fixture
def raw(data):
    return encode(_train(data, "PCD", True)[1][-1])


def test_truncated_payload(raw):
    with pytest.raises(FormatError, match="truncated"):
        decode(raw[:-3])


def test_trailing_bytes(raw):
    with pytest.raises(FormatError, match="trailing"):
        decode(raw + b"\x00")


def test_bad_headers(raw):
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl])
    with pytest.raises(FormatError):
        decode(b"no newline at all")
    with pytest.raises(FormatError):
        decode(b"{not json\n" + raw[nl + 1:])
    for key, val in (("format", "something-else"), ("version", 99)):
        bad = dict(header, **{key: val})
        with pytest.raises(FormatError):
            decode(json.dumps(bad).encode() + raw[nl:])


def test_missing_section(raw):
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl])
    first = header["sections"][0]
    size = int(np.prod(first["shape"])) * np.dtype(first["dtype"]).itemsize
    header["sections"] = header["sections"][1:]
    with pytest.raises(FormatError, match="missing"):
        decode(json.dumps(header).encode() + b"\n" + raw[nl + 1 + size:])


def test_save_is_atomic(tmp_path, data, monkeypatch):
    ck = _train(data, "Rdm", True)[1][-1]
    path = tmp_path / "c.rbm"
    save_checkpoint(ck, path)
    before = path.read_bytes()
    import rbmlab.checkpoint as mod

    def boom(_):
        raise RuntimeError("disk full")
    monkeypatch.setattr(mod, "encode", boom)
    with pytest.raises(RuntimeError):
        save_checkpoint(ck, path)
    assert path.read_bytes() == before and list(tmp_path.iterdir()) == [path]


def test_failed_rename_leaves_no_temp_file(tmp_path, monkeypatch):
    from rbmlab import _io
    path = tmp_path / "f.bin"
    _io.atomic_write(path, b"old")

    def fail(*_):
        raise OSError("rename failed")
    monkeypatch.setattr(_io.os, "replace", fail)
    with pytest.raises(OSError):
        _io.atomic_write(path, b"new")
    assert path.read_bytes() == b"old" and list(tmp_path.iterdir()) == [path]
