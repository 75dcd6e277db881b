import argparse

import pytest

from rbmlab.config import FIELDS, add_flags, build, read_ini
from rbmlab.errors import ValidationError


def ini(tmp_path, text):
    p = tmp_path / "exp.ini"
    p.write_text(text)
    return p


def test_defaults():
    cfg = build()
    assert cfg.scheme == "Rdm" and cfg.k == 10 and cfg.centered is True
    assert set(cfg.sources.values()) == {"default"}
    cfg.validate()


def test_precedence_defaults_file_flags(tmp_path):
    p = ini(tmp_path, "[train]\nk = 50\nlearning_rate = 0.2\n[run]\nseed = 7\n")
    cfg = build(p, {"k": "100", "seed": None})
    assert cfg.k == 100 and cfg.sources["k"] == "flag"
    assert cfg.learning_rate == 0.2 and cfg.sources["learning_rate"] == "file"
    assert cfg.seed == 7
    assert cfg.minibatch_size == 128 and cfg.sources["minibatch_size"] == "default"


def test_flags_parse_through_argparse(tmp_path):
    parser = argparse.ArgumentParser()
    add_flags(parser)
    ns = parser.parse_args(["--learning-rate", "0.5", "--grid", "1,2,8", "--centered", "no"])
    cfg = build(None, vars(ns))
    assert cfg.learning_rate == 0.5 and cfg.grid == [1, 2, 8] and cfg.centered is False


def test_every_field_round_trips_through_ini(tmp_path):
    cfg = build(None, {"image_shape": "4x8", "grid": "1,3", "metrics": "e2,e3", "threads": "2"})
    again = build(ini(tmp_path, cfg.as_ini()))
    assert again.values == cfg.values
    assert again.digest() == cfg.digest()


def test_digest_depends_only_on_selected_keys():
    a = build(None, {"k": "5", "horizon": "10"})
    b = build(None, {"k": "5", "horizon": "20"})
    assert a.digest(["k", "seed"]) == b.digest(["k", "seed"])
    assert a.digest() != b.digest()


@pytest.mark.parametrize("text", [
    "[train]\nnot_a_key = 1\n",
    "[run]\nk = 5\n",            # right key, wrong section
    "[train]\nk = ten\n",
    "no section header\n",
])
def test_bad_files(tmp_path, text):
    with pytest.raises(ValidationError):
        read_ini(ini(tmp_path, text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ValidationError):
        build(tmp_path / "absent.ini")


@pytest.mark.parametrize("overrides", [
    {"scheme": "SGD"}, {"k": "0"}, {"format": "xlsx"}, {"init": "zeros"}, {"metrics": "e2,fid"},
    {"grid": "5,3"}, {"n_updates": "-1"}, {"ais_temperatures": "1"}, {"path": "/no/such/file"},
    {"learning_rate": "-0.1"},
])
def test_validation_rejects(overrides):
    with pytest.raises(ValidationError):
        build(None, overrides).validate()


def test_unknown_override():
    with pytest.raises(ValidationError):
        build(None, {"bogus": "1"})


def test_field_table_has_unique_keys():
    keys = [key for _, key, _, _, _ in FIELDS]
    assert len(keys) == len(set(keys))
