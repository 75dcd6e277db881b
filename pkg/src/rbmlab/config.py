"""Experiment configuration: INI file with sections, overridden by command-line flags.

Precedence is defaults < ``--config`` file < explicit flags. Every key has
a flag of the same name with dashes (``learning_rate`` -> ``--learning-rate``).
Example file::

    [data]
    path = train.csv
    format = csv01

    [train]
    scheme = Rdm
    k = 10
    n_updates = 2000

    [run]
    seed = 7
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .data import FORMATS
from .errors import ValidationError
from .metrics import METRICS
from .trainer import SCHEMES, TrainConfig
from .rng import SeedSpec


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    low = str(s).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s) -> list[int]:
    if isinstance(s, (list, tuple)):
        return [int(x) for x in s]
    return [int(x) for x in str(s).replace(" ", "").split(",") if x]


def _names(s) -> list[str]:
    if isinstance(s, (list, tuple)):
        return list(s)
    return [x.strip() for x in str(s).split(",") if x.strip()]


def _shape(s):
    if s is None or isinstance(s, tuple):
        return s
    parts = str(s).lower().replace(",", "x").split("x")
    if len(parts) != 2:
        raise ValueError(f"image shape must look like 28x28, got {s!r}")
    return int(parts[0]), int(parts[1])


def _opt(conv):
    def f(s):
        if s is None or (isinstance(s, str) and s.strip().lower() in ("", "none")):
            return None
        return conv(s)
    return f


# (section, key, converter, default, help)
FIELDS = [
    ("data", "path", _opt(str), None, "training data file; synthetic modes are used when unset"),
    ("data", "format", str, "csv01", f"data file format, one of {', '.join(FORMATS)}"),
    ("data", "threshold", _opt(float), None, "binarization threshold for grayscale idx data"),
    ("data", "image_shape", _opt(_shape), None, "image shape ROWSxCOLS for the PSD metric"),
    ("data", "test_path", _opt(str), None, "held-out data file (same format) for e_aai_test"),
    ("data", "n_visible", int, 32, "synthetic data: units per sample"),
    ("data", "n_modes", int, 4, "synthetic data: number of prototypes"),
    ("data", "flip_prob", float, 0.05, "synthetic data: per-bit flip probability"),
    ("data", "samples_per_mode", int, 250, "synthetic data: samples per prototype"),
    ("train", "scheme", str, "Rdm", f"negative phase, one of {', '.join(SCHEMES)}"),
    ("train", "k", int, 10, "Gibbs steps per update"),
    ("train", "learning_rate", float, 0.01, "gradient step size"),
    ("train", "minibatch_size", int, 128, "rows per minibatch (also negative chains)"),
    ("train", "n_updates", int, 1000, "number of parameter updates"),
    ("train", "n_hidden", int, 16, "hidden units"),
    ("train", "centered", _bool, True, "use the centered gradient"),
    ("train", "n_checkpoints", int, 40, "log-spaced checkpoints (the final one is always kept)"),
    ("train", "weight_init_std", float, 0.01, "std of the initial weights"),
    ("train", "offset_rate", float, 0.01, "moving-average rate of the centering offsets"),
    ("generate", "init", str, "random", "chain initialization: random, dataset or both"),
    ("generate", "horizon", int, 1000, "largest t_G"),
    ("generate", "n_points", int, 30, "log-spaced t_G points in [1, horizon]"),
    ("generate", "grid", _opt(_ints), None, "explicit comma-separated t_G list (overrides horizon/n_points)"),
    ("generate", "n_chains", int, 1000, "chains per generation run"),
    ("generate", "ages", _opt(_ints), None, "only these checkpoint ages (default: all)"),
    ("evaluate", "metrics", _names, list(METRICS), "comma-separated metric names"),
    ("evaluate", "n_sites", int, 50, "sites used by e3"),
    ("evaluate", "ais_temperatures", int, 10_000, "AIS temperatures when ln Z cannot be enumerated"),
    ("evaluate", "ais_runners", int, 1000, "AIS runners"),
    ("dynamics", "burn_in", int, 1000, "steps discarded before measuring autocorrelations"),
    ("dynamics", "reference_steps", int, 5000, "steps averaged for the equilibrium means"),
    ("dynamics", "max_lag", int, 500, "largest autocorrelation lag"),
    ("dynamics", "lag_points", _opt(int), None, "evenly spaced lags instead of every lag"),
    ("dynamics", "dyn_chains", int, 100, "chains used for autocorrelations"),
    ("analyze", "metric", str, "e2", "metric whose curves define t_therm"),
    ("analyze", "tolerance", float, 0.05, "relative agreement defining merged curves"),
    ("analyze", "analyze_k", _opt(int), None, "k for the regime verdict (default: train k)"),
    ("output", "out", _opt(str), None, "output directory or file"),
    ("run", "seed", int, 0, "master seed"),
    ("run", "threads", _opt(int), None, "thread cap (also RBMLAB_THREADS)"),
]

_BY_KEY = {key: (section, conv, default, help) for section, key, conv, default, help in FIELDS}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)

    def __getattr__(self, key):
        try:
            return self.__dict__["values"][key]
        except KeyError:
            raise AttributeError(key) from None

    def train_config(self) -> TrainConfig:
        v = self.values
        return TrainConfig(scheme=v["scheme"], k=v["k"], learning_rate=v["learning_rate"],
                           minibatch_size=v["minibatch_size"], n_updates=v["n_updates"],
                           centered=v["centered"], seed=SeedSpec(v["seed"]), n_hidden=v["n_hidden"],
                           n_checkpoints=v["n_checkpoints"], weight_init_std=v["weight_init_std"],
                           offset_rate=v["offset_rate"])

    def as_ini(self) -> str:
        cp = configparser.ConfigParser()
        for section, key, _, _, _ in FIELDS:
            if not cp.has_section(section):
                cp.add_section(section)
            val = self.values[key]
            if isinstance(val, (list, tuple)):
                val = ("x" if key == "image_shape" else ",").join(str(x) for x in val)
            cp.set(section, key, "" if val is None else str(val))
        lines = []
        for section in cp.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in cp.items(section))
            lines.append("")
        return "\n".join(lines)

    def digest(self, keys=None) -> str:
        keys = sorted(keys or self.values)
        blob = json.dumps({k: self.values[k] for k in keys}, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def validate(self) -> None:
        v = self.values
        if v["format"] not in FORMATS:
            raise ValidationError(f"format must be one of {FORMATS}")
        if v["scheme"] not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}")
        if v["init"] not in ("random", "dataset", "both"):
            raise ValidationError("init must be random, dataset or both")
        unknown = [m for m in v["metrics"] if m not in METRICS]
        if unknown:
            raise ValidationError(f"unknown metrics {unknown}; known: {', '.join(METRICS)}")
        for key in ("k", "minibatch_size", "n_hidden", "n_chains", "horizon", "n_points",
                    "ais_temperatures", "ais_runners", "dyn_chains", "max_lag", "reference_steps"):
            if v[key] < 1:
                raise ValidationError(f"{key} must be >= 1")
        for key in ("n_updates", "burn_in"):
            if v[key] < 0:
                raise ValidationError(f"{key} must be >= 0")
        if v["ais_temperatures"] < 2:
            raise ValidationError("ais_temperatures must be >= 2")
        if v["grid"] is not None and (not v["grid"] or min(v["grid"]) < 0
                                      or any(b <= a for a, b in zip(v["grid"], v["grid"][1:]))):
            raise ValidationError("grid must be a strictly increasing list of non-negative steps")
        for key in ("path", "test_path"):
            if v[key] is not None and not Path(v[key]).is_file():
                raise ValidationError(f"{key} {v[key]!r} does not exist")
        self.train_config()


def _convert(key, raw, origin):
    section, conv, _, _ = _BY_KEY[key]
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{origin}: bad value for [{section}] {key}: {exc}") from None


def read_ini(path) -> dict:
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ValidationError(f"config {path}: {exc}") from None
    out = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            if key not in _BY_KEY or _BY_KEY[key][0] != section:
                raise ValidationError(f"config {path}: unknown key [{section}] {key}")
            out[key] = _convert(key, raw, str(path))
    return out


def build(file_path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the file, then ``overrides`` (keys whose value is not None)."""
    values = {key: default for _, key, _, default, _ in FIELDS}
    sources = {key: "default" for key in values}
    if file_path is not None:
        for key, val in read_ini(file_path).items():
            values[key] = val
            sources[key] = "file"
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in _BY_KEY:
            raise ValidationError(f"unknown setting {key!r}")
        values[key] = _convert(key, raw, "command line")
        sources[key] = "flag"
    return ExperimentConfig(values, sources)


def add_flags(parser) -> None:
    """One flag per config key; unset flags stay None so the file can fill them."""
    groups = {}
    for section, key, _, default, help in FIELDS:
        grp = groups.setdefault(section, parser.add_argument_group(f"[{section}]"))
        grp.add_argument("--" + key.replace("_", "-"), dest=key, default=None, metavar="VALUE",
                         help=f"{help} (default: {default})")
