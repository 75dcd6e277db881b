"""Log-likelihood gradient ascent with Rdm-k, CD-k and PCD-k negative phases.

Every update draws its randomness from ``config.seed`` spawned with the
update index, so a run can be resumed from any checkpoint and reproduce the
uninterrupted run exactly.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import expit

from .data import BinaryDataset
from .errors import EmptyDatasetError, NumericalError, StateError, ValidationError
from .likelihood import exact_moments
from .model import RbmModel, SufficientStats, as_binary
from .rng import SeedSpec
from .sampler import ChainEnsemble, gibbs_step, init_from_states, init_random

log = logging.getLogger(__name__)

SCHEMES = ("Rdm", "CD", "PCD")

# spawn labels
_INIT, _NEGATIVE, _EPOCH, _PERSISTENT = 1, 2, 3, 4


@dataclass(frozen=True)
class TrainConfig:
    scheme: str = "Rdm"
    k: int = 10
    learning_rate: float = 0.01
    minibatch_size: int = 128
    n_updates: int = 1000
    centered: bool = True
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(0))
    n_hidden: int = 16
    n_checkpoints: int = 40
    weight_init_std: float = 0.01
    offset_rate: float = 0.01

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if int(self.k) < 1:
            raise ValidationError("k must be >= 1")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be > 0")
        if int(self.minibatch_size) < 1 or int(self.n_hidden) < 1:
            raise ValidationError("minibatch_size and n_hidden must be >= 1")
        if int(self.n_updates) < 0:
            raise ValidationError("n_updates must be >= 0")
        if not 0 < self.offset_rate <= 1:
            raise ValidationError("offset_rate must be in (0, 1]")
        if isinstance(self.seed, int):
            object.__setattr__(self, "seed", SeedSpec(self.seed))

    def summary(self) -> dict:
        d = asdict(self)
        d["seed"] = {"master_seed": self.seed.master_seed, "stream_id": self.seed.stream_id}
        return d

    @classmethod
    def from_summary(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        seed = d.pop("seed", {"master_seed": 0})
        return cls(seed=SeedSpec(**seed), **d)


@dataclass
class Checkpoint:
    model: RbmModel
    t_age: int
    config: TrainConfig
    persistent: ChainEnsemble | None = None
    # centering offsets (visible, hidden); part of the training state
    offsets: tuple[np.ndarray, np.ndarray] | None = None


def init_visible_bias(data) -> np.ndarray:
    """Logit of per-site frequencies clamped to [1/(2M), 1 - 1/(2M)]."""
    samples = np.asarray(getattr(data, "samples", data), dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise EmptyDatasetError("dataset must be nonempty")
    m = samples.shape[0]
    freq = np.clip(samples.mean(axis=0), 1.0 / (2 * m), 1.0 - 1.0 / (2 * m))
    return np.log(freq / (1.0 - freq))


def init_model(data, config: TrainConfig) -> RbmModel:
    samples = getattr(data, "samples", data)
    n_visible = np.asarray(samples).shape[1]
    rng = config.seed.spawn(_INIT).generator()
    w = rng.normal(0.0, config.weight_init_std, (n_visible, config.n_hidden))
    return RbmModel(w, init_visible_bias(samples), np.zeros(config.n_hidden))


def _stats(model: RbmModel, v: np.ndarray) -> SufficientStats:
    return SufficientStats.from_samples(v, expit(v @ model.weights + model.hidden_bias))


def positive_phase(model: RbmModel, minibatch) -> SufficientStats:
    """Data moments with hidden units marginalized through p(h|v)."""
    v = as_binary(minibatch, model.n_visible, "minibatch")
    if v.ndim == 1:
        v = v[None, :]
    if v.shape[0] == 0:
        raise ValidationError("minibatch must be nonempty")
    return _stats(model, v)


def negative_phase(model: RbmModel, config: TrainConfig, persistent: ChainEnsemble | None,
                   minibatch, update_index: int = 0) -> tuple[SufficientStats, ChainEnsemble | None]:
    """Model moments from ``len(minibatch)`` chains run ``config.k`` steps.

    Rdm starts from fair coins, CD from the minibatch rows, PCD from
    ``persistent`` (initialized at random on update 0). Only PCD returns
    its advanced chains.
    """
    mb = np.asarray(minibatch)
    n_chains = mb.shape[0]
    seed = config.seed.spawn(_NEGATIVE, update_index)
    if config.scheme == "Rdm":
        chains = init_random(model, n_chains, seed)
    elif config.scheme == "CD":
        chains = init_from_states(model, mb, seed)
    else:
        if persistent is None:
            if update_index > 0:
                raise StateError(f"PCD update {update_index} has no persistent chains")
            persistent = init_random(model, n_chains, config.seed.spawn(_PERSISTENT))
        elif persistent.n_chains != n_chains:
            raise StateError(f"persistent ensemble has {persistent.n_chains} chains, "
                             f"minibatch has {n_chains}")
        chains = persistent
    gibbs_step(model, chains, config.k)
    stats = _stats(model, chains.visible_states.astype(np.float64))
    return stats, (chains if config.scheme == "PCD" else None)


@dataclass(frozen=True)
class GradientEstimate:
    d_weights: np.ndarray
    d_visible_bias: np.ndarray
    d_hidden_bias: np.ndarray


def gradient(positive: SufficientStats, negative: SufficientStats, offsets=None) -> GradientEstimate:
    """Ascent direction from data and model moments, centered on ``offsets = (mu, lambda)``.

    The centered weight gradient is
    ``<(v-mu)(h-lambda)^T>_data - <(v-mu)(h-lambda)^T>_model``; biases get
    the compensating terms ``- dW lambda`` and ``- dW^T mu`` so that the
    step is a gradient step in the centered parameterization expressed in
    the ordinary one. ``offsets=None`` (or zeros) gives the plain gradient.
    """
    d_vh = positive.vh - negative.vh
    d_v = positive.v - negative.v
    d_h = positive.h - negative.h
    if offsets is None:
        return GradientEstimate(d_vh, d_v, d_h)
    mu, lam = offsets
    d_w = d_vh - np.outer(mu, d_h) - np.outer(d_v, lam)
    return GradientEstimate(d_w, d_v - d_w @ lam, d_h - d_w.T @ mu)


def exact_gradient(model: RbmModel, data) -> GradientEstimate:
    """Log-likelihood gradient with enumerated model moments (tiny models only)."""
    return gradient(positive_phase(model, getattr(data, "samples", data)), exact_moments(model))


def centered_update(model: RbmModel, positive: SufficientStats, negative: SufficientStats,
                    learning_rate: float, offsets=None) -> RbmModel:
    """One plain gradient-ascent step along :func:`gradient` (no momentum, no decay)."""
    g = gradient(positive, negative, offsets)
    w = model.weights + learning_rate * g.d_weights
    b = model.visible_bias + learning_rate * g.d_visible_bias
    c = model.hidden_bias + learning_rate * g.d_hidden_bias
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise NumericalError("parameters became non-finite")
    return RbmModel(w, b, c)


def update_offsets(offsets, positive: SufficientStats, rate: float):
    """Exponential moving average of the data-phase unit means."""
    mu, lam = offsets
    return (1 - rate) * mu + rate * positive.v, (1 - rate) * lam + rate * positive.h


def initial_offsets(data, n_hidden: int):
    samples = np.asarray(getattr(data, "samples", data), dtype=np.float64)
    return samples.mean(axis=0), np.full(n_hidden, 0.5)


def checkpoint_ages(n_updates: int, n_points: int = 40) -> list[int]:
    """``n_points`` ages log-spaced from 1 towards ``n_updates``, plus ``n_updates`` itself.

    Rounding can merge neighbouring ages for short runs, so the list may be
    shorter than ``n_points + 1``.
    """
    if n_updates <= 0:
        return [0]
    raw = np.geomspace(1, n_updates, max(n_points, 0) + 1)[:-1]
    ages = {int(a) for a in np.round(raw)} | {n_updates}
    return sorted(ages)


class _Batches:
    """Epoch-wise shuffled minibatches, addressable by update index."""

    def __init__(self, n_rows: int, batch_size: int, seed: SeedSpec):
        self.n_rows = n_rows
        self.size = min(batch_size, n_rows)
        self.per_epoch = max(1, n_rows // self.size)
        self.seed = seed
        self._epoch = -1
        self._perm = None

    def __call__(self, update: int) -> np.ndarray:
        epoch, j = divmod(update, self.per_epoch)
        if epoch != self._epoch:
            self._perm = self.seed.spawn(_EPOCH, epoch).generator().permutation(self.n_rows)
            self._epoch = epoch
        return self._perm[j * self.size:(j + 1) * self.size]


def iter_train(data, config: TrainConfig, resume: Checkpoint | None = None):
    """Yield checkpoints as training reaches each scheduled age."""
    samples = np.asarray(getattr(data, "samples", data))
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise EmptyDatasetError("training data must be nonempty")
    as_binary(samples, None, "training data")
    x = samples.astype(np.float64)
    ages = checkpoint_ages(config.n_updates, config.n_checkpoints)
    if resume is None:
        model = init_model(samples, config)
        offsets = initial_offsets(samples, config.n_hidden) if config.centered else None
        persistent = None
        start = 0
        if config.n_updates == 0 or ages[0] == 0:
            yield Checkpoint(model, 0, config, None, offsets)
            return
    else:
        if resume.t_age > config.n_updates:
            raise ValidationError(f"checkpoint age {resume.t_age} exceeds n_updates {config.n_updates}")
        model, offsets, start = resume.model, resume.offsets, resume.t_age
        persistent = resume.persistent.copy() if resume.persistent is not None else None
        if config.centered and offsets is None:
            raise StateError("resuming a centered run needs stored offsets")
    batches = _Batches(len(samples), config.minibatch_size, config.seed)
    pending = [a for a in ages if a > start]
    for update in range(start, config.n_updates):
        mb = x[batches(update)]
        pos = _stats(model, mb)
        neg, persistent = negative_phase(model, config, persistent, mb, update)
        model = centered_update(model, pos, neg, config.learning_rate,
                                offsets if config.centered else None)
        if config.centered:
            offsets = update_offsets(offsets, pos, config.offset_rate)
        age = update + 1
        if pending and age == pending[0]:
            pending.pop(0)
            log.debug("checkpoint at age %d", age)
            yield Checkpoint(model, age, config,
                             persistent.copy() if persistent is not None else None,
                             None if offsets is None else (offsets[0].copy(), offsets[1].copy()))


def train(data, config: TrainConfig, resume: Checkpoint | None = None) -> list[Checkpoint]:
    """Run ``config.n_updates`` updates; return checkpoints at log-spaced ages."""
    return list(iter_train(data, config, resume))


def with_updates(config: TrainConfig, n_updates: int) -> TrainConfig:
    return replace(config, n_updates=n_updates)
