"""Partition functions and log-likelihoods.

``exact_log_z`` enumerates the smaller layer and marginalizes the other in
closed form. ``ais_log_z`` runs annealed importance sampling on the joint
distribution from the uniform (beta = 0) machine.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from . import _backend
from .errors import CapacityError, ValidationError
from .model import (RbmModel, SufficientStats, _hidden_free_energy, _visible_free_energy,
                    all_states, as_binary)
from .rng import SeedSpec, init_keys, uniforms

MAX_ENUM = 20
_CHUNK = 1 << 14


def _layer_to_enumerate(model: RbmModel) -> str:
    if min(model.n_visible, model.n_hidden) > MAX_ENUM:
        raise CapacityError(
            f"exact enumeration needs a layer of <= {MAX_ENUM} units, "
            f"model is {model.n_visible}x{model.n_hidden}")
    return "hidden" if model.n_hidden <= model.n_visible else "visible"


def _chunks(n: int):
    total = 1 << n
    idx_shift = np.arange(n - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        yield ((idx[:, None] >> idx_shift) & 1).astype(np.float64)


def exact_log_z(model: RbmModel) -> float:
    """ln Z by enumerating the smaller layer (at most 20 units)."""
    if _layer_to_enumerate(model) == "hidden":
        parts = [logsumexp(_hidden_free_energy(model, h)) for h in _chunks(model.n_hidden)]
    else:
        parts = [logsumexp(_visible_free_energy(model, v)) for v in _chunks(model.n_visible)]
    return float(logsumexp(parts))


def visible_distribution(model: RbmModel) -> np.ndarray:
    """p(v) for every visible state in :func:`rbmlab.model.all_states` order."""
    if model.n_visible > MAX_ENUM:
        raise CapacityError(f"cannot enumerate {model.n_visible} visible units")
    logp = _visible_free_energy(model, all_states(model.n_visible))
    return np.exp(logp - logsumexp(logp))


def exact_moments(model: RbmModel) -> SufficientStats:
    """Exact <v h^T>, <v>, <h> under the model's Boltzmann distribution."""
    log_z = exact_log_z(model)
    vh = np.zeros((model.n_visible, model.n_hidden))
    mv = np.zeros(model.n_visible)
    mh = np.zeros(model.n_hidden)
    if _layer_to_enumerate(model) == "visible":
        for v in _chunks(model.n_visible):
            p = np.exp(_visible_free_energy(model, v) - log_z)
            hm = expit(v @ model.weights + model.hidden_bias)
            part = SufficientStats.from_samples(v, hm, p)
            vh += part.vh; mv += part.v; mh += part.h
    else:
        for h in _chunks(model.n_hidden):
            p = np.exp(_hidden_free_energy(model, h) - log_z)
            vm = expit(h @ model.weights.T + model.visible_bias)
            vh += (vm * p[:, None]).T @ h
            mv += p @ vm
            mh += p @ h
    return SufficientStats(vh, mv, mh)


def log_likelihood(model: RbmModel, samples, log_z: float) -> float:
    """Mean over rows of ln p(v) = free energy(v) - ln Z."""
    v = as_binary(samples, model.n_visible, "samples")
    if v.ndim == 1:
        v = v[None, :]
    if v.shape[0] == 0:
        raise ValidationError("samples must be nonempty")
    return float(np.mean(_visible_free_energy(model, v)) - log_z)


@dataclass(frozen=True)
class BetaSchedule:
    betas: np.ndarray

    def __post_init__(self):
        b = np.array(self.betas, dtype=np.float64)
        if b.ndim != 1 or b.size < 2:
            raise ValidationError("schedule needs at least two temperatures")
        if b[0] != 0.0 or b[-1] != 1.0:
            raise ValidationError("schedule must start at 0 and end at 1")
        if np.any(np.diff(b) <= 0):
            raise ValidationError("schedule must be strictly increasing")
        b.setflags(write=False)
        object.__setattr__(self, "betas", b)

    def __len__(self):
        return self.betas.size


def uniform_schedule(n: int) -> BetaSchedule:
    """``n`` equally spaced inverse temperatures from 0 to 1 inclusive."""
    if n < 2:
        raise ValidationError("uniform_schedule needs n >= 2")
    return BetaSchedule(np.arange(n, dtype=np.float64) / (n - 1))


@dataclass(frozen=True)
class AisResult:
    log_z_estimate: float
    log_weights: np.ndarray
    n_temperatures: int
    n_runners: int
    log_z0: float

    @property
    def log_z_std_error(self) -> float:
        """Delta-method standard error of the ln Z estimate."""
        w = np.exp(self.log_weights - self.log_weights.max())
        return float(w.std(ddof=1) / (np.sqrt(w.size) * w.mean()))


def log_mean_exp(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(logsumexp(x) - np.log(x.size))


def ais_log_z(model: RbmModel, schedule: BetaSchedule, n_runners: int, seed: SeedSpec) -> AisResult:
    """Annealed importance sampling estimate of ln Z.

    Runners start from exact samples of the uniform joint distribution and
    make one h-then-v Gibbs sweep at each intermediate temperature.
    """
    if not isinstance(schedule, BetaSchedule):
        schedule = BetaSchedule(schedule)
    if n_runners < 2:
        raise ValidationError("AIS needs at least two runners")
    keys = seed.chain_keys(n_runners)
    u = uniforms(init_keys(keys)[:, None],
                 np.arange(model.n_visible + model.n_hidden, dtype=np.uint64))
    start = (u < 0.5).astype(np.uint8)
    v = np.ascontiguousarray(start[:, :model.n_visible])
    h = np.ascontiguousarray(start[:, model.n_visible:])
    logw = _backend.kernels.ais_log_weights(
        model.weights, model.visible_bias, model.hidden_bias, schedule.betas,
        v, h, keys, _backend.n_threads())
    log_z0 = (model.n_visible + model.n_hidden) * np.log(2.0)
    return AisResult(log_mean_exp(logw) + log_z0, np.asarray(logw), len(schedule), n_runners,
                     float(log_z0))


def log_z(model: RbmModel, schedule: BetaSchedule | None = None, n_runners: int = 1000,
          seed: SeedSpec | None = None) -> tuple[float, bool]:
    """ln Z, exact when enumeration is possible. Returns (value, is_exact)."""
    if min(model.n_visible, model.n_hidden) <= MAX_ENUM:
        return exact_log_z(model), True
    schedule = schedule or uniform_schedule(10_000)
    result = ais_log_z(model, schedule, n_runners, seed or SeedSpec(0))
    return result.log_z_estimate, False
