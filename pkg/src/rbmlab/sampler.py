"""Block Gibbs sampling of chain ensembles.

Chains are updated h|v then v|h, so ``visible_means`` always holds the
logistic means that produced the current visible states. Randomness is
addressed by (chain key, step, unit); see :mod:`rbmlab.rng`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import _backend
from .errors import DimensionError, EmptyDatasetError, ValidationError
from .model import RbmModel, as_binary
from .rng import SeedSpec, init_keys, uniforms


@dataclass
class ChainEnsemble:
    """A batch of parallel chains plus their step counter ``t_G``.

    Mutable: :func:`gibbs_step` advances it in place. Use :meth:`copy` to
    keep a state around.
    """

    visible_states: np.ndarray
    hidden_states: np.ndarray
    visible_means: np.ndarray
    keys: np.ndarray
    step_counter: int = 0

    def __post_init__(self):
        self.visible_states = np.ascontiguousarray(self.visible_states, dtype=np.uint8)
        self.hidden_states = np.ascontiguousarray(self.hidden_states, dtype=np.uint8)
        self.visible_means = np.ascontiguousarray(self.visible_means, dtype=np.float64)
        self.keys = np.ascontiguousarray(self.keys, dtype=np.uint64)
        n = self.visible_states.shape[0]
        if (self.hidden_states.shape[0] != n or self.visible_means.shape != self.visible_states.shape
                or self.keys.shape != (n,)):
            raise DimensionError("inconsistent chain ensemble shapes")
        self.step_counter = int(self.step_counter)

    @property
    def n_chains(self) -> int:
        return self.visible_states.shape[0]

    @property
    def n_visible(self) -> int:
        return self.visible_states.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.hidden_states.shape[1]

    def copy(self) -> "ChainEnsemble":
        return ChainEnsemble(self.visible_states.copy(), self.hidden_states.copy(),
                             self.visible_means.copy(), self.keys.copy(), self.step_counter)

    def take(self, index) -> "ChainEnsemble":
        """Sub-ensemble (or permutation) of chains; keys travel with their chains."""
        return ChainEnsemble(self.visible_states[index], self.hidden_states[index],
                             self.visible_means[index], self.keys[index], self.step_counter)

    def check(self, model: RbmModel) -> None:
        if self.n_visible != model.n_visible or self.n_hidden != model.n_hidden:
            raise DimensionError(
                f"ensemble is {self.n_visible}x{self.n_hidden}, "
                f"model is {model.n_visible}x{model.n_hidden}")


@dataclass(frozen=True)
class Snapshot:
    """Copy of an ensemble's visible side at step ``step_counter``."""

    step_counter: int
    visible_states: np.ndarray = field(repr=False)
    visible_means: np.ndarray = field(repr=False)


def _sample_hidden(model: RbmModel, v: np.ndarray, keys: np.ndarray, offset: int) -> np.ndarray:
    ph = expit(v @ model.weights + model.hidden_bias)
    counters = np.uint64(offset) + np.arange(model.n_hidden, dtype=np.uint64)
    return (uniforms(keys[:, None], counters) < ph).astype(np.uint8)


def _with_visible(model: RbmModel, v: np.ndarray, keys: np.ndarray, ikeys: np.ndarray,
                  offset: int) -> ChainEnsemble:
    h = _sample_hidden(model, v.astype(np.float64), ikeys, offset)
    # means of the (virtual) visible update that produced v: conditional given h
    vm = expit(h @ model.weights.T + model.visible_bias)
    return ChainEnsemble(v.astype(np.uint8), h, vm, keys, 0)


def init_random(model: RbmModel, n_chains: int, seed: SeedSpec) -> ChainEnsemble:
    """Fair-coin visible states; hidden states drawn from p(h | v)."""
    if n_chains < 1:
        raise ValidationError("n_chains must be >= 1")
    keys = seed.chain_keys(n_chains)
    ikeys = init_keys(keys)
    u = uniforms(ikeys[:, None], np.arange(model.n_visible, dtype=np.uint64))
    v = (u < 0.5).astype(np.uint8)
    return _with_visible(model, v, keys, ikeys, model.n_visible)


def init_from_dataset(model: RbmModel, data, n_chains: int, seed: SeedSpec) -> ChainEnsemble:
    """Visible states drawn uniformly with replacement from dataset rows."""
    samples = getattr(data, "samples", data)
    samples = np.asarray(samples)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise EmptyDatasetError("dataset must contain at least one row")
    as_binary(samples, model.n_visible, "dataset")
    if n_chains < 1:
        raise ValidationError("n_chains must be >= 1")
    keys = seed.chain_keys(n_chains)
    ikeys = init_keys(keys)
    u = uniforms(ikeys, np.zeros(n_chains, dtype=np.uint64))
    rows = np.minimum((u * samples.shape[0]).astype(np.int64), samples.shape[0] - 1)
    return _with_visible(model, samples[rows].astype(np.uint8), keys, ikeys, 1)


def init_from_states(model: RbmModel, visible, seed: SeedSpec) -> ChainEnsemble:
    """One chain per given visible row (used for CD negative chains)."""
    v = np.asarray(visible)
    as_binary(v, model.n_visible, "visible")
    keys = seed.chain_keys(v.shape[0])
    return _with_visible(model, v.astype(np.uint8), keys, init_keys(keys), 0)


def gibbs_step(model: RbmModel, ensemble: ChainEnsemble, n_steps: int = 1,
               beta: float = 1.0, vmean_sum: np.ndarray | None = None) -> ChainEnsemble:
    """Advance ``ensemble`` in place by ``n_steps`` block updates and return it."""
    if n_steps < 0:
        raise ValidationError("n_steps must be >= 0")
    ensemble.check(model)
    if n_steps == 0:
        return ensemble
    _backend.kernels.gibbs_sweeps(
        model.weights, model.visible_bias, model.hidden_bias,
        ensemble.visible_states, ensemble.hidden_states, ensemble.visible_means,
        ensemble.keys, ensemble.step_counter, n_steps, float(beta), vmean_sum,
        _backend.n_threads())
    ensemble.step_counter += n_steps
    return ensemble


def record_trajectory(model: RbmModel, ensemble: ChainEnsemble, horizon: int,
                      points) -> list[tuple[int, Snapshot]]:
    """Run ``horizon`` steps, snapshotting after each requested step count.

    ``points`` count steps from the ensemble's current position. The
    ensemble is left advanced by ``horizon``.
    """
    points = [int(p) for p in points]
    if any(b <= a for a, b in zip(points, points[1:])):
        raise ValidationError("snapshot points must be strictly increasing")
    if points and (points[0] < 0 or points[-1] > horizon):
        raise ValidationError(f"snapshot points must lie in [0, {horizon}]")
    out = []
    done = 0
    for p in points:
        gibbs_step(model, ensemble, p - done)
        done = p
        out.append((ensemble.step_counter, Snapshot(
            ensemble.step_counter, ensemble.visible_states.copy(), ensemble.visible_means.copy())))
    gibbs_step(model, ensemble, horizon - done)
    return out


def log_grid(horizon: int, n_points: int, start: int = 1) -> list[int]:
    """Integers roughly equally spaced in log scale in [start, horizon], deduplicated."""
    if horizon < start:
        return []
    raw = np.geomspace(start, horizon, num=max(n_points, 1))
    return sorted({int(round(x)) for x in raw} | {horizon})
