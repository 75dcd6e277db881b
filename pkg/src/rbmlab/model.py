"""Binary-binary RBM: parameters, energy, conditionals and free energies.

All functions accept a single configuration (1-D) or a batch (2-D, one row
per configuration) and return a scalar or a vector accordingly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionError, DomainError


def softplus(x):
    """ln(1 + e^x), stable for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RbmModel:
    """Weights ``w[i, a]`` (visible-major), visible bias ``b``, hidden bias ``c``.

    Arrays are copied and made read-only at construction.
    """

    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        b = _frozen(self.visible_bias)
        c = _frozen(self.hidden_bias)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise DimensionError(f"weights must be a non-empty matrix, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise DimensionError(f"visible_bias shape {b.shape} != ({w.shape[0]},)")
        if c.shape != (w.shape[1],):
            raise DimensionError(f"hidden_bias shape {c.shape} != ({w.shape[1]},)")
        for name, arr in (("weights", w), ("visible_bias", b), ("hidden_bias", c)):
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} contains non-finite values")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "visible_bias", b)
        object.__setattr__(self, "hidden_bias", c)

    @property
    def n_visible(self) -> int:
        return self.weights.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int) -> "RbmModel":
        return cls(np.zeros((n_visible, n_hidden)), np.zeros(n_visible), np.zeros(n_hidden))

    @classmethod
    def random(cls, n_visible: int, n_hidden: int, scale: float = 1.0,
               bias_scale: float | None = None, rng=None) -> "RbmModel":
        """Gaussian parameters; weights ~ N(0, scale^2), biases ~ N(0, bias_scale^2)."""
        rng = np.random.default_rng(rng)
        bias_scale = scale if bias_scale is None else bias_scale
        return cls(
            rng.normal(0.0, scale, (n_visible, n_hidden)),
            rng.normal(0.0, bias_scale, n_visible),
            rng.normal(0.0, bias_scale, n_hidden),
        )

    def replace(self, weights=None, visible_bias=None, hidden_bias=None) -> "RbmModel":
        return RbmModel(
            self.weights if weights is None else weights,
            self.visible_bias if visible_bias is None else visible_bias,
            self.hidden_bias if hidden_bias is None else hidden_bias,
        )

    def swap_layers(self) -> "RbmModel":
        """The same Boltzmann distribution with visible and hidden roles exchanged."""
        return RbmModel(self.weights.T, self.hidden_bias, self.visible_bias)

    def allclose(self, other: "RbmModel", **kw) -> bool:
        return (self.weights.shape == other.weights.shape
                and np.allclose(self.weights, other.weights, **kw)
                and np.allclose(self.visible_bias, other.visible_bias, **kw)
                and np.allclose(self.hidden_bias, other.hidden_bias, **kw))

    def __eq__(self, other):
        if not isinstance(other, RbmModel):
            return NotImplemented
        return (np.array_equal(self.weights, other.weights)
                and np.array_equal(self.visible_bias, other.visible_bias)
                and np.array_equal(self.hidden_bias, other.hidden_bias))

    __hash__ = None


def as_binary(x, n_units: int | None = None, name: str = "input") -> np.ndarray:
    """Validate a binary vector or matrix and return it as float64."""
    arr = np.asarray(x)
    if arr.ndim not in (1, 2):
        raise DimensionError(f"{name} must be 1-D or 2-D, got {arr.ndim}-D")
    if n_units is not None and arr.shape[-1] != n_units:
        raise DimensionError(f"{name} has {arr.shape[-1]} units, expected {n_units}")
    if not np.all((arr == 0) | (arr == 1)):
        raise DomainError(f"{name} entries must be exactly 0 or 1")
    return arr.astype(np.float64, copy=False)


def energy(model: RbmModel, visible, hidden):
    """E(v, h) = -v.W.h - b.v - c.h."""
    v = as_binary(visible, model.n_visible, "visible")
    h = as_binary(hidden, model.n_hidden, "hidden")
    if v.ndim != h.ndim or (v.ndim == 2 and v.shape[0] != h.shape[0]):
        raise DimensionError(f"visible {v.shape} and hidden {h.shape} batches differ")
    return _energy(model, v, h)


def _energy(model, v, h):
    return -(np.sum((v @ model.weights) * h, axis=-1)
             + v @ model.visible_bias + h @ model.hidden_bias)


def hidden_preactivation(model: RbmModel, v: np.ndarray) -> np.ndarray:
    return v @ model.weights + model.hidden_bias


def visible_preactivation(model: RbmModel, h: np.ndarray) -> np.ndarray:
    return h @ model.weights.T + model.visible_bias


def hidden_conditional(model: RbmModel, visible) -> np.ndarray:
    """p(h_a = 1 | v) = logistic(sum_i w_ia v_i + c_a)."""
    v = as_binary(visible, model.n_visible, "visible")
    return expit(hidden_preactivation(model, v))


def visible_conditional(model: RbmModel, hidden) -> np.ndarray:
    """p(v_i = 1 | h) = logistic(sum_a w_ia h_a + b_i)."""
    h = as_binary(hidden, model.n_hidden, "hidden")
    return expit(visible_preactivation(model, h))


def visible_free_energy(model: RbmModel, visible):
    """ln sum_h exp(-E(v, h)) = b.v + sum_a softplus(w_a.v + c_a).

    Note the sign: this is the log of the unnormalized marginal, so larger
    means more probable.
    """
    v = as_binary(visible, model.n_visible, "visible")
    return _visible_free_energy(model, v)


def _visible_free_energy(model, v):
    return v @ model.visible_bias + softplus(hidden_preactivation(model, v)).sum(axis=-1)


def hidden_free_energy(model: RbmModel, hidden):
    """ln sum_v exp(-E(v, h)), the visible layer marginalized."""
    h = as_binary(hidden, model.n_hidden, "hidden")
    return _hidden_free_energy(model, h)


def _hidden_free_energy(model, h):
    return h @ model.hidden_bias + softplus(visible_preactivation(model, h)).sum(axis=-1)


def all_states(n: int) -> np.ndarray:
    """Every binary vector of length ``n`` as rows, in lexicographic order."""
    idx = np.arange(1 << n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.float64)


@dataclass(frozen=True)
class SufficientStats:
    """Moments <v h^T>, <v>, <h> entering the log-likelihood gradient."""

    vh: np.ndarray
    v: np.ndarray
    h: np.ndarray

    @classmethod
    def from_samples(cls, v: np.ndarray, h_mean: np.ndarray, weights=None) -> "SufficientStats":
        """Averages over rows of ``v`` with hidden units at their conditional means."""
        if weights is None:
            n = v.shape[0]
            return cls(v.T @ h_mean / n, v.mean(axis=0), h_mean.mean(axis=0))
        return cls(v.T @ (h_mean * weights[:, None]), weights @ v, weights @ h_mean)
