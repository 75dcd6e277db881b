"""Slow reference computations by brute force.

Nothing here goes through the fast paths in :mod:`rbmlab.model` or
:mod:`rbmlab.likelihood`: energies are explicit double loops, partition
functions sum the full joint over visible *and* hidden states, and
gradients come from finite differences. Use only on tiny models.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import CapacityError
from .model import RbmModel

MAX_JOINT = 22


def naive_energy(model: RbmModel, v, h) -> float:
    w, b, c = model.weights, model.visible_bias, model.hidden_bias
    e = 0.0
    for i in range(len(v)):
        for a in range(len(h)):
            e -= w[i, a] * v[i] * h[a]
    for i in range(len(v)):
        e -= b[i] * v[i]
    for a in range(len(h)):
        e -= c[a] * h[a]
    return e


def _bits(n: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=n)))


def joint_table(model: RbmModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Visible states, hidden states and the (2^nv, 2^nh) table of -E(v, h)."""
    nv, nh = model.n_visible, model.n_hidden
    if nv + nh > MAX_JOINT:
        raise CapacityError(f"joint enumeration needs nv + nh <= {MAX_JOINT}")
    vs, hs = _bits(nv), _bits(nh)
    neg_e = (np.einsum("vi,ia,ha->vh", vs, model.weights, hs)
             + (vs @ model.visible_bias)[:, None] + (hs @ model.hidden_bias)[None, :])
    return vs, hs, neg_e


def log_z(model: RbmModel) -> float:
    _, _, neg_e = joint_table(model)
    top = neg_e.max()
    return float(top + math.log(np.exp(neg_e - top).sum()))


def joint_probabilities(model: RbmModel):
    vs, hs, neg_e = joint_table(model)
    p = np.exp(neg_e - neg_e.max())
    return vs, hs, p / p.sum()


def visible_marginal(model: RbmModel) -> tuple[np.ndarray, np.ndarray]:
    vs, _, p = joint_probabilities(model)
    return vs, p.sum(axis=1)


def hidden_conditional(model: RbmModel, v) -> np.ndarray:
    """p(h_a = 1 | v) from the normalized joint restricted to row ``v``."""
    vs, hs, p = joint_probabilities(model)
    row = int(np.flatnonzero((vs == np.asarray(v, dtype=float)).all(axis=1))[0])
    cond = p[row] / p[row].sum()
    return cond @ hs


def visible_conditional(model: RbmModel, h) -> np.ndarray:
    vs, hs, p = joint_probabilities(model)
    col = int(np.flatnonzero((hs == np.asarray(h, dtype=float)).all(axis=1))[0])
    cond = p[:, col] / p[:, col].sum()
    return cond @ vs


def moments(model: RbmModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact <v h^T>, <v>, <h> under the model."""
    vs, hs, p = joint_probabilities(model)
    return vs.T @ p @ hs, p.sum(axis=1) @ vs, p.sum(axis=0) @ hs


def log_likelihood(model: RbmModel, data) -> float:
    """Mean ln p(v) over rows of ``data``, looked up in the enumerated marginal."""
    vs, p = visible_marginal(model)
    data = np.asarray(data, dtype=float)
    powers = 2 ** np.arange(model.n_visible - 1, -1, -1)
    idx = (data @ powers).astype(int)
    # vs is in lexicographic order, so row index == binary value
    assert np.array_equal(vs[idx], data)
    return float(np.mean(np.log(p[idx])))


def finite_difference_gradient(model: RbmModel, data, eps: float = 1e-5):
    """Central differences of the exact mean log-likelihood w.r.t. (W, b, c)."""
    def ll(w, b, c):
        return log_likelihood(RbmModel(w, b, c), data)

    params = [model.weights.copy(), model.visible_bias.copy(), model.hidden_bias.copy()]
    grads = []
    for p_idx, arr in enumerate(params):
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            plus = [q.copy() for q in params]
            minus = [q.copy() for q in params]
            plus[p_idx][idx] += eps
            minus[p_idx][idx] -= eps
            g[idx] = (ll(*plus) - ll(*minus)) / (2 * eps)
        grads.append(g)
    return tuple(grads)
