"""Pure-numpy versions of the hot kernels (fallback for ``_kernels``).

Draws use the same counter addressing as the compiled module, so both
backends sample the same chains; they agree exactly unless a uniform lands
within rounding distance of a conditional probability.
"""
import numpy as np

from .rng import uniforms

BACKEND = "python"


def _sigmoid(y):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-y))


def _sweep(W, b, c, v, h, keys, t, beta):
    nv, nh = W.shape
    base = np.uint64(t) * np.uint64(nv + nh)
    k = keys[:, None]
    ph = _sigmoid(beta * (v @ W + c))
    h = (uniforms(k, base + np.arange(nh, dtype=np.uint64)) < ph).astype(np.float64)
    pv = _sigmoid(beta * (h @ W.T + b))
    v = (uniforms(k, base + np.uint64(nh) + np.arange(nv, dtype=np.uint64)) < pv).astype(np.float64)
    return v, h, pv


def gibbs_sweeps(W, b, c, v, h, vmeans, keys, step0, n_steps, beta=1.0,
                 vmean_sum=None, n_threads=1):
    if n_steps <= 0 or v.shape[0] == 0:
        return
    vf = v.astype(np.float64)
    hf = h.astype(np.float64)
    pv = vmeans
    for s in range(n_steps):
        vf, hf, pv = _sweep(W, b, c, vf, hf, keys, step0 + s, beta)
        if vmean_sum is not None:
            vmean_sum += pv
    v[...] = vf
    h[...] = hf
    vmeans[...] = pv


def ais_log_weights(W, b, c, betas, v, h, keys, n_threads=1):
    vf = v.astype(np.float64)
    hf = h.astype(np.float64)
    logw = np.zeros(v.shape[0])
    K = len(betas) - 1
    for k in range(1, K + 1):
        neg_e = np.sum((vf @ W) * hf, axis=1) + vf @ b + hf @ c
        logw += (betas[k] - betas[k - 1]) * neg_e
        if k < K:
            vf, hf, _ = _sweep(W, b, c, vf, hf, keys, k - 1, betas[k])
    v[...] = vf
    h[...] = hf
    return logw
