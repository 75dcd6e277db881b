# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Gibbs and AIS kernels.

Same contract as ``_kernels_py``. Chains are cut into fixed blocks of
``BLOCK`` rows; preactivations of a block come from one BLAS ``dgemm`` and
blocks run in parallel with OpenMP. The blocking never depends on the
thread count, so neither do the results.
"""
from cython.parallel cimport prange, parallel
from libc.math cimport exp
from libc.stdint cimport uint8_t, uint64_t
from libc.stdlib cimport malloc, free
from scipy.linalg.cython_blas cimport dgemm

import numpy as np

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t rbm_mix64(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    static inline double rbm_uniform(uint64_t key, uint64_t counter) {
        uint64_t s = key + (counter + 1ULL) * 0x9E3779B97F4A7C15ULL;
        return (double)(rbm_mix64(s) >> 11) * (1.0 / 9007199254740992.0);
    }
    """
    uint64_t rbm_mix64(uint64_t z) nogil
    double rbm_uniform(uint64_t key, uint64_t counter) nogil


BACKEND = "cython"

cdef enum:
    CBLOCK = 64

BLOCK = CBLOCK


cdef inline double _sigmoid(double y) noexcept nogil:
    return 1.0 / (1.0 + exp(-y))


cdef struct Work:
    # per-thread scratch for one block of chains (row-major, m rows)
    double* vd   # m x nv states as 0.0/1.0
    double* hd   # m x nh
    double* xh   # m x nh hidden preactivations c + v W
    double* xv   # m x nv visible preactivations b + W h


cdef Work _work_alloc(Py_ssize_t nv, Py_ssize_t nh) noexcept nogil:
    cdef Work w
    w.vd = <double*> malloc(sizeof(double) * CBLOCK * (2 * nv + 2 * nh))
    w.hd = w.vd + CBLOCK * nv
    w.xh = w.hd + CBLOCK * nh
    w.xv = w.xh + CBLOCK * nh
    return w


cdef void _hidden_pre(const double* W, const double* c, Py_ssize_t nv, Py_ssize_t nh,
                      int m, Work w) noexcept nogil:
    # xh = c + vd @ W; in column-major terms xh^T = W^T vd^T
    cdef Py_ssize_t r, a
    cdef int inh = <int> nh, inv = <int> nv
    cdef double one = 1.0
    for r in range(m):
        for a in range(nh):
            w.xh[r * nh + a] = c[a]
    dgemm("N", "N", &inh, &m, &inv, &one, <double*> W, &inh, w.vd, &inv, &one, w.xh, &inh)


cdef void _visible_pre(const double* W, const double* b, Py_ssize_t nv, Py_ssize_t nh,
                       int m, Work w) noexcept nogil:
    # xv = b + hd @ W^T; in column-major terms xv^T = W hd^T
    cdef Py_ssize_t r, i
    cdef int inh = <int> nh, inv = <int> nv
    cdef double one = 1.0
    for r in range(m):
        for i in range(nv):
            w.xv[r * nv + i] = b[i]
    dgemm("T", "N", &inv, &m, &inh, &one, <double*> W, &inh, w.hd, &inh, &one, w.xv, &inv)


cdef void _sweep_block(const double* W, const double* b, const double* c,
                       Py_ssize_t nv, Py_ssize_t nh, int m,
                       uint8_t* v, uint8_t* h, double* vm, const uint64_t* keys,
                       uint64_t t, double beta, Work w) noexcept nogil:
    # one block update h|v then v|h of m chains at step index t; vd must hold v
    cdef Py_ssize_t r, i, a
    cdef uint64_t base = t * <uint64_t>(nv + nh)
    cdef double p
    _hidden_pre(W, c, nv, nh, m, w)
    for r in range(m):
        for a in range(nh):
            p = _sigmoid(beta * w.xh[r * nh + a])
            h[r * nh + a] = 1 if rbm_uniform(keys[r], base + <uint64_t>a) < p else 0
            w.hd[r * nh + a] = h[r * nh + a]
    _visible_pre(W, b, nv, nh, m, w)
    for r in range(m):
        for i in range(nv):
            p = _sigmoid(beta * w.xv[r * nv + i])
            vm[r * nv + i] = p
            v[r * nv + i] = 1 if rbm_uniform(keys[r], base + <uint64_t>(nh + i)) < p else 0
            w.vd[r * nv + i] = v[r * nv + i]


def gibbs_sweeps(const double[:, ::1] W, const double[::1] b, const double[::1] c,
                 uint8_t[:, ::1] v, uint8_t[:, ::1] h, double[:, ::1] vmeans,
                 const uint64_t[::1] keys, uint64_t step0, Py_ssize_t n_steps,
                 double beta=1.0, double[:, ::1] vmean_sum=None, int n_threads=1):
    """Advance every chain ``n_steps`` block-Gibbs steps in place.

    Step ``step0 + s`` of chain ``j`` draws its uniforms from
    ``(keys[j], (step0 + s) * (nv + nh) + unit)``, hidden units first.
    If ``vmean_sum`` is given, the visible means after each step are added
    to it.
    """
    cdef Py_ssize_t n = v.shape[0], nv = W.shape[0], nh = W.shape[1]
    cdef Py_ssize_t n_blocks = (n + CBLOCK - 1) // CBLOCK
    cdef Py_ssize_t blk, j0, s, x
    cdef int m
    cdef Work w
    cdef bint accumulate = vmean_sum is not None
    cdef double* acc_ptr = NULL
    if n_steps <= 0 or n == 0:
        return
    if accumulate:
        acc_ptr = &vmean_sum[0, 0]
    with nogil, parallel(num_threads=max(n_threads, 1)):
        w = _work_alloc(nv, nh)
        for blk in prange(n_blocks, schedule="static"):
            j0 = blk * CBLOCK
            m = <int> min(CBLOCK, n - j0)
            for x in range(m * nv):
                w.vd[x] = (&v[j0, 0])[x]
            for s in range(n_steps):
                _sweep_block(&W[0, 0], &b[0], &c[0], nv, nh, m, &v[j0, 0], &h[j0, 0],
                             &vmeans[j0, 0], &keys[j0], step0 + <uint64_t>s, beta, w)
                if accumulate:
                    for x in range(m * nv):
                        acc_ptr[j0 * nv + x] = acc_ptr[j0 * nv + x] + (&vmeans[j0, 0])[x]
        free(w.vd)


def ais_log_weights(const double[:, ::1] W, const double[::1] b, const double[::1] c,
                    const double[::1] betas, uint8_t[:, ::1] v, uint8_t[:, ::1] h,
                    const uint64_t[::1] keys, int n_threads=1):
    """Joint-state AIS log-weights, one per runner.

    ``v``/``h`` hold exact samples of the beta=0 (uniform) distribution and
    are overwritten. At temperature index k (1..K) the weight gains
    ``(betas[k] - betas[k-1]) * (-E)``; a sweep at ``betas[k]`` with step
    index ``k - 1`` follows for every k < K.
    """
    cdef Py_ssize_t n = v.shape[0], nv = W.shape[0], nh = W.shape[1]
    cdef Py_ssize_t K = betas.shape[0] - 1
    cdef Py_ssize_t n_blocks = (n + CBLOCK - 1) // CBLOCK
    cdef Py_ssize_t blk, j0, k, r, i, a, x
    cdef int m
    cdef double neg_e
    cdef double* vm
    cdef Work w
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] logw = out
    if n == 0:
        return out
    with nogil, parallel(num_threads=max(n_threads, 1)):
        w = _work_alloc(nv, nh)
        vm = <double*> malloc(sizeof(double) * CBLOCK * nv)
        for blk in prange(n_blocks, schedule="static"):
            j0 = blk * CBLOCK
            m = <int> min(CBLOCK, n - j0)
            for x in range(m * nv):
                w.vd[x] = (&v[j0, 0])[x]
            for x in range(m * nh):
                w.hd[x] = (&h[j0, 0])[x]
            # xv = b + W h always describes the current joint state
            _visible_pre(&W[0, 0], &b[0], nv, nh, m, w)
            for k in range(1, K + 1):
                for r in range(m):
                    # -E(v, h) = v . (b + W h) + c . h
                    neg_e = 0.0
                    for i in range(nv):
                        neg_e = neg_e + w.vd[r * nv + i] * w.xv[r * nv + i]
                    for a in range(nh):
                        neg_e = neg_e + w.hd[r * nh + a] * c[a]
                    logw[j0 + r] = logw[j0 + r] + (betas[k] - betas[k - 1]) * neg_e
                if k < K:
                    _sweep_block(&W[0, 0], &b[0], &c[0], nv, nh, m, &v[j0, 0], &h[j0, 0], vm,
                                 &keys[j0], <uint64_t>(k - 1), betas[k], w)
        free(vm)
        free(w.vd)
    return out
