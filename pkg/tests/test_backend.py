import numpy as np
import pytest

from rbmlab import _backend, _kernels_py
from rbmlab.likelihood import ais_log_z, uniform_schedule
from rbmlab.model import RbmModel
from rbmlab.rng import SeedSpec
from rbmlab.sampler import init_random

compiled = pytest.mark.skipif("cython" not in _backend.AVAILABLE, reason="compiled kernels not built")


def _run(kern, model, ens, n_steps, beta=1.0, threads=1, acc=False):
    v, h, vm = ens.visible_states.copy(), ens.hidden_states.copy(), ens.visible_means.copy()
    vsum = np.zeros_like(vm) if acc else None
    kern.gibbs_sweeps(model.weights, model.visible_bias, model.hidden_bias, v, h, vm, ens.keys,
                      3, n_steps, beta, vsum, threads)
    return v, h, vm, vsum


def test_default_backend_reported():
    assert _backend.BACKEND in _backend.AVAILABLE
    assert _backend.get_kernels("python") is _kernels_py
    with pytest.raises(ValueError):
        _backend.get_kernels("fortran")


@compiled
@pytest.mark.parametrize("beta", [1.0, 0.37])
def test_compiled_matches_python(beta):
    m = RbmModel.random(13, 7, 1.2, rng=0)
    ens = init_random(m, 64, SeedSpec(1))
    a = _run(_backend.get_kernels("cython"), m, ens, 25, beta, acc=True)
    b = _run(_kernels_py, m, ens, 25, beta, acc=True)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert np.allclose(a[2], b[2], rtol=0, atol=1e-13)
    assert np.allclose(a[3], b[3], rtol=0, atol=1e-11)


@compiled
def test_compiled_thread_count_independent():
    m = RbmModel.random(10, 6, rng=2)
    ens = init_random(m, 101, SeedSpec(3))
    kern = _backend.get_kernels("cython")
    a = _run(kern, m, ens, 10, threads=1)
    b = _run(kern, m, ens, 10, threads=4)
    for x, y in zip(a[:3], b[:3]):
        assert np.array_equal(x, y)


@compiled
def test_ais_kernels_agree(monkeypatch):
    m = RbmModel.random(6, 5, 0.5, rng=4)
    sched = uniform_schedule(200)
    monkeypatch.setattr(_backend, "kernels", _backend.get_kernels("cython"))
    a = ais_log_z(m, sched, 50, SeedSpec(0))
    monkeypatch.setattr(_backend, "kernels", _kernels_py)
    b = ais_log_z(m, sched, 50, SeedSpec(0))
    assert np.allclose(a.log_weights, b.log_weights, rtol=0, atol=1e-10)


def test_thread_env(monkeypatch):
    monkeypatch.setenv("RBMLAB_THREADS", "3")
    assert _backend.n_threads() == 3
    monkeypatch.setenv("RBMLAB_THREADS", "junk")
    assert _backend.n_threads() >= 1
