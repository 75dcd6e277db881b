"""Time Gibbs sweeps and AIS with the compiled and numpy kernels.

    python benchmarks/bench_gibbs.py [--chains 1000] [--steps 200]

Both backends start from identical states and must end in identical ones;
the script checks that before printing timings.
"""
import argparse
import time

import numpy as np

from rbmlab import _backend
from rbmlab.model import RbmModel
from rbmlab.rng import SeedSpec
from rbmlab.sampler import init_random


def sweep_time(kernels, model, ens, steps, threads):
    v, h, m = ens.visible_states.copy(), ens.hidden_states.copy(), ens.visible_means.copy()
    t0 = time.perf_counter()
    kernels.gibbs_sweeps(model.weights, model.visible_bias, model.hidden_bias, v, h, m,
                         ens.keys, 0, steps, 1.0, None, threads)
    return time.perf_counter() - t0, v


def ais_time(kernels, model, betas, runners, threads):
    rng = np.random.default_rng(0)
    v = rng.integers(0, 2, (runners, model.n_visible), dtype=np.uint8)
    h = rng.integers(0, 2, (runners, model.n_hidden), dtype=np.uint8)
    keys = SeedSpec(1).chain_keys(runners)
    t0 = time.perf_counter()
    logw = kernels.ais_log_weights(model.weights, model.visible_bias, model.hidden_bias, betas,
                                   v, h, keys, threads)
    return time.perf_counter() - t0, np.asarray(logw)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--visible", type=int, default=32)
    ap.add_argument("--hidden", type=int, default=16)
    ap.add_argument("--chains", type=int, default=1000)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--temperatures", type=int, default=1000)
    args = ap.parse_args()

    model = RbmModel.random(args.visible, args.hidden, 0.5, rng=0)
    ens = init_random(model, args.chains, SeedSpec(0))
    betas = np.linspace(0.0, 1.0, args.temperatures)
    threads = _backend.n_threads()
    print(f"model {args.visible}x{args.hidden}, {args.chains} chains, {threads} thread(s)")
    results = {}
    for name in _backend.AVAILABLE:
        k = _backend.get_kernels(name)
        ts, v = sweep_time(k, model, ens, args.steps, threads)
        ta, logw = ais_time(k, model, betas, args.chains, threads)
        results[name] = (v, logw)
        per = ts / (args.steps * args.chains) * 1e6
        print(f"{name:>7}: gibbs {ts:7.3f} s ({per:.2f} us per chain-sweep), "
              f"ais {ta:7.3f} s ({args.temperatures} temperatures)")
    if len(results) == 2:
        (v1, w1), (v2, w2) = results.values()
        assert np.array_equal(v1, v2), "backends disagree on Gibbs states"
        assert np.allclose(w1, w2, rtol=0, atol=1e-9), "backends disagree on AIS weights"
        print("backends agree")


if __name__ == "__main__":
    main()
