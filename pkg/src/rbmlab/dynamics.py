"""Relaxation diagnostics: autocorrelations, mixing-time fits, thermalization.

Trajectories store the visible means m_i(t) (the logistic means of the last
visible update) of several chains at increasing Gibbs times.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTrajectoryError, InsufficientDataError, ValidationError
from .model import RbmModel
from .rng import SeedSpec
from .sampler import ChainEnsemble, gibbs_step, init_random


@dataclass
class Trajectory:
    """``means[t, chain, i]`` recorded at Gibbs ``times[t]``; ``reference`` is m-bar."""

    times: np.ndarray
    means: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64)
        means = np.asarray(self.means, dtype=np.float64)
        if means.ndim == 2:
            means = means[:, None, :]
        if means.ndim != 3 or means.shape[0] != self.times.size:
            raise ValidationError("means must be (time, chain, unit) with one row per time")
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("trajectory times must be strictly increasing")
        self.means = means
        self.reference = np.asarray(self.reference, dtype=np.float64)
        if self.reference.shape != (means.shape[2],):
            raise ValidationError("reference length must equal the number of visible units")

    def index_of(self, t: int) -> int:
        idx = int(np.searchsorted(self.times, t))
        if idx >= self.times.size or self.times[idx] != t:
            raise ValidationError(f"time {t} is not in the trajectory")
        return idx


@dataclass(frozen=True)
class MixingFit:
    t_alpha: float
    amplitude: float
    fit_window: tuple[float, float]
    residual: float
    n_points: int


def record_means(model: RbmModel, ensemble: ChainEnsemble, times, reference) -> Trajectory:
    """Advance ``ensemble`` and record its visible means at each absolute step in ``times``."""
    times = np.asarray(times, dtype=np.int64)
    out = np.empty((times.size, ensemble.n_chains, ensemble.n_visible))
    for j, t in enumerate(times):
        if t < ensemble.step_counter:
            raise ValidationError(f"time {t} is behind the ensemble (at {ensemble.step_counter})")
        gibbs_step(model, ensemble, int(t - ensemble.step_counter))
        out[j] = ensemble.visible_means
    return Trajectory(times, out, reference)


def equilibrium_reference(model: RbmModel, burn_in: int, n_chains: int, horizon: int,
                          seed: SeedSpec, return_error: bool = False):
    """Time-and-chain average of m_i(t) over t in (burn_in, horizon].

    With ``return_error`` also returns a standard error per unit estimated
    from the spread of the per-chain time averages.
    """
    if horizon <= burn_in:
        raise ValidationError("horizon must exceed burn_in")
    ens = init_random(model, n_chains, seed)
    gibbs_step(model, ens, burn_in)
    acc = np.zeros((n_chains, model.n_visible))
    gibbs_step(model, ens, horizon - burn_in, vmean_sum=acc)
    per_chain = acc / (horizon - burn_in)
    ref = per_chain.mean(axis=0)
    if not return_error:
        return ref
    err = per_chain.std(axis=0, ddof=1) / np.sqrt(n_chains) if n_chains > 1 else np.full_like(ref, np.nan)
    return ref, err


def _correlation(means: np.ndarray, reference: np.ndarray, origin: int) -> np.ndarray:
    dev = means[origin:] - reference
    # C(t) = (1/N_v) sum_i dev_i(t) dev_i(0), averaged over chains
    return np.einsum("tci,ci->t", dev, dev[0]) / (dev.shape[1] * dev.shape[2])


def autocorrelation(traj: Trajectory, discard: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """rho(t) = C(t) / C(0) with the time origin at the first record at or after ``discard``.

    Returns ``(lags, rho)``.
    """
    origin = int(np.searchsorted(traj.times, discard))
    if origin >= traj.times.size - 1:
        raise ValidationError("trajectory does not extend beyond the discarded steps")
    c = _correlation(traj.means, traj.reference, origin)
    if c[0] == 0.0:
        raise DegenerateTrajectoryError("C(0) = 0: trajectory sits exactly on the reference")
    return traj.times[origin:] - traj.times[origin], c / c[0]


def two_time_autocorrelation(traj: Trajectory, waiting_times) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """rho(t, t_w) = C(t, t_w) / C(0, t_w) for each waiting time (an absolute trajectory time)."""
    out = {}
    for tw in waiting_times:
        origin = traj.index_of(int(tw))
        c = _correlation(traj.means, traj.reference, origin)
        if c[0] == 0.0:
            raise DegenerateTrajectoryError(f"C(t_w={tw}) = 0")
        out[int(tw)] = (traj.times[origin:] - traj.times[origin], c / c[0])
    return out


def aging_gap(curves: dict[int, tuple[np.ndarray, np.ndarray]]) -> float:
    """Largest sup-norm difference between any two rho(., t_w) curves on shared lags."""
    gap = 0.0
    items = list(curves.values())
    for a in range(len(items)):
        for b in range(a + 1, len(items)):
            la, ra = items[a]
            lb, rb = items[b]
            common, ia, ib = np.intersect1d(la, lb, return_indices=True)
            if common.size:
                gap = max(gap, float(np.max(np.abs(ra[ia] - rb[ib]))))
    return gap


def fit_mixing_time(rho, times, window: tuple[float, float] = (0.05, 0.8),
                    min_points: int = 4) -> MixingFit:
    """Fit rho(t) ~ A exp(-t / t_alpha) by least squares on ln rho.

    The window runs from the first point with rho <= window[1] up to (not
    including) the first later point with rho < window[0], so noise
    excursions after the decay has ended are ignored.
    """
    rho = np.asarray(rho, dtype=np.float64)
    t = np.asarray(times, dtype=np.float64)
    if rho.shape != t.shape:
        raise ValidationError("rho and times must have the same length")
    lo, hi = window
    below_hi = np.flatnonzero(rho <= hi)
    if below_hi.size == 0:
        raise InsufficientDataError("rho never drops into the fit window")
    start = int(below_hi[0])
    end_candidates = np.flatnonzero(rho[start:] < lo)
    end = start + int(end_candidates[0]) if end_candidates.size else rho.size
    sel = slice(start, end)
    y, x = rho[sel], t[sel]
    if y.size < min_points or np.any(y <= 0):
        raise InsufficientDataError(f"only {y.size} usable points in the fit window")
    slope, intercept = np.polyfit(x, np.log(y), 1)
    if not slope < 0:
        raise InsufficientDataError("fitted decay rate is not positive")
    resid = np.log(y) - (intercept + slope * x)
    return MixingFit(float(-1.0 / slope), float(np.exp(intercept)), (float(x[0]), float(x[-1])),
                     float(np.sqrt(np.mean(resid ** 2))), int(y.size))


def equilibrium_autocorrelation(model: RbmModel, n_chains: int, seed: SeedSpec, *, burn_in: int,
                                reference_steps: int, max_lag: int,
                                lag_points: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """rho(t) of ``model`` after a burn-in.

    Runs an equilibrium reference simulation, then an independent set of
    chains that is burned in for ``burn_in`` steps before rho is recorded
    at every lag up to ``max_lag`` (or ``lag_points`` evenly spaced lags).
    Returns ``(lags, rho)``.
    """
    ref = equilibrium_reference(model, burn_in, n_chains, burn_in + reference_steps, seed.spawn(1))
    ens = init_random(model, n_chains, seed.spawn(2))
    gibbs_step(model, ens, burn_in)
    if lag_points:
        lags = np.unique(np.linspace(0, max_lag, lag_points).astype(np.int64))
    else:
        lags = np.arange(max_lag + 1)
    traj = record_means(model, ens, burn_in + lags, ref)
    return autocorrelation(traj, discard=burn_in)


def mixing_time(model: RbmModel, n_chains: int, seed: SeedSpec, *, burn_in: int,
                reference_steps: int, max_lag: int, lag_points: int | None = None,
                window=(0.05, 0.8)) -> tuple[MixingFit, np.ndarray, np.ndarray]:
    """Estimate t_alpha end to end; returns ``(fit, lags, rho)``."""
    lag, rho = equilibrium_autocorrelation(model, n_chains, seed, burn_in=burn_in,
                                           reference_steps=reference_steps, max_lag=max_lag,
                                           lag_points=lag_points)
    return fit_mixing_time(rho, lag, window), lag, rho


def thermalization_time(curve_random, curve_dataset, tolerance: float = 0.05,
                        floor: float = 1e-12):
    """Earliest grid time after which the two curves agree for good.

    Curves are mappings ``{t_G: value}`` on the same grid. Agreement means
    ``|random - dataset| / max(|dataset|, floor) < tolerance``. Returns
    ``None`` if the curves have not merged by the last grid point.
    """
    if set(curve_random) != set(curve_dataset):
        raise ValidationError("curves must share the same t_G grid")
    grid = sorted(curve_random)
    if not grid:
        raise ValidationError("curves are empty")
    merged_from = None
    for t in grid:
        r, d = curve_random[t], curve_dataset[t]
        ok = abs(r - d) / max(abs(d), floor) < tolerance
        if ok and merged_from is None:
            merged_from = t
        elif not ok:
            merged_from = None
    return merged_from


def regime(t_therm, k: int) -> str:
    """"equilibrium" if chains thermalize within k steps, else "OOE"."""
    return "equilibrium" if t_therm is not None and t_therm <= k else "OOE"
