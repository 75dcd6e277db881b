"""Command-line pipeline: train -> generate -> evaluate -> analyze, plus enumeration oracles.

Every verb reads the same settings (see :mod:`rbmlab.config`), validates
all inputs before touching the output location, and writes each file
through an atomic rename. Exit codes: 0 success, 2 invalid input,
3 runtime or numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from ._io import atomic_write
from .checkpoint import checkpoint_name, encode, load_checkpoint
from .data import BinaryDataset, load_binary_matrix, pack_bits, synth_modes, unpack_bits
from .dynamics import equilibrium_autocorrelation, fit_mixing_time, regime, thermalization_time
from .errors import InsufficientDataError, RbmlabError, ValidationError
from .likelihood import MAX_ENUM, ais_log_z, exact_log_z, uniform_schedule
from .metrics import evaluate as evaluate_metrics
from .rng import SeedSpec
from .sampler import init_from_dataset, init_random, log_grid, record_trajectory

log = logging.getLogger("rbmlab")

CSV_HEADER = ["t_age", "t_G", "init", "metric", "value", "seed"]
AUTOCORR_HEADER = ["t_age", "lag", "rho"]
MANIFEST = "manifest.json"
ARCHIVE = "archive.json"
TRAIN_DATA = "train.rbm1"
INIT_LABELS = {"random": 11, "dataset": 12}
_DYNAMICS_LABEL = 13
_AIS_LABEL = 14

# settings that determine a training run; resuming requires them unchanged
TRAIN_KEYS = ("path", "format", "threshold", "n_visible", "n_modes", "flip_prob", "samples_per_mode",
              "scheme", "k", "learning_rate", "minibatch_size", "n_updates", "n_hidden", "centered",
              "n_checkpoints", "weight_init_std", "offset_rate", "seed")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()


def _fmt(x: float) -> str:
    return repr(float(x))


def _need_out(cfg, what: str) -> Path:
    if cfg.out is None:
        raise ValidationError(f"--out is required ({what})")
    return Path(cfg.out)


def _prepare_dir(path: Path) -> None:
    if path.exists() and not path.is_dir():
        raise ValidationError(f"{path} exists and is not a directory")
    path.mkdir(parents=True, exist_ok=True)


def load_training_data(cfg) -> BinaryDataset:
    if cfg.path is not None:
        data = load_binary_matrix(cfg.path, cfg.format, cfg.threshold)
    else:
        data = synth_modes(cfg.n_visible, cfg.n_modes, cfg.flip_prob, cfg.samples_per_mode,
                           SeedSpec(cfg.seed))
    if cfg.image_shape is not None:
        data = BinaryDataset(data.samples, cfg.image_shape, data.name, data.split)
    return data


# ---------------------------------------------------------------- train

def cmd_train(cfg, args) -> int:
    from .trainer import iter_train

    out = _need_out(cfg, "run directory")
    tc = cfg.train_config()
    digest = cfg.digest(TRAIN_KEYS)
    manifest_path = out / MANIFEST
    resume = None
    if args.resume:
        if not manifest_path.is_file():
            raise ValidationError(f"nothing to resume: {manifest_path} is missing")
        manifest = json.loads(manifest_path.read_text())
        if manifest.get("config_hash") != digest:
            raise ValidationError("run settings differ from the run being resumed")
        data = unpack_bits((out / TRAIN_DATA).read_bytes(), str(out / TRAIN_DATA))
        if manifest["checkpoints"]:
            last = manifest["checkpoints"][-1]
            resume = load_checkpoint(out / last["file"])
            if resume.t_age >= tc.n_updates:
                log.info("run already complete at t_age=%d", resume.t_age)
                return 0
    else:
        if manifest_path.exists():
            raise ValidationError(f"{out} already holds a run; pass --resume to continue it")
        data = load_training_data(cfg)
        manifest = {"config_hash": digest, "train": tc.summary(), "data": TRAIN_DATA,
                    "checkpoints": [], "wall_times": {}}
    _prepare_dir(out)
    if resume is None:
        raw = pack_bits(data.samples, data.image_shape)
        atomic_write(out / TRAIN_DATA, raw)
        manifest["data_sha256"] = _sha256(raw)
        atomic_write(out / "config.ini", cfg.as_ini().encode())
    start = time.perf_counter()
    for ck in iter_train(data, tc, resume):
        name = checkpoint_name(ck.t_age)
        raw = encode(ck)
        atomic_write(out / name, raw)
        manifest["checkpoints"].append({"t_age": ck.t_age, "file": name, "sha256": _sha256(raw)})
        manifest["wall_times"][str(ck.t_age)] = round(time.perf_counter() - start, 3)
        atomic_write(manifest_path, _dump_json(manifest))
        log.info("checkpoint t_age=%d", ck.t_age)
        if args.stop_at_age is not None and ck.t_age >= args.stop_at_age:
            log.info("stopping early at t_age=%d", ck.t_age)
            break
    return 0


# ---------------------------------------------------------------- generate

def _grid(cfg) -> list[int]:
    if cfg.grid is not None:
        return list(cfg.grid)
    return log_grid(cfg.horizon, cfg.n_points)


def _run_checkpoints(run: Path, ages=None) -> list[tuple[int, Path]]:
    manifest_path = run / MANIFEST
    if not manifest_path.is_file():
        raise ValidationError(f"{run} is not a run directory ({MANIFEST} missing)")
    entries = json.loads(manifest_path.read_text())["checkpoints"]
    out = [(e["t_age"], run / e["file"]) for e in entries]
    if ages is not None:
        missing = sorted(set(ages) - {a for a, _ in out})
        if missing:
            raise ValidationError(f"no checkpoints at ages {missing}")
        out = [(a, p) for a, p in out if a in set(ages)]
    return out


def cmd_generate(cfg, args) -> int:
    out = _need_out(cfg, "archive directory")
    if args.run is None and args.checkpoint is None:
        raise ValidationError("give --run DIR or --checkpoint FILE")
    if args.run is not None:
        run = Path(args.run)
        targets = _run_checkpoints(run, cfg.ages)
        data_path = run / TRAIN_DATA
    else:
        ck_path = Path(args.checkpoint)
        if not ck_path.is_file():
            raise ValidationError(f"checkpoint {ck_path} does not exist")
        targets = [(None, ck_path)]
        data_path = ck_path.parent / TRAIN_DATA
    inits = ["random", "dataset"] if cfg.init == "both" else [cfg.init]
    data = None
    if "dataset" in inits:
        if cfg.path is not None:
            data = load_training_data(cfg)
        elif data_path.is_file():
            data = unpack_bits(data_path.read_bytes(), str(data_path))
        else:
            raise ValidationError("dataset initialization needs --path or a run directory")
    grid = _grid(cfg)
    checkpoints = [(load_checkpoint(p), p) for _, p in targets]
    for ck, p in checkpoints:
        if data is not None and data.n_visible != ck.model.n_visible:
            raise ValidationError(f"{p}: model has {ck.model.n_visible} visible units, data has {data.n_visible}")
    if (out / ARCHIVE).exists():
        raise ValidationError(f"{out} already holds an archive")
    _prepare_dir(out)
    master = SeedSpec(cfg.seed)
    archive = {"seed": cfg.seed, "n_chains": cfg.n_chains, "grid": grid, "entries": [],
               "mixing": {}}
    autocorr_rows = []
    for ck, p in checkpoints:
        model = ck.model
        archive.setdefault("checkpoints", {})[str(ck.t_age)] = str(p.resolve())
        for init in inits:
            seed = master.spawn(INIT_LABELS[init], ck.t_age)
            if init == "random":
                ens = init_random(model, cfg.n_chains, seed)
            else:
                ens = init_from_dataset(model, data, cfg.n_chains, seed)
            for t_g, snap in record_trajectory(model, ens, grid[-1], grid):
                name = f"samples_a{ck.t_age:09d}_{init}_g{t_g:09d}.rbm1"
                atomic_write(out / name, pack_bits(snap.visible_states))
                archive["entries"].append({"t_age": ck.t_age, "init": init, "t_G": t_g, "file": name,
                                           "rows": cfg.n_chains})
        if args.autocorr:
            fit, lags, rho = _mixing(cfg, model, master.spawn(_DYNAMICS_LABEL, ck.t_age))
            autocorr_rows += [[str(ck.t_age), str(int(l)), _fmt(r)] for l, r in zip(lags, rho)]
            archive["mixing"][str(ck.t_age)] = fit
    if args.autocorr:
        _write_csv(out / "autocorr.csv", AUTOCORR_HEADER, autocorr_rows)
    atomic_write(out / ARCHIVE, _dump_json(archive))
    return 0


def _mixing(cfg, model, seed):
    lags, rho = equilibrium_autocorrelation(model, cfg.dyn_chains, seed, burn_in=cfg.burn_in,
                                            reference_steps=cfg.reference_steps, max_lag=cfg.max_lag,
                                            lag_points=cfg.lag_points)
    try:
        fit = fit_mixing_time(rho, lags)
    except InsufficientDataError as exc:
        # rho did not decay inside the lag range: keep the curve, report no fit
        return {"t_alpha": None, "reason": str(exc)}, lags, rho
    return ({"t_alpha": fit.t_alpha, "amplitude": fit.amplitude, "fit_window": list(fit.fit_window),
             "residual": fit.residual, "n_points": fit.n_points}, lags, rho)


# ---------------------------------------------------------------- evaluate

def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write(path, buf.getvalue().encode())


def read_curves(path) -> list[dict]:
    """Rows of a metric CSV as dicts with typed fields."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_HEADER:
        raise ValidationError(f"{path}: header must be {','.join(CSV_HEADER)}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(CSV_HEADER):
            raise ValidationError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
        try:
            rows.append({"t_age": int(row[0]), "t_G": int(row[1]), "init": row[2], "metric": row[3],
                         "value": float(row[4]), "seed": int(row[5])})
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return rows


def _log_z(cfg, model, seed) -> tuple[float, bool]:
    if min(model.n_visible, model.n_hidden) <= MAX_ENUM:
        return exact_log_z(model), True
    res = ais_log_z(model, uniform_schedule(cfg.ais_temperatures), cfg.ais_runners, seed)
    return res.log_z_estimate, False


def cmd_evaluate(cfg, args) -> int:
    out = _need_out(cfg, "metric CSV path")
    if args.archive is None:
        raise ValidationError("--archive DIR is required")
    adir = Path(args.archive)
    if not (adir / ARCHIVE).is_file():
        raise ValidationError(f"{adir} is not a sample archive")
    archive = json.loads((adir / ARCHIVE).read_text())
    ckpaths = archive.get("checkpoints", {})
    if args.reference is not None:
        ref = load_binary_matrix(args.reference, args.reference_format)
    else:
        run_dirs = {Path(p).parent for p in ckpaths.values()}
        candidates = [d / TRAIN_DATA for d in run_dirs if (d / TRAIN_DATA).is_file()]
        if len(candidates) != 1:
            raise ValidationError("give --reference (no unique training set next to the checkpoints)")
        ref = unpack_bits(candidates[0].read_bytes(), str(candidates[0]))
    test = load_binary_matrix(cfg.test_path, cfg.format) if cfg.test_path else None
    image_shape = cfg.image_shape or ref.image_shape
    samples = {}
    for e in archive["entries"]:
        s = unpack_bits((adir / e["file"]).read_bytes(), e["file"])
        if s.n_visible != ref.n_visible:
            raise ValidationError(f"{e['file']}: {s.n_visible} columns, reference has {ref.n_visible}")
        samples[(e["t_age"], e["init"], e["t_G"])] = s.samples
    if test is not None and test.n_visible != ref.n_visible:
        raise ValidationError("test set and reference differ in column count")
    wanted = list(cfg.metrics)
    models = {int(a): load_checkpoint(p).model for a, p in ckpaths.items()}
    existing = read_curves(out) if out.exists() else []
    seen = {(r["t_age"], r["t_G"], r["init"], r["metric"]) for r in existing}

    seed = archive["seed"]
    rows = []
    needs_ll = any(m in wanted for m in ("ll_rbm", "ll_data"))
    log_zs = {}
    for t_age, init, t_g in sorted(samples):
        model = models.get(t_age)
        if needs_ll and model is not None and t_age not in log_zs:
            log_zs[t_age] = _log_z(cfg, model, SeedSpec(seed).spawn(_AIS_LABEL, t_age))
        lz = log_zs.get(t_age, (None, None))[0]
        rep = evaluate_metrics(samples[(t_age, init, t_g)], ref, model=model, test=test,
                               image_shape=image_shape, log_z=lz, metrics=wanted, n_sites=cfg.n_sites)
        for name, value in rep.items():
            rows.append((t_age, t_g, init, name, value))
        if needs_ll and lz is not None:
            rows.append((t_age, t_g, init, "log_z", lz))
            rows.append((t_age, t_g, init, "log_z_exact", 1.0 if log_zs[t_age][1] else 0.0))
    dup = [r[:4] for r in rows if (r[0], r[1], r[2], r[3]) in seen]
    if dup:
        raise ValidationError(f"{out} already has records for {dup[0]} (and {len(dup) - 1} more)")
    all_rows = [[str(r["t_age"]), str(r["t_G"]), r["init"], r["metric"], _fmt(r["value"]), str(r["seed"])]
                for r in existing]
    all_rows += [[str(a), str(g), i, m, _fmt(v), str(seed)] for a, g, i, m, v in rows]
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    _write_csv(out, CSV_HEADER, all_rows)
    return 0


# ---------------------------------------------------------------- analyze

def _read_autocorr(path) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    text = Path(path).read_text()
    reader = csv.reader(io.StringIO(text))
    if next(reader, None) != AUTOCORR_HEADER:
        raise ValidationError(f"{path}: header must be {','.join(AUTOCORR_HEADER)}")
    acc: dict[int, list] = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            acc.setdefault(int(row[0]), []).append((int(row[1]), float(row[2])))
        except (ValueError, IndexError):
            raise ValidationError(f"{path}:{lineno}: malformed row") from None
    return {a: (np.array([l for l, _ in v]), np.array([r for _, r in v])) for a, v in acc.items()}


def analyze(rows: list[dict], autocorr: dict | None, metric: str, tolerance: float, k: int | None) -> dict:
    """Per-t_age summary: t_alpha, t_therm, argmin t_G per metric and init, regime verdict."""
    by_age: dict[int, dict] = {}
    for r in rows:
        by_age.setdefault(r["t_age"], {}).setdefault((r["metric"], r["init"]), {})[r["t_G"]] = r["value"]
    result = {}
    for t_age in sorted(set(by_age) | set(autocorr or {})):
        curves = by_age.get(t_age, {})
        entry: dict = {"argmin_t_G": {}}
        for (name, init), curve in sorted(curves.items()):
            if name in ("log_z", "log_z_exact", "ll_data"):
                continue
            # ll_rbm is a quality to maximize; every other metric is an error
            pick = max if name == "ll_rbm" else min
            best = pick(sorted(curve), key=lambda t: curve[t])
            entry["argmin_t_G"].setdefault(name, {})[init] = best
        if autocorr and t_age in autocorr:
            lags, rho = autocorr[t_age]
            try:
                fit = fit_mixing_time(rho, lags)
                entry["t_alpha"], entry["fit_residual"] = fit.t_alpha, fit.residual
            except InsufficientDataError:
                entry["t_alpha"] = None
        if (metric, "random") in curves and (metric, "dataset") in curves:
            t_therm = thermalization_time(curves[(metric, "random")], curves[(metric, "dataset")],
                                          tolerance)
            entry["t_therm"] = t_therm
            if k is not None:
                entry["regime"] = regime(t_therm, k)
        result[str(t_age)] = entry
    return result


def cmd_analyze(cfg, args) -> int:
    if not args.curves:
        raise ValidationError("--curves FILE is required")
    rows = []
    for path in args.curves:
        rows += read_curves(path)
    autocorr = {}
    for path in args.autocorr_csv or []:
        if not Path(path).is_file():
            raise ValidationError(f"{path} does not exist")
        autocorr.update(_read_autocorr(path))
    k = cfg.analyze_k if cfg.analyze_k is not None else cfg.k
    result = {"metric": cfg.metric, "tolerance": cfg.tolerance, "k": k,
              "ages": analyze(rows, autocorr, cfg.metric, cfg.tolerance, k)}
    payload = _dump_json(result)
    if cfg.out is None:
        sys.stdout.write(payload.decode())
    else:
        atomic_write(Path(cfg.out), payload)
    return 0


# ---------------------------------------------------------------- oracle

def run_oracles(n_visible: int, n_hidden: int, seed: int, scale: float = 0.5, n_data: int = 8) -> dict:
    """Compare fast-path quantities with brute-force enumeration on a random model."""
    from . import oracle
    from .likelihood import exact_moments, log_likelihood, visible_distribution
    from .model import RbmModel, visible_free_energy
    from .trainer import exact_gradient

    rng = np.random.default_rng(seed)
    model = RbmModel.random(n_visible, n_hidden, scale, rng=rng)
    data = rng.integers(0, 2, (n_data, n_visible)).astype(np.uint8)
    lz_fast, lz_joint = exact_log_z(model), oracle.log_z(model)
    _, p_joint = oracle.visible_marginal(model)
    vh, v, h = oracle.moments(model)
    fast = exact_moments(model)
    grad = exact_gradient(model, data)
    fd = oracle.finite_difference_gradient(model, data)
    rel = max(float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-12)))
              for a, b in zip((grad.d_weights, grad.d_visible_bias, grad.d_hidden_bias), fd))
    fe_err = max(abs(float(visible_free_energy(model, x)) - math.log(
        sum(math.exp(-oracle.naive_energy(model, x, hh)) for hh in oracle._bits(n_hidden))))
        for x in data)
    checks = {
        "log_z": {"fast": lz_fast, "oracle": lz_joint, "abs_error": abs(lz_fast - lz_joint)},
        "visible_marginal": {"max_abs_error": float(np.max(np.abs(visible_distribution(model) - p_joint)))},
        "moments": {"max_abs_error": float(max(np.max(np.abs(fast.vh - vh)), np.max(np.abs(fast.v - v)),
                                               np.max(np.abs(fast.h - h))))},
        "free_energy": {"max_abs_error": fe_err},
        "log_likelihood": {"abs_error": abs(log_likelihood(model, data, lz_fast)
                                            - oracle.log_likelihood(model, data))},
        "gradient": {"max_rel_error": rel},
    }
    limits = {"log_z": 1e-10, "visible_marginal": 1e-12, "moments": 1e-12, "free_energy": 1e-10,
              "log_likelihood": 1e-10, "gradient": 1e-5}
    for name, c in checks.items():
        err = next(v for key, v in c.items() if key.endswith("error"))
        c["pass"] = bool(err < limits[name])
    return {"n_visible": n_visible, "n_hidden": n_hidden, "seed": seed, "checks": checks,
            "pass": all(c["pass"] for c in checks.values())}


def cmd_oracle(cfg, args) -> int:
    n_visible = args.oracle_visible
    n_hidden = args.oracle_hidden
    if not (1 <= n_visible <= 12 and 1 <= n_hidden <= 8):
        raise ValidationError("oracle models need 1 <= n_visible <= 12 and 1 <= n_hidden <= 8")
    report = run_oracles(n_visible, n_hidden, cfg.seed)
    payload = _dump_json(report)
    if cfg.out is None:
        sys.stdout.write(payload.decode())
    else:
        atomic_write(Path(cfg.out), payload)
    return 0 if report["pass"] else 3


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rbmlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    def verb(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="INI settings file (flags override it)")
        return p

    p = verb("train", "train an RBM and write log-spaced checkpoints")
    p.add_argument("--resume", action="store_true", help="continue the run in --out from its last checkpoint")
    p.add_argument("--stop-at-age", type=int, default=None, help="stop after the first checkpoint at or past AGE")
    cfgmod.add_flags(p)

    p = verb("generate", "sample checkpoints on a t_G grid")
    p.add_argument("--run", help="run directory written by train")
    p.add_argument("--checkpoint", help="single checkpoint file")
    p.add_argument("--autocorr", action="store_true", help="also measure equilibrium autocorrelations")
    cfgmod.add_flags(p)

    p = verb("evaluate", "append metric records for a sample archive")
    p.add_argument("--archive", help="directory written by generate")
    p.add_argument("--reference", help="reference dataset (default: the run's training set)")
    p.add_argument("--reference-format", default="packed", help="format of --reference (default: packed)")
    cfgmod.add_flags(p)

    p = verb("analyze", "summarize metric curves and autocorrelations per t_age")
    p.add_argument("--curves", action="append", help="metric CSV (repeatable)")
    p.add_argument("--autocorr-csv", action="append", help="autocorrelation CSV (repeatable)")
    cfgmod.add_flags(p)

    p = verb("oracle", "check fast paths against brute-force enumeration")
    p.add_argument("--oracle-visible", type=int, default=6)
    p.add_argument("--oracle-hidden", type=int, default=4)
    cfgmod.add_flags(p)
    return parser


COMMANDS = {"train": cmd_train, "generate": cmd_generate, "evaluate": cmd_evaluate,
            "analyze": cmd_analyze, "oracle": cmd_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    keys = [key for _, key, _, _, _ in cfgmod.FIELDS]
    try:
        cfg = cfgmod.build(args.config, {k: getattr(args, k, None) for k in keys})
        cfg.validate()
        if cfg.threads is not None:
            os.environ["RBMLAB_THREADS"] = str(cfg.threads)
        from threadpoolctl import threadpool_limits
        # BLAS stays single-threaded so reductions never depend on the thread count
        with threadpool_limits(limits=1):
            return COMMANDS[args.verb](cfg, args)
    except ValidationError as exc:
        print(f"rbmlab {args.verb}: error: {exc}", file=sys.stderr)
        return 2
    except (RbmlabError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"rbmlab {args.verb}: failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
