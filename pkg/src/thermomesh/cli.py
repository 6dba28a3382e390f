"""Command-line entry point.

Subcommands: matrix, sweep, dataset, recover, eval, rare-event, check.
Exit codes: 0 success, 2 configuration/schema error, 3 runtime or domain
error. Log level via THERMOMESH_LOG in {error, warn, info, debug}.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import rare_event as re_mod
from . import recovery as rec_mod
from . import sensitivity as sens_mod
from .exceptions import DomainError, StalenessError, ValidationError
from .mesh import ConstantR, NoInterlayer
from .network import assemble, export_dense_csv, sensitivity_matrix

log = logging.getLogger("thermomesh")


def _setup_logging():
    level = os.environ.get("THERMOMESH_LOG", "warn").lower()
    table = {"error": logging.ERROR, "warn": logging.WARNING,
             "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=table.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _is_linear(materials) -> bool:
    return isinstance(materials.interlayer, (NoInterlayer, ConstantR))


def _ambient_matrix(cfg):
    if _is_linear(cfg.materials):
        system = assemble(cfg.mesh, cfg.materials)
    else:
        base = np.full(cfg.mesh.n_pixels, cfg.op_range.t_amb)
        system = assemble(cfg.mesh, cfg.materials, t_state=base)
    return sensitivity_matrix(system)


def _responder(cfg):
    if _is_linear(cfg.materials):
        return rec_mod.LinearResponder(_ambient_matrix(cfg))
    return rec_mod.NonlinearResponder(cfg.mesh, cfg.materials,
                                      t_amb=cfg.op_range.t_amb)


def cmd_matrix(cfg, out: Path, args) -> int:
    a = _ambient_matrix(cfg)
    export_dense_csv(a, out / "A.csv", config_hash=cfg.config_hash)
    smap = sens_mod.sensitivity_map(a)
    sens_mod.export_map_csv(smap, out / "sensitivity_map.csv",
                            config_hash=cfg.config_hash)
    with open(out / "summary.txt", "w") as fh:
        fh.write(f"config_hash={cfg.config_hash}\n")
        fh.write(f"channels={a.n_channels} pixels={a.n_pixels}\n")
        fh.write(f"sigma_min={smap.sigma_min:.12e} "
                 f"argmin_pixel={smap.argmin_pixel}\n")
    log.info("matrix written to %s", out)
    return 0


def cmd_sweep(cfg, out: Path, args) -> int:
    kind = args.kind
    sweep_cfg = cfg.sweep
    if kind == "r":
        grid = sweep_cfg.get("r_grid") or list(np.logspace(-2, 6, 33))
        sw = sens_mod.sweep_interlayer_R(cfg.mesh, cfg.materials, grid)
    elif kind == "size":
        sizes = [tuple(s) for s in sweep_cfg.get(
            "sizes", [[8, 8], [16, 16], [32, 32]])]
        variant = sweep_cfg.get("variant", "plateau")
        sw = sens_mod.sweep_mesh_size(
            sizes, cfg.materials, variant=variant,
            t_hot=sweep_cfg.get("t_hot", cfg.op_range.t_max),
            fixed_r=sweep_cfg.get("fixed_r"))
    elif kind == "kappa":
        grid = sweep_cfg.get("dt_grid") or list(
            np.geomspace(1.0, cfg.op_range.t_max - cfg.op_range.t_amb, 25))
        sw = sens_mod.superlinearity_kappa(cfg.mesh, cfg.materials,
                                           cfg.op_range.t_amb, grid)
    elif kind == "temp":
        grid = sweep_cfg.get("t_hot_grid") or list(
            np.linspace(cfg.op_range.event_t_min, cfg.op_range.t_max, 13))
        vals = [sens_mod.event_minimum_sensitivity(cfg.mesh, cfg.materials,
                                                   t, t_amb=cfg.op_range.t_amb)
                for t in grid]
        sw = sens_mod.SweepResult(x=tuple(grid), values=tuple(vals),
                                  variant=type(cfg.materials.interlayer).__name__,
                                  label="sigma_hot_vs_T")
    else:
        raise ValidationError(f"unknown sweep kind {kind!r}")
    sens_mod.export_sweep_csv(sw, out / "sweep.csv",
                              config_hash=cfg.config_hash)
    return 0


def cmd_dataset(cfg, out: Path, args) -> int:
    ds_cfg = cfg.dataset
    seed = args.seed if args.seed is not None else int(ds_cfg.get("seed", 0))
    snr = args.snr_db if args.snr_db is not None else ds_cfg.get("snr_db")
    if isinstance(snr, list):
        snr = snr[0]
    ds = rec_mod.generate_dataset(
        _responder(cfg), cfg.op_range,
        n_samples=int(ds_cfg.get("n_samples", 1000)),
        snr_db=None if snr in (None, "inf") else float(snr),
        seed=seed, noise_mode=ds_cfg.get("noise_mode", "sample"))
    rec_mod.export_dataset_csv(ds, out / "dataset.csv",
                               config_hash=cfg.config_hash)
    return 0


def _load_dataset_csv(path: Path, cfg):
    if not path.exists():
        raise DomainError(f"dataset file not found: {path}")
    truths, readings = [], []
    file_hash = None
    with open(path) as fh:
        first = fh.readline()
        if first.startswith("# config_hash="):
            file_hash = first.strip().split("=", 1)[1]
        else:
            fh.seek(0)
        reader = csv.DictReader(fh)
        n_pix = cfg.mesh.n_pixels
        for row in reader:
            values = np.zeros(n_pix)
            values[int(row["pixel_index"])] = float(row["delta_t_k"])
            truths.append(rec_mod.TemperatureField(
                rows=cfg.mesh.rows, cols=cfg.mesh.cols, values=values))
            volts = np.array([float(row[f"v_{i}"])
                              for i in range(cfg.mesh.n_channels)])
            snr = row.get("snr_db") or None
            readings.append(rec_mod.BoundaryReading(
                voltages=volts, snr_db=float(snr) if snr else None))
    return truths, readings, file_hash


def cmd_recover(cfg, out: Path, args) -> int:
    truths, readings, file_hash = _load_dataset_csv(Path(args.dataset), cfg)
    if file_hash is not None and file_hash != cfg.config_hash:
        raise ValidationError("dataset was generated under a different config")
    if args.method == "omp" and not _is_linear(cfg.materials):
        dictionary = rec_mod.ResponseDictionary.build(
            _responder(cfg), cfg.op_range,
            n_grid=int(cfg.dataset.get("dictionary_grid", 64)))
        results = [rec_mod.recover_omp_dictionary(dictionary, r)
                   for r in readings]
    elif args.method == "omp":
        a = _ambient_matrix(cfg)
        results = [rec_mod.recover_omp(a, r) for r in readings]
    else:
        a = _ambient_matrix(cfg)
        results = [rec_mod.recover_matched_filter(a, r) for r in readings]
    rec_mod.export_eval_csv(results, truths, out / "recovered.csv",
                            config_hash=cfg.config_hash)
    return 0


def cmd_eval(cfg, out: Path, args) -> int:
    per_sample = Path(args.results)
    if not per_sample.exists():
        raise DomainError(f"results file not found: {per_sample}")
    with open(per_sample) as fh:
        first = fh.readline()
        if first.startswith("# config_hash="):
            if first.strip().split("=", 1)[1] != cfg.config_hash:
                raise ValidationError("results carry a different config_hash")
        else:
            fh.seek(0)
        reader = csv.DictReader(fh)
        rows = list(reader)
    n = len(rows)
    truths, results = [], []
    n_pix = cfg.mesh.n_pixels
    for row in rows:
        values = np.zeros(n_pix)
        values[int(row["true_pixel"])] = float(row["true_t"])
        truths.append(rec_mod.TemperatureField(
            rows=cfg.mesh.rows, cols=cfg.mesh.cols, values=values))
        results.append(rec_mod.RecoveryResult(
            pixel_index=int(row["pred_pixel"]),
            amplitude=float(row["pred_t"]), residual_norm=0.0, method="omp"))
    rep = rec_mod.evaluate(results, truths)
    with open(out / "eval.txt", "w") as fh:
        fh.write(f"config_hash={cfg.config_hash}\n")
        fh.write(f"n_samples={rep.n_samples}\n")
        fh.write(f"accuracy={rep.accuracy:.6f}\n")
        fh.write(f"success_rate={rep.success_rate:.6f}\n")
        fh.write(f"mae_k={rep.mae:.6e}\n")
        fh.write(f"n_misses={len(rep.d_norm)}\n")
    return 0


def cmd_rare_event(cfg, out: Path, args) -> int:
    re_cfg = dict(cfg.rare_event)
    if not re_cfg:
        raise ValidationError("config needs a [rare_event] table")
    deltas = re_cfg.pop("deltas", [0.01, 1e-4])
    stats = re_mod.EventStatistics(
        areal_rate=float(re_cfg.get("areal_rate", 1.0)),
        event_duration=float(re_cfg["event_duration"]),
        window_duration=float(re_cfg["window_duration"]),
        sensing_area=float(re_cfg.get("sensing_area") or
                           re_mod.sensing_area_for_fill(
                               float(re_cfg["pixel_area"]),
                               float(re_cfg.get("fill", 1.0)),
                               cfg.mesh.rows, cfg.mesh.cols)),
        pixel_area=float(re_cfg["pixel_area"]),
        q_t_max=int(re_cfg.get("q_t_max", 1)),
        tolerance=float(re_cfg.get("tolerance", 0.01)),
        event_footprint=re_cfg.get("event_footprint"),
        pixel_time_constant=re_cfg.get("pixel_time_constant"))
    with open(out / "rare_event.txt", "w") as fh:
        fh.write(f"config_hash={cfg.config_hash}\n")
        fh.write("# independent-snapshot approximation\n")
        fh.write("delta,p_e_max_per_m2_s\n")
        for d in deltas:
            fh.write(f"{d:g},{re_mod.max_admissible_rate(stats, d):.6e}\n")
        for key, val in re_mod.regime_check(
                stats, pixel_count=cfg.mesh.n_pixels).items():
            fh.write(f"regime.{key}={val}\n")
    s_grid = np.geomspace(1e-6, 1.0, 25)
    k_grid = [1e2, 1e4, 1e6]
    re_mod.export_occupancy_csv(s_grid, k_grid, out / "occupancy.csv",
                                config_hash=cfg.config_hash)
    return 0


def cmd_check(cfg, out: Path, args) -> int:
    a = _ambient_matrix(cfg)
    rep = rec_mod.verify_one_sparse_uniqueness(a, nsp="auto")
    with open(out / "check.txt", "w") as fh:
        fh.write(f"config_hash={cfg.config_hash}\n")
        for key, val in rep.items():
            fh.write(f"uniqueness.{key}={val}\n")
    failed = not rep.get("spark_gt_2", False) or \
        rep.get("nsp_order_1") is False
    return 3 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermomesh")
    p.add_argument("--threads", type=int, default=None,
                   help="cap worker threads for sweeps/datasets")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="TOML run configuration")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("matrix");      common(sp)
    sp = sub.add_parser("sweep");       common(sp)
    sp.add_argument("--kind", choices=["r", "size", "kappa", "temp"],
                    required=True)
    sp = sub.add_parser("dataset");     common(sp)
    sp.add_argument("--snr-db", type=float, default=None)
    sp = sub.add_parser("recover");     common(sp)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--method", choices=["omp", "matched"], default="omp")
    sp = sub.add_parser("eval");        common(sp)
    sp.add_argument("--results", required=True)
    sp = sub.add_parser("rare-event");  common(sp)
    sp = sub.add_parser("check");       common(sp)
    return p


COMMANDS = {"matrix": cmd_matrix, "sweep": cmd_sweep, "dataset": cmd_dataset,
            "recover": cmd_recover, "eval": cmd_eval,
            "rare-event": cmd_rare_event, "check": cmd_check}


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    try:
        cfg = config_mod.load_config(args.config)
    except (ValidationError, FileNotFoundError, OSError) as exc:
        log.error("configuration error: %s", exc)
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, out, args)
    except ValidationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, StalenessError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
