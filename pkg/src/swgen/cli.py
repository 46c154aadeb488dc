"""``swgen`` command line: region, simulate, sweep and verify."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import swcodec
from .config import VERIFY_SUITES, ConfigError, ExperimentConfig, load_config, source_from_spec, source_label
from .seeding import derive_seed
from .sources import rate_region, sample_orbit
from .swcodec import RegionWarning, improve_pair, manifest, rows_to_csv, simulate
from .verify import SUITES

OUT_ENV = "SWGEN_OUT"
DEFAULT_OUT = "swgen-out"

IMPROVE_COLUMNS = ("source", "a", "b", "M_T", "ell_r", "f", "head", "coverage_T", "distance_to_old",
                   "bound", "error_before", "error_after", "runtime_ms")

log = logging.getLogger("swgen")


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    log.info("wrote %s", path)


def _write_manifest(out: Path, cfg: ExperimentConfig, extra: dict) -> None:
    _write(out / "manifest.json", manifest(cfg.params, cfg.seed, {"config": cfg.to_dict(), **extra}))


def cmd_region(cfg: ExperimentConfig) -> int:
    src = source_from_spec(cfg.source)
    r = rate_region(src)
    print(f"source        {source_label(cfg.source)}")
    print(f"h             {r.h:.9f}")
    print(f"h|F_X         {r.h_given_x:.9f}")
    print(f"h|F_Y         {r.h_given_y:.9f}")
    print(f"method        {r.method}" + (f" (block length {r.block_length})" if r.block_length else ""))
    out = _out_dir(cfg)
    region = {"h": r.h, "h_given_x": r.h_given_x, "h_given_y": r.h_given_y,
              "method": r.method, "block_length": r.block_length}
    _write(out / "region.json", json.dumps(region, indent=2, sort_keys=True))
    _write_manifest(out, cfg, {"region": region})
    return 0


def cmd_simulate(cfg: ExperimentConfig, dump: bool = False) -> int:
    src = source_from_spec(cfg.source)
    label = source_label(cfg.source)
    out = _out_dir(cfg)
    p = cfg.params
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RegionWarning)
        codec, rep = simulate(src, cfg.orbit_length, p, cfg.seed, cfg.train_test)
    for w in caught:
        log.warning("%s", w.message)
    row = {"source": label, "a": p.a, "b": p.b, "M_S": p.height_s, "M_L": p.height_l,
           "ell": p.ell, "eta": p.eta, "coverage_S": codec.tower_s.coverage,
           "coverage_L": codec.tower_l.coverage, "psi_singleton_frac": rep.psi_singleton_frac,
           "phi5_singleton_frac": rep.phi5_singleton_frac, "error_frac": rep.error_frac,
           "runtime_ms": (time.perf_counter() - t0) * 1000.0}
    _write(out / "simulate.csv", rows_to_csv([row]))
    print(f"error_frac {rep.error_frac:.6f}  psi_singleton {rep.psi_singleton_frac:.4f}  "
          f"phi5_singleton {rep.phi5_singleton_frac:.4f}")
    extra = {"diagnostics": codec.diagnostics, "report": rep.summary(), "mode":
             "train-test" if cfg.train_test else "train"}
    if dump:
        np.savez_compressed(out / "reconstruction.npz", x_hat=rep.x_hat, y_hat=rep.y_hat)
    if cfg.improve:
        if cfg.train_test:
            log.warning("the improvement round runs on the training orbit")
        train = sample_orbit(src, cfg.orbit_length, derive_seed(cfg.seed, "orbit", "train"))
        t1 = time.perf_counter()
        imp = improve_pair(codec, train, src)
        s = imp.summary()
        irow = {"source": label, "a": p.a, "b": p.b, "M_T": p.height_t, "ell_r": p.repaint_ell,
                **{k: s[k] for k in ("f", "head", "distance_to_old", "bound", "error_before",
                                     "error_after")},
                "coverage_T": s["coverage_T"], "runtime_ms": (time.perf_counter() - t1) * 1000.0}
        _write(out / "improve.csv", rows_to_csv([irow], columns=IMPROVE_COLUMNS))
        print(f"improve: distance {s['distance_to_old']:.6f} <= bound {s['bound']:.6f}; "
              f"error {s['error_before']:.6f} -> {s['error_after']:.6f}")
        extra["improve"] = s
    _write_manifest(out, cfg, extra)
    return 0


def cmd_sweep(cfg: ExperimentConfig) -> int:
    src = source_from_spec(cfg.source)
    out = _out_dir(cfg)
    rows = swcodec.rate_region_experiment(src, cfg.grid, cfg.params, cfg.orbit_length, cfg.seed,
                                          source_label(cfg.source), cfg.train_test, cfg.threads)
    _write(out / "sweep.csv", rows_to_csv(rows))
    failed = [r for r in rows if r["status"] != "ok"]
    for r in rows:
        print(f"a={r['a']} b={r['b']} error_frac={r['error_frac']:.6f} {r['status']}")
    for r in failed:
        log.error("cell a=%s b=%s failed: %s", r["a"], r["b"], r["status"])
    _write_manifest(out, cfg, {"cells": [{k: r[k] for k in ("a", "b", "status")} for r in rows]})
    return 1 if failed else 0


def cmd_verify(cfg: ExperimentConfig, suite: str) -> int:
    names = list(VERIFY_SUITES) if suite == "all" else [suite]
    out = _out_dir(cfg)
    results = {}
    ok_all = True
    for name in names:
        checks = SUITES[name]()
        for c in checks:
            print(f"[{'PASS' if c.passed else 'FAIL'}] {name}: {c.name} ({c.detail})")
        ok_all &= all(c.passed for c in checks)
        results[name] = [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks]
    _write(out / "verify.json", json.dumps(results, indent=2, sort_keys=True))
    _write_manifest(out, cfg, {"verify": {k: all(c["passed"] for c in v) for k, v in results.items()}})
    return 0 if ok_all else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--threads", type=int, help="cap on concurrent sweep cells")
    common.add_argument("--train-test", action="store_true", default=None,
                        help="decode a fresh orbit instead of the training orbit")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="swgen", description="Distributed coding of correlated sources")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("region", parents=[common], help="print the rate region of the source")
    sim = sub.add_parser("simulate", parents=[common], help="build the pair and decode it")
    sim.add_argument("--improve", action="store_true", default=None, help="also run one repainting round")
    sim.add_argument("--dump", action="store_true", help="write per-position reconstructions")
    sub.add_parser("sweep", parents=[common], help="decode error over a grid of (a, b)")
    ver = sub.add_parser("verify", parents=[common], help="run self-check suites")
    ver.add_argument("suite", choices=[*VERIFY_SUITES, "all"])
    return ap


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg.experiment = args.command
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    if args.train_test:
        cfg.train_test = True
    if getattr(args, "improve", None):
        cfg.improve = True
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _resolve(args)
    except (ConfigError, OSError) as exc:
        print(f"swgen: config error: {exc}", file=sys.stderr)
        return 2
    if args.command == "region":
        return cmd_region(cfg)
    if args.command == "simulate":
        return cmd_simulate(cfg, args.dump)
    if args.command == "sweep":
        return cmd_sweep(cfg)
    return cmd_verify(cfg, args.suite)


if __name__ == "__main__":
    sys.exit(main())
