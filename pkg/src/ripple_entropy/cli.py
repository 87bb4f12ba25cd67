"""Command-line entry point: ``ripple-entropy <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import experiments as X
from .cache import CacheCollision
from .config import dump_config, load_config
from .phasespace import BasisError


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a configuration key")
    p.add_argument("--b", type=float, help="half height b")
    p.add_argument("--a", type=float, help="ripple amplitude a")
    p.add_argument("--n-eig", type=int, help="number of eigenpairs")
    p.add_argument("--cache-dir", type=Path, help="cache directory (default: $RIPPLE_ENTROPY_CACHE)")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--overwrite", action="store_true", help="replace a cache entry whose content differs")
    p.add_argument("--no-build", action="store_true", help="fail instead of building missing caches")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ripple-entropy", description="Phase-space entropy of billiard states.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [("solve", "solve a billiard and cache its spectrum"),
                       ("verify", "audit a cached spectrum"),
                       ("wannier", "build and cache the Wannier basis"),
                       ("fig2", "oscillator eigenstate in phase space"),
                       ("fig3", "entropy dynamics under the four spectral combinations"),
                       ("fig4", "eigenstates 1000 and 857 against a Berry state"),
                       ("fig5", "entropy spectra, fluctuations and scars across a/b"),
                       ("config", "print the effective configuration")]:
        _common(sub.add_parser(name, help=text, description=text))
    return parser


def _config(args):
    overrides = list(args.set)
    for flag, key in (("b", "b"), ("a", "a"), ("n_eig", "n_eig")):
        v = getattr(args, flag)
        if v is not None:
            overrides.append(f"{key}={v}")
    return load_config(args.config, overrides)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.4f}"
    return str(v)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    cfg = _config(args)
    if args.command == "config":
        sys.stdout.write(dump_config(cfg))
        return 0
    store = X.Store(args.cache_dir, overwrite=args.overwrite, build=not args.no_build) if args.cache_dir else \
        X.Store(overwrite=args.overwrite, build=not args.no_build)
    out = args.out
    try:
        if args.command in ("solve", "verify"):
            if args.command == "verify":
                store.build = False
            res = X.run_solve(cfg, store)
            print("cache hit" if res.cached.hit else "computed", res.cached.path)
            print(res.report.summary())
            meta = res.cached.value.meta
            if meta.get("certificate"):
                h = meta["certificate"]["history"][-1]
                print(f"certificate: E_{meta['certificate']['level']} moved {h['rel_shift']:.2e} on refinement")
            res.manifest.write(out)
            return 0 if res.report.ok else 1
        if args.command == "wannier":
            geom_grid = X.build_geometry(cfg.b, cfg.a, cfg.n_x, cfg.n_y).grid
            c = store.basis(cfg, geom_grid)
            import numpy as np
            res_x = np.abs(c.value.bx.gram() - np.eye(c.value.bx.size)).max()
            res_y = np.abs(c.value.by.gram() - np.eye(c.value.by.size)).max()
            print("cache hit" if c.hit else "computed", c.path)
            print(f"N = {c.value.size}, S_max = ln N = {c.value.max_entropy:.6f}")
            print(f"Gram residual x {res_x:.2e}, y {res_y:.2e}")
            return 0
        if args.command == "fig2":
            demo, _ = X.run_fig2(cfg, out)
            print(f"level {demo.spec.n}: captured {demo.captured:.4f}, S_w {demo.entropy:.4f}, "
                  f"mass within 2 cells of the circle (r = {demo.spec.radius_cells:.3f}) {demo.ring_fraction():.3f}, "
                  f"parity defect {demo.parity_defect():.1e}")
            return 0
        if args.command == "fig3":
            res = X.run_fig3(cfg, store, out)
            print(f"recurrence period from case (a): {res.recurrence:.4f}")
            print(" ".join(f"{c:>14}" for c in X.SUMMARY_COLUMNS))
            for r in res.summary:
                print(" ".join(f"{_fmt(r[c]):>14}" for c in X.SUMMARY_COLUMNS))
            return 0
        if args.command == "fig4":
            res = X.run_fig4(cfg, store, out)
            for k in res.states:
                print(f"{k:>16}: S_w = {res.entropies[k]:.4f}  captured = {res.captured[k]:.4f}")
            return 0
        if args.command == "fig5":
            res = X.run_fig5(cfg, store, out)
            print(f"{'a/b':>6} {'fluct':>8} {'gap':>8} {'scars':>8}")
            for r, v in zip(res.curve.ratios, res.curve.values):
                print(f"{r:>6g} {_fmt(v):>8} {_fmt(res.gaps[r]):>8} {_fmt(res.scar_fractions[r]):>8}")
            if res.curve.missing:
                print("missing:", ", ".join(f"{r:g}" for r in res.curve.missing))
            return 0
    except (CacheCollision, FileNotFoundError, BasisError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
