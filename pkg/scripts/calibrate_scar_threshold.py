"""Entropy-gap threshold that flags a target fraction of levels as scars.

    python3 scripts/calibrate_scar_threshold.py --ratio 0.1 --target 0.10
"""

import argparse

import numpy as np

from ripple_entropy import berry as B
from ripple_entropy import experiments as X
from ripple_entropy.config import load_config


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--ratio", type=float, default=0.1)
    p.add_argument("--target", type=float, default=0.10)
    p.add_argument("--config", default=None)
    args = p.parse_args()
    cfg = load_config(args.config)
    spec = X.Store().entropy_spectrum(cfg, args.ratio).value
    thr = B.calibrate_scar_threshold(spec, args.target, cfg.levels)
    print(f"threshold for {args.target:.0%} at a/b={args.ratio:g}: {thr:.4f}")
    for t in sorted({0.25, 0.5, 0.75, round(thr, 2)}):
        print(f"  threshold {t:.2f}: fraction {B.scar_fraction(spec, t, cfg.levels):.3f}")
    flags = B.scar_flags(spec, cfg.scar_threshold) & spec.select(*cfg.levels)
    print("flagged at configured threshold:", np.flatnonzero(flags).size, "levels")


if __name__ == "__main__":
    main()
