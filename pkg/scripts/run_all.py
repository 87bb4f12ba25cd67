"""Build every cache and regenerate all figure outputs into one directory.

    python3 scripts/run_all.py --out results
"""

import argparse
import sys

from ripple_entropy.cli import main as cli_main


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results")
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--skip-solve", action="store_true", help="do not pre-solve the a/b family")
    args = p.parse_args()
    common = ["--out", args.out] + (["--cache-dir", args.cache_dir] if args.cache_dir else [])
    steps = [["wannier"]]
    if not args.skip_solve:
        steps += [["solve", "--a", a] for a in ("0", "0.055", "0.275", "0.55", "0.825", "1.1")]
    steps += [["fig2"], ["fig3"], ["fig4"], ["fig5"]]
    status = 0
    for step in steps:
        print("==>", " ".join(step), flush=True)
        code = cli_main(step + common)
        status = status or (code if step[0] != "solve" else 0)
    return status


if __name__ == "__main__":
    sys.exit(main())
