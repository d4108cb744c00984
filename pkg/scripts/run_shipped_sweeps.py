#!/usr/bin/env python3
"""Run every shipped config and collect the reports in one directory.

Writes <name>.csv and <name>.json per config and prints a one-line status
for each.  Exit code is nonzero if any sweep failed to converge or failed
the structural checks.
"""
import argparse
import pathlib
import sys
import time

from homoglab import emit_report, load_config, run_sweep

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs", type=pathlib.Path,
                    default=ROOT / "configs", help="directory of .cfg files")
    ap.add_argument("--out", type=pathlib.Path, default=ROOT / "results")
    ap.add_argument("--verbose", action="store_true",
                    help="stream per-eps progress to stderr")
    args = ap.parse_args(argv)

    paths = sorted(args.configs.glob("*.cfg"))
    if not paths:
        print(f"no configs under {args.configs}", file=sys.stderr)
        return 2
    args.out.mkdir(parents=True, exist_ok=True)

    bad = 0
    for path in paths:
        cfg = load_config(path)
        t0 = time.perf_counter()
        report = run_sweep(cfg, log=sys.stderr if args.verbose else None)
        elapsed = time.perf_counter() - t0
        emit_report(report, args.out / f"{path.stem}.csv", fmt="csv")
        emit_report(report, args.out / f"{path.stem}.json", fmt="json")
        ok = report.all_converged and report.structural_passed
        bad += not ok
        print(f"{path.stem}: {'ok' if ok else 'FAILED'}  "
              f"rows {len(report.rows)}  "
              f"final_err {report.rows[-1].l_alpha_error:.3e}  "
              f"{elapsed:.1f}s")
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
