"""Shared argument handling and table printing for the experiment scripts."""
import argparse
import dataclasses
import sys
import time
from pathlib import Path

from aosrl.config import full_scale, load_config
from aosrl.experiment import run_experiment
from aosrl.stats import group_summary


def parser(description: str, default_out: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--config", help="JSON overrides applied before the script's own settings")
    p.add_argument("--out-dir", default=default_out)
    p.add_argument("--seeds", type=int, nargs="+", help="seed list (default 0..4)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--full-scale", action="store_true",
                   help="ten-fold dataset and evaluation budgets")
    return p


def run(args, **overrides):
    cfg = load_config(args.config)
    if args.full_scale:
        cfg = full_scale(cfg)
    if args.seeds:
        overrides["seeds"] = tuple(args.seeds)
    cfg = dataclasses.replace(cfg, **overrides)
    out = Path(args.out_dir)
    start = time.perf_counter()
    rows, curves = run_experiment(cfg, out, workers=args.workers,
                                  log=lambda m: print(m, file=sys.stderr))
    print(f"# {len(rows)} rows in {time.perf_counter() - start:.0f} s -> {out}")
    return cfg, rows, curves


def print_table(rows, field: str, keys=("scheme", "xi", "chi")) -> None:
    print(f"\n{field} (mean +/- se over seeds)")
    for g in group_summary(rows, field, keys):
        label = "  ".join(f"{k}={g[k]}" for k in keys if g[k] != "")
        print(f"  {label:<40} {g['mean']:.4f} +/- {g['se']:.4f}  (n={g['n']})")
