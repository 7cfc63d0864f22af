#!/usr/bin/env python3
"""Sweep the prediction window and report competitive ratios per family.

Writes a CSV of result rows and prints the max ratio per (algorithm, w)
next to its proven bound.  Ratios should shrink roughly like 1 + O(1/w).

Usage: python3 scripts/sweep_prediction_window.py [--seeds N] [--out rows.csv]
"""

import argparse
import json

from soco_lab.harness import ExperimentConfig, sweep_and_report


def build_config(seeds: int) -> ExperimentConfig:
    return ExperimentConfig.from_dict({
        "instances": [
            {"id": "quadratic-m2",
             "generate": {"family": "strongly_convex", "params": {"m": 2.0},
                          "path": {"model": "random_walk", "step": 0.5},
                          "T": 40, "d": 1}},
            {"id": "polyhedral-a1",
             "generate": {"family": "polyhedral", "params": {"alpha": 1.0, "p": 1},
                          "path": {"model": "random_walk", "step": 0.5},
                          "T": 40, "d": 1}},
        ],
        "algorithms": [
            {"name": "greedy"},
            {"name": "dsfhc", "w": [2, 4, 8, 16]},
            {"name": "afhc", "w": [2, 4, 8, 16]},
        ],
        "seeds": {"master": 7, "count": seeds},
        "oracle": {"method": "auto"},
        "checks": ["greedy_bound", "prediction_bound"],
    })


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--out", default="prediction_window_sweep.csv")
    args = parser.parse_args()

    rows, summary = sweep_and_report(build_config(args.seeds), args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    print(json.dumps(summary["by_algorithm"], indent=2))
    return 0 if summary["all_within_bounds"] else 1


if __name__ == "__main__":
    raise SystemExit(main())
