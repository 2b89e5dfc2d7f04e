#!/usr/bin/env python3
"""Run every experiment kind once with its default configuration.

Artifacts land under --out (default: ./runs), one subdirectory per kind,
each with results.csv, report.json and manifest.json.
"""
import argparse
import json
import os

from anisofield.experiments import PARAM_CLASSES, ExperimentConfig, run_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs", help="output root directory")
    ap.add_argument("--seed", type=int, default=0, help="master seed")
    ap.add_argument("--workers", type=int, default=4, help="worker count")
    args = ap.parse_args()

    for kind in PARAM_CLASSES:
        cfg = ExperimentConfig.from_dict(kind, {
            "seed": args.seed,
            "workers": args.workers,
            "out_dir": os.path.join(args.out, kind),
        })
        manifest = run_experiment(cfg)
        print(json.dumps({"kind": kind, "outputs": manifest.outputs},
                         sort_keys=True))


if __name__ == "__main__":
    main()
