"""Command-line experiment driver.

One subcommand per experiment kind. Parameters come from defaults, an
optional JSON config file, and --set key=value overrides, in that order.
Errors are emitted as machine-readable JSON on stderr with a nonzero exit.
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import ModelRejected, Refusal
from .experiments import (PARAM_CLASSES, ExperimentConfig, default_out_dir,
                          run_experiment)


def _parse_set(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise argparse.ArgumentTypeError(f"--set expects KEY=VALUE, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anisofield",
        description="Anisotropic Gaussian field simulation and verification scans")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in PARAM_CLASSES:
        sp = sub.add_parser(kind, help=f"run the {kind} experiment")
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", type=int, help="worker count")
        sp.add_argument("--set", action="append", default=[], type=_parse_set,
                        metavar="KEY=VALUE", help="override a config key")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if args.config:
        with open(args.config) as fh:
            data.update(json.load(fh))
    for key, value in args.set:
        data[key] = value
    if args.seed is not None:
        data["seed"] = args.seed
    if args.workers is not None:
        data["workers"] = args.workers
    data["out_dir"] = args.out or data.get("out_dir") or default_out_dir(args.kind)
    return ExperimentConfig.from_dict(args.kind, data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        manifest = run_experiment(config)
    except (Refusal, ModelRejected, ValueError, OSError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)},
                  sys.stderr, sort_keys=True)
        sys.stderr.write("\n")
        return 2
    print(json.dumps({"kind": manifest.kind, "outputs": manifest.outputs},
                     sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
