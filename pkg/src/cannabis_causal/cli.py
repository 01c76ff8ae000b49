"""Command-line entry point: ``cannabis-causal <stage> [--config FILE] [--seed N] [--out-dir DIR]``."""

import argparse
import json
import logging
import sys

from .artifacts import MissingArtifactError
from .config import ConfigError, load_config
from .pipeline import STAGES

HELP = {
    "ingest": "filter raw tweet records, embed them and drop bot accounts",
    "weaklabel": "label personal tweets with labeling functions and a boosted classifier",
    "stance": "train stance models and score personal tweets",
    "estimate": "run the Monte-Carlo effect estimation",
    "sensitivity": "all five estimators with retweets included and excluded",
    "synth": "generate a synthetic corpus and a matching config",
    "report": "collect estimation outputs into report CSVs",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="cannabis-causal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
        p.add_argument("--out-dir", default="runs", help="root directory for stage outputs")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a configuration value (repeatable)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _overrides(pairs, seed):
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(item, "expected SECTION.KEY=VALUE")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    if seed is not None:
        out["run.seed"] = str(seed)
    return out


def _error_payload(exc):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        payload["field"] = exc.field
    if isinstance(exc, MissingArtifactError):
        payload["stage"] = exc.stage
    return payload


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args.set, args.seed))
        out = STAGES[args.command](cfg, args.out_dir)
    except (ConfigError, MissingArtifactError, FileNotFoundError, ValueError, KeyError) as exc:
        print(json.dumps(_error_payload(exc), sort_keys=True), file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
