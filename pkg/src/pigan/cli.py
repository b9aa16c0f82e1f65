"""Command line interface: ``pigan {synth,train,eval,reproduce,presets,show}``.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import yaml

from .autodiff import NonFiniteError
from .config import ConfigError, load_config, merge, parse_config
from .elliptic import SolverError
from .gan import TrainingAborted
from .nn import NonFiniteGradient
from .presets import SCALES, preset_dict, preset_names
from .processes import CholeskyError
from .runtime import tune_allocator

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (TrainingAborted, NonFiniteError, NonFiniteGradient, SolverError, CholeskyError, FloatingPointError)

log = logging.getLogger("pigan")


def _add_common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", help="named experiment (see 'pigan presets')")
    src.add_argument("--config", help="YAML experiment file")
    p.add_argument("--scale", choices=SCALES, default=None, help="paper or desk (presets only; default paper)")
    p.add_argument("--seed", type=int, action="append", help="training seed; repeat for several (overrides config)")
    p.add_argument("--steps", type=int, help="override the number of training steps")
    p.add_argument("--out", required=out_required, help="output directory")
    p.add_argument("--workers", type=int, default=1, help="threads for Monte-Carlo reference solves")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pigan", description="Physics-informed GANs for stochastic elliptic problems.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("synth", "write snapshot datasets and reference statistics"),
        ("train", "train generators and discriminators, writing checkpoints"),
        ("eval", "evaluate checkpoints and write metrics and figure CSVs"),
        ("reproduce", "synth + train + eval"),
    ):
        p = sub.add_parser(name, help=helptext)
        if name == "reproduce":
            p.add_argument("name", nargs="?", help="preset name (same as --preset)")
        _add_common(p)
        if name in ("train", "reproduce"):
            p.add_argument("--resume", action="store_true", help="continue from the latest checkpoint")
        if name in ("eval", "reproduce"):
            p.add_argument("--svg", action="store_true", help="also render SVG plots")
    sub.add_parser("presets", help="list preset names")
    p = sub.add_parser("show", help="print the resolved configuration")
    _add_common(p, out_required=False)
    return parser


def resolve_config(args):
    preset = getattr(args, "name", None) or args.preset
    if preset and args.config:
        raise ConfigError("give either a preset or --config, not both")
    if preset:
        data = preset_dict(preset, args.scale or "paper")
    elif args.config:
        if args.scale:
            raise ConfigError("--scale applies to presets only")
        data = load_config(args.config).model_dump(mode="json")
    else:
        raise ConfigError("a preset or --config is required")
    over: dict = {}
    if args.seed:
        over["seeds"] = list(args.seed)
    if args.steps is not None:
        if args.steps < 0:
            raise ConfigError("--steps must be >= 0")
        over["train"] = {"n_steps": args.steps}
    if getattr(args, "svg", False):
        over["eval"] = {"svg": True}
    return parse_config(merge(data, over))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if args.command == "presets":
        print("\n".join(preset_names()))
        return EXIT_OK
    try:
        cfg = resolve_config(args)
        if args.command == "show":
            print(yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True), end="")
            return EXIT_OK
        from .experiment import Experiment

        tune_allocator()
        exp = Experiment(cfg, args.out, workers=args.workers)
        if args.command == "synth":
            exp.synth()
        elif args.command == "train":
            exp.train(resume=args.resume)
        elif args.command == "eval":
            exp.evaluate()
        else:
            exp.reproduce(resume=args.resume)
    except ConfigError as exc:
        print(f"pigan: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"pigan: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
