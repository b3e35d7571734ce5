""" Command-line front end: gen-data, train, generate, evaluate """

import argparse
import logging
import sys
from typing import Optional, Sequence

from .tools.errors import DyadicMotionError

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config; defaults apply when omitted")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument(
        "--out", help="dataset dir (gen-data), checkpoint dir (train), run dir (generate, evaluate)",
    )
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    #
    parser = argparse.ArgumentParser(prog="dyadic_motion", description="Audio-driven dyadic head motion pipeline")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("gen-data", parents=[common], help="generate the synthetic dataset")
    train = commands.add_parser("train", parents=[common], help="train stage 1 or 2")
    train.add_argument("--stage", type=int, choices=(1, 2), required=True)
    train.add_argument("--resume", action="store_true", help="continue from the last epoch checkpoint")
    generate = commands.add_parser("generate", parents=[common], help="generate frames and latents")
    generate.add_argument("--portrait", help="clip id of the portrait (default: first clip)")
    generate.add_argument("--audio", help="clip id of the dyadic audio (default: the portrait clip)")
    generate.add_argument("--mode", choices=("interactive", "talking", "listening"), default="interactive")
    generate.add_argument("--ground-truth", action="store_true", help="export the audio clip itself as the run")
    commands.add_parser("evaluate", parents=[common], help="evaluate a generated run")
    return parser


def _overrides(args) -> dict:
    overrides = {"seed": args.seed}
    if args.out and args.command == "gen-data":
        overrides["dataset_path"] = args.out
    elif args.out and args.command == "train":
        overrides["checkpoint_dir"] = args.out
    return overrides


def run(args) -> int:
    from .module import Module
    from .tools.config import load_run_config
    from .tools.serialize import dumps_sorted
    #
    config = load_run_config(args.config, _overrides(args))
    module = Module(config)
    module.init()
    try:
        if args.command == "gen-data":
            manifest = module.cmd_gen_data()
            frames = sum(entry.n_frames for entry in manifest.clips)
            print(f"clips: {manifest.n_clips} frames: {frames} checksum: {manifest.checksum}")
        elif args.command == "train":
            result = module.cmd_train(args.stage, resume=args.resume)
            final = result.loss_trace[-1].loss if result.loss_trace else float("nan")
            print(f"stage {args.stage}: {len(result.loss_trace)} epochs, final loss {final:.6f}")
        elif args.command == "generate":
            manifest = module.cmd_generate(
                portrait_clip_id=args.portrait, audio_clip_id=args.audio, mode=args.mode,
                ground_truth=args.ground_truth, out=args.out,
            )
            print(f"frames: {manifest.n_frames} throughput: {manifest.throughput_fps:.2f} fps")
        elif args.command == "evaluate":
            report = module.cmd_evaluate(args.out)
            print(dumps_sorted(report.metrics))
    finally:
        module.deinit()
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    from .tools.logs import setup_logging
    try:
        setup_logging(args.log_level)
        return run(args)
    except DyadicMotionError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
