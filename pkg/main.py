"""
Main entry point for VARC: ARC tasks as image-to-image translation with a
vision transformer.
"""
import argparse
import logging
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config import LOG_FORMAT, LOG_LEVEL
from src.cli.commands import cmd_eval, cmd_ingest, cmd_inspect, cmd_predict, cmd_train, cmd_ttt
from src.cli.run_config import load_run_config
from src.errors import ConfigError, DataError
from src.utils.metadata import environment_info

logger = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="VARC: vision ARC solver")
    parser.add_argument("--config", type=str, help="Run config file (section.key = value lines)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Override a config value, e.g. --set train.epochs=10 (repeatable)")
    parser.add_argument("--log-level", type=str, default=LOG_LEVEL, help="Logging level (default: %(default)s)")
    subparsers = parser.add_subparsers(dest="command")

    ingest = subparsers.add_parser("ingest", help="Load a task set and write its load report")
    ingest.add_argument("--data", type=str, help="Task directory or manifest (default: data.train_path)")
    ingest.add_argument("--synthetic", type=str, metavar="DIR", help="Write the synthetic micro-task fixtures to DIR")
    ingest.add_argument("--output", type=str, help="Report path")
    ingest.set_defaults(handler=cmd_ingest)

    train = subparsers.add_parser("train", help="Offline multi-task training")
    train.add_argument("--data", type=str, help="Training tasks (default: data.train_path)")
    train.add_argument("--output", type=str, help="Checkpoint path (default: <output_dir>/model.varc)")
    train.add_argument("--metrics", type=str, help="Metrics JSONL path (default: next to the checkpoint)")
    train.add_argument("--resume", type=str, metavar="CHECKPOINT",
                       help="Continue from an offline checkpoint (restores Adam state when it was saved)")
    train.set_defaults(handler=cmd_train)

    ttt = subparsers.add_parser("ttt", help="Test-time training on one task")
    ttt.add_argument("checkpoint", type=str, help="Offline checkpoint")
    ttt.add_argument("task", type=str, help="ARC task JSON file")
    ttt.add_argument("--output", type=str, help="Adapted checkpoint path")
    ttt.set_defaults(handler=cmd_ttt)

    for name, handler, help_text in (
        ("eval", cmd_eval, "TTT + multi-view voting + pass@k over a task set"),
        ("predict", cmd_predict, "Write top-2 attempts per test input"),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("checkpoint", type=str, help="Offline checkpoint")
        sub.add_argument("--data", type=str, help="Task directory or manifest (default: data.eval_path)")
        sub.add_argument("-k", type=int, help="Score pass@k up to this k")
        sub.add_argument("--views", type=int, help="Views per auxiliary task")
        sub.add_argument("--aux", type=int, help="Number of auxiliary tasks used for voting")
        sub.add_argument("--joint-ttt", action="store_true", help="Adapt one model to all tasks jointly")
        sub.add_argument("--single-view", action="store_true", help="Score a single view (pass@1 only)")
        sub.add_argument("--jobs", type=int, help="Tasks adapted in parallel")
        sub.add_argument("--output", type=str, help="Output JSON path")
        if name == "eval":
            sub.add_argument("--candidates-dir", type=str, help="Dump top-k candidates per task here")
        sub.set_defaults(handler=handler)

    inspect = subparsers.add_parser("inspect", help="Attention maps, task embeddings, canvases and TTT snapshots")
    inspect.add_argument("checkpoint", type=str, help="Checkpoint to inspect")
    inspect.add_argument("--task", type=str, help="ARC task JSON file")
    inspect.add_argument("--task-index", type=int, default=0, help="Task-embedding row to condition on")
    inspect.add_argument("--scale", type=int, default=1, help="Placement scale for inspected canvases")
    inspect.add_argument("--attention", action="append", metavar="LAYER,ROW,COL",
                         help="Attention of the patch holding pixel (ROW, COL) in LAYER (repeatable)")
    inspect.add_argument("--attention-layer-average", type=int, metavar="LAYER",
                         help="Attention of LAYER averaged over all foreground queries")
    inspect.add_argument("--task-embeddings", action="store_true", help="Dump the task-embedding matrix as CSV")
    inspect.add_argument("--canvas", action="store_true", help="Dump the first demo pair's canvases")
    inspect.add_argument("--ttt-snapshots", action="store_true", help="Run TTT and dump per-epoch predictions")
    inspect.add_argument("--output", type=str, help="Artifact directory")
    inspect.set_defaults(handler=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=LOG_FORMAT)

    if not getattr(args, "handler", None):
        parser.print_help()
        return 0

    try:
        config = load_run_config(args.config, args.overrides)
        logger.info(f"Environment: {environment_info()}")
        path = args.handler(args, config)
        print(path)
        return 0
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except DataError as e:
        logger.error(f"Data error: {e}")
        return EXIT_DATA
    except Exception as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
