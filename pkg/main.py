import argparse
import logging
import sys
import time
from pathlib import Path

from src.commands.common import LOG_FORMAT, RunPaths, open_run, run_dir_for_checkpoint
from src.commands.evaluate import cmd_eval
from src.commands.plot import DEFAULT_METRICS, FORMATS, cmd_plot
from src.commands.pretrain import cmd_pretrain
from src.commands.sample import cmd_sample
from src.commands.synth import cmd_synth
from src.commands.train import cmd_train
from src.data.parse import format_duration
from src.utils.config import add_config_arguments, load_config, overrides_from_args
from src.utils.errors import USAGE_ERRORS

logger = logging.getLogger("catgan")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class CLIParser(argparse.ArgumentParser):
    """argparse reports usage errors with exit code 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def setup_logging(level):
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, stream=sys.stderr, force=True)


def resolve_config(args, run_dir=None):
    """--config if given, else the run directory's saved config.yaml, then flag overrides."""
    overrides = overrides_from_args(args)
    path = args.config
    run_dir = overrides.get("run_dir") or run_dir
    if path is None and run_dir is not None:
        saved = RunPaths(Path(run_dir)).config
        if saved.is_file():
            path = saved
    if run_dir is not None:
        overrides.setdefault("run_dir", str(run_dir))
    return load_config(path, overrides)


# Subcommand handlers
def run_synth(args):
    cfg, paths = open_run(resolve_config(args))
    cmd_synth(cfg, paths)


def run_pretrain(args):
    cfg, paths = open_run(resolve_config(args))
    cmd_pretrain(cfg, paths, progress=True)


def run_train(args):
    cfg, paths = open_run(resolve_config(args))
    cmd_train(cfg, paths, resume=args.resume, progress=True)


def run_sample(args):
    cmd_sample(args.checkpoint, args.category, args.num, args.tau, args.seed, args.output)


def run_eval(args):
    run_dir = run_dir_for_checkpoint(args.checkpoint) if args.checkpoint else None
    cfg, paths = open_run(resolve_config(args, run_dir))
    cmd_eval(cfg, paths, args.checkpoint)


def run_plot(args):
    cmd_plot(args.logs, args.output_dir, args.format, args.metrics)


def build_parser():
    levels = ["DEBUG", "INFO", "WARNING", "ERROR"]
    # accepted before or after the subcommand; the subcommand copy only overrides when given
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=argparse.SUPPRESS, choices=levels)

    parser = CLIParser(prog="catgan", description="Category-aware evolutionary text GAN experiments")
    parser.add_argument("--log-level", default="INFO", choices=levels)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def config_command(name, help_text, handler):
        p = sub.add_parser(name, help=help_text, parents=[common])
        p.add_argument("--config", help="YAML experiment config (default: <run-dir>/config.yaml)")
        add_config_arguments(p)
        p.set_defaults(handler=handler)
        return p

    config_command("synth", "sample a synthetic corpus from random oracles", run_synth)
    config_command("pretrain", "MLE pretraining of the generator", run_pretrain)
    train = config_command("train", "adversarial training with hierarchical selection", run_train)
    train.add_argument("--resume", action="store_true", help="continue from the latest round checkpoint")
    evaluate = config_command("eval", "compute the metric suite for a checkpoint", run_eval)
    evaluate.add_argument("--checkpoint", help="generator checkpoint (default: latest in the run)")

    sample = sub.add_parser("sample", help="decode sentences from a generator checkpoint", parents=[common])
    sample.add_argument("--checkpoint", required=True)
    sample.add_argument("--category", type=int, default=None,
                        help="category id (default: every category, tagged cat=<id>)")
    sample.add_argument("-n", "--num", type=int, default=10, help="sentences per category")
    sample.add_argument("--tau", type=float, default=1.0, help="sharpening applied to the logits")
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--output", help="write to this file instead of standard output")
    sample.set_defaults(handler=run_sample)

    plot = sub.add_parser("plot", help="plot NLL curves from metrics logs", parents=[common])
    plot.add_argument("logs", nargs="+", help="metrics.jsonl files; one trace per log")
    plot.add_argument("--output-dir", help="default: directory of the first log")
    plot.add_argument("--format", default="png", choices=FORMATS)
    plot.add_argument("--metrics", nargs="+", default=list(DEFAULT_METRICS))
    plot.set_defaults(handler=run_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code

    setup_logging(args.log_level)
    start = time.perf_counter()
    try:
        args.handler(args)
    except USAGE_ERRORS as e:
        logger.error("%s", e)
        logger.debug("Traceback", exc_info=True)
        return EXIT_USAGE
    except Exception as e:
        logger.error("%s failed: %s", args.command, e)
        logger.debug("Traceback", exc_info=True)
        return EXIT_RUNTIME
    logger.info("%s finished in %s", args.command, format_duration(time.perf_counter() - start))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
