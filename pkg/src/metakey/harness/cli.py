"""Command-line entry points: train / evaluate / report / synth-gen."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import MetakeyError
from ..metacore import MODES
from ..taskdata import builtin_regime, render_dataset
from .checkpoint import load_checkpoint
from .evaluation import ARM_NAMES, Arm, evaluate
from .expconfig import TRAIN_MODES, load_config
from .report import load_report, render, save_report
from .training import run_training

logger = logging.getLogger(__name__)

REGIMES = ("early", "late", "very_late")


def _add_synth_gen_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--regime", required=True, choices=(*REGIMES, "all"),
        help="appearance regime to render ('all' renders every regime)",
    )
    parser.add_argument("--days", required=True, type=int, help="number of recording days to generate")
    parser.add_argument("--images-per-day", required=True, type=int, dest="images_per_day")
    parser.add_argument("--seed", required=True, type=int)
    parser.add_argument("--out", required=True, type=Path, help="output dataset directory")
    parser.add_argument("--image-size", type=int, default=128, dest="image_size")


def _run_synth_gen(args: argparse.Namespace) -> int:
    if args.days < 1 or args.images_per_day < 1:
        raise MetakeyError("--days and --images-per-day must be positive")
    names = REGIMES if args.regime == "all" else (args.regime,)
    regimes = {
        name: (
            builtin_regime(name, args.image_size),
            [f"{name}_{i:02d}" for i in range(args.days)],
            args.images_per_day,
        )
        for name in names
    }
    render_dataset(args.out, regimes, seed=args.seed)
    total = len(names) * args.days * args.images_per_day
    print(f"wrote {total} images across {len(names) * args.days} day(s)")
    print(f"manifest: {args.out / 'manifest.csv'}")
    return 0


def _run_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, mode=args.mode, seed=args.seed)
    written = run_training(cfg, resume=args.resume)
    print(f"run directory: {cfg.run_dir()}")
    print(f"checkpoints written: {len(written)}")
    if written:
        print(f"latest: {written[-1]}")
    return 0


def _run_evaluate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    ckpt = load_checkpoint(args.checkpoint)
    collection = cfg.load_collection()
    test_split = cfg.build_split("test", collection)
    arm = Arm(name=args.arm, lr=args.lr, steps=args.steps)
    report = evaluate(
        ckpt,
        test_split,
        arm=arm,
        k=cfg.meta.k,
        runs=args.runs,
        seed=args.seed if args.seed is not None else cfg.seed,
        train_label=cfg.train_label,
        weighting=cfg.season_weighting,
    )
    save_report(report, args.out)
    parts = [
        f"{season}: {score.mean:.1f}±{score.std:.1f}"
        for season, score in report.seasons.items()
    ]
    print(f"{report.model_label} — " + ", ".join(parts))
    print(f"report: {args.out}")
    return 0


def _run_report(args: argparse.Namespace) -> int:
    reports = [load_report(p) for p in args.infiles]
    text = render(reports, args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"report: {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metakey",
        description="Episodic meta-learning for few-shot keypoint adaptation across crop seasons.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train one mode of one config to its horizon")
    train.add_argument("--config", required=True, type=Path)
    train.add_argument("--mode", choices=TRAIN_MODES, help="override the config's mode")
    train.add_argument("--seed", type=int, help="override the config's seed")
    train.add_argument("--resume", action="store_true", help="continue from the newest checkpoint")
    train.set_defaults(func=_run_train)

    ev = sub.add_parser("evaluate", help="score a checkpoint on the test split, per season")
    ev.add_argument("--checkpoint", required=True, type=Path)
    ev.add_argument("--config", required=True, type=Path)
    ev.add_argument("--arm", required=True, choices=ARM_NAMES)
    ev.add_argument("--lr", type=float, help="finetune learning rate (baseline_ft)")
    ev.add_argument("--steps", type=int, help="adaptation steps (default: the trained count)")
    ev.add_argument("--runs", type=int, default=3, help="independent support draws (default 3)")
    ev.add_argument("--seed", type=int, help="evaluation seed (default: config seed)")
    ev.add_argument("--out", required=True, type=Path, help="where to write the report JSON")
    ev.set_defaults(func=_run_evaluate)

    rep = sub.add_parser("report", help="render evaluation JSONs as one table")
    rep.add_argument("--in", dest="infiles", required=True, nargs="+", type=Path)
    rep.add_argument("--format", choices=("csv", "markdown"), default="markdown")
    rep.add_argument("--out", type=Path, help="write to a file instead of stdout")
    rep.set_defaults(func=_run_report)

    synth = sub.add_parser("synth-gen", help="render a synthetic crop-row dataset")
    _add_synth_gen_arguments(synth)
    synth.set_defaults(func=_run_synth_gen)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MetakeyError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def synth_gen_main(argv: list[str] | None = None) -> int:
    """Standalone dataset generator (the ``synth-gen`` console script)."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(
        prog="synth-gen", description="Render a synthetic crop-row dataset with exact labels."
    )
    _add_synth_gen_arguments(parser)
    args = parser.parse_args(argv)
    try:
        return _run_synth_gen(args)
    except MetakeyError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
