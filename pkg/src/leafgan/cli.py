"""Command-line entry points tying the pipeline stages together.

Subcommand groups: ``lflseg prepare|train|segment``, ``leafgan
train|generate``, ``eval train|report``. Every run directory receives the
echoed effective configuration (including the seed) so artifacts can be
reproduced bit-for-bit from it.

Exit codes: 0 success, 1 usage error, 2 config error, 3 runtime failure.
"""

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from .config import PipelineConfig, apply_overrides, config_hash, echo_config, load_config
from .datakit import (
    LabeledSplit,
    PatchSpec,
    assemble_lflseg_dataset,
    list_image_files,
    load_image,
    load_labeled_folder,
    write_labeled_split,
)
from .errors import ConfigError
from .evalharness import (
    compare_runs,
    evaluate,
    load_trained_classifier,
    save_trained_classifier,
    train_classifier,
    write_comparison,
    write_report_csv,
)
from .gan.trainer import GanTrainSettings, train as gan_train
from .gan.translate import generate_folder
from .lflseg.classify import SegConfig, load_classifier, save_classifier, train_lflseg
from .lflseg.segment import save_mask, segment
from .seeding import stage_seed
from .training import ClassifierConfig

log = logging.getLogger(__name__)


def _effective_config(args, **overrides) -> PipelineConfig:
    cfg = load_config(getattr(args, "config", None))
    return apply_overrides(cfg, overrides)


def _check_distinct(in_path: Path, out_path: Path) -> None:
    if in_path.resolve() == out_path.resolve():
        raise ConfigError(f"output directory must differ from input: {out_path}")


def cmd_lflseg_prepare(args) -> None:
    cfg = _effective_config(
        args,
        seed=args.seed,
        image_side=args.side,
        split_ratio=args.split_ratio,
    )
    out = Path(args.out)
    split = assemble_lflseg_dataset(
        args.full, args.partial, args.nonleaf,
        PatchSpec(2 * cfg.image_side),
        split_ratio=cfg.split_ratio,
        seed=stage_seed(cfg.seed, "datakit"),
        input_side=cfg.image_side,
    )
    write_labeled_split(split, out / "dataset")
    counts = {"train": split.class_counts("train"), "test": split.class_counts("test")}
    (out / "counts.json").write_text(json.dumps(counts, indent=2, sort_keys=True) + "\n")
    echo_config(cfg, out)
    print(json.dumps(counts, sort_keys=True))


def cmd_lflseg_train(args) -> None:
    cfg = _effective_config(
        args,
        seed=args.seed,
        image_side=args.side,
        lflseg_epochs=args.epochs,
        lflseg_batch=args.batch,
        backbone=args.backbone,
    )
    data = Path(args.data)
    train_part = load_labeled_folder(data / "train", cfg.image_side)
    test_part = load_labeled_folder(data / "test", cfg.image_side)
    if train_part.class_names != test_part.class_names:
        raise ConfigError(
            f"train/test class folders differ: {train_part.class_names} vs {test_part.class_names}"
        )
    split = LabeledSplit(train_part.class_names, train=train_part.train, test=test_part.train)
    model, test_acc = train_lflseg(
        split,
        epochs=cfg.lflseg_epochs,
        batch_size=cfg.lflseg_batch,
        lr=cfg.lflseg_lr,
        momentum=cfg.lflseg_momentum,
        backbone=cfg.backbone,
        input_side=cfg.image_side,
        seed=stage_seed(cfg.seed, "lflseg"),
    )
    out = Path(args.out)
    ckpt = save_classifier(
        model, out / "checkpoints", cfg.backbone,
        len(split.class_names), cfg.image_side,
    )
    (out / "metrics.json").write_text(
        json.dumps({"test_accuracy": round(test_acc, 6)}, sort_keys=True) + "\n"
    )
    echo_config(cfg, out)
    print(f"checkpoint: {ckpt}")
    print(f"test_accuracy: {test_acc:.4f}")


def cmd_lflseg_segment(args) -> None:
    cfg = _effective_config(args, seed=args.seed, delta=args.delta)
    in_dir, out_dir = Path(args.in_dir), Path(args.out)
    _check_distinct(in_dir, out_dir)
    model, payload = load_classifier(args.ckpt)
    seg_cfg = SegConfig(delta=cfg.delta, backbone=payload["backbone"], input_side=payload["input_side"])
    files = list_image_files(in_dir)
    if not files:
        raise ConfigError(f"no input images under {in_dir}")
    for f in files:
        img = load_image(f, side=seg_cfg.input_side)
        save_mask(segment(model, img, seg_cfg), out_dir / f"{f.stem}.png")
    echo_config(cfg, out_dir)
    print(f"masks: {len(files)}")


def cmd_leafgan_train(args) -> None:
    cfg = _effective_config(
        args,
        seed=args.seed,
        image_side=args.side,
        gan_epochs=args.epochs,
        gan_batch=args.batch,
        lam=args.lam,
        gan_ngf=args.ngf,
        gan_ndf=args.ndf,
        gan_blocks=args.blocks,
        checkpoint_every=args.checkpoint_every,
        delta=args.delta,
    )
    settings = GanTrainSettings(
        data_root=args.data,
        out_dir=args.out,
        mask_root=args.masks,
        lflseg_checkpoint=args.lflseg_ckpt,
        epochs=cfg.gan_epochs,
        batch_size=cfg.gan_batch,
        lr=cfg.gan_lr,
        lam=cfg.lam,
        image_side=cfg.image_side,
        ngf=cfg.gan_ngf,
        ndf=cfg.gan_ndf,
        n_blocks=cfg.gan_blocks or None,
        buffer_size=cfg.buffer_size,
        checkpoint_every=cfg.checkpoint_every,
        identity_loss=cfg.identity_loss,
        delta=cfg.delta,
        seed=cfg.seed,
        config_hash=config_hash(cfg),
        all_ones_masks=bool(args.vanilla),
    )
    echo_config(cfg, Path(args.out))
    state, records = gan_train(settings)
    print(f"iterations: {state.iteration}")
    print(f"final_total: {records[-1].total:.6f}" if records else "final_total: n/a")


def cmd_leafgan_generate(args) -> None:
    cfg = _effective_config(args, delta=args.delta, composite=args.composite)
    out_dir = Path(args.out)
    written = generate_folder(
        args.ckpt, args.in_dir, out_dir,
        direction=args.direction,
        composite=cfg.composite,
        mask_root=args.masks,
        lflseg_checkpoint=args.lflseg_ckpt,
        delta=cfg.delta,
    )
    echo_config(cfg, out_dir)
    print(f"generated: {len(written)}")


def cmd_eval_train(args) -> None:
    cfg = _effective_config(
        args,
        seed=args.seed,
        image_side=args.side,
        eval_epochs=args.epochs,
        eval_batch=args.batch,
        backbone=args.backbone,
    )
    train_set = load_labeled_folder(args.data, cfg.image_side)
    augmentation = [load_labeled_folder(p, cfg.image_side) for p in args.augment or []]
    clf_cfg = ClassifierConfig(
        backbone=cfg.backbone,
        input_side=cfg.image_side,
        epochs=cfg.eval_epochs,
        batch_size=cfg.eval_batch,
        lr=cfg.eval_lr,
        momentum=cfg.eval_momentum,
        flip_augment=True,
        seed=stage_seed(cfg.seed, "eval"),
    )
    clf = train_classifier(train_set, augmentation, clf_cfg)
    out = Path(args.out)
    ckpt = save_trained_classifier(clf, out / "checkpoints", cfg.backbone, cfg.image_side)
    echo_config(cfg, out)
    print(f"checkpoint: {ckpt}")


def cmd_eval_report(args) -> None:
    cfg = _effective_config(args, seed=args.seed, image_side=args.side)
    out = Path(args.out)
    classifiers = []
    for spec in args.clf:
        if "=" not in spec:
            raise ConfigError(f"--clf expects TAG=CHECKPOINT, got {spec!r}")
        tag, path = spec.split("=", 1)
        classifiers.append((tag, load_trained_classifier(path)))
    test_set = load_labeled_folder(args.test, cfg.image_side)
    reports = []
    for tag, clf in classifiers:
        _, report = evaluate(clf, test_set, run_tag=tag)
        reports.append(report)
        write_report_csv(report, out / f"report_{_safe(tag)}.csv")
    if len(reports) >= 2:
        comparison = compare_runs(reports)
        write_comparison(comparison, out)
        print(comparison.render_text())
    else:
        print(f"average: {reports[0].average:.2f}")
    echo_config(cfg, out)


def _safe(tag: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", tag)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leafgan",
        description="Mask-guided unpaired translation pipeline for leaf disease data augmentation.",
    )
    groups = parser.add_subparsers(dest="group")

    def add_common(p):
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None)

    lfl = groups.add_parser("lflseg", help="leaf segmentation stages").add_subparsers(dest="command")

    p = lfl.add_parser("prepare", help="assemble the three-class dataset")
    add_common(p)
    p.add_argument("--full", required=True, help="directory of whole-leaf images")
    p.add_argument("--partial", required=True, help="directory of images to cut into patches")
    p.add_argument("--nonleaf", required=True, help="directory of leaf-free images")
    p.add_argument("--out", required=True)
    p.add_argument("--side", type=int, default=None)
    p.add_argument("--split-ratio", dest="split_ratio", type=float, default=None)
    p.set_defaults(func=cmd_lflseg_prepare)

    p = lfl.add_parser("train", help="train the three-class classifier")
    add_common(p)
    p.add_argument("--data", required=True, help="prepared dataset root (train/ and test/)")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--side", type=int, default=None)
    p.add_argument("--backbone", default=None)
    p.set_defaults(func=cmd_lflseg_train)

    p = lfl.add_parser("segment", help="write attention masks for a folder of images")
    add_common(p)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ckpt", required=True, help="classifier checkpoint")
    p.add_argument("--delta", type=float, default=None)
    p.set_defaults(func=cmd_lflseg_segment)

    gan = groups.add_parser("leafgan", help="translation GAN stages").add_subparsers(dest="command")

    p = gan.add_parser("train", help="train the masked translation GAN")
    add_common(p)
    p.add_argument("--data", required=True, help="dataset root with trainA/ and trainB/")
    p.add_argument("--out", required=True)
    p.add_argument("--masks", default=None, help="mask cache root")
    p.add_argument("--lflseg-ckpt", dest="lflseg_ckpt", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--side", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--ngf", type=int, default=None)
    p.add_argument("--ndf", type=int, default=None)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--vanilla", action="store_true",
                   help="ablation: all-ones masks (unmasked translation)")
    p.set_defaults(func=cmd_leafgan_train)

    p = gan.add_parser("generate", help="translate a folder through a trained generator")
    add_common(p)
    p.add_argument("--ckpt", required=True, help="checkpoint root written by leafgan train")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--direction", choices=("a2b", "b2a"), default="a2b")
    p.add_argument("--composite", action="store_const", const=True, default=None,
                   help="copy background pixels verbatim from the input")
    p.add_argument("--masks", default=None)
    p.add_argument("--lflseg-ckpt", dest="lflseg_ckpt", default=None)
    p.add_argument("--delta", type=float, default=None)
    p.set_defaults(func=cmd_leafgan_generate)

    ev = groups.add_parser("eval", help="downstream classifier comparison").add_subparsers(dest="command")

    p = ev.add_parser("train", help="train a disease classifier, optionally with augmentation sets")
    add_common(p)
    p.add_argument("--data", required=True, help="one-folder-per-class training root")
    p.add_argument("--augment", action="append", default=None,
                   help="one-folder-per-class augmentation root (repeatable)")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--side", type=int, default=None)
    p.add_argument("--backbone", default=None)
    p.set_defaults(func=cmd_eval_train)

    p = ev.add_parser("report", help="evaluate classifiers and compare runs")
    add_common(p)
    p.add_argument("--test", required=True, help="one-folder-per-class test root")
    p.add_argument("--clf", action="append", required=True,
                   help="TAG=CHECKPOINT (repeatable; first is the baseline)")
    p.add_argument("--out", required=True)
    p.add_argument("--side", type=int, default=None)
    p.set_defaults(func=cmd_eval_report)

    return parser


def dispatch(argv: list[str]) -> int:
    """Run one subcommand; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args.func(args)
        return 0
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure, one machine-parsable line
        log.debug("runtime failure", exc_info=True)
        print(f"error: runtime: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
