"""Command-line driver.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from degbench.data import DataError, DatasetManifest, SynthDigitConfig, discover_fonts, \
    generate_synthetic_digits, kfold_split, train_test_for_fold
from degbench.harness import config as cfg_io
from degbench.harness.config import ConfigFileError, ExperimentConfig
from degbench.harness.experiments import FEATSSIM_HEADER, FGSM_HEADER, run_feature_ssim, \
    run_fgsm, run_ntt_comparison
from degbench.harness.plot import emit_plot
from degbench.harness.report import report
from degbench.harness.sweep import CsvSink, SweepError, run_degradation_sweep, to_model_input
from degbench.imaging import ImageError
from degbench.metrics import top_k_from_scores
from degbench.models import ConfigError, Hyperparams, Network, NumericError, build_named, predict, train
from degbench.models.checkpoint import CheckpointError, load_model, save_model

log = logging.getLogger("degbench")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="degbench", description="Degradation robustness experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, *extra):
        sp.add_argument("--config", help="key=value experiment config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        for flag in extra:
            sp.add_argument(f"--{flag}", type=int if flag == "fold" else str)
        return sp

    common(sub.add_parser("generate", help="render the synthetic digits dataset"))
    common(sub.add_parser("train", help="train one model on one fold"), "model", "dataset", "fold")
    for name in ("sweep", "featssim", "ntt-compare", "fgsm"):
        common(sub.add_parser(name), "model", "dataset", "fold")
    sp = sub.add_parser("plot", help="render a CSV as an SVG line chart")
    sp.add_argument("csv")
    sp.add_argument("--out", required=True)
    sp.add_argument("--metric", default="top1")
    sp = sub.add_parser("report", help="summarize the CSVs in a run directory")
    sp.add_argument("run_dir")
    sp.add_argument("--out")
    return p


# ------------------------------------------------------------------ helpers

def _config(args) -> ExperimentConfig:
    cfg = cfg_io.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    over = {}
    if getattr(args, "out", None):
        over["out"] = args.out
    if getattr(args, "dataset", None):
        over["dataset"] = args.dataset
    if getattr(args, "fold", None) is not None:
        over["fold"] = args.fold
    if getattr(args, "seed", None) is not None:
        over["seeds"] = (args.seed,)
    return replace(cfg, **over)


def manifest_fingerprint(manifest_path: Path) -> str:
    return hashlib.sha256(manifest_path.read_bytes()).hexdigest()[:16]


def _manifest(cfg: ExperimentConfig) -> tuple[DatasetManifest, Path]:
    if not cfg.dataset:
        raise UsageError("no dataset given (--dataset or dataset=)")
    m = DatasetManifest.load(cfg.dataset)
    path = Path(cfg.dataset)
    path = path / "manifest.tsv" if path.is_dir() else path
    if any(f < 0 for f in m.folds):
        m = kfold_split(m, cfg.folds, 0)
    return m, path


def load_fold(cfg: ExperimentConfig):
    m, path = _manifest(cfg)
    tr, te = train_test_for_fold(m, cfg.fold)
    return tr, te, manifest_fingerprint(path)


def _checkpoints(cfg: ExperimentConfig, args, count: int) -> list[Network]:
    stems = [s for s in (args.model.split(",") if getattr(args, "model", None) else
                         [cfg.checkpoint, cfg.checkpoint_b]) if s][:count]
    if len(stems) < count:
        raise UsageError(f"needs {count} checkpoint(s): --model a[,b] or checkpoint=/checkpoint_b=")
    return [load_model(s) for s in stems]


def _test_images(cfg):
    _, te, _ = load_fold(cfg)
    return te.load_arrays()


# ----------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    cfg = _config(args)
    fonts = tuple(discover_fonts([cfg.fonts_dir])) if cfg.fonts_dir else ()
    bgs = ()
    if cfg.backgrounds_dir:
        bgs = tuple(sorted(str(p) for p in Path(cfg.backgrounds_dir).iterdir() if p.is_file()))
    synth = SynthDigitConfig(per_class=cfg.per_class, canvas=cfg.canvas, font_size=(cfg.font_min, cfg.font_max),
                             fonts=fonts, backgrounds=bgs, seed=cfg.seeds[0])
    manifest = generate_synthetic_digits(synth, cfg.out)
    manifest = kfold_split(manifest, cfg.folds, 0)
    manifest.save()
    print(f"wrote {len(manifest)} images to {cfg.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    if args.model:
        cfg = replace(cfg, model=args.model)
    tr, te, tag = load_fold(cfg)
    side = cfg.input_side
    xtr, ytr = tr.load_arrays(side)
    xte, yte = te.load_arrays(side)
    xtr, xte = to_model_input(xtr, side), to_model_input(xte, side)
    seed = cfg.seeds[0]
    mcfg = build_named(cfg.model, side, len(tr.class_names))
    mcfg = replace(mcfg, metadata=(("dataset", tag), ("fold", str(cfg.fold)), ("seed", str(seed))))
    model = Network(mcfg, seed=seed)
    hp = Hyperparams(lr=cfg.lr, batch_size=cfg.batch_size, epochs=cfg.epochs, patience=cfg.patience,
                     shift=cfg.shift, permute_channels=cfg.permute_channels)
    result = train(model, xtr, ytr, hp, seed=seed)
    acc = top_k_from_scores(predict(model, xte), yte, 1)
    stem = Path(cfg.out) / f"{cfg.model}_s{seed}"
    save_model(model, stem)
    print(f"{cfg.model} seed {seed}: best epoch {result.best_epoch}, test top1 {acc:.4f} -> {stem}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    (model,) = _checkpoints(cfg, args, 1)
    images, labels = _test_images(cfg)
    sink = CsvSink(Path(cfg.out) / "sweep.csv", config_hash=cfg.sha256())
    grids = {d: cfg.grid(d) for d in cfg.degradations}
    for seed in cfg.seeds:
        run_degradation_sweep(model, images, labels, grids, seed, on_row=sink.write)
    print(f"wrote {sink.path}")
    return EXIT_OK


def cmd_featssim(args) -> int:
    cfg = _config(args)
    models = _checkpoints(cfg, args, 2)
    images, _ = _test_images(cfg)
    sink = CsvSink(Path(cfg.out) / "featssim.csv", FEATSSIM_HEADER, cfg.sha256())
    grids = {d: cfg.grid(d) for d in cfg.degradations}
    for seed in cfg.seeds:
        for row in run_feature_ssim(models, images, grids, seed):
            sink.write(row)
    print(f"wrote {sink.path}")
    return EXIT_OK


def cmd_ntt(args) -> int:
    cfg = _config(args)
    plain, ntt = _checkpoints(cfg, args, 2)
    images, labels = _test_images(cfg)
    sink = CsvSink(Path(cfg.out) / "ntt.csv", config_hash=cfg.sha256())
    grids = {d: cfg.grid(d) for d in cfg.degradations}
    lines = []
    for seed in cfg.seeds:
        a, b, summary = run_ntt_comparison(plain, ntt, images, labels, grids, seed)
        for row in a + b:
            sink.write(row)
        lines.append(f"seed {seed}: clean delta {summary.clean_delta:+.4f}, max gain {summary.max_gain:+.4f} "
                     f"at {summary.max_gain_at[0]}={summary.max_gain_at[1]:g}")
    (Path(cfg.out) / "ntt_summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_fgsm(args) -> int:
    cfg = _config(args)
    (model,) = _checkpoints(cfg, args, 1)
    images, labels = _test_images(cfg)
    sink = CsvSink(Path(cfg.out) / "fgsm.csv", FGSM_HEADER, cfg.sha256())
    for seed in cfg.seeds:
        for row in run_fgsm(model, images, labels, cfg.eps, seed):
            sink.write(row)
    print(f"wrote {sink.path}")
    return EXIT_OK


def cmd_plot(args) -> int:
    emit_plot(args.csv, args.out, args.metric)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    text = report(args.run_dir)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate, "train": cmd_train, "sweep": cmd_sweep, "featssim": cmd_featssim,
    "ntt-compare": cmd_ntt, "fgsm": cmd_fgsm, "plot": cmd_plot, "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigFileError) as exc:
        print(f"degbench: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, FloatingPointError) as exc:
        print(f"degbench: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ImageError, CheckpointError, SweepError, ConfigError, FileNotFoundError, OSError) as exc:
        print(f"degbench: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
