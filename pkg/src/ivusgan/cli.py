"""Command-line interface.

Subcommands: ``gen-data``, ``train``, ``eval``, ``experiment``, ``report``,
``selftest``.  Exit codes: 0 ok, 1 usage (bad arguments or config), 2
runtime failure, 3 self-check failure.  Relative output paths are resolved
under ``$IVUSGAN_OUTPUT_ROOT`` when that variable is set.  Every config key
can be overridden with ``--set section.key=value`` (repeatable); flags win
over the config file.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import (
    ConfigParseError,
    apply_overrides,
    experiment_config_from_sections,
    load_config_file,
    run_config_from_sections,
)
from .harness import (
    build_training_data,
    merge_reports,
    provenance_block,
    report_plots,
    run_experiment,
    write_report_csv,
)
from .losses import LossError
from .metrics import MetricsRecord, aggregate, evaluate_sample
from .nets import ConfigError, forward_generator
from .phantom import PhantomError, load_dataset, make_dataset, save_dataset
from .rng import Rng
from .segment import predict_labels
from .serialize import SerializationError
from .svg import overlay_svg
from .tensor import Tensor
from .train import CheckpointError, history_to_csv, load_checkpoint, train

USAGE_ERRORS = (ConfigParseError, PhantomError, ConfigError, LossError, ValueError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; the contract says 1
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _out_path(path: str) -> str:
    root = os.environ.get("IVUSGAN_OUTPUT_ROOT", "")
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


def _load_sections(config_path: str, overrides):
    sections = load_config_file(config_path) if config_path else {}
    return apply_overrides(sections, overrides)


def cmd_gen_data(args) -> int:
    sections = _load_sections(args.spec, args.set)
    for key, val in (("n_train", args.n_train), ("n_val", args.n_val), ("n_test", args.n_test)):
        if val is not None:
            sections.setdefault("dataset", {})[key] = val
    run = run_config_from_sections(sections)
    ds = make_dataset(run.phantom, run.n_train, run.n_val, run.n_test)
    out = _out_path(args.out)
    save_dataset(ds, out)
    n = len(ds.train) + len(ds.val) + len(ds.test)
    print(f"wrote {n} samples ({len(ds.train)}/{len(ds.val)}/{len(ds.test)} train/val/test) to {out}")
    return 0


def cmd_train(args) -> int:
    sections = _load_sections(args.config, args.set)
    run = run_config_from_sections(sections)
    out = _out_path(args.out)
    os.makedirs(out, exist_ok=True)
    dataset = build_training_data(run)
    ckpt = os.path.join(out, "checkpoint.ivck")
    cfg = replace(run.train, checkpoint_path=ckpt)

    def progress(rec):
        if args.verbose:
            print(
                f"epoch {rec.epoch}: d={rec.d_loss:.4f} adv={rec.g_adv:.4f} "
                f"rec={rec.g_rec:.4f} lu_jm={rec.val.lu_jm:.4f}"
            )

    result = train(run.generator, run.discriminator, cfg, dataset, progress=progress)
    history_to_csv(result.history, os.path.join(out, "history.csv"))
    last = result.history[-1]
    print(
        f"trained {cfg.epochs} epochs (seed {cfg.seed}, config {run.content_hash()}); "
        f"final val lu_jm={last.val.lu_jm:.4f} ma_jm={last.val.ma_jm:.4f}"
    )
    print(f"checkpoint: {ckpt}")
    print(f"history:    {os.path.join(out, 'history.csv')}")
    return 0


def cmd_eval(args) -> int:
    if not os.path.exists(args.checkpoint):
        raise FileNotFoundError(f"checkpoint not found: {args.checkpoint}")
    gen, _ = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    split = {"train": ds.train, "val": ds.val, "test": ds.test}.get(args.split)
    if split is None:
        raise ConfigParseError(f"unknown split {args.split!r} (train/val/test)")
    if not split:
        raise ConfigParseError(f"split {args.split!r} is empty")
    out = _out_path(args.out)
    os.makedirs(os.path.join(out, "overlays"), exist_ok=True)

    u_all = [s.condition_image for s in split]
    records = []
    rng = Rng(args.seed).split("eval")
    u = Tensor(np.stack([t.data for t in u_all]))
    gen.set_mode("eval_batch" if len(split) >= 2 else "eval")
    pred, _ = forward_generator(gen, u, rng)
    for i, sample in enumerate(split):
        labels = predict_labels(pred.data[i])
        rec = evaluate_sample(labels, sample)
        records.append(rec)
        img01 = (sample.condition_image.data[0].astype(np.float64) + 1.0) / 2.0
        contours = [(sample.lu_contour, "#2ecc71"), (sample.ma_contour, "#27ae60")]
        try:
            from .segment import lu_ma_boundaries

            plu, pma = lu_ma_boundaries(labels)
            contours += [(plu, "#e74c3c"), (pma, "#c0392b")]
        except Exception:
            pass
        svg = overlay_svg(img01, contours)
        with open(os.path.join(out, "overlays", f"sample_{sample.index:04d}.svg"), "w") as fh:
            fh.write(svg)

    agg = aggregate(records)
    cols = ("sample",) + MetricsRecord.FIELDS
    lines = [",".join(cols)]
    for sample, rec in zip(split, records):
        lines.append(",".join([str(sample.index)] + [repr(v) for v in rec.values()]))
    lines.append(",".join(["mean"] + [repr(v) for v in agg.mean.values()]))
    lines.append(",".join(["std"] + [repr(v) for v in agg.std.values()]))
    lines.append(f"# distance_misses,{agg.n_distance_misses}")
    with open(os.path.join(out, "metrics.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(
        f"evaluated {len(split)} {args.split} samples: mean lu_jm={agg.mean.lu_jm:.4f} "
        f"ma_jm={agg.mean.ma_jm:.4f} (misses: {agg.n_distance_misses})"
    )
    print(f"metrics:  {os.path.join(out, 'metrics.csv')}")
    print(f"overlays: {os.path.join(out, 'overlays')}/")
    return 0


def cmd_experiment(args) -> int:
    sections = _load_sections(args.config, args.set)
    exp = experiment_config_from_sections(sections)
    if args.out:
        exp.out_dir = args.out
    exp.out_dir = _out_path(exp.out_dir)
    results = run_experiment(exp, progress=print)
    prov = provenance_block(exp.run.content_hash(), exp.seeds, exp.name)
    report_path = os.path.join(exp.out_dir, "report.csv")
    write_report_csv(report_path, results, prov)
    print(f"report: {report_path}")
    failures = sum(r.failed_runs for r in results)
    for r in results:
        for err in r.errors:
            print(f"  run failure [{r.configuration}] {err}", file=sys.stderr)
    if failures:
        print(f"{failures} sub-run(s) failed", file=sys.stderr)
        return 2
    return 0


def cmd_report(args) -> int:
    if not args.runs:
        raise ConfigParseError("report needs at least one run directory or report.csv")
    paths = []
    for p in args.runs:
        path = os.path.join(p, "report.csv") if os.path.isdir(p) else p
        if not os.path.exists(path):
            raise FileNotFoundError(f"no report found at {path}")
        paths.append(path)
    header, rows, warnings = merge_reports(paths)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    out = _out_path(args.out)
    os.makedirs(out, exist_ok=True)
    merged = os.path.join(out, "merged.csv")
    with open(merged, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row.get(c, "") for c in header) + "\n")
    plots = report_plots(header, rows)
    for name, svg in plots.items():
        with open(os.path.join(out, name), "w") as fh:
            fh.write(svg)
    print(f"merged {len(rows)} rows from {len(paths)} report(s) into {merged}")
    for name in plots:
        print(f"plot: {os.path.join(out, name)}")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    ok = run_selftest(report=print)
    if not ok:
        print("selftest FAILED", file=sys.stderr)
        return 3
    print("selftest passed")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="ivusgan", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ivusgan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a phantom dataset to disk")
    p.add_argument("--spec", required=True, help="config file with [phantom] (and [dataset])")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--n-val", type=int, default=None)
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset directory from gen-data")
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0, help="seed for inference noise")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run a study (ablation/sweep/comparison)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override [experiment].out_dir")
    p.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="merge experiment reports and render plots")
    p.add_argument("runs", nargs="*", help="run directories or report.csv files")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selftest", help="run the oracle self-check suites")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SerializationError, CheckpointError, OSError, RuntimeError) as exc:
        print(f"ivusgan {args.command}: {exc}", file=sys.stderr)
        return 2
    except USAGE_ERRORS as exc:
        print(f"ivusgan {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
