"""Experiment orchestration: the three published studies at desk scale.

* ``loss_ablation`` -- five objective settings: adversarial only, L1 only,
  L2 only, adversarial+L1, adversarial+L2.
* ``beta_sweep_l1`` / ``beta_sweep_l2`` -- reconstruction weight swept over
  {1, 2, 4, 8, 16, 32, 64, 128} at fixed architecture.
* ``generator_comparison`` -- the four generator variants at fixed weights
  (adversarial 1, reconstruction 100).

Each configuration trains once per seed, is scored on the test split, and
lands in ``report.csv`` as one aggregated row with the embedded reference
values and informational deltas side by side.  Sub-run failures are
recorded and the experiment continues; the CLI exit code reflects them.
Every report carries a provenance comment block (config hash, seeds,
package version).
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field, replace

from . import __version__
from .augment import augment_dataset
from .config import ExperimentConfig, RunConfig
from .losses import LossWeights
from .metrics import AggregateMetrics, MetricsRecord, aggregate
from .nets import analytic_generator_params, param_count
from .phantom import Dataset, make_dataset
from .reference import (
    BETA_GRID,
    BETA_SWEEP_L1_REFERENCE,
    BETA_SWEEP_L2_REFERENCE,
    GENERATOR_COMPARISON_REFERENCE,
    GENERATOR_COMPARISON_VARIANTS,
    LOSS_ABLATION_REFERENCE,
    LOSS_ABLATION_SETTINGS,
)
from .rng import Rng
from .segment import predict_labels
from .train import history_to_csv, train
from .metrics import evaluate_sample

METRIC_FIELDS = MetricsRecord.FIELDS

REPORT_COLUMNS = (
    ("experiment", "configuration", "n_seeds")
    + METRIC_FIELDS
    + ("model_size_m",)
    + tuple("ref_" + f for f in METRIC_FIELDS)
    + ("ref_model_size_m",)
    + tuple("delta_" + f for f in METRIC_FIELDS)
    + ("delta_model_size_m", "distance_misses", "failed_runs")
)


@dataclass
class ConfigurationResult:
    experiment: str
    configuration: str
    n_seeds: int
    metrics: MetricsRecord = field(default_factory=MetricsRecord)
    model_size_m: float | None = None
    reference: dict = field(default_factory=dict)
    distance_misses: int = 0
    failed_runs: int = 0
    errors: list = field(default_factory=list)

    def row(self) -> dict:
        row = {
            "experiment": self.experiment,
            "configuration": self.configuration,
            "n_seeds": self.n_seeds,
        }
        for f in METRIC_FIELDS:
            row[f] = getattr(self.metrics, f)
        row["model_size_m"] = self.model_size_m
        for f in METRIC_FIELDS:
            row["ref_" + f] = self.reference.get(f)
        row["ref_model_size_m"] = self.reference.get("model_size_m")
        for f in METRIC_FIELDS:
            ours, ref = getattr(self.metrics, f), self.reference.get(f)
            row["delta_" + f] = (
                ours - ref if ref is not None and ours is not None and math.isfinite(ours) else None
            )
        if self.model_size_m is not None and self.reference.get("model_size_m") is not None:
            row["delta_model_size_m"] = self.model_size_m - self.reference["model_size_m"]
        else:
            row["delta_model_size_m"] = None
        row["distance_misses"] = self.distance_misses
        row["failed_runs"] = self.failed_runs
        return row


def build_training_data(run: RunConfig) -> Dataset:
    ds = make_dataset(run.phantom, run.n_train, run.n_val, run.n_test)
    if run.augment.enabled:
        expanded = augment_dataset(
            ds.train, run.augment.n_rotations, run.augment.scale_factors, run.augment.seed
        )
        ds = Dataset(expanded, ds.val, ds.test, ds.manifest)
    return ds


def evaluate_on_samples(generator, samples, rng: Rng) -> AggregateMetrics:
    from .nets import forward_generator
    from .train import _stack_batch

    u, _ = _stack_batch(samples)
    mode = "eval_batch" if len(samples) >= 2 else "eval"
    pred, _ = forward_generator(generator, u, rng, mode=mode)
    records = [
        evaluate_sample(predict_labels(pred.data[i]), s) for i, s in enumerate(samples)
    ]
    return aggregate(records)


def run_single(run: RunConfig, dataset: Dataset, out_dir: str | None = None,
               tag: str = "run") -> tuple:
    """Train one configuration and score it on the test split.

    Returns (AggregateMetrics over test, generator network).
    """
    result = train(run.generator, run.discriminator, run.train, dataset)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        history_to_csv(result.history, os.path.join(out_dir, f"{tag}_history.csv"))
    agg = evaluate_on_samples(
        result.generator, dataset.test, Rng(run.train.seed).split("test_eval")
    )
    return agg, result.generator


def _merge_seed_aggregates(aggs) -> tuple:
    """Mean-of-means across seeds plus total miss count."""
    rec = MetricsRecord()
    for f in METRIC_FIELDS:
        vals = [getattr(a.mean, f) for a in aggs]
        ok = [v for v in vals if not math.isnan(v)]
        if ok:
            setattr(rec, f, sum(ok) / len(ok))
    misses = sum(a.n_distance_misses for a in aggs)
    return rec, misses


def _run_configuration(exp_name, label, run: RunConfig, seeds, dataset, out_dir,
                       reference, progress=None) -> ConfigurationResult:
    res = ConfigurationResult(exp_name, label, len(seeds), reference=dict(reference))
    aggs = []
    gen = None
    for seed in seeds:
        run_seeded = replace(run, train=replace(run.train, seed=seed))
        t0 = time.time()
        try:
            agg, gen = run_single(
                run_seeded, dataset, out_dir=out_dir, tag=f"{label}_seed{seed}"
            )
            aggs.append(agg)
            if progress:
                progress(f"{exp_name}/{label} seed {seed}: "
                         f"lu_jm={agg.mean.lu_jm:.4f} ma_jm={agg.mean.ma_jm:.4f} "
                         f"({time.time() - t0:.0f}s)")
        except Exception as exc:  # recorded, experiment continues
            res.failed_runs += 1
            res.errors.append(f"seed {seed}: {type(exc).__name__}: {exc}")
            if progress:
                progress(f"{exp_name}/{label} seed {seed} FAILED: {exc}")
    if aggs:
        res.metrics, res.distance_misses = _merge_seed_aggregates(aggs)
    if gen is not None:
        res.model_size_m = param_count(gen) / 1e6
    else:
        try:
            res.model_size_m = analytic_generator_params(run.generator) / 1e6
        except Exception:
            res.model_size_m = None
    return res


def run_experiment(cfg: ExperimentConfig, progress=None) -> list:
    """Execute every configuration of the experiment; returns result rows."""
    cfg.validate()
    dataset = build_training_data(cfg.run)
    out_dir = cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)

    jobs = []
    if cfg.name == "loss_ablation":
        weight_map = {
            "adv_only": LossWeights(a=1.0, b=0.0),
            "l1_only": LossWeights(a=0.0, b=100.0, rec_mode="L1"),
            "l2_only": LossWeights(a=0.0, b=100.0, rec_mode="L2"),
            "adv_l1": LossWeights(a=1.0, b=100.0, rec_mode="L1"),
            "adv_l2": LossWeights(a=1.0, b=100.0, rec_mode="L2"),
        }
        for label in LOSS_ABLATION_SETTINGS:
            run = replace(cfg.run, train=replace(cfg.run.train, weights=weight_map[label]))
            jobs.append((label, run, LOSS_ABLATION_REFERENCE[label]))
    elif cfg.name in ("beta_sweep_l1", "beta_sweep_l2"):
        mode = "L1" if cfg.name.endswith("l1" ) else "L2"
        table = BETA_SWEEP_L1_REFERENCE if mode == "L1" else BETA_SWEEP_L2_REFERENCE
        for beta in BETA_GRID:
            w = LossWeights(a=1.0, b=float(beta), rec_mode=mode)
            run = replace(cfg.run, train=replace(cfg.run.train, weights=w))
            ref = {m: table[m][beta] for m in table}
            jobs.append((str(beta), run, ref))
    elif cfg.name == "generator_comparison":
        w = LossWeights(a=1.0, b=100.0, rec_mode="L1")
        for variant in GENERATOR_COMPARISON_VARIANTS:
            gen_cfg = replace(cfg.run.generator, variant=variant)
            run = replace(cfg.run, generator=gen_cfg,
                          train=replace(cfg.run.train, weights=w))
            jobs.append((variant, run, GENERATOR_COMPARISON_REFERENCE[variant]))

    results = []
    for label, run, ref in jobs:
        results.append(
            _run_configuration(cfg.name, label, run, cfg.seeds, dataset, out_dir, ref, progress)
        )
    return results


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6g}"
    return str(v)


def write_report_csv(path, results, provenance: dict) -> None:
    lines = ["# provenance " + " ".join(f"{k}={v}" for k, v in sorted(provenance.items()))]
    lines.append(",".join(REPORT_COLUMNS))
    for res in results:
        row = res.row()
        lines.append(",".join(_cell(row[c]) for c in REPORT_COLUMNS))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_report_csv(path):
    """(header columns, list of row dicts, provenance lines)."""
    prov, header, rows = [], None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                prov.append(line)
                continue
            cells = line.split(",")
            if header is None:
                header = cells
                continue
            rows.append(dict(zip(header, cells)))
    if header is None:
        raise ValueError(f"{path}: no header row")
    return header, rows, prov


def merge_reports(paths):
    """Concatenate report rows; duplicates dropped with a warning list."""
    header = None
    merged, warnings = [], []
    seen = set()
    for path in paths:
        h, rows, _ = read_report_csv(path)
        if header is None:
            header = h
        elif h != header:
            raise ValueError(f"{path}: column set differs from the first report")
        for row in rows:
            key = tuple(row.get(c, "") for c in header)
            if key in seen:
                warnings.append(
                    f"duplicate row dropped: {row.get('experiment')}/{row.get('configuration')}"
                )
                continue
            seen.add(key)
            merged.append(row)
    return header, merged, warnings


def report_plots(header, rows) -> dict:
    """SVG plot name -> content for merged report rows."""
    from .svg import bar_chart_svg, line_chart_svg

    def fval(row, col):
        cell = row.get(col, "")
        if cell in ("", "nan"):
            return None
        try:
            return float(cell)
        except ValueError:
            return None

    plots = {}
    for exp in ("beta_sweep_l1", "beta_sweep_l2"):
        sweep = [r for r in rows if r.get("experiment") == exp]
        if not sweep:
            continue
        sweep.sort(key=lambda r: float(r["configuration"]))
        betas = [int(float(r["configuration"])) for r in sweep]
        series = [
            ("lu_jm", [fval(r, "lu_jm") for r in sweep]),
            ("ma_jm", [fval(r, "ma_jm") for r in sweep]),
            ("ref lu_jm", [fval(r, "ref_lu_jm") for r in sweep]),
            ("ref ma_jm", [fval(r, "ref_ma_jm") for r in sweep]),
        ]
        plots[f"metric_vs_beta_{exp}.svg"] = line_chart_svg(
            betas, series, f"Jaccard vs reconstruction weight ({exp})",
            "reconstruction weight", "Jaccard", log_x=True,
        )
    for exp in ("loss_ablation", "generator_comparison"):
        sub = [r for r in rows if r.get("experiment") == exp]
        if not sub:
            continue
        cats = [r["configuration"] for r in sub]
        series = [
            ("lu_jm", [fval(r, "lu_jm") for r in sub]),
            ("ma_jm", [fval(r, "ma_jm") for r in sub]),
            ("ref lu_jm", [fval(r, "ref_lu_jm") for r in sub]),
            ("ref ma_jm", [fval(r, "ref_ma_jm") for r in sub]),
        ]
        plots[f"bars_{exp}.svg"] = bar_chart_svg(
            cats, series, f"Jaccard per configuration ({exp})", "Jaccard"
        )
    return plots


def provenance_block(cfg_hash: str, seeds, experiment: str | None = None) -> dict:
    prov = {
        "config_sha256": cfg_hash,
        "seeds": "/".join(str(s) for s in seeds),
        "version": __version__,
    }
    if experiment:
        prov["experiment"] = experiment
    return prov
