"""Command-line surface: ingest, experiment, forecast, gradcheck, summarize.

Configuration precedence is flag > config file (JSON) > built-in default;
every key of the config file mirrors a flag.  Each invocation writes into a
fresh timestamped directory under the output root (--out, else the
SEQCAST_OUT environment variable, else ./seqcast_out) together with a
manifest.json recording the resolved config, seeds, input hashes, backend
and package version, so any emitted number can be reproduced exactly.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, dataio, embedding, experiment, training
from .dataio import DataError
from .kernels import BACKEND
from .models import ModelParams, ModelSpec
from .models.params import load_checkpoint, save_checkpoint
from .numerics import Rng

VARIANTS = ("lstm", "bdlstm", "edlstm")

DEFAULTS = {
    "csv": None,
    "cumulative": False,
    "start": "2020-04-15",
    "end": None,
    "smooth_window": 3,
    "normalize_scope": "full",
    "cache": None,
    "region": "India",
    "group": None,
    "variant": ["lstm"],
    "split": ["random"],
    "boundary": "2021-05-15",
    "train_fraction": None,
    "dimension": 6,
    "lag": 2,
    "horizons": 4,
    "contiguous": False,
    "epochs": training.DEFAULT_EPOCHS,
    "learning_rate": None,
    "beta1": 0.9,
    "beta2": 0.999,
    "adam_epsilon": 1e-8,
    "batch_size": 1,
    "dropout": 0.2,
    "clip_norm": None,
    "patience": None,
    "cell_formula": "standard",
    "feedback": "block",
    "runs": 30,
    "days": 60,
    "checkpoints": None,
    "save_checkpoints": None,
    "month": None,
    "top_k": 10,
    "weekly": False,
    "seed": 42,
    "workers": None,
    "out": None,
}


class CliError(RuntimeError):
    pass


def _resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    path = getattr(args, "config", None)
    if path:
        with open(path, encoding="utf-8") as fh:
            from_file = json.load(fh)
        unknown = sorted(set(from_file) - set(cfg))
        if unknown:
            raise CliError(f"unknown config keys in {path}: {unknown}")
        cfg.update(from_file)
    for key, value in vars(args).items():
        if key in cfg:
            cfg[key] = value
    for key in ("variant", "split"):
        if isinstance(cfg[key], str):
            cfg[key] = [cfg[key]]
    if cfg["variant"] == ["all"]:
        cfg["variant"] = list(VARIANTS)
    if cfg["split"] == ["both"]:
        cfg["split"] = ["static", "random"]
    for v in cfg["variant"]:
        if v not in VARIANTS:
            raise CliError(f"unknown variant {v!r}, expected one of {VARIANTS} or 'all'")
    for s in cfg["split"]:
        if s not in ("static", "random"):
            raise CliError(f"unknown split {s!r}, expected static, random or both")
    return cfg


def _out_dir(cfg: dict, command: str) -> Path:
    root = cfg.get("out") or os.environ.get("SEQCAST_OUT") or "seqcast_out"
    stamp = dt.datetime.now(dt.timezone.utc).strftime("%Y%m%dT%H%M%S.%f")
    base = Path(root) / f"{command}-{stamp}"
    out = base
    k = 1
    while out.exists():
        out = Path(f"{base}-{k}")
        k += 1
    out.mkdir(parents=True)
    return out


def _write_manifest(out: Path, command: str, cfg: dict,
                    input_hashes: dict, outputs: list[str]) -> None:
    doc = {
        "command": command,
        "created_utc": dt.datetime.now(dt.timezone.utc).isoformat(),
        "package_version": __version__,
        "kernel_backend": BACKEND,
        "config": cfg,
        "input_sha256": input_hashes,
        "outputs": sorted(outputs),
    }
    (out / "manifest.json").write_text(json.dumps(doc, indent=2) + "\n")


def _parse_date(value: str | None, name: str) -> dt.date | None:
    if value is None:
        return None
    try:
        return dt.date.fromisoformat(value)
    except ValueError:
        raise CliError(f"{name} must be an ISO date (YYYY-MM-DD), got {value!r}")


# ----------------------------------------------------------------- ingest

def _build_cache(cfg: dict) -> dict:
    if not cfg["csv"]:
        raise CliError("ingest needs --csv (or 'csv' in the config file)")
    raw = dataio.load_csv(cfg["csv"], cumulative=cfg["cumulative"])
    start = _parse_date(cfg["start"], "start")
    end = _parse_date(cfg["end"], "end")
    boundary = _parse_date(cfg["boundary"], "boundary")
    regions = {}
    for name, series in raw.items():
        s = dataio.clean_negatives(series).slice_dates(start, end)
        smoothed = dataio.rolling_mean(s, cfg["smooth_window"])
        if cfg["normalize_scope"] == "train":
            head = smoothed.slice_dates(None, min(boundary, smoothed.end_date))
            scale = float(np.max(head.values))
            if scale <= 0:
                raise DataError(f"{name}: training span has zero maximum")
            ns = dataio.NormalizedSeries(base=smoothed, scale=scale)
        elif cfg["normalize_scope"] == "full":
            ns = dataio.normalize_max(smoothed)
        else:
            raise CliError(f"normalize_scope must be full or train, "
                           f"got {cfg['normalize_scope']!r}")
        regions[name] = ns
    return {
        "format": "seqcast-cache-v1",
        "source_csv": str(cfg["csv"]),
        "source_sha256": dataio.series_sha256(cfg["csv"]),
        "cumulative": cfg["cumulative"],
        "start": cfg["start"],
        "end": cfg["end"],
        "smooth_window": cfg["smooth_window"],
        "normalize_scope": cfg["normalize_scope"],
        "regions": {
            name: {"start_date": ns.start_date.isoformat(),
                   "scale": ns.scale,
                   "normalized": ns.normalized.tolist()}
            for name, ns in regions.items()
        },
    }


def load_cache(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise CliError(f"cache file {path} not found; run `seqcast ingest` first")
    if doc.get("format") != "seqcast-cache-v1":
        raise CliError(f"{path} is not a seqcast series cache")
    return doc


def _cache_series(cache: dict, name: str) -> tuple[np.ndarray, float, dt.date]:
    if name not in cache["regions"]:
        raise CliError(f"region {name!r} not in cache "
                       f"(has {sorted(cache['regions'])})")
    entry = cache["regions"][name]
    return (np.asarray(entry["normalized"], dtype=np.float64),
            float(entry["scale"]),
            dt.date.fromisoformat(entry["start_date"]))


def cmd_ingest(args) -> int:
    cfg = _resolve_config(args)
    cache = _build_cache(cfg)
    out = _out_dir(cfg, "ingest")
    cache_path = out / "series_cache.json"
    cache_path.write_text(json.dumps(cache))
    print(f"ingested {cfg['csv']} -> {cache_path}")
    for name in sorted(cache["regions"]):
        entry = cache["regions"][name]
        values = entry["normalized"]
        print(f"  {name}: {len(values)} days from {entry['start_date']}, "
              f"peak {entry['scale']:.1f} cases/day")
    _write_manifest(out, "ingest", cfg,
                    {str(cfg["csv"]): cache["source_sha256"]},
                    ["series_cache.json"])
    return 0


# --------------------------------------------------------------- datasets

def _dataset_from_cache(cache: dict, cfg: dict):
    """(dataset_id, matrix time x F, scale, start_date) for the configured
    region or multivariate group."""
    emb = embedding.EmbeddingConfig(cfg["dimension"], cfg["lag"],
                                    cfg["horizons"], cfg["contiguous"])
    group_cfg = cfg["group"]
    if group_cfg:
        if isinstance(group_cfg, str):
            key = group_cfg.lower()
            if key == "all-states":
                names = sorted(cache["regions"])
                target = cfg["region"]
                members = [target] + [n for n in names if n != target]
            elif key in dataio.NAMED_GROUPS:
                members = list(dataio.NAMED_GROUPS[key].members)
            else:
                raise CliError(f"unknown group {group_cfg!r}; use a named group "
                               f"{sorted(dataio.NAMED_GROUPS)}, 'all-states', "
                               "or a JSON list of regions")
        else:
            members = list(group_cfg)
        series = {}
        length = start = None
        for name in members:
            values, scale, s0 = _cache_series(cache, name)
            if length is None:
                length, start = len(values), s0
            elif len(values) != length or s0 != start:
                raise CliError(f"region {name!r} misaligned with {members[0]!r}")
            series[name] = values
        matrix = np.column_stack([series[n] for n in members])
        _, scale, start = _cache_series(cache, members[0])
        dataset_id = f"{members[0]}-multivariate"
    else:
        values, scale, start = _cache_series(cache, cfg["region"])
        matrix = values[:, None]
        dataset_id = cfg["region"]
    return dataset_id, matrix, scale, start, emb


def _split_datasets(ds, split_name: str, cfg: dict):
    boundary = _parse_date(cfg["boundary"], "boundary")
    if split_name == "static":
        return embedding.static_split(ds, boundary)
    fraction = cfg["train_fraction"]
    if fraction is None:
        fraction = embedding.derive_train_fraction(ds, boundary)
    return embedding.random_split(ds, fraction, Rng(cfg["seed"]))


def _train_config(cfg: dict) -> training.TrainConfig:
    return training.TrainConfig(
        epochs=cfg["epochs"], learning_rate=cfg["learning_rate"],
        beta1=cfg["beta1"], beta2=cfg["beta2"], epsilon=cfg["adam_epsilon"],
        batch_size=cfg["batch_size"], dropout_rate=cfg["dropout"],
        seed=cfg["seed"], clip_norm=cfg["clip_norm"], patience=cfg["patience"])


def _model_spec(variant: str, features: int, cfg: dict) -> ModelSpec:
    if features == 1:
        return ModelSpec.univariate(variant, cfg["dimension"], cfg["horizons"],
                                    cfg["dropout"], cfg["cell_formula"])
    return ModelSpec.multivariate(variant, features, cfg["dimension"],
                                  cfg["horizons"], cfg["dropout"],
                                  cfg["cell_formula"])


# ------------------------------------------------------------- experiment

def cmd_experiment(args) -> int:
    cfg = _resolve_config(args)
    if not cfg["cache"]:
        raise CliError("experiment needs --cache (produced by `seqcast ingest`)")
    cache = load_cache(cfg["cache"])
    dataset_id, matrix, scale, start, emb = _dataset_from_cache(cache, cfg)
    ds = embedding.takens_embed(matrix, emb, start_date=start)
    tcfg = _train_config(cfg)
    workers = cfg["workers"] or os.cpu_count()

    out = _out_dir(cfg, "experiment")
    (out / "reports").mkdir()
    reports = []
    outputs = []
    for split_name in cfg["split"]:
        train_ds, test_ds = _split_datasets(ds, split_name, cfg)
        for variant in cfg["variant"]:
            spec = _model_spec(variant, ds.features, cfg)
            print(f"running {dataset_id} {variant} {split_name}-split: "
                  f"{cfg['runs']} runs x {cfg['epochs']} epochs "
                  f"({len(train_ds)} train / {len(test_ds)} test samples)")
            rep = experiment.run_protocol(
                spec, train_ds, test_ds, tcfg, cfg["runs"], scale,
                dataset_id, split_name, workers=workers)
            name = f"reports/report_{dataset_id}_{variant}_{split_name}.json"
            (out / name).write_text(json.dumps(rep.to_dict(), indent=2) + "\n")
            outputs.append(name)
            agg = rep.aggregate_test["overall_cases"]
            print(f"  test RMSE {agg['mean']:.1f} +- {agg['std']:.1f} cases/day "
                  f"(95% CI half-width {agg['ci95_halfwidth']:.1f})")
            reports.append(rep)

    tables = experiment.summarize_tables(reports)
    (out / "summary.csv").write_text(tables.render_csv())
    (out / "summary.txt").write_text(tables.render_text())
    outputs += ["summary.csv", "summary.txt"]
    outputs += _write_figure_csvs(out, reports)
    _write_manifest(out, "experiment", cfg,
                    {str(cfg["cache"]): dataio.series_sha256(cfg["cache"])},
                    outputs)
    print(tables.render_text(), end="")
    print(f"outputs in {out}")
    return 0


def _write_figure_csvs(out: Path, reports) -> list[str]:
    bars = ["dataset,split,model,phase,rmse_mean_cases,rmse_std_cases,ci95_halfwidth"]
    horizon = ["dataset,split,model,phase,horizon,rmse_mean_cases,"
               "rmse_std_cases,ci95_halfwidth"]
    for rep in reports:
        for phase, block in (("train", rep.aggregate_train),
                             ("test", rep.aggregate_test)):
            o = block["overall_cases"]
            bars.append(f"{rep.dataset_id},{rep.split_protocol},{rep.variant},"
                        f"{phase},{o['mean']!r},{o['std']!r},"
                        f"{o['ci95_halfwidth']!r}")
            h = block["per_horizon_cases"]
            for k in range(len(h["mean"])):
                horizon.append(
                    f"{rep.dataset_id},{rep.split_protocol},{rep.variant},"
                    f"{phase},{k + 1},{h['mean'][k]!r},{h['std'][k]!r},"
                    f"{h['ci95_halfwidth'][k]!r}")
    (out / "figures").mkdir(exist_ok=True)
    (out / "figures/rmse_bars.csv").write_text("\n".join(bars) + "\n")
    (out / "figures/horizon_bars.csv").write_text("\n".join(horizon) + "\n")
    return ["figures/rmse_bars.csv", "figures/horizon_bars.csv"]


# --------------------------------------------------------------- forecast

def cmd_forecast(args) -> int:
    cfg = _resolve_config(args)
    if not cfg["cache"]:
        raise CliError("forecast needs --cache (produced by `seqcast ingest`)")
    if cfg["group"]:
        raise CliError("recursive forecasting is univariate only: future "
                       "values of neighbour-state features are unknown")
    cache = load_cache(cfg["cache"])
    values, scale, start = _cache_series(cache, cfg["region"])
    emb = embedding.EmbeddingConfig(cfg["dimension"], cfg["lag"],
                                    cfg["horizons"], cfg["contiguous"])
    out = _out_dir(cfg, "forecast")
    outputs = []
    last_date = start + dt.timedelta(days=len(values) - 1)

    for variant in cfg["variant"]:
        spec = _model_spec(variant, 1, cfg)
        models = _trained_models(spec, values, scale, start, emb, cfg, out,
                                 outputs, variant)
        band = experiment.recursive_forecast(
            models, values, emb.dimension, emb.effective_lag, cfg["days"],
            scale, last_date + dt.timedelta(days=1), feedback=cfg["feedback"])
        name = f"forecast_{cfg['region']}_{variant}.csv"
        lines = ["date,mean_cases,lower95,upper95"]
        for i, day in enumerate(band.dates):
            lines.append(f"{day.isoformat()},{band.mean[i]!r},"
                         f"{band.lower[i]!r},{band.upper[i]!r}")
        (out / name).write_text("\n".join(lines) + "\n")
        outputs.append(name)
        print(f"{variant}: {cfg['days']}-day forecast for {cfg['region']} "
              f"-> {out / name}")
    _write_manifest(out, "forecast", cfg,
                    {str(cfg["cache"]): dataio.series_sha256(cfg["cache"])},
                    outputs)
    return 0


def _trained_models(spec, values, scale, start, emb, cfg, out, outputs,
                    variant):
    """Load checkpointed models if a directory is given, else train inline."""
    if cfg["checkpoints"]:
        ckpt_dir = Path(cfg["checkpoints"])
        paths = sorted(ckpt_dir.glob(f"ckpt_{cfg['region']}_{variant}_run*.json"))
        if not paths:
            raise CliError(f"no checkpoints for {cfg['region']}/{variant} "
                           f"under {ckpt_dir}")
        models = []
        for p in paths:
            ck = load_checkpoint(p)
            models.append((ck.params.spec, ck.params))
        return models

    ds = embedding.takens_embed(values[:, None], emb, start_date=start)
    train_ds, _ = _split_datasets(ds, cfg["split"][0], cfg)
    tcfg = _train_config(cfg)
    models = []
    for i in range(cfg["runs"]):
        run_cfg = training.TrainConfig(**{**tcfg.to_dict(),
                                          "seed": cfg["seed"] + i})
        params, _ = training.train(spec, train_ds, run_cfg)
        models.append((spec, params))
        if cfg["save_checkpoints"]:
            ck_dir = Path(cfg["save_checkpoints"])
            ck_dir.mkdir(parents=True, exist_ok=True)
            p = ck_dir / f"ckpt_{cfg['region']}_{variant}_run{i}.json"
            save_checkpoint(p, params, scale, emb, cfg["seed"] + i)
            outputs.append(str(p))
    return models


# --------------------------------------------------------------- gradcheck

def cmd_gradcheck(args) -> int:
    cfg = _resolve_config(args)
    threshold = 1e-4
    rng = Rng(cfg["seed"])
    window = rng.uniform(0.0, 1.0, (3, 1))
    target = rng.uniform(0.0, 1.0, 4)
    perturb = 1e-3 if getattr(args, "inject_fault", False) else 0.0
    ok = True
    for variant in VARIANTS:
        sizes = (2,) if variant == "edlstm" else (2, 2)
        spec = ModelSpec(variant, (3, 1), sizes, (1, 4), 0.0,
                         cfg["cell_formula"])
        err = training.gradient_check(spec, window, target,
                                      seed=cfg["seed"], perturb=perturb)
        status = "PASS" if err < threshold else "FAIL"
        ok &= err < threshold
        print(f"{variant}: max relative gradient error {err:.3e} "
              f"(threshold {threshold:.0e}) {status}")
    return 0 if ok else 1


# --------------------------------------------------------------- summarize

def cmd_summarize(args) -> int:
    cfg = _resolve_config(args)
    if not cfg["csv"]:
        raise CliError("summarize needs --csv")
    series = dataio.load_csv(cfg["csv"], cumulative=cfg["cumulative"])
    out = _out_dir(cfg, "summarize")
    outputs = []
    if cfg["weekly"]:
        lines = ["region,week_index,week_start,mean_new_cases"]
        for name in sorted(series):
            s = series[name]
            for k, value in enumerate(dataio.weekly_average(s)):
                week_start = s.start_date + dt.timedelta(days=7 * k)
                lines.append(f"{name},{k},{week_start.isoformat()},{value!r}")
        (out / "weekly.csv").write_text("\n".join(lines) + "\n")
        outputs.append("weekly.csv")
        print(f"weekly averages for {len(series)} regions -> {out / 'weekly.csv'}")
    elif cfg["month"]:
        try:
            month_start = dt.date.fromisoformat(cfg["month"] + "-01")
        except ValueError:
            raise CliError(f"--month must be YYYY-MM, got {cfg['month']!r}")
        ranking = dataio.monthly_rank(series, month_start, cfg["top_k"])
        lines = ["rank,region,total_novel_cases"]
        for pos, (name, total) in enumerate(ranking, start=1):
            lines.append(f"{pos},{name},{total:.0f}")
            print(f"{pos:>3}  {name:<20} {total:>12.0f}")
        (out / "ranking.csv").write_text("\n".join(lines) + "\n")
        outputs.append("ranking.csv")
    else:
        raise CliError("summarize needs --month YYYY-MM or --weekly")
    _write_manifest(out, "summarize", cfg,
                    {str(cfg["csv"]): dataio.series_sha256(cfg["csv"])},
                    outputs)
    return 0


# -------------------------------------------------------------------- main

def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--seed", type=int, help="base RNG seed")
    p.add_argument("--workers", type=int, help="parallel training workers")
    p.add_argument("--out", help="output root (default $SEQCAST_OUT or ./seqcast_out)")
    return p


def _add_data_flags(p):
    p.add_argument("--csv", help="daily-cases CSV (date,region,new_cases)")
    p.add_argument("--cumulative", action="store_true",
                   help="value column is cumulative; difference it")
    p.add_argument("--start", help="analysis start date (ISO)")
    p.add_argument("--end", help="analysis end date (ISO)")
    p.add_argument("--smooth-window", dest="smooth_window", type=int)
    p.add_argument("--normalize-scope", dest="normalize_scope",
                   choices=("full", "train"))


def _add_model_flags(p):
    p.add_argument("--cache", help="series cache from `seqcast ingest`")
    p.add_argument("--region")
    p.add_argument("--group", help="named multivariate group "
                                   "(maharashtra, delhi, all-states)")
    p.add_argument("--variant", action="append",
                   choices=VARIANTS + ("all",))
    p.add_argument("--split", action="append", choices=("static", "random", "both"))
    p.add_argument("--boundary", help="static-split boundary date (ISO)")
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--dimension", type=int)
    p.add_argument("--lag", type=int)
    p.add_argument("--horizons", type=int)
    p.add_argument("--contiguous", action="store_true")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--clip-norm", dest="clip_norm", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--cell-formula", dest="cell_formula",
                   choices=("standard", "paper_literal"))
    p.add_argument("--runs", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqcast",
        description="Recurrent-network forecasting of daily epidemic case counts")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()

    p = sub.add_parser("ingest", parents=[common],
                       help="clean, smooth and normalize a daily-cases CSV")
    _add_data_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("experiment", parents=[common],
                       help="multi-run train/evaluate protocol with reports")
    _add_model_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("forecast", parents=[common],
                       help="recursive multi-day forecast with uncertainty band")
    _add_model_flags(p)
    p.add_argument("--days", type=int, default=argparse.SUPPRESS)
    p.add_argument("--feedback", choices=("block", "one-step"),
                   default=argparse.SUPPRESS)
    p.add_argument("--checkpoints", default=argparse.SUPPRESS,
                   help="load trained models from this directory")
    p.add_argument("--save-checkpoints", dest="save_checkpoints",
                   default=argparse.SUPPRESS,
                   help="write one checkpoint per trained run here")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("gradcheck", parents=[common],
                       help="finite-difference check of all three variants")
    p.add_argument("--cell-formula", dest="cell_formula",
                   choices=("standard", "paper_literal"),
                   default=argparse.SUPPRESS)
    p.add_argument("--inject-fault", action="store_true",
                   help="self-test hook: perturb gradients, expect FAIL")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("summarize", parents=[common],
                       help="monthly rankings or weekly averages from a CSV")
    _add_data_flags(p)
    p.add_argument("--month", help="ranking month YYYY-MM (taken at its 1st)")
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--weekly", action="store_true")
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
