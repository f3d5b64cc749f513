"""Multi-run evaluation: per-horizon RMSE, run aggregation, recursive forecasts.

A protocol run trains `runs` independent models (seeds base, base+1, ...) on
one fixed train/test split and aggregates their per-horizon RMSE with mean,
standard deviation (ddof=1 across runs) and a normal-approximation 95%
confidence interval, half-width 1.96*std/sqrt(runs).  Forecast bands instead
use the population spread across run trajectories (1.96*std, ddof=0), which
degenerates to zero width for a single run.
"""

from __future__ import annotations

import datetime as dt
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .embedding import EmbeddedDataset
from .models import network
from .models.params import ModelParams, ModelSpec
from .training import TrainConfig, TrainHistory, mse_loss, train


def rmse(y: np.ndarray, yhat: np.ndarray) -> float:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.size == 0:
        raise ValueError(f"rmse needs equal non-empty shapes, got "
                         f"{y.shape} vs {yhat.shape}")
    return math.sqrt(mse_loss(y, yhat))


@dataclass(frozen=True)
class HorizonMetrics:
    """RMSE per prediction horizon, in normalized units and cases/day."""

    rmse_norm: np.ndarray
    rmse_cases: np.ndarray
    mean_norm: float
    mean_cases: float

    @classmethod
    def compute(cls, targets: np.ndarray, preds: np.ndarray,
                scale: float) -> "HorizonMetrics":
        per = np.array([rmse(targets[:, k], preds[:, k])
                        for k in range(targets.shape[1])])
        return cls(per, per * scale, float(per.mean()), float(per.mean() * scale))

    def to_dict(self) -> dict:
        return {"rmse_norm": self.rmse_norm.tolist(),
                "rmse_cases": self.rmse_cases.tolist(),
                "mean_norm": self.mean_norm, "mean_cases": self.mean_cases}

    @classmethod
    def from_dict(cls, d: dict) -> "HorizonMetrics":
        return cls(np.array(d["rmse_norm"]), np.array(d["rmse_cases"]),
                   d["mean_norm"], d["mean_cases"])


def evaluate(spec: ModelSpec, params: ModelParams, test_ds: EmbeddedDataset,
             scale: float) -> HorizonMetrics:
    """Inference-mode per-horizon RMSE over a test set."""
    if len(test_ds) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    preds = network.predict_batch(spec, params, test_ds.inputs)
    return HorizonMetrics.compute(test_ds.targets, preds, scale)


def _aggregate(values: np.ndarray, runs: int) -> dict:
    mean = values.mean(axis=0)
    std = values.std(axis=0, ddof=1)
    ci = 1.96 * std / math.sqrt(runs)
    as_list = (lambda a: a.tolist() if isinstance(a, np.ndarray) else float(a))
    return {"mean": as_list(mean), "std": as_list(std),
            "ci95_halfwidth": as_list(ci)}


@dataclass
class ExperimentReport:
    variant: str
    dataset_id: str
    split_protocol: str
    runs: int
    base_seed: int
    scale: float
    train_config: dict
    per_run_test: list[HorizonMetrics]
    per_run_train: list[HorizonMetrics]

    @property
    def aggregate_test(self) -> dict:
        return self._aggregate_block(self.per_run_test)

    @property
    def aggregate_train(self) -> dict:
        return self._aggregate_block(self.per_run_train)

    @property
    def mean_test_rmse_cases(self) -> float:
        return float(np.mean([m.mean_cases for m in self.per_run_test]))

    def _aggregate_block(self, metrics: list[HorizonMetrics]) -> dict:
        return {
            "per_horizon_norm": _aggregate(
                np.stack([m.rmse_norm for m in metrics]), self.runs),
            "per_horizon_cases": _aggregate(
                np.stack([m.rmse_cases for m in metrics]), self.runs),
            "overall_norm": _aggregate(
                np.array([m.mean_norm for m in metrics]), self.runs),
            "overall_cases": _aggregate(
                np.array([m.mean_cases for m in metrics]), self.runs),
        }

    def to_dict(self) -> dict:
        return {
            "format": "seqcast-report-v1",
            "variant": self.variant,
            "dataset_id": self.dataset_id,
            "split_protocol": self.split_protocol,
            "runs": self.runs,
            "base_seed": self.base_seed,
            "scale": self.scale,
            "train_config": self.train_config,
            "ci_method": "normal approximation, 1.96*std(ddof=1)/sqrt(runs)",
            "per_run_test": [m.to_dict() for m in self.per_run_test],
            "per_run_train": [m.to_dict() for m in self.per_run_train],
            "aggregate_test": self.aggregate_test,
            "aggregate_train": self.aggregate_train,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(d["variant"], d["dataset_id"], d["split_protocol"],
                   d["runs"], d["base_seed"], d["scale"], d["train_config"],
                   [HorizonMetrics.from_dict(m) for m in d["per_run_test"]],
                   [HorizonMetrics.from_dict(m) for m in d["per_run_train"]])


def _one_run(args):
    spec, train_ds, test_ds, cfg, seed, scale = args
    run_cfg = replace(cfg, seed=seed)
    params, history = train(spec, train_ds, run_cfg)
    m_train = evaluate(spec, params, train_ds, scale)
    m_test = evaluate(spec, params, test_ds, scale)
    return m_train, m_test


def run_protocol(spec: ModelSpec, train_ds: EmbeddedDataset,
                 test_ds: EmbeddedDataset, cfg: TrainConfig, runs: int,
                 scale: float, dataset_id: str, split_protocol: str,
                 workers: int | None = None) -> ExperimentReport:
    """`runs` independent trainings on one split; aggregation is ordered by
    run index regardless of completion order."""
    if runs < 2:
        raise ValueError(f"need at least 2 runs for confidence intervals, got {runs}")
    seeds = [cfg.seed + i for i in range(runs)]
    jobs = [(spec, train_ds, test_ds, cfg, s, scale) for s in seeds]
    if workers is None or workers <= 1 or runs == 1:
        results = [_one_run(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_run, jobs))
    return ExperimentReport(
        variant=spec.variant, dataset_id=dataset_id,
        split_protocol=split_protocol, runs=runs, base_seed=cfg.seed,
        scale=scale, train_config=cfg.to_dict(),
        per_run_test=[r[1] for r in results],
        per_run_train=[r[0] for r in results])


@dataclass
class ForecastBand:
    """Mean trajectory and 95% band (cases/day) over consecutive days."""

    dates: list[dt.date]
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = len(self.dates)
        if not (len(self.mean) == len(self.lower) == len(self.upper) == n):
            raise ValueError("band arrays must align with dates")


def recursive_forecast(runs_models: list[tuple[ModelSpec, ModelParams]],
                       history_norm: np.ndarray, dimension: int, lag: int,
                       horizon_days: int, scale: float,
                       start_date: dt.date,
                       feedback: str = "block") -> ForecastBand:
    """Feed univariate model predictions back as inputs for `horizon_days`.

    `history_norm` is the tail of the normalized series; it must cover one
    full lagged window, i.e. (dimension-1)*lag + 1 values.  `block` feedback
    appends all MSA predicted steps per iteration; `one-step` appends only
    the first.
    """
    if horizon_days < 1:
        raise ValueError(f"horizon_days must be >= 1, got {horizon_days}")
    if feedback not in ("block", "one-step"):
        raise ValueError(f"unknown feedback mode {feedback!r}")
    if not runs_models:
        raise ValueError("need at least one trained model")
    span = (dimension - 1) * lag
    history_norm = np.asarray(history_norm, dtype=np.float64).ravel()
    if history_norm.size < span + 1:
        raise ValueError(f"history too short: need {span + 1} values for a "
                         f"window, got {history_norm.size}")

    trajectories = []
    for spec, params in runs_models:
        if spec.features != 1:
            raise ValueError(
                "recursive forecasting is univariate only: future values of "
                f"neighbour-state features are unknown (variant has "
                f"{spec.features} features)")
        buf = list(history_norm)
        out: list[float] = []
        while len(out) < horizon_days:
            window = np.array(buf[len(buf) - 1 - span::lag])[:, None]
            pred = network.predict(spec, params, window)
            step = pred if feedback == "block" else pred[:1]
            buf.extend(step.tolist())
            out.extend(step.tolist())
        traj = np.array(out[:horizon_days]) * scale
        trajectories.append(np.maximum(traj, 0.0))

    stack = np.stack(trajectories)
    mean = stack.mean(axis=0)
    spread = 1.96 * stack.std(axis=0, ddof=0)
    dates = [start_date + dt.timedelta(days=k) for k in range(horizon_days)]
    return ForecastBand(dates=dates, mean=mean,
                        lower=np.maximum(mean - spread, 0.0),
                        upper=mean + spread)


@dataclass
class TableDocument:
    """Summary rows (dataset, split, model) -> (mean RMSE, std) in cases/day."""

    rows: list[dict]

    def render_csv(self) -> str:
        lines = ["dataset,split,model,rmse_mean_cases,rmse_std_cases"]
        for r in self.rows:
            lines.append(f"{r['dataset']},{r['split']},{r['model']},"
                         f"{r['rmse_mean']!r},{r['rmse_std']!r}")
        return "\n".join(lines) + "\n"

    def render_text(self) -> str:
        header = ("dataset", "split", "model", "rmse_mean", "rmse_std")
        body = [(r["dataset"], r["split"], r["model"],
                 f"{r['rmse_mean']:.1f}", f"{r['rmse_std']:.1f}")
                for r in self.rows]
        widths = [max(len(row[k]) for row in [header] + body)
                  for k in range(len(header))]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        lines = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
        lines += [fmt.format(*row) for row in body]
        return "\n".join(lines) + "\n"


def summarize_tables(reports: list[ExperimentReport]) -> TableDocument:
    rows = []
    for rep in sorted(reports, key=lambda r: (r.dataset_id, r.split_protocol,
                                              r.variant)):
        agg = rep.aggregate_test["overall_cases"]
        rows.append({"dataset": rep.dataset_id, "split": rep.split_protocol,
                     "model": rep.variant, "rmse_mean": agg["mean"],
                     "rmse_std": agg["std"]})
    return TableDocument(rows)
