"""Adam training loop over embedded datasets, plus gradient checking.

Updates are per-sample (batch size 1) in a freshly shuffled order each
epoch; a `full` batch mode averages gradients over the whole set before one
Adam step.  Everything is driven by a single seeded RNG, so the triple
(seed, data, config) determines every reported number exactly.

Defaults the published experiments never state (epochs, learning rate,
batching) were fixed by a pilot sweep committed with this repo and are
recorded in every report header.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .embedding import EmbeddedDataset
from .models import network
from .models.params import ModelParams, ModelSpec
from .numerics import Rng

DEFAULT_LEARNING_RATES = {"lstm": 0.005, "bdlstm": 0.005, "edlstm": 0.002}
DEFAULT_EPOCHS = 100


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = DEFAULT_EPOCHS
    learning_rate: float | None = None  # None: per-variant default
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int | None = 1          # None: full batch
    dropout_rate: float = 0.2
    seed: int = 0
    clip_norm: float | None = None
    patience: int | None = None         # epochs without train-loss improvement

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")

    def rate_for(self, variant: str) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return DEFAULT_LEARNING_RATES[variant]

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "learning_rate": self.learning_rate,
                "beta1": self.beta1, "beta2": self.beta2, "epsilon": self.epsilon,
                "batch_size": self.batch_size, "dropout_rate": self.dropout_rate,
                "seed": self.seed, "clip_norm": self.clip_norm,
                "patience": self.patience}


@dataclass
class AdamState:
    """First/second moments, stored flat alongside ModelParams.flat."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def init(cls, params: ModelParams) -> "AdamState":
        return cls(m=np.zeros_like(params.flat), v=np.zeros_like(params.flat))

    def moments(self, params: ModelParams) -> tuple[dict, dict]:
        """Per-tensor views of m and v (congruent with params.tensors())."""
        m = {name: self.m[sl].reshape(shape)
             for name, (sl, shape) in params.slices.items()}
        v = {name: self.v[sl].reshape(shape)
             for name, (sl, shape) in params.slices.items()}
        return m, v


@dataclass
class TrainHistory:
    losses: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


def adam_step(params: ModelParams, grads: dict[str, np.ndarray],
              state: AdamState, cfg: TrainConfig, lr: float | None = None,
              _flat_grads: np.ndarray | None = None):
    """One bias-corrected Adam update, in place; returns (params, state)."""
    lr = cfg.rate_for(params.spec.variant) if lr is None else lr
    if _flat_grads is None:
        if set(grads) != set(params.slices):
            raise ValueError(f"gradient keys {sorted(grads)} do not match "
                             f"parameters {sorted(params.slices)}")
        _flat_grads = np.empty_like(params.flat)
        for name, (sl, shape) in params.slices.items():
            if grads[name].shape != shape:
                raise ValueError(f"gradient {name} has shape "
                                 f"{grads[name].shape}, expected {shape}")
            _flat_grads[sl] = grads[name].ravel()
    state.t += 1
    kernels.adam_update(params.flat, _flat_grads, state.m, state.v, state.t,
                        lr, cfg.beta1, cfg.beta2, cfg.epsilon)
    return params, state


def _clip(flat_grads: np.ndarray, max_norm: float) -> None:
    total = math.sqrt(float(flat_grads @ flat_grads))
    if total > max_norm:
        flat_grads *= max_norm / total


def train(spec: ModelSpec, train_ds: EmbeddedDataset,
          cfg: TrainConfig) -> tuple[ModelParams, TrainHistory]:
    """Train a freshly initialized model; deterministic in (seed, cfg, data)."""
    if len(train_ds) == 0:
        raise ValueError("cannot train on an empty dataset")
    if train_ds.inputs.shape[1:] != spec.input_shape:
        raise ValueError(f"dataset windows {train_ds.inputs.shape[1:]} do not "
                         f"match spec input {spec.input_shape}")
    if train_ds.targets.shape[1] != spec.horizons:
        raise ValueError(f"dataset targets have {train_ds.targets.shape[1]} "
                         f"horizons, spec wants {spec.horizons}")
    spec = replace(spec, dropout_rate=cfg.dropout_rate)
    rng = Rng(cfg.seed)
    params = ModelParams.init(spec, rng)
    state = AdamState.init(params)
    lr = cfg.rate_for(spec.variant)
    history = TrainHistory()
    n = len(train_ds)
    batch = n if cfg.batch_size is None else min(cfg.batch_size, n)
    best = math.inf
    stale = 0

    gbuf = np.empty_like(params.flat)
    slices = list(params.slices.items())
    for _ in range(cfg.epochs):
        tic = time.perf_counter()
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            for pos, i in enumerate(idx):
                masks = network.draw_dropout_masks(spec, rng)
                pred, cache = network.forward(spec, params,
                                              train_ds.inputs[i], masks)
                epoch_loss += mse_loss(pred, train_ds.targets[i])
                grads = network.backward(spec, params, cache,
                                         train_ds.targets[i])
                if pos == 0:
                    for name, (sl, _) in slices:
                        gbuf[sl] = grads[name].ravel()
                else:
                    for name, (sl, _) in slices:
                        gbuf[sl] += grads[name].ravel()
            if len(idx) > 1:
                gbuf /= len(idx)
            if cfg.clip_norm is not None:
                _clip(gbuf, cfg.clip_norm)
            adam_step(params, None, state, cfg, lr, _flat_grads=gbuf)
        mean_loss = epoch_loss / n
        history.losses.append(mean_loss)
        history.epoch_seconds.append(time.perf_counter() - tic)
        if cfg.patience is not None:
            if mean_loss < best - 1e-12:
                best, stale = mean_loss, 0
            else:
                stale += 1
                if stale > cfg.patience:
                    break
    return params, history


def gradient_check(spec: ModelSpec, window: np.ndarray, target: np.ndarray,
                   seed: int = 0, epsilon: float = 1e-5,
                   masks: list[np.ndarray] | None = None,
                   perturb: float = 0.0) -> float:
    """Max relative error between BPTT and central finite differences.

    Relative error per parameter is |analytic - numeric| divided by
    max(|analytic|, |numeric|, 1e-12).  Meant for tiny networks; cost is two
    forward passes per parameter.  `perturb` offsets every analytic gradient
    (self-test hook: a correct checker must then report a large error).
    """
    params = ModelParams.init(spec, Rng(seed))
    pred, cache = network.forward(spec, params, window, masks)
    analytic = network.backward(spec, params, cache, target)
    if perturb:
        for g in analytic.values():
            g += perturb

    worst = 0.0
    for name, theta in params.tensors().items():
        flat = theta.ravel()
        a_flat = analytic[name].ravel()
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + epsilon
            lo_pred, _ = network.forward(spec, params, window, masks)
            up = mse_loss(lo_pred, target)
            flat[j] = keep - epsilon
            lo_pred, _ = network.forward(spec, params, window, masks)
            down = mse_loss(lo_pred, target)
            flat[j] = keep
            numeric = (up - down) / (2.0 * epsilon)
            err = abs(a_flat[j] - numeric) / max(abs(a_flat[j]), abs(numeric), 1e-12)
            worst = max(worst, err)
    return worst
