"""Parameter containers for the three recurrent architectures.

Per layer, the four gate blocks (input i, forget f, output o, candidate c)
are stacked along the first axis: U is (4H x In), W is (4H x H), b is (4H,).
Initialization draws every tensor uniform on [-1/sqrt(fan_in), +1/sqrt(fan_in)]
(fan_in = the tensor's input width; H for recurrent weights and biases) in a
fixed documented order, so a seed fully determines the parameter space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from ..embedding import EmbeddingConfig
from ..numerics import Rng, init_uniform

GATES = ("i", "f", "o", "c")
VARIANTS = ("lstm", "bdlstm", "edlstm")
CELL_FORMULAS = ("standard", "paper_literal")

# Hidden-layer widths of the published topologies, per variant.
UNIVARIATE_LAYERS = {"lstm": (32, 32), "bdlstm": (32, 16), "edlstm": (32,)}
MULTIVARIATE_LAYERS = {"lstm": (32,), "bdlstm": (32,), "edlstm": (32,)}


@dataclass(frozen=True)
class ModelSpec:
    variant: str
    input_shape: tuple[int, int]          # (window length D, features F)
    layer_sizes: tuple[int, ...]
    output_shape: tuple[int, int] = (1, 4)
    dropout_rate: float = 0.2
    cell_formula: str = "standard"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.cell_formula not in CELL_FORMULAS:
            raise ValueError(f"unknown cell formula {self.cell_formula!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if min(self.input_shape) < 1 or min(self.output_shape) < 1:
            raise ValueError(f"bad shapes {self.input_shape} -> {self.output_shape}")
        if not self.layer_sizes or min(self.layer_sizes) < 1:
            raise ValueError(f"layer_sizes must be positive, got {self.layer_sizes}")
        if self.variant == "edlstm" and len(self.layer_sizes) != 1:
            raise ValueError("edlstm takes a single width (shared encoder/decoder)")
        if self.variant == "bdlstm" and len(self.layer_sizes) > 2:
            raise ValueError("bdlstm supports at most two recurrent layers")
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        object.__setattr__(self, "output_shape", tuple(self.output_shape))
        object.__setattr__(self, "layer_sizes", tuple(self.layer_sizes))

    @property
    def dimension(self) -> int:
        return self.input_shape[0]

    @property
    def features(self) -> int:
        return self.input_shape[1]

    @property
    def horizons(self) -> int:
        return self.output_shape[1]

    @property
    def literal_cell(self) -> bool:
        return self.cell_formula == "paper_literal"

    @classmethod
    def univariate(cls, variant: str, dimension: int = 6, horizons: int = 4,
                   dropout_rate: float = 0.2,
                   cell_formula: str = "standard") -> "ModelSpec":
        return cls(variant, (dimension, 1), UNIVARIATE_LAYERS[variant],
                   (1, horizons), dropout_rate, cell_formula)

    @classmethod
    def multivariate(cls, variant: str, features: int, dimension: int = 6,
                     horizons: int = 4, dropout_rate: float = 0.2,
                     cell_formula: str = "standard") -> "ModelSpec":
        return cls(variant, (dimension, features), MULTIVARIATE_LAYERS[variant],
                   (1, horizons), dropout_rate, cell_formula)

    def to_dict(self) -> dict:
        return {"variant": self.variant, "input_shape": list(self.input_shape),
                "layer_sizes": list(self.layer_sizes),
                "output_shape": list(self.output_shape),
                "dropout_rate": self.dropout_rate,
                "cell_formula": self.cell_formula}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(d["variant"], tuple(d["input_shape"]), tuple(d["layer_sizes"]),
                   tuple(d["output_shape"]), d["dropout_rate"], d["cell_formula"])


@dataclass
class LstmLayerParams:
    """One LSTM layer: stacked gate weights/biases, gate order (i, f, o, c)."""

    U: np.ndarray
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        hidden = self.W.shape[1]
        if self.U.shape[0] != 4 * hidden or self.W.shape != (4 * hidden, hidden) \
                or self.b.shape != (4 * hidden,):
            raise ValueError(
                f"inconsistent layer shapes U{self.U.shape} W{self.W.shape} "
                f"b{self.b.shape}")

    @property
    def hidden(self) -> int:
        return self.W.shape[1]

    @property
    def input_size(self) -> int:
        return self.U.shape[1]

    def gate(self, name: str):
        """(U_g, W_g, b_g) views for one of the gates 'i', 'f', 'o', 'c'."""
        k = GATES.index(name)
        h = self.hidden
        rows = slice(k * h, (k + 1) * h)
        return self.U[rows], self.W[rows], self.b[rows]

    @classmethod
    def init(cls, rng: Rng, input_size: int, hidden: int) -> "LstmLayerParams":
        # Draw order: U, then W, then b.
        u = init_uniform(rng, 4 * hidden, input_size, 1.0 / sqrt(input_size))
        w = init_uniform(rng, 4 * hidden, hidden, 1.0 / sqrt(hidden))
        b = rng.uniform(-1.0 / sqrt(hidden), 1.0 / sqrt(hidden), 4 * hidden)
        return cls(u, w, b)


@dataclass
class DenseParams:
    """Linear output head (no activation)."""

    W: np.ndarray
    b: np.ndarray

    @property
    def out_size(self) -> int:
        return self.W.shape[0]

    @classmethod
    def init(cls, rng: Rng, out_size: int, input_size: int) -> "DenseParams":
        bound = 1.0 / sqrt(input_size)
        return cls(init_uniform(rng, out_size, input_size, bound),
                   rng.uniform(-bound, bound, out_size))


class ModelParams:
    """All parameter blocks of one model, keyed by block name.

    Block layout per variant (creation order == draw order):
      lstm:   layer0, layer1, ..., head
      bdlstm: fwd (forward-time), bwd (backward-time), [layer1], head
      edlstm: encoder, decoder, head

    Every tensor is a view into one contiguous buffer (`flat`), which lets
    the optimizer update the whole model with a few vector operations.
    """

    def __init__(self, spec: ModelSpec, blocks: dict):
        self.spec = spec
        self.blocks = blocks
        self._consolidate()

    def _consolidate(self):
        tensors = self.tensors()
        self.flat = np.empty(sum(t.size for t in tensors.values()))
        self.slices: dict[str, tuple[slice, tuple]] = {}
        offset = 0
        for name, t in tensors.items():
            sl = slice(offset, offset + t.size)
            self.flat[sl] = t.ravel()
            self.slices[name] = (sl, t.shape)
            block_name, attr = name.rsplit(".", 1)
            setattr(self.blocks[block_name], attr,
                    self.flat[sl].reshape(t.shape))
            offset += t.size

    @classmethod
    def init(cls, spec: ModelSpec, rng: Rng) -> "ModelParams":
        d, f = spec.dimension, spec.features
        sizes = spec.layer_sizes
        blocks: dict = {}
        if spec.variant == "lstm":
            width = f
            for k, h in enumerate(sizes):
                blocks[f"layer{k}"] = LstmLayerParams.init(rng, width, h)
                width = h
            blocks["head"] = DenseParams.init(rng, spec.horizons, width)
        elif spec.variant == "bdlstm":
            h0 = sizes[0]
            blocks["fwd"] = LstmLayerParams.init(rng, f, h0)
            blocks["bwd"] = LstmLayerParams.init(rng, f, h0)
            width = 2 * h0
            if len(sizes) == 2:
                blocks["layer1"] = LstmLayerParams.init(rng, width, sizes[1])
                width = sizes[1]
            blocks["head"] = DenseParams.init(rng, spec.horizons, width)
        else:  # edlstm
            h = sizes[0]
            blocks["encoder"] = LstmLayerParams.init(rng, f, h)
            blocks["decoder"] = LstmLayerParams.init(rng, h, h)
            blocks["head"] = DenseParams.init(rng, 1, h)
        return cls(spec, blocks)

    def tensors(self) -> dict[str, np.ndarray]:
        """Flat name -> array view over every parameter tensor."""
        out: dict[str, np.ndarray] = {}
        for name, blk in self.blocks.items():
            if isinstance(blk, LstmLayerParams):
                out[f"{name}.U"] = blk.U
                out[f"{name}.W"] = blk.W
                out[f"{name}.b"] = blk.b
            else:
                out[f"{name}.W"] = blk.W
                out[f"{name}.b"] = blk.b
        return out

    @property
    def n_params(self) -> int:
        return self.flat.size

    def copy(self) -> "ModelParams":
        blocks = {}
        for name, blk in self.blocks.items():
            if isinstance(blk, LstmLayerParams):
                blocks[name] = LstmLayerParams(blk.U.copy(), blk.W.copy(), blk.b.copy())
            else:
                blocks[name] = DenseParams(blk.W.copy(), blk.b.copy())
        return ModelParams(self.spec, blocks)


def zero_gradients(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(t) for name, t in params.tensors().items()}


@dataclass
class Checkpoint:
    params: ModelParams
    scale: float
    embedding: EmbeddingConfig
    seed: int


def save_checkpoint(path, params: ModelParams, scale: float,
                    embedding: EmbeddingConfig, seed: int) -> None:
    """JSON checkpoint: spec round-trips bitwise, tensors to full precision."""
    doc = {
        "format": "seqcast-checkpoint-v1",
        "spec": params.spec.to_dict(),
        "scale": scale,
        "embedding": {"dimension": embedding.dimension, "lag": embedding.lag,
                      "horizons": embedding.horizons,
                      "contiguous": embedding.contiguous},
        "seed": seed,
        "tensors": {name: {"shape": list(t.shape), "data": t.ravel().tolist()}
                    for name, t in params.tensors().items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> Checkpoint:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "seqcast-checkpoint-v1":
        raise ValueError(f"{path}: not a seqcast checkpoint")
    spec = ModelSpec.from_dict(doc["spec"])
    params = ModelParams.init(spec, Rng(0))  # shapes only; overwritten below
    tensors = params.tensors()
    if set(tensors) != set(doc["tensors"]):
        raise ValueError(f"{path}: tensor set does not match spec "
                         f"{sorted(doc['tensors'])} vs {sorted(tensors)}")
    for name, entry in doc["tensors"].items():
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if arr.shape != tensors[name].shape:
            raise ValueError(f"{path}: tensor {name} has shape {arr.shape}, "
                             f"expected {tensors[name].shape}")
        tensors[name][...] = arr
    emb = EmbeddingConfig(**doc["embedding"])
    return Checkpoint(params, float(doc["scale"]), emb, int(doc["seed"]))
