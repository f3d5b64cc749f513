"""Forward and backward passes for the three architectures.

The per-layer time loops run in the selected kernel backend; this module
wires layers together, applies inverted dropout between them, runs the
linear head, and routes gradients back through the same graph.  Gradients
are exact reverse-mode derivatives of the mean-squared-error loss over the
MSA outputs, which the finite-difference suite checks end to end.

Dropout uses one binary mask per slot, scaled by 1/(1-rate) at train time
(inference is mask-free).  Mask slots per variant, for a (D x F) window:
  lstm:    one (D, H_k) mask per stacked layer output
  bdlstm:  (D, 2*H0) on the concatenated sequence, then (D, H1) if a second
           layer exists; with no second layer a (2*H0,) mask on the final
           representation
  edlstm:  (H,) on the encoder context vector, (MSA, H) on the decoder
           output sequence
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..numerics import Rng, matvec, sigmoid, tanh_act
from .params import DenseParams, LstmLayerParams, ModelParams, ModelSpec


@dataclass
class LstmState:
    """Hidden activation and cell memory; both start at zero."""

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden: int) -> "LstmState":
        return cls(np.zeros(hidden), np.zeros(hidden))


def lstm_cell_forward(x: np.ndarray, prev: LstmState, p: LstmLayerParams,
                      formula: str = "standard") -> LstmState:
    """One gate update: i, f, o sigmoids, tanh candidate, cell and hidden."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.input_size,):
        raise ValueError(f"input width {x.shape} does not match layer "
                         f"input size {p.input_size}")
    ui, wi, bi = p.gate("i")
    uf, wf, bf = p.gate("f")
    uo, wo, bo = p.gate("o")
    uc, wc, bc = p.gate("c")
    i = sigmoid(matvec(ui, x) + matvec(wi, prev.h) + bi)
    f = sigmoid(matvec(uf, x) + matvec(wf, prev.h) + bf)
    o = sigmoid(matvec(uo, x) + matvec(wo, prev.h) + bo)
    ctilde = tanh_act(matvec(uc, x) + matvec(wc, prev.h) + bc)
    c = f * prev.c + i * ctilde
    if formula == "paper_literal":
        c = sigmoid(c)
    elif formula != "standard":
        raise ValueError(f"unknown cell formula {formula!r}")
    return LstmState(h=tanh_act(c) * o, c=c)


def draw_dropout_masks(spec: ModelSpec, rng: Rng) -> list[np.ndarray] | None:
    """Fresh binary masks for one training sample; None when rate is zero.

    One uniform draw per mask element, slot order as listed above,
    row-major within a slot.
    """
    rate = spec.dropout_rate
    if rate == 0.0:
        return None
    shapes = mask_shapes(spec)
    flat = rng.random(sum(math.prod(s) for s in shapes)) >= rate
    masks = []
    offset = 0
    for shape in shapes:
        n = math.prod(shape)
        masks.append(flat[offset:offset + n].reshape(shape))
        offset += n
    return masks


def mask_shapes(spec: ModelSpec) -> list[tuple]:
    d, msa = spec.dimension, spec.horizons
    sizes = spec.layer_sizes
    if spec.variant == "lstm":
        return [(d, h) for h in sizes]
    if spec.variant == "bdlstm":
        if len(sizes) == 2:
            return [(d, 2 * sizes[0]), (d, sizes[1])]
        return [(2 * sizes[0],)]
    return [(sizes[0],), (msa, sizes[0])]


def _cc(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _run_layer(layer: LstmLayerParams, x_seq: np.ndarray, literal: bool,
               h0: np.ndarray | None = None, c0: np.ndarray | None = None):
    h0 = np.zeros(layer.hidden) if h0 is None else _cc(h0)
    c0 = np.zeros(layer.hidden) if c0 is None else _cc(c0)
    x = _cc(x_seq)
    hseq, cseq, tcseq, gates = kernels.lstm_layer_forward(
        x, layer.U, layer.W, layer.b, h0, c0, literal)
    return {"x": x, "h0": h0, "c0": c0, "H": hseq, "C": cseq, "TC": tcseq,
            "G": gates, "layer": layer}


def _layer_backward(run: dict, d_hseq: np.ndarray, literal: bool,
                    dh_last=None, dc_last=None):
    layer = run["layer"]
    return kernels.lstm_layer_backward(
        run["x"], layer.U, layer.W, run["h0"], run["c0"], literal,
        run["H"], run["C"], run["TC"], run["G"], _cc(d_hseq),
        dh_last, dc_last)


def _apply_mask(seq: np.ndarray, mask: np.ndarray | None, rate: float):
    if mask is None:
        return seq
    return seq * mask / (1.0 - rate)


def forward(spec: ModelSpec, params: ModelParams, window: np.ndarray,
            masks: list[np.ndarray] | None = None):
    """Predict an MSA vector from one (D x F) window; returns (pred, cache).

    `masks` enables training-mode dropout; None runs inference.
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 1:
        window = window[:, None]
    if window.shape != spec.input_shape:
        raise ValueError(f"window shape {window.shape} does not match "
                         f"spec input {spec.input_shape}")
    if masks is not None:
        expect = mask_shapes(spec)
        got = [m.shape for m in masks]
        if got != [tuple(s) for s in expect]:
            raise ValueError(f"dropout mask shapes {got} != expected {expect}")
    lit = spec.literal_cell
    rate = spec.dropout_rate
    cache: dict = {"window": window, "masks": masks}

    if spec.variant == "lstm":
        seq = window
        runs = []
        for k, _ in enumerate(spec.layer_sizes):
            run = _run_layer(params.blocks[f"layer{k}"], seq, lit)
            runs.append(run)
            seq = _apply_mask(run["H"], masks[k] if masks else None, rate)
            run["out"] = seq
        head_in = seq[-1]
        cache["runs"] = runs

    elif spec.variant == "bdlstm":
        run_f = _run_layer(params.blocks["fwd"], window, lit)
        run_b = _run_layer(params.blocks["bwd"], window[::-1], lit)
        cache["runs"] = [run_f, run_b]
        if len(spec.layer_sizes) == 2:
            concat = np.hstack([run_f["H"], run_b["H"][::-1]])
            seq = _apply_mask(concat, masks[0] if masks else None, rate)
            run2 = _run_layer(params.blocks["layer1"], seq, lit)
            out2 = _apply_mask(run2["H"], masks[1] if masks else None, rate)
            run2["out"] = out2
            cache["runs"].append(run2)
            head_in = out2[-1]
        else:
            rep = np.concatenate([run_f["H"][-1], run_b["H"][-1]])
            head_in = _apply_mask(rep, masks[0] if masks else None, rate)

    else:  # edlstm: repeated-context decoding from the encoder's final state
        enc = _run_layer(params.blocks["encoder"], window, lit)
        ctx = _apply_mask(enc["H"][-1], masks[0] if masks else None, rate)
        dec_in = np.tile(ctx, (spec.horizons, 1))
        dec = _run_layer(params.blocks["decoder"], dec_in, lit,
                         h0=ctx, c0=enc["C"][-1])
        dec_out = _apply_mask(dec["H"], masks[1] if masks else None, rate)
        head = params.blocks["head"]
        pred = dec_out @ head.W[0] + head.b[0]
        cache.update(enc=enc, dec=dec, dec_out=dec_out, head_in=dec_out,
                     pred=pred)
        return pred, cache

    head = params.blocks["head"]
    pred = matvec(head.W, head_in) + head.b
    cache.update(head_in=head_in, pred=pred)
    return pred, cache


def backward(spec: ModelSpec, params: ModelParams, cache: dict,
             target: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of mean((pred - target)^2) for every parameter tensor."""
    target = np.asarray(target, dtype=np.float64)
    pred = cache["pred"]
    if target.shape != pred.shape:
        raise ValueError(f"target shape {target.shape} != prediction {pred.shape}")
    msa = spec.horizons
    dpred = 2.0 * (pred - target) / msa
    masks = cache["masks"]
    rate = spec.dropout_rate
    lit = spec.literal_cell
    head: DenseParams = params.blocks["head"]
    grads: dict[str, np.ndarray] = {}

    def put(name, du, dw, db):
        grads[f"{name}.U"], grads[f"{name}.W"], grads[f"{name}.b"] = du, dw, db

    if spec.variant == "edlstm":
        dec_out = cache["dec_out"]
        grads["head.W"] = (dpred[:, None] * dec_out).sum(axis=0)[None, :]
        grads["head.b"] = np.array([dpred.sum()])
        d_decout = np.outer(dpred, head.W[0])
        d_hdec = _apply_mask(d_decout, masks[1] if masks else None, rate)
        dxdec, du, dw, db, dh0, dc0 = _layer_backward(
            cache["dec"], d_hdec, lit)
        put("decoder", du, dw, db)
        dctx = dxdec.sum(axis=0) + dh0
        dctx = _apply_mask(dctx, masks[0] if masks else None, rate)
        enc = cache["enc"]
        d_henc = np.zeros_like(enc["H"])
        d_henc[-1] = dctx
        _, du, dw, db, _, _ = _layer_backward(enc, d_henc, lit, dc_last=dc0)
        put("encoder", du, dw, db)
        return grads

    head_in = cache["head_in"]
    grads["head.W"] = np.outer(dpred, head_in)
    grads["head.b"] = dpred
    d_head_in = head.W.T @ dpred

    if spec.variant == "lstm":
        runs = cache["runs"]
        d_seq = np.zeros_like(runs[-1]["out"])
        d_seq[-1] = d_head_in
        for k in range(len(runs) - 1, -1, -1):
            d_h = _apply_mask(d_seq, masks[k] if masks else None, rate)
            d_seq, du, dw, db, _, _ = _layer_backward(runs[k], d_h, lit)
            put(f"layer{k}", du, dw, db)
        return grads

    # bdlstm
    run_f, run_b = cache["runs"][0], cache["runs"][1]
    h0 = run_f["layer"].hidden
    if len(spec.layer_sizes) == 2:
        run2 = cache["runs"][2]
        d_out2 = np.zeros_like(run2["out"])
        d_out2[-1] = d_head_in
        d_h2 = _apply_mask(d_out2, masks[1] if masks else None, rate)
        d_concat, du, dw, db, _, _ = _layer_backward(run2, d_h2, lit)
        put("layer1", du, dw, db)
        d_concat = _apply_mask(d_concat, masks[0] if masks else None, rate)
        d_hf = d_concat[:, :h0]
        d_hb = d_concat[:, h0:][::-1]
    else:
        d_rep = _apply_mask(d_head_in, masks[0] if masks else None, rate)
        d_hf = np.zeros_like(run_f["H"])
        d_hb = np.zeros_like(run_b["H"])
        d_hf[-1] = d_rep[:h0]
        d_hb[-1] = d_rep[h0:]
    _, du, dw, db, _, _ = _layer_backward(run_f, d_hf, lit)
    put("fwd", du, dw, db)
    _, du, dw, db, _, _ = _layer_backward(run_b, d_hb, lit)
    put("bwd", du, dw, db)
    return grads


def lstm_forward(spec, params, window, masks=None):
    assert spec.variant == "lstm"
    return forward(spec, params, window, masks)


def bdlstm_forward(spec, params, window, masks=None):
    assert spec.variant == "bdlstm"
    return forward(spec, params, window, masks)


def edlstm_forward(spec, params, window, masks=None):
    assert spec.variant == "edlstm"
    return forward(spec, params, window, masks)


def predict(spec: ModelSpec, params: ModelParams, window: np.ndarray) -> np.ndarray:
    """Inference-mode prediction (dropout off)."""
    pred, _ = forward(spec, params, window, masks=None)
    return pred


def predict_batch(spec: ModelSpec, params: ModelParams,
                  windows: np.ndarray) -> np.ndarray:
    return np.stack([predict(spec, params, w) for w in windows])
