"""LSTM cells, stacked and bidirectional sequence layers, dense head.

Cell recurrence (all products entrywise except the matrix terms)::

    i = σ(W_i x + U_i h + b_i)      f = σ(W_f x + U_f h + b_f)
    g = tanh(W_g x + U_g h + b_g)   o = σ(W_o x + U_o h + b_o)
    c_t = f ⊙ c_prev + i ⊙ g        h_t = o ⊙ tanh(c_t)

Every window starts from h₀ = c₀ = 0. A stacked model feeds each layer's
full hidden sequence to the next and reads h_T of the last layer. A
bidirectional model runs a second stack over the time-reversed window and
concatenates the two final states. The dense head emits raw logits;
softmax lives in :mod:`lstm_ids.nn.loss`.

Batches are (batch × timesteps × features) arrays. Parameters are
read-only during a pass, so passes over distinct batches may run on
concurrent threads.

Parameter traversal order (used by the optimizer, gradient checks and
the model file): for each forward layer then each backward layer
``W_i W_f W_g W_o U_i U_f U_g U_o b_i b_f b_g b_o``; then ``dense_w``,
``dense_b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from lstm_ids.config import ModelConfig
from lstm_ids.exceptions import ShapeError
from lstm_ids.nn.linalg import matmul, sigmoid, tanh

GATES = ("i", "f", "g", "o")
FORGET_BIAS = 1.0


@dataclass(eq=False)
class LstmCellParams:
    W_i: np.ndarray
    W_f: np.ndarray
    W_g: np.ndarray
    W_o: np.ndarray
    U_i: np.ndarray
    U_f: np.ndarray
    U_g: np.ndarray
    U_o: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_g: np.ndarray
    b_o: np.ndarray

    @property
    def hidden(self) -> int:
        return self.W_i.shape[0]

    @property
    def input(self) -> int:
        return self.W_i.shape[1]

    def arrays(self) -> List[np.ndarray]:
        return [getattr(self, f"{kind}_{gate}")
                for kind in ("W", "U", "b") for gate in GATES]

    def stacked(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Gate blocks stacked in i, f, g, o order: W (4h×in), U (4h×h), b (4h)."""
        return (np.concatenate([self.W_i, self.W_f, self.W_g, self.W_o]),
                np.concatenate([self.U_i, self.U_f, self.U_g, self.U_o]),
                np.concatenate([self.b_i, self.b_f, self.b_g, self.b_o]))

    def validate(self) -> None:
        hidden, width = self.hidden, self.input
        if hidden < 1 or width < 1:
            raise ShapeError(f"LSTM cell needs hidden, input >= 1, got {hidden}, {width}")
        for gate in GATES:
            expected = {"W": (hidden, width), "U": (hidden, hidden), "b": (hidden,)}
            for kind, shape in expected.items():
                actual = getattr(self, f"{kind}_{gate}").shape
                if actual != shape:
                    raise ShapeError(
                        f"{kind}_{gate} has shape {actual}, expected {shape}")

    @classmethod
    def zeros(cls, hidden: int, width: int) -> "LstmCellParams":
        blocks = {}
        for gate in GATES:
            blocks[f"W_{gate}"] = np.zeros((hidden, width))
            blocks[f"U_{gate}"] = np.zeros((hidden, hidden))
            blocks[f"b_{gate}"] = np.zeros(hidden)
        return cls(**blocks)

    @classmethod
    def from_stacked(cls, W: np.ndarray, U: np.ndarray, b: np.ndarray) -> "LstmCellParams":
        blocks = {}
        for kind, stacked in (("W", W), ("U", U), ("b", b)):
            for gate, part in zip(GATES, np.split(stacked, 4)):
                blocks[f"{kind}_{gate}"] = np.ascontiguousarray(part)
        return cls(**blocks)


@dataclass(eq=False)
class LstmParams:
    layers: List[LstmCellParams]
    dense_w: np.ndarray                 # classes × final width
    dense_b: np.ndarray                 # classes
    backward_layers: Optional[List[LstmCellParams]] = None

    @property
    def bidirectional(self) -> bool:
        return self.backward_layers is not None

    @property
    def input_width(self) -> int:
        return self.layers[0].input

    @property
    def num_classes(self) -> int:
        return self.dense_w.shape[0]

    @property
    def final_width(self) -> int:
        width = self.layers[-1].hidden
        return 2 * width if self.bidirectional else width

    def all_layers(self) -> List[LstmCellParams]:
        return list(self.layers) + list(self.backward_layers or [])

    def arrays(self) -> List[np.ndarray]:
        """Every parameter array, in traversal order (live references)."""
        out = []
        for layer in self.all_layers():
            out.extend(layer.arrays())
        out.extend([self.dense_w, self.dense_b])
        return out

    def layer_shapes(self) -> List[Tuple[int, int]]:
        """(input, hidden) per forward layer."""
        return [(layer.input, layer.hidden) for layer in self.layers]

    def validate(self) -> None:
        if not self.layers:
            raise ShapeError("LSTM model needs at least one layer")
        for stack in filter(None, (self.layers, self.backward_layers)):
            for k, layer in enumerate(stack):
                layer.validate()
                if k and layer.input != stack[k - 1].hidden:
                    raise ShapeError(
                        f"Layer {k} input width {layer.input} does not match "
                        f"layer {k - 1} hidden width {stack[k - 1].hidden}")
        if self.backward_layers is not None:
            mirrored = [(c.input, c.hidden) for c in self.backward_layers]
            if mirrored != self.layer_shapes():
                raise ShapeError(
                    f"Backward layers {mirrored} do not mirror forward layers "
                    f"{self.layer_shapes()}")
        if self.dense_w.ndim != 2 or self.dense_w.shape[1] != self.final_width:
            raise ShapeError(
                f"dense_w has shape {self.dense_w.shape}, expected "
                f"(classes, {self.final_width})")
        if self.dense_b.shape != (self.dense_w.shape[0],):
            raise ShapeError(
                f"dense_b has shape {self.dense_b.shape}, expected "
                f"({self.dense_w.shape[0]},)")

    def zeros_like(self) -> "LstmParams":
        return self.from_arrays([np.zeros_like(a) for a in self.arrays()])

    def copy(self) -> "LstmParams":
        return self.from_arrays(self.arrays())

    def from_arrays(self, arrays: List[np.ndarray]) -> "LstmParams":
        """A new parameter set shaped like this one, filled from ``arrays``."""
        expected = self.arrays()
        if len(arrays) != len(expected):
            raise ShapeError(
                f"Expected {len(expected)} parameter arrays, got {len(arrays)}")
        for k, (new, old) in enumerate(zip(arrays, expected)):
            if np.shape(new) != old.shape:
                raise ShapeError(
                    f"Parameter array {k} has shape {np.shape(new)}, expected {old.shape}")
        it = iter(np.array(a, dtype=np.float64) for a in arrays)

        def rebuild(stack):
            return [LstmCellParams(*(next(it) for _ in range(12))) for _ in stack]

        layers = rebuild(self.layers)
        backward = rebuild(self.backward_layers) if self.bidirectional else None
        dense_w = next(it)
        dense_b = next(it)
        return LstmParams(layers, dense_w, dense_b, backward)


# Gradients share the parameter layout.
ParamGrads = LstmParams


# ── Initialization ───────────────────────────────────────────────────

def glorot_limit(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = glorot_limit(cols, rows)
    return rng.uniform(-limit, limit, size=(rows, cols))


def _init_cell(rng: np.random.Generator, width: int, hidden: int) -> LstmCellParams:
    blocks = {}
    for gate in GATES:
        blocks[f"W_{gate}"] = _glorot(rng, hidden, width)
    for gate in GATES:
        blocks[f"U_{gate}"] = _glorot(rng, hidden, hidden)
    for gate in GATES:
        blocks[f"b_{gate}"] = np.zeros(hidden)
    blocks["b_f"][:] = FORGET_BIAS
    return LstmCellParams(**blocks)


def _init_stack(rng: np.random.Generator, width: int,
                layer_cells) -> List[LstmCellParams]:
    stack = []
    for hidden in layer_cells:
        stack.append(_init_cell(rng, width, int(hidden)))
        width = int(hidden)
    return stack


def init_params(config: ModelConfig, input_width: int, num_classes: int,
                seed: Optional[int] = None) -> LstmParams:
    """Glorot-uniform weights, zero biases except forget gates at 1.0.

    Deterministic for a fixed seed (``config.seed`` when not given).
    """
    config.ensure_valid()
    if input_width < 1 or num_classes < 1:
        raise ShapeError(
            f"input_width and num_classes must be >= 1, got {input_width}, {num_classes}")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    layers = _init_stack(rng, input_width, config.layer_cells)
    backward = _init_stack(rng, input_width, config.layer_cells) if config.bidirectional else None
    final = config.layer_cells[-1] * (2 if config.bidirectional else 1)
    dense_w = _glorot(rng, num_classes, final)
    dense_b = np.zeros(num_classes)
    return LstmParams(layers, dense_w, dense_b, backward)


def zero_params(config: ModelConfig, input_width: int, num_classes: int) -> LstmParams:
    """All-zero parameters with the layout ``config`` implies."""
    def stack():
        widths = (input_width,) + tuple(config.layer_cells[:-1])
        return [LstmCellParams.zeros(int(h), int(w))
                for w, h in zip(widths, config.layer_cells)]

    final = config.layer_cells[-1] * (2 if config.bidirectional else 1)
    return LstmParams(stack(), np.zeros((num_classes, final)), np.zeros(num_classes),
                      stack() if config.bidirectional else None)


# ── Single cell ──────────────────────────────────────────────────────

@dataclass(eq=False)
class CellCache:
    """Activations of one cell step, enough to run it backward."""
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray


def _cell_forward(W, U, b, x, h_prev, c_prev):
    hidden = h_prev.shape[1]
    pre = matmul(x, W.T) + matmul(h_prev, U.T) + b
    i = sigmoid(pre[:, :hidden])
    f = sigmoid(pre[:, hidden:2 * hidden])
    g = tanh(pre[:, 2 * hidden:3 * hidden])
    o = sigmoid(pre[:, 3 * hidden:])
    c = f * c_prev + i * g
    tanh_c = tanh(c)
    h = o * tanh_c
    return h, c, CellCache(x, h_prev, c_prev, i, f, g, o, c, tanh_c)


def _cell_backward(W, U, cache: CellCache, dh, dc):
    """Gradients of one step given dL/dh_t and dL/dc_t (from later steps)."""
    dc_total = dc + dh * cache.o * (1.0 - cache.tanh_c ** 2)
    da = np.concatenate([
        dc_total * cache.g * cache.i * (1.0 - cache.i),
        dc_total * cache.c_prev * cache.f * (1.0 - cache.f),
        dc_total * cache.i * (1.0 - cache.g ** 2),
        dh * cache.tanh_c * cache.o * (1.0 - cache.o),
    ], axis=1)
    dW = matmul(da.T, cache.x)
    dU = matmul(da.T, cache.h_prev)
    db = da.sum(axis=0)
    dx = matmul(da, W)
    dh_prev = matmul(da, U)
    dc_prev = dc_total * cache.f
    return dx, dh_prev, dc_prev, dW, dU, db


def _as_batch(a, width: int, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(a, dtype=np.float64))
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ShapeError(f"{name} has shape {np.shape(a)}, expected width {width}")
    return arr


def cell_step(p: LstmCellParams, x_t, h_prev, c_prev):
    """One LSTM step. Vectors in give vectors out; (batch × width) also works.

    Returns ``(h_t, c_t, cache)``.
    """
    single = np.ndim(x_t) == 1
    x = _as_batch(x_t, p.input, "x_t")
    h = _as_batch(h_prev, p.hidden, "h_prev")
    c = _as_batch(c_prev, p.hidden, "c_prev")
    if not x.shape[0] == h.shape[0] == c.shape[0]:
        raise ShapeError(
            f"Batch sizes differ: x_t {x.shape[0]}, h_prev {h.shape[0]}, "
            f"c_prev {c.shape[0]}")
    W, U, b = p.stacked()
    h_t, c_t, cache = _cell_forward(W, U, b, x, h, c)
    if single:
        return h_t[0], c_t[0], cache
    return h_t, c_t, cache


def cell_backward(p: LstmCellParams, cache: CellCache, dh, dc):
    """Backward through one step: ``(dx, dh_prev, dc_prev, cell_grads)``."""
    W, U, _ = p.stacked()
    dh = np.atleast_2d(np.asarray(dh, dtype=np.float64))
    dc = np.atleast_2d(np.asarray(dc, dtype=np.float64))
    dx, dh_prev, dc_prev, dW, dU, db = _cell_backward(W, U, cache, dh, dc)
    return dx, dh_prev, dc_prev, LstmCellParams.from_stacked(dW, dU, db)


# ── Sequences ────────────────────────────────────────────────────────

@dataclass(eq=False)
class LayerTrace:
    caches: List[CellCache]
    outputs: np.ndarray                 # batch × timesteps × hidden


@dataclass(eq=False)
class ForwardTrace:
    window: np.ndarray
    forward: List[LayerTrace]
    representation: np.ndarray         # batch × final width
    backward: Optional[List[LayerTrace]] = None

    @property
    def timesteps(self) -> int:
        return self.window.shape[1]


def _run_stack(stack: List[LstmCellParams], seq: np.ndarray) -> List[LayerTrace]:
    batch, steps, _ = seq.shape
    traces = []
    for layer in stack:
        W, U, b = layer.stacked()
        h = np.zeros((batch, layer.hidden))
        c = np.zeros((batch, layer.hidden))
        outputs = np.empty((batch, steps, layer.hidden))
        caches = []
        for t in range(steps):
            h, c, cache = _cell_forward(W, U, b, seq[:, t, :], h, c)
            outputs[:, t, :] = h
            caches.append(cache)
        traces.append(LayerTrace(caches, outputs))
        seq = outputs
    return traces


def _as_window(window, width: int) -> np.ndarray:
    arr = np.asarray(window, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(
            f"Window batch must be (batch, timesteps, features), got shape {arr.shape}")
    if arr.shape[2] != width:
        raise ShapeError(
            f"Window feature width {arr.shape[2]} does not match model input "
            f"width {width}")
    return arr


def forward_sequence(p: LstmParams, window) -> Tuple[np.ndarray, ForwardTrace]:
    """Logits (batch × classes) for a window batch, plus the trace for BPTT."""
    seq = _as_window(window, p.input_width)
    forward = _run_stack(p.layers, seq)
    rep = forward[-1].outputs[:, -1, :]
    backward = None
    if p.bidirectional:
        backward = _run_stack(p.backward_layers, seq[:, ::-1, :])
        rep = np.concatenate([rep, backward[-1].outputs[:, -1, :]], axis=1)
    logits = matmul(rep, p.dense_w.T) + p.dense_b
    return logits, ForwardTrace(seq, forward, rep, backward)


def _backprop_stack(stack: List[LstmCellParams], traces: List[LayerTrace],
                    dh_final: np.ndarray) -> List[LstmCellParams]:
    batch, steps, _ = traces[-1].outputs.shape
    d_out = np.zeros_like(traces[-1].outputs)
    d_out[:, -1, :] = dh_final
    grads: List[Optional[LstmCellParams]] = [None] * len(stack)
    for k in reversed(range(len(stack))):
        layer, trace = stack[k], traces[k]
        W, U, _ = layer.stacked()
        dW = np.zeros_like(W)
        dU = np.zeros_like(U)
        db = np.zeros(4 * layer.hidden)
        dh_next = np.zeros((batch, layer.hidden))
        dc_next = np.zeros((batch, layer.hidden))
        d_in = np.empty((batch, steps, layer.input))
        for t in reversed(range(steps)):
            dx, dh_next, dc_next, gW, gU, gb = _cell_backward(
                W, U, trace.caches[t], d_out[:, t, :] + dh_next, dc_next)
            dW += gW
            dU += gU
            db += gb
            d_in[:, t, :] = dx
        grads[k] = LstmCellParams.from_stacked(dW, dU, db)
        d_out = d_in
    return grads


def _check_trace(p: LstmParams, trace: ForwardTrace) -> None:
    def widths(traces):
        return [t.outputs.shape[2] for t in traces]

    hidden = [layer.hidden for layer in p.layers]
    mismatch = widths(trace.forward) != hidden
    if p.bidirectional:
        mismatch |= trace.backward is None or widths(trace.backward) != hidden
    else:
        mismatch |= trace.backward is not None
    if mismatch or trace.representation.shape[1] != p.final_width:
        raise ShapeError("Forward trace does not match the parameter set")


def backward_sequence(p: LstmParams, trace: ForwardTrace,
                      dlogits: np.ndarray) -> ParamGrads:
    """Exact BPTT gradients for every parameter, seeded by dL/dlogits."""
    _check_trace(p, trace)
    dlogits = np.asarray(dlogits, dtype=np.float64)
    expected = (trace.representation.shape[0], p.num_classes)
    if dlogits.shape != expected:
        raise ShapeError(f"dlogits has shape {dlogits.shape}, expected {expected}")

    rep = trace.representation
    drep = matmul(dlogits, p.dense_w)
    width = p.layers[-1].hidden
    layers = _backprop_stack(p.layers, trace.forward, drep[:, :width])
    backward = None
    if p.bidirectional:
        backward = _backprop_stack(p.backward_layers, trace.backward, drep[:, width:])
    return LstmParams(
        layers=layers,
        dense_w=matmul(dlogits.T, rep),
        dense_b=dlogits.sum(axis=0),
        backward_layers=backward,
    )
