"""Double-precision functional reference for the recurrent cells.

Evaluates the same cell equations as the fixed-point core but in float64
with exact sigmoid/tanh; this is the ground truth for every fixed-point
accuracy bound.  Parameters can be built from real-valued arrays directly
or derived from quantized layer parameters (so the comparison sees exactly
the values the hardware sees).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fixedpoint as fp
from .lstm_core import GATE_ORDERS, DimensionMismatch, LayerParams
from .nonlinear import sigmoid_exact, tanh_exact


@dataclass(frozen=True)
class FloatCellParams:
    """Per-gate (w_x, w_h, b) float64 triples in the canonical gate order."""

    cell_type: str
    gates: tuple  # of (w_x, w_h, b) float arrays

    def __post_init__(self):
        order = GATE_ORDERS.get(self.cell_type)
        if order is None:
            raise ValueError(f"unknown cell type {self.cell_type!r}")
        if len(self.gates) != len(order):
            raise DimensionMismatch(
                f"{self.cell_type} needs {len(order)} gates, got {len(self.gates)}"
            )
        for w_x, w_h, b in self.gates:
            if not (np.all(np.isfinite(w_x)) and np.all(np.isfinite(w_h)) and np.all(np.isfinite(b))):
                raise ValueError("non-finite parameter")

    @classmethod
    def from_quantized(cls, params: LayerParams) -> "FloatCellParams":
        gates = tuple(
            (fp.to_real(g.w_x.astype(np.int64)), fp.to_real(g.w_h.astype(np.int64)), fp.to_real(g.b.astype(np.int64)))
            for g in params.gates
        )
        return cls(params.cell_type, gates)


def _pre(gate, x, h):
    w_x, w_h, b = gate
    if w_x.shape[1] != len(x) or w_h.shape[1] != len(h):
        raise DimensionMismatch(
            f"oracle gate expects ({w_x.shape[1]},)/({w_h.shape[1]},) inputs, "
            f"got ({len(x)},)/({len(h)},)"
        )
    return w_x @ x + w_h @ h + b


def float_lstm_step(x, h_prev, c_prev, params: FloatCellParams):
    if params.cell_type != "LSTM":
        raise DimensionMismatch(f"float_lstm_step on {params.cell_type} params")
    gi, gf, go, gc = params.gates
    i = sigmoid_exact(_pre(gi, x, h_prev))
    f = sigmoid_exact(_pre(gf, x, h_prev))
    o = sigmoid_exact(_pre(go, x, h_prev))
    g = tanh_exact(_pre(gc, x, h_prev))
    c_t = f * c_prev + i * g
    h_t = o * tanh_exact(c_t)
    return h_t, c_t


def float_gru_step(x, h_prev, params: FloatCellParams):
    if params.cell_type != "GRU":
        raise DimensionMismatch(f"float_gru_step on {params.cell_type} params")
    gz, gr, gc = params.gates
    z = sigmoid_exact(_pre(gz, x, h_prev))
    r = sigmoid_exact(_pre(gr, x, h_prev))
    w_x, w_h, b = gc
    h_tilde = tanh_exact(w_x @ x + b + r * (w_h @ h_prev))
    return (1.0 - z) * h_prev + z * h_tilde


def float_vanilla_step(x, h_prev, params: FloatCellParams):
    if params.cell_type != "Vanilla":
        raise DimensionMismatch(f"float_vanilla_step on {params.cell_type} params")
    (gg,) = params.gates
    return tanh_exact(_pre(gg, x, h_prev))


def float_cell_step(x, h_prev, c_prev, params: FloatCellParams):
    """Dispatch on cell type; (h_t, c_t) with c_t=None for GRU/Vanilla."""
    if params.cell_type == "LSTM":
        return float_lstm_step(x, h_prev, c_prev, params)
    if params.cell_type == "GRU":
        return float_gru_step(x, h_prev, params), None
    return float_vanilla_step(x, h_prev, params), None
