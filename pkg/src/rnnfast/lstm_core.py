"""Functional and structural models of the recurrent compute units.

The functional side evaluates LSTM / GRU / Vanilla cells exactly as the
hardware partitions them: per-gate dot products accumulate the input path,
the recurrent path and the bias into one wide accumulator, narrow once to
Q8.8, then run the elementwise output stage through the configured
activation hardware.  Layers are evaluated vectorized (one call per
timestep, numpy int arrays of raw Q8.8 values).

The structural side models the per-gate processing element's MAC pipeline
(48 stages, 2 cycles each, one issue per 2 cycles), the cross-unit
aggregation chain (even-indexed units consume, odd-indexed forward, the
leftmost unit finishes), and a radix-4 Booth multiplier used as a numeric
equivalence check against the plain Q8.8 multiply.

GRU equations follow the standard update/reset/candidate cell with the
reset gate applied to the already-accumulated recurrent product,
h~ = tanh(Wx.x + b + r (.) (Wh.h)), the form this weight-stationary pipeline
can stream; h_t = (1-z) (.) h_prev + z (.) h~.  Vanilla neurons are
h_t = tanh(Wx.x + Wh.h + b).  When a neuron spans several units, partial
dot products are exchanged unrounded (wide) along the aggregation chain so
the split result is bit-identical to the monolithic evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fixedpoint as fp
from .nonlinear import activation_fns

LSTM_GATES = ("i", "f", "o", "c")
GRU_GATES = ("z", "r", "c")
VANILLA_GATES = ("g",)

GATE_ORDERS = {"LSTM": LSTM_GATES, "GRU": GRU_GATES, "Vanilla": VANILLA_GATES}

# Active MAC streams per unit: LSTM runs 4 gates x (input + recurrent) paths;
# GRU powers two full PEs plus two half-active ones (one MAC each); Vanilla
# uses a single PE per neuron.
MAC_STREAMS = {"LSTM": 8, "GRU": 6, "Vanilla": 2}

# Output-stage activation waves: gate activations, then (LSTM/GRU) a second
# wave that depends on them (tanh of the cell state / of the candidate).
ACT_STAGES = {"LSTM": 2, "GRU": 2, "Vanilla": 1}

# Nonlinear evaluations per neuron per timestep.
NONLINEAR_EVALS = {"LSTM": 5, "GRU": 3, "Vanilla": 1}


class DimensionMismatch(ValueError):
    """Shapes of weights/inputs disagree with the layer contract."""


class IssueTooSoon(RuntimeError):
    """A MAC was issued before the pipeline's 2-cycle initiation interval."""


@dataclass(frozen=True)
class GateWeights:
    """One gate's parameters for a whole layer, raw Q8.8.

    w_x: (neurons, inputs), w_h: (neurons, hidden), b: (neurons,).
    """

    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.w_x.ndim != 2 or self.w_h.ndim != 2 or self.b.ndim != 1:
            raise DimensionMismatch("w_x/w_h must be 2-D, b 1-D")
        m = self.w_x.shape[0]
        if self.w_h.shape[0] != m or self.b.shape[0] != m:
            raise DimensionMismatch("gate weight row counts disagree")

    @property
    def neurons(self) -> int:
        return self.w_x.shape[0]

    @property
    def inputs(self) -> int:
        return self.w_x.shape[1]

    @property
    def hidden(self) -> int:
        return self.w_h.shape[1]


@dataclass(frozen=True)
class LayerParams:
    """All gates of one layer, in the cell type's canonical gate order."""

    cell_type: str
    gates: tuple

    def __post_init__(self):
        order = GATE_ORDERS.get(self.cell_type)
        if order is None:
            raise ValueError(f"unknown cell type {self.cell_type!r}")
        if len(self.gates) != len(order):
            raise DimensionMismatch(
                f"{self.cell_type} needs {len(order)} gates, got {len(self.gates)}"
            )
        first = self.gates[0]
        for g in self.gates:
            if (g.neurons, g.inputs, g.hidden) != (first.neurons, first.inputs, first.hidden):
                raise DimensionMismatch("gate shapes disagree within the layer")

    @property
    def neurons(self) -> int:
        return self.gates[0].neurons

    @property
    def inputs(self) -> int:
        return self.gates[0].inputs


def _check_vec(name, v, n):
    if v.shape != (n,):
        raise DimensionMismatch(f"{name} has shape {v.shape}, expected ({n},)")


def gate_preact_wide(gw: GateWeights, x, h):
    """Wide (Q24.16) gate pre-activation: Wx.x + Wh.h + b, exact."""
    _check_vec("x", x, gw.inputs)
    _check_vec("h", h, gw.hidden)
    return fp.dot_wide(gw.w_x, x) + fp.dot_wide(gw.w_h, h) + fp.widen(gw.b.astype(np.int64))


def gate_preact(gw: GateWeights, x, h):
    """Narrowed Q8.8 gate pre-activation (one terminal rounding)."""
    return fp.narrow_raw(gate_preact_wide(gw, x, h))


def chunked_gate_preact_wide(gw: GateWeights, x, h, chunk_sizes):
    """Gate pre-activation computed the way split neurons compute it.

    The concatenated weight vector [w_x | w_h | b] of every neuron is divided
    into contiguous per-unit chunks; each chunk's partial dot product is
    accumulated wide and the partials are combined over the aggregation
    chain.  Because partials stay unrounded, the result equals
    ``gate_preact_wide`` exactly for any chunking.
    """
    n_total = gw.inputs + gw.hidden + 1
    if sum(chunk_sizes) != n_total or any(c <= 0 for c in chunk_sizes):
        raise DimensionMismatch("chunk sizes must be positive and cover all weights")
    w_all = np.concatenate(
        [gw.w_x.astype(np.int64), gw.w_h.astype(np.int64), gw.b.astype(np.int64)[:, None]],
        axis=1,
    )
    # The bias column multiplies a constant 1.0 input (raw 256).
    v_all = np.concatenate(
        [np.asarray(x, dtype=np.int64), np.asarray(h, dtype=np.int64), [fp.SCALE]]
    )
    partials = []
    lo = 0
    for size in chunk_sizes:
        partials.append(w_all[:, lo : lo + size] @ v_all[lo : lo + size])
        lo += size
    total, _hops = aggregate_wide(partials)
    return total


def lstm_cell_step(x, h_prev, c_prev, params: LayerParams, impl: str = "approx"):
    """One LSTM timestep for a layer. Raw Q8.8 arrays in, (h_t, c_t) out."""
    if params.cell_type != "LSTM":
        raise DimensionMismatch(f"lstm_cell_step on {params.cell_type} params")
    sig, tanh = activation_fns(impl)
    _check_vec("c_prev", np.asarray(c_prev), params.neurons)
    gi, gf, go, gc = params.gates
    i = sig(gate_preact(gi, x, h_prev))
    f = sig(gate_preact(gf, x, h_prev))
    o = sig(gate_preact(go, x, h_prev))
    g = tanh(gate_preact(gc, x, h_prev))
    c_t = fp.saturate(fp.mul_raw(f, c_prev) + fp.mul_raw(i, g))
    h_t = fp.mul_raw(o, tanh(c_t))
    return h_t, c_t


def gru_cell_step(x, h_prev, params: LayerParams, impl: str = "approx"):
    """One GRU timestep: h_t = (1-z) (.) h_prev + z (.) h~."""
    if params.cell_type != "GRU":
        raise DimensionMismatch(f"gru_cell_step on {params.cell_type} params")
    sig, tanh = activation_fns(impl)
    gz, gr, gc = params.gates
    z = sig(gate_preact(gz, x, h_prev))
    r = sig(gate_preact(gr, x, h_prev))
    # Candidate: the x-path MAC carries the bias; the reset gate scales the
    # recurrent MAC's narrowed output before the two halves combine.
    cand_x = fp.narrow_raw(fp.dot_wide(gc.w_x, x) + fp.widen(gc.b.astype(np.int64)))
    cand_h = fp.narrow_raw(fp.dot_wide(gc.w_h, h_prev))
    h_tilde = tanh(fp.saturate(cand_x + fp.mul_raw(r, cand_h)))
    one_minus_z = fp.saturate(fp.from_real(1.0) - z)
    return fp.saturate(fp.mul_raw(one_minus_z, h_prev) + fp.mul_raw(z, h_tilde))


def vanilla_cell_step(x, h_prev, params: LayerParams, impl: str = "approx"):
    """One Vanilla-RNN timestep: h_t = tanh(Wx.x + Wh.h + b)."""
    if params.cell_type != "Vanilla":
        raise DimensionMismatch(f"vanilla_cell_step on {params.cell_type} params")
    _sig, tanh = activation_fns(impl)
    (gg,) = params.gates
    return tanh(gate_preact(gg, x, h_prev))


def cell_step(x, h_prev, c_prev, params: LayerParams, impl: str = "approx"):
    """Dispatch on cell type; returns (h_t, c_t) with c_t=None for GRU/Vanilla."""
    if params.cell_type == "LSTM":
        return lstm_cell_step(x, h_prev, c_prev, params, impl)
    if params.cell_type == "GRU":
        return gru_cell_step(x, h_prev, params, impl), None
    return vanilla_cell_step(x, h_prev, params, impl), None


def aggregate_wide(partials):
    """Combine per-unit wide partials over the aggregation chain.

    Units sit right-to-left; each round, odd-indexed survivors forward their
    value to the even-indexed neighbor that consumes it, halving the active
    set, so k partials finish in ceil(log2(k)) hops at the leftmost unit.
    Addition is exact (wide), so any chain shape yields the same total.
    Returns (total, hops).
    """
    vals = [int(v) if not isinstance(v, np.ndarray) else v for v in partials]
    if not vals:
        raise DimensionMismatch("aggregate needs at least one partial")
    hops = 0
    while len(vals) > 1:
        merged = []
        for idx in range(0, len(vals), 2):
            if idx + 1 < len(vals):
                merged.append(vals[idx] + vals[idx + 1])  # even consumes odd
            else:
                merged.append(vals[idx])
        vals = merged
        hops += 1
    return vals[0], hops


def aggregate(partials):
    """Sum Q8.8 partials with wide accumulation; returns (raw Q8.8, hops).

    Accepts raw Q8.8 ints (embedded into the wide scale exactly) or
    already-wide values tagged by passing `("wide", value)` tuples.
    """
    wide = []
    for p in partials:
        if isinstance(p, tuple) and p[0] == "wide":
            wide.append(p[1])
        else:
            wide.append(fp.widen(int(p)))
    total, hops = aggregate_wide(wide)
    return fp.narrow_raw(total), hops


@dataclass
class MacPipeline:
    """Deeply pipelined MAC: 48 stages x 2 cycles, one issue per 2 cycles."""

    stages: int = 48
    cycles_per_stage: int = 2
    issue_interval: int = 2
    _last_issue: int | None = None
    acc: int = 0
    log: list = field(default_factory=list)

    @property
    def latency(self) -> int:
        return self.stages * self.cycles_per_stage  # 96 cycles

    def issue(self, cycle: int, a_raw: int = 0, b_raw: int = 0) -> int:
        if self._last_issue is not None and cycle < self._last_issue + self.issue_interval:
            raise IssueTooSoon(
                f"issue at cycle {cycle} violates the {self.issue_interval}-cycle interval "
                f"(previous issue at {self._last_issue})"
            )
        self._last_issue = cycle
        self.acc += int(a_raw) * int(b_raw)
        completion = cycle + self.latency
        self.log.append((cycle, completion))
        return completion

    def narrow(self) -> int:
        return int(fp.narrow_raw(self.acc))


def mac_issue(pipe: MacPipeline, cycle: int, a_raw: int = 0, b_raw: int = 0) -> int:
    return pipe.issue(cycle, a_raw, b_raw)


_BOOTH_DIGIT = np.array([0, 1, 1, 2, -2, -1, -1, 0], dtype=np.int64)


def booth_multiply(a_raw, b_raw):
    """Q8.8 multiply via radix-4 Booth recoding of the multiplier.

    The 16-bit multiplier is recoded into eight digits in {-2,-1,0,1,2} from
    overlapping bit triplets; partial products are digit * multiplicand
    shifted by 2 per digit.  The exact 32-bit product is then rounded and
    saturated identically to the plain multiply, so results are
    bit-identical to ``fixedpoint.mul_raw``.
    """
    scalar = not (isinstance(a_raw, np.ndarray) or isinstance(b_raw, np.ndarray))
    a = np.asarray(a_raw, dtype=np.int64)
    b = np.asarray(b_raw, dtype=np.int64)
    ub = b & 0xFFFF                      # two's-complement bit pattern
    ext = ub << 1                        # implicit b[-1] = 0
    product = np.zeros(np.broadcast(a, b).shape, dtype=np.int64)
    for i in range(8):
        trip = (ext >> (2 * i)) & 0x7
        digit = _BOOTH_DIGIT[trip]
        product = product + digit * (a << (2 * i))
    # The top digit's triplet treats bit 15 as the sign (the -2..2 digit of
    # the final group already encodes it), so `product` equals a*b exactly.
    out = fp.saturate(fp.round_shift_even(product, fp.FRAC_BITS))
    if scalar:
        return int(out)
    return out
