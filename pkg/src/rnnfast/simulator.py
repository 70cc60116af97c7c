"""Cycle-level execution engine with per-operation energy accounting.

One run walks the placed network timestep by timestep and layer by layer.
Values and timing are deliberately decoupled:

* The value path evaluates each layer exactly as the compute units do
  (wide per-gate accumulation, one narrow, hardware activations), applying
  fault effects from the run's FaultPlan: chain passes with faults are
  replayed through the word-level track model, weight faults become
  zero-substitutions (EDC on) or per-plane misaligned reads (EDC off), and
  logic faults perturb one result bit by one significance position.  With
  no faults the outputs are bit-identical to the functional cell models.

* The timing path drives representative MAC pipelines (one unit per layer
  is simulated; units are identical and run in lockstep, so event counts
  multiply out exactly).  A layer's timestep streams max(inputs, neurons)
  words at one delivery per issue interval (plus any cross-group stall),
  drains the 96-cycle pipeline, then pays the aggregation hops and the
  activation stages.  Layer l timestep t starts when layer l-1 has produced
  x_t and the layer's own t-1 evaluation has finished.

``analytic_cycles`` computes the same quantity from the closed form alone
and must agree exactly with the engine on error-free runs; it is the
timing oracle, not a shared code path.

The energy ledger counts per-nanowire events (a 16-bit word access is 16
plane events) and converts exactly: rates are held in attojoules as
integers, so micro-run energies match hand arithmetic to the picojoule.
EDC pattern maintenance is tracked in separate counters (edc_read /
edc_write), so mitigation adds nothing to the compute counters on
fault-free runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import fixedpoint as fp
from .error_model import ErrorConfig, FaultPlan, gate_paths
from .lstm_core import ACT_STAGES, NONLINEAR_EVALS, LayerParams, MacPipeline
from .mapping import Placement
from .nonlinear import activation_fns
from .racetrack import InputTrackChain

# Per-operation energy, picojoules.  Track rates are the device parameters;
# the rest are desk defaults derived from each unit's racetrack composition
# (MAC: 272 single-bit adders at shift-class cost; approx activation: 16-cell
# track walk; LUT activation: up to 8 shifts + 1 read; aggregation hop: a
# 40-bit wide partial, 3 words of shift-based writes; interconnect: wired
# inter-group hop).  All overridable per ledger.
DEFAULT_ENERGY_PJ = {
    "track_read": 0.39,
    "track_shift": 0.24,
    "track_write": 0.0096,
    "edc_read": 0.39,
    "edc_write": 0.0096,
    "mac_issue": 65.28,
    "nonlinear_eval": 3.84,
    "aggregation_hop": 0.4608,
    "interconnect_word": 1.0,
}
LUT_NONLINEAR_PJ = 2.31

# Per-operation latency in cycles at the 0.5 ns clock (read 1 ns, shift and
# shift-based write 0.5 ns).
DEFAULT_LATENCY_CYCLES = {"track_read": 2, "track_shift": 1, "track_write": 1}

COMPUTE_COUNTERS = (
    "track_read",
    "track_shift",
    "track_write",
    "mac_issue",
    "nonlinear_eval",
    "aggregation_hop",
    "interconnect_word",
)

_ATTO_PER_PJ = 10**6


class EnergyLedger:
    """Monotone event counters with exact energy conversion."""

    def __init__(self, energy_pj=None, latency_cycles=None, activation_impl="approx"):
        rates = dict(DEFAULT_ENERGY_PJ)
        if activation_impl == "lut":
            rates["nonlinear_eval"] = LUT_NONLINEAR_PJ
        if energy_pj:
            rates.update(energy_pj)
        self.rates_aj = {k: round(v * _ATTO_PER_PJ) for k, v in rates.items()}
        self.latency_cycles = dict(latency_cycles or DEFAULT_LATENCY_CYCLES)
        self.counters = {k: 0 for k in self.rates_aj}

    def add(self, op, n=1):
        if n < 0:
            raise ValueError("ledger counters are monotone")
        self.counters[op] = self.counters.get(op, 0) + int(n)

    def energy_pj(self) -> float:
        total_aj = sum(self.counters[k] * self.rates_aj.get(k, 0) for k in self.counters)
        return total_aj / _ATTO_PER_PJ

    def compute_counters(self) -> dict:
        return {k: self.counters.get(k, 0) for k in COMPUTE_COUNTERS}

    def as_dict(self) -> dict:
        return dict(sorted(self.counters.items()))


def energy_report(ledger: EnergyLedger) -> dict:
    """Exact multiply-and-sum energy breakdown."""
    per_op = {
        op: ledger.counters[op] * ledger.rates_aj.get(op, 0) / _ATTO_PER_PJ
        for op in sorted(ledger.counters)
    }
    return {
        "counters": ledger.as_dict(),
        "energy_pj_per_op": per_op,
        "total_energy_pj": ledger.energy_pj(),
        "latency_cycles_per_op": dict(ledger.latency_cycles),
    }


@dataclass
class RunResult:
    outputs: list
    total_cycles: int
    total_energy_pj: float
    counters: dict
    per_layer: list
    corrections: dict
    mac_sample: list
    error_config: dict | None
    timesteps: int

    def to_dict(self) -> dict:
        return {
            "timesteps": self.timesteps,
            "total_cycles": self.total_cycles,
            "total_energy_pj": self.total_energy_pj,
            "counters": dict(sorted(self.counters.items())),
            "per_layer": self.per_layer,
            "corrections": dict(sorted(self.corrections.items())),
            "mac_sample": self.mac_sample[:8],
            "error_config": self.error_config,
            "outputs": [layer.tolist() for layer in self.outputs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _split_even(total, parts):
    base, rem = divmod(total, parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def _chain_bases(capacities):
    bases = []
    acc = 0
    for c in capacities:
        bases.append(acc)
        acc += c
    return bases


class _LayerGeometry:
    """Derived per-layer lookup tables shared by value and count paths."""

    def __init__(self, lp, hw):
        self.lp = lp
        self.units_per_tile = hw.lstm_units_per_tile
        self.x_bases = _chain_bases(lp.chain.group_capacities)
        self.h_bases = _chain_bases(lp.recurrent_chain.group_capacities)
        u = lp.units_per_neuron
        if lp.cell_type == "Vanilla" and lp.neurons_per_unit > 1:
            self.unit_of = lambda neuron, chunk: neuron // lp.neurons_per_unit
            n_chunks = lp.pes_per_neuron
        else:
            self.unit_of = lambda neuron, chunk: neuron * u + chunk
            n_chunks = u
        self.n_chunks = n_chunks
        self.x_chunks = self._ranges(_split_even(lp.inputs, n_chunks))
        self.h_chunks = self._ranges(_split_even(lp.neurons, n_chunks))

    @staticmethod
    def _ranges(sizes):
        out = []
        lo = 0
        for s in sizes:
            out.append((lo, lo + s))
            lo += s
        return out

    def chain_group(self, neuron, chunk, chain_tag):
        tile = self.unit_of(neuron, chunk) // self.units_per_tile
        n_groups = len(self.x_bases if chain_tag == "x" else self.h_bases)
        return min(tile, n_groups - 1)

    def chunks(self, chain_tag):
        return self.x_chunks if chain_tag == "x" else self.h_chunks

    def base(self, group, chain_tag):
        return (self.x_bases if chain_tag == "x" else self.h_bases)[group]


class _ChainDelivery:
    """Per-pass delivered-word deltas for one chain (None when clean)."""

    def __init__(self, deltas_by_group):
        self.deltas = deltas_by_group  # group -> int64 array in word space

    def delta(self, group):
        return self.deltas.get(group)


def _run_faulted_chain(layout, words_raw, faults_by_step, edc_enabled, ledger):
    """Replay one pass through the word-level track model.

    Returns (_ChainDelivery, corrected_events).  Device-level counters for
    the pass are recorded on `ledger` by the model itself.
    """
    caps = list(layout.group_capacities)
    chain = InputTrackChain(caps, edc_enabled=edc_enabled)
    chain.stage([int(w) for w in words_raw])
    n_words = layout.word_capacity
    bases = _chain_bases(caps)
    truth = np.asarray(words_raw, dtype=np.int64)
    deltas = {g: np.zeros(n_words, dtype=np.int64) for g in range(len(caps))}
    corrected = 0
    for s in range(n_words):
        delivered, outcomes = chain.rotate_step(faults_by_step.get(s), ledger)
        for g, word in enumerate(delivered):
            signed = word - (1 << 16) if word >= (1 << 15) else word
            w_idx = (bases[g] + s) % n_words
            deltas[g][w_idx] = signed - truth[w_idx]
        corrected += sum(len(o.corrected_planes) for o in outcomes)
    deltas = {g: d for g, d in deltas.items() if np.any(d)}
    return _ChainDelivery(deltas), corrected


def _count_clean_chain(ledger, layout, steps, edc_enabled):
    g = len(layout.group_capacities)
    planes = 16
    ledger.add("track_read", planes * g * steps)
    ledger.add("track_write", planes * g * steps)
    ledger.add("track_shift", planes * g * steps)
    if edc_enabled:
        ledger.add("edc_read", planes * g * steps)
        ledger.add("edc_write", 3 * planes * g * steps)


def _word_order(base, lo, hi, n_words):
    """Arrival order of word indices [lo, hi) past a group with base offset."""
    idx = np.arange(lo, hi, dtype=np.int64)
    steps = (idx - base) % n_words
    return idx[np.argsort(steps, kind="stable")]


class _WeightFaultEffects:
    """Resolved weight-fault consequences for one (layer, timestep)."""

    def __init__(self):
        self.zero_slots = {}        # (neuron, gate, path) -> set of path slots
        self.mixed_tracks = {}      # (neuron, gate, path) -> {plane: [slots]}
        self.suppressed_shifts = 0
        self.zero_events = 0


def _resolve_weight_faults(events, geo, edc_weights):
    """Apply the weight-track protocol to this pass's planned events.

    Each chunk is a physically separate track, so the protocol runs per
    (chunk, plane).  With EDC on, a detected fault zeroes the weight at its
    slot and holds that plane's next shift, so a planned fault scheduled on
    the held slot is a no-op.  With EDC off every planned event lands and
    displacements accumulate for the rest of the chunk.
    """
    fx = _WeightFaultEffects()
    per_track = {}
    for neuron, gate, path, plane, slot in events:
        per_track.setdefault((neuron, gate, path), {}).setdefault(plane, []).append(slot)
    for track, by_plane in per_track.items():
        path = track[2]
        chunks = geo.chunks(path)
        if edc_weights:
            zeros = set()
            for plane, slots in by_plane.items():
                for lo, hi in chunks:
                    prev = None
                    for slot in sorted(s for s in slots if lo <= s < hi):
                        if prev is not None and slot == prev + 1:
                            continue  # shift held after the previous detection
                        zeros.add(slot)
                        prev = slot
                        if slot < hi - 1:
                            fx.suppressed_shifts += 1
            fx.zero_slots[track] = zeros
            fx.zero_events += len(zeros)
        else:
            fx.mixed_tracks[track] = {
                plane: sorted(slots) for plane, slots in by_plane.items()
            }
    return fx


def _mixed_weight_values(w_track, fault_slots_by_plane):
    """EDC-off weight stream of one track: per-plane displaced reads.

    w_track is the chunk's weights in arrival order (int64).  A plane
    displaced past the chunk end reads blank (0) bits.
    """
    k = len(w_track)
    out = np.asarray(w_track, dtype=np.int64).copy()
    unsigned = out & 0xFFFF
    for plane, slots in fault_slots_by_plane.items():
        disp = np.zeros(k, dtype=np.int64)
        for s in slots:
            disp[s:] += 1
        idx = np.arange(k, dtype=np.int64) + disp
        bits = np.where(idx < k, (unsigned[np.minimum(idx, k - 1)] >> plane) & 1, 0)
        unsigned = (unsigned & ~(1 << plane)) | (bits << plane)
    signed = np.where(unsigned >= 1 << 15, unsigned - (1 << 16), unsigned)
    return signed


def _perturb_result_bit(value, plane):
    """Mis-shift one set bit toward higher significance (off-by-one weight)."""
    bit = (int(value) >> plane) & 1
    return int(value) + (bit << plane)


def _layer_step_values(lp, geo, params, x_raw, h_prev, c_prev, impl, plan, t,
                       ledger, corrections, cfg, rewind_full=True):
    """Evaluate one (layer, timestep) with fault effects; returns (h, c)."""
    n, m = lp.inputs, lp.neurons
    sig, tanh_ = activation_fns(impl)
    x64 = np.asarray(x_raw, dtype=np.int64)
    h64 = np.asarray(h_prev, dtype=np.int64)
    edc_in = cfg.edc_inputs if cfg else False
    edc_w = cfg.edc_weights if cfg else False

    deliveries = {}
    for chain_tag, layout, words in (("x", lp.chain, x64), ("h", lp.recurrent_chain, h64)):
        steps = layout.word_capacity
        faults = plan.input_faults.get((lp.index, chain_tag, t)) if plan else None
        if faults:
            delivery, corrected = _run_faulted_chain(layout, words, faults, edc_in, ledger)
            deliveries[chain_tag] = delivery
            corrections["input_corrected"] += corrected
        else:
            _count_clean_chain(ledger, layout, steps, edc_in)
        ledger.add("interconnect_word", layout.boundaries * steps)

    def consumed(chain_tag, group, word_idx, truth):
        d = deliveries.get(chain_tag)
        if d is None:
            return int(truth[word_idx])
        delta = d.delta(group)
        if delta is None:
            return int(truth[word_idx])
        return int(truth[word_idx] + delta[word_idx])

    paths = gate_paths(lp.cell_type)
    accs = {}
    for gate, path in paths:
        gw = params.gates[gate]
        w = (gw.w_x if path == "x" else gw.w_h).astype(np.int64)
        vec = x64 if path == "x" else h64
        acc = w @ vec
        delivery = deliveries.get(path if path == "x" else "h")
        if delivery is not None:
            n_words = len(vec)
            for chunk in range(geo.n_chunks):
                lo, hi = geo.chunks(path)[chunk]
                if lo == hi:
                    continue
                groups = {}
                for neuron in range(m):
                    groups.setdefault(geo.chain_group(neuron, chunk, path), []).append(neuron)
                for group, neurons in groups.items():
                    delta = delivery.delta(group)
                    if delta is None:
                        continue
                    rows = np.asarray(neurons, dtype=np.int64)
                    acc[rows] += w[np.ix_(rows, np.arange(lo, hi))] @ delta[lo:hi]
        accs[(gate, path)] = acc

    # Weight faults: zero substitutions (EDC on) or misaligned reads (EDC off).
    effective_weight = {}
    if plan and plan.weight_faults.get((lp.index, t)):
        fx = _resolve_weight_faults(plan.weight_faults[(lp.index, t)], geo, edc_w)
        corrections["weight_zeroed"] += fx.zero_events
        corrections["suppressed_shifts"] += fx.suppressed_shifts
        ledger_shift_credit = fx.suppressed_shifts
        truth = {"x": x64, "h": h64}
        for (neuron, gate, path), zero_slots in fx.zero_slots.items():
            gw = params.gates[gate]
            w_row = (gw.w_x if path == "x" else gw.w_h)[neuron].astype(np.int64)
            n_words = len(truth[path])
            for slot in zero_slots:
                chunk = next(
                    ci for ci, (lo, hi) in enumerate(geo.chunks(path)) if lo <= slot < hi
                )
                lo, hi = geo.chunks(path)[chunk]
                group = geo.chain_group(neuron, chunk, path)
                order = _word_order(geo.base(group, path), lo, hi, n_words)
                word = int(order[slot - lo])
                xv = consumed(path, group, word, truth[path])
                accs[(gate, path)][neuron] -= int(w_row[word]) * xv
                effective_weight[(neuron, gate, path, slot)] = 0
        for (neuron, gate, path), by_plane in fx.mixed_tracks.items():
            gw = params.gates[gate]
            w_row = (gw.w_x if path == "x" else gw.w_h)[neuron].astype(np.int64)
            n_words = len(truth[path])
            for chunk, (lo, hi) in enumerate(geo.chunks(path)):
                local = {
                    plane: [s - lo for s in slots if lo <= s < hi]
                    for plane, slots in by_plane.items()
                }
                local = {p: s for p, s in local.items() if s}
                if not local:
                    continue
                group = geo.chain_group(neuron, chunk, path)
                order = _word_order(geo.base(group, path), lo, hi, n_words)
                w_track = w_row[order]
                mixed = _mixed_weight_values(w_track, local)
                changed = np.nonzero(mixed != w_track)[0]
                for j in changed:
                    word = int(order[j])
                    xv = consumed(path, group, word, truth[path])
                    accs[(gate, path)][neuron] += int(mixed[j] - w_track[j]) * xv
                    effective_weight[(neuron, gate, path, int(j + lo))] = int(mixed[j])
    else:
        ledger_shift_credit = 0

    # Logic faults on MAC products.
    if plan and plan.mac_faults.get((lp.index, t)):
        truth = {"x": x64, "h": h64}
        for neuron, gate, path, slot, plane in plan.mac_faults[(lp.index, t)]:
            gw = params.gates[gate]
            w_row = (gw.w_x if path == "x" else gw.w_h)[neuron]
            n_words = len(truth[path])
            chunk = next(
                ci for ci, (lo, hi) in enumerate(geo.chunks(path)) if lo <= slot < hi
            )
            lo, hi = geo.chunks(path)[chunk]
            group = geo.chain_group(neuron, chunk, path)
            order = _word_order(geo.base(group, path), lo, hi, n_words)
            word = int(order[slot - lo])
            wv = effective_weight.get((neuron, gate, path, slot), int(w_row[word]))
            xv = consumed(path, group, word, truth[path])
            product = wv * xv
            delta = _perturb_result_bit(product, plane + fp.FRAC_BITS) - product
            accs[(gate, path)][neuron] += delta
            corrections["logic_faults"] += 1

    # Ledger: weight streams, MACs, activations, aggregation, output staging.
    path_len = {"x": n, "h": m}
    total_words = sum(path_len[p] for _g, p in paths)
    advances = sum(
        max(hi - lo - 1, 0)
        for _g, p in paths
        for lo, hi in geo.chunks(p)
    )
    ledger.add("track_read", 16 * m * total_words)
    rewind_shifts = 16 * m * total_words if rewind_full else 0
    ledger.add("track_shift", 16 * m * advances + rewind_shifts - ledger_shift_credit)
    ledger.add("mac_issue", m * total_words)
    if edc_w:
        ledger.add("edc_read", 16 * m * advances)
    ledger.add("nonlinear_eval", m * NONLINEAR_EVALS[lp.cell_type])
    ledger.add("aggregation_hop", m * (lp.units_per_neuron - 1))
    ledger.add("track_write", 16 * m * 2)  # next-layer write + recurrent restage

    # Activation faults are applied to individual evaluations.
    act_events = {}
    if plan and plan.act_faults.get((lp.index, t)):
        for neuron, act_idx, plane in plan.act_faults[(lp.index, t)]:
            act_events.setdefault(act_idx, []).append((neuron, plane))
            corrections["logic_faults"] += 1

    def apply_act_faults(vals, act_idx):
        for neuron, plane in act_events.get(act_idx, ()):
            vals[neuron] = fp.saturate(_perturb_result_bit(int(vals[neuron]), plane))
        return vals

    if lp.cell_type == "LSTM":
        b = [g.b.astype(np.int64) for g in params.gates]
        pre = [
            fp.narrow_raw(accs[(g, "x")] + accs[(g, "h")] + fp.widen(b[g]))
            for g in range(4)
        ]
        i = apply_act_faults(sig(pre[0]), 0)
        f = apply_act_faults(sig(pre[1]), 1)
        o = apply_act_faults(sig(pre[2]), 2)
        g_ = apply_act_faults(tanh_(pre[3]), 3)
        c_t = fp.saturate(fp.mul_raw(f, c_prev) + fp.mul_raw(i, g_))
        tc = apply_act_faults(tanh_(c_t), 4)
        h_t = fp.mul_raw(o, tc)
        return h_t, c_t
    if lp.cell_type == "GRU":
        bz, br, bc = [g.b.astype(np.int64) for g in params.gates]
        z = apply_act_faults(
            sig(fp.narrow_raw(accs[(0, "x")] + accs[(0, "h")] + fp.widen(bz))), 0
        )
        r = apply_act_faults(
            sig(fp.narrow_raw(accs[(1, "x")] + accs[(1, "h")] + fp.widen(br))), 1
        )
        cand_x = fp.narrow_raw(accs[(2, "x")] + fp.widen(bc))
        cand_h = fp.narrow_raw(accs[(2, "h")])
        h_tilde = apply_act_faults(
            tanh_(fp.saturate(cand_x + fp.mul_raw(r, cand_h))), 2
        )
        one_minus_z = fp.saturate(fp.from_real(1.0) - z)
        h_t = fp.saturate(fp.mul_raw(one_minus_z, h64) + fp.mul_raw(z, h_tilde))
        return h_t, None
    (gw,) = params.gates
    pre = fp.narrow_raw(accs[(0, "x")] + accs[(0, "h")] + fp.widen(gw.b.astype(np.int64)))
    h_t = apply_act_faults(tanh_(pre), 0)
    return h_t, None


def _layer_step_timing(lp, start, pipes, hw, impl):
    stall = max(
        lp.chain.stall_per_step(hw.interconnect_latency_cycles),
        lp.recurrent_chain.stall_per_step(hw.interconnect_latency_cycles),
    )
    period = hw.mac_issue_interval + stall
    x_pipe, h_pipe = pipes
    last = start
    for s in range(max(lp.inputs, lp.neurons)):
        deliver = start + (s + 1) * period
        if s < lp.inputs:
            last = max(last, x_pipe.issue(deliver))
        if s < lp.neurons:
            last = max(last, h_pipe.issue(deliver))
    done = last + lp.agg_hops * hw.hop_latency_cycles
    done += ACT_STAGES[lp.cell_type] * hw.act_latency(impl)
    return done, stall


def simulate(placement: Placement, params, inputs, error_cfg: ErrorConfig | None = None,
             energy_pj=None) -> RunResult:
    """Run the placed network over a timestep-major input stream."""
    spec = placement.spec
    hw = placement.hw
    impl = spec.activation_impl
    T = spec.timesteps
    if len(params) != len(spec.layers):
        raise ValueError("one LayerParams per layer required")
    for lp, layer, p in zip(placement.layers, spec.layers, params):
        if p.cell_type != layer.cell_type or p.neurons != layer.neurons or p.inputs != layer.inputs:
            raise ValueError(f"params for layer {lp.index} disagree with the spec")
    inputs = np.asarray(inputs, dtype=np.int64)
    if T == 0:
        inputs = inputs.reshape(0, spec.layers[0].inputs)
    if inputs.shape != (T, spec.layers[0].inputs):
        raise ValueError(
            f"inputs shape {inputs.shape} != ({T}, {spec.layers[0].inputs})"
        )

    ledger = EnergyLedger(energy_pj=energy_pj, activation_impl=impl)
    plan = FaultPlan(error_cfg, placement) if error_cfg and error_cfg.active else None
    geos = [_LayerGeometry(lp, hw) for lp in placement.layers]
    pipes = [(MacPipeline(hw.mac_stages, hw.mac_cycles_per_stage, hw.mac_issue_interval),
              MacPipeline(hw.mac_stages, hw.mac_cycles_per_stage, hw.mac_issue_interval))
             for _ in placement.layers]

    L = len(placement.layers)
    outputs = [np.zeros((T, lp.neurons), dtype=np.int16) for lp in placement.layers]
    h_state = [np.zeros(lp.neurons, dtype=np.int64) for lp in placement.layers]
    c_state = [np.zeros(lp.neurons, dtype=np.int64) for lp in placement.layers]
    corrections = {
        "input_corrected": 0,
        "weight_zeroed": 0,
        "suppressed_shifts": 0,
        "logic_faults": 0,
        "fault_events": plan.total_events() if plan else 0,
    }
    finish = {}
    stalls = [0] * L
    per_layer_counts = [
        {"chain_reads": 0, "weight_reads": 0, "mac_issues": 0, "rotation_steps": 0}
        for _ in range(L)
    ]

    for t in range(T):
        for l, lp in enumerate(placement.layers):
            start = max(finish.get((l - 1, t), 0), finish.get((l, t - 1), 0))
            x = inputs[t] if l == 0 else outputs[l - 1][t].astype(np.int64)
            if l == 0:
                ledger.add("track_write", 16 * lp.inputs)  # staging from memory
            h_t, c_t = _layer_step_values(
                lp, geos[l], params[l], x, h_state[l], c_state[l], impl,
                plan, t, ledger, corrections, error_cfg,
                rewind_full=(hw.rewind_cost == "full_pass"),
            )
            outputs[l][t] = h_t.astype(np.int16)
            h_state[l] = np.asarray(h_t, dtype=np.int64)
            if c_t is not None:
                c_state[l] = np.asarray(c_t, dtype=np.int64)
            done, stall = _layer_step_timing(lp, start, pipes[l], hw, impl)
            finish[(l, t)] = done
            stalls[l] = stall
            pl = per_layer_counts[l]
            g_x = len(lp.chain.group_capacities)
            pl["chain_reads"] += 16 * (
                g_x * lp.inputs + len(lp.recurrent_chain.group_capacities) * lp.neurons
            )
            paths = gate_paths(lp.cell_type)
            words = sum(lp.inputs if p == "x" else lp.neurons for _g, p in paths)
            pl["weight_reads"] += 16 * lp.neurons * words
            pl["mac_issues"] += lp.neurons * words
            pl["rotation_steps"] += lp.inputs

    total_cycles = finish.get((L - 1, T - 1), 0)
    mac_sample = pipes[0][0].log[:8] if pipes and pipes[0][0].log else []
    return RunResult(
        outputs=outputs,
        total_cycles=int(total_cycles),
        total_energy_pj=ledger.energy_pj(),
        counters=ledger.as_dict(),
        per_layer=[
            {
                "layer": lp.index,
                "stall_per_step": stalls[i],
                **per_layer_counts[i],
            }
            for i, lp in enumerate(placement.layers)
        ],
        corrections=corrections,
        mac_sample=[list(entry) for entry in mac_sample],
        error_config=None if error_cfg is None else {
            "p_overshift": error_cfg.p_overshift,
            "sites": sorted(error_cfg.sites),
            "bit_region": error_cfg.bit_region,
            "edc_inputs": error_cfg.edc_inputs,
            "edc_weights": error_cfg.edc_weights,
            "seed": error_cfg.seed,
        },
        timesteps=T,
    )


def analytic_cycles(placement: Placement) -> int:
    """Closed-form cycle count for an error-free run (the timing oracle).

    Per layer and timestep: max(inputs, neurons) deliveries at
    (issue_interval + stall) cycles each, the MAC pipeline drain, the
    aggregation tree hops, and the activation stages.  Layers pipeline
    across timesteps: (l, t) starts at max(finish(l-1, t), finish(l, t-1)).
    """
    spec = placement.spec
    hw = placement.hw
    T = spec.timesteps
    if T == 0:
        return 0
    body = []
    for lp in placement.layers:
        stall = max(
            lp.chain.stall_per_step(hw.interconnect_latency_cycles),
            lp.recurrent_chain.stall_per_step(hw.interconnect_latency_cycles),
        )
        period = hw.mac_issue_interval + stall
        cycles = period * max(lp.inputs, lp.neurons) + hw.mac_latency
        cycles += lp.agg_hops * hw.hop_latency_cycles
        cycles += ACT_STAGES[lp.cell_type] * hw.act_latency(spec.activation_impl)
        body.append(cycles)
    L = len(body)
    prev_row = [0] * L
    for t in range(T):
        row = []
        for l in range(L):
            left = row[l - 1] if l > 0 else 0
            up = prev_row[l]
            row.append(max(left, up) + body[l])
        prev_row = row
    return prev_row[-1]
