"""Hardware activation-function models: shift-based approximation and LUT.

Two sigmoid/tanh designs are modeled, matching the two hardware options:

* ``*_approx`` -- the shift/add approximation.  For z < 0 the sigmoid is
  (1/2 + zhat/4) / 2^m where m = trunc(|z|) (integer part, truncation toward
  zero) and zhat = z + m, i.e. the fractional remainder in (-1, 0].  The /4
  is two arithmetic right shifts and the /2^m is m more shifts, so the whole
  evaluation is shift/add on a single 16-bit track.  z > 0 mirrors through
  1 - sigmoid(-z), which makes sigmoid(z) + sigmoid(-z) == 1 exact in Q8.8.
  z == 0 returns exactly 0.5 (forced by the symmetry; neither branch of the
  piecewise form covers it).  tanh(z) = 2*sigmoid(2z) - 1 with the doublings
  done as saturating left shifts.

* ``*_lut`` -- a 64-entry table over [-4, 4), 6-bit index, one Q8.8 sample
  per 0.125-wide interval stored at the interval midpoint (the max-error
  optimum for a step approximation).  Inputs at or beyond +/-4 clamp to the
  asymptotes.

``sigmoid_exact`` / ``tanh_exact`` are the double-precision references used
by the accuracy sweeps.

All fixed-point entry points take raw Q8.8 ints or numpy integer arrays and
return the same shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fixedpoint import FRAC_BITS, RAW_MAX, RAW_MIN, SCALE, from_real, saturate

ONE_RAW = SCALE            # 1.0
HALF_RAW = SCALE // 2      # 0.5

LUT_SAMPLES = 64
LUT_LO = -4.0
LUT_HI = 4.0
LUT_INDEX_SHIFT = 5        # (z_raw + 1024) >> 5 maps [-4, 4) onto 0..63


def sigmoid_exact(z):
    """Reference sigmoid in double precision."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def tanh_exact(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.tanh(z)
    if out.ndim == 0:
        return float(out)
    return out


def _sigmoid_approx_negative(z):
    """Approximate sigmoid on the z <= 0 branch (raw int/array arithmetic)."""
    mag = -z                                # |z| in raw Q8.8, >= 0
    m = mag >> FRAC_BITS                    # trunc toward zero of |z|
    zhat = z + (m << FRAC_BITS)             # z + m, in (-1, 0] -> raw (-256, 0]
    num = HALF_RAW + (zhat >> 2)            # 1/2 + zhat/4, two right shifts
    if isinstance(z, np.ndarray):
        # Shift counts beyond 15 would be UB in C; numpy handles them, but cap
        # anyway since num < 2^8 means >> 16 is already 0.
        return num >> np.minimum(m, 16)
    return num >> min(int(m), 16)


def sigmoid_approx_raw(z):
    """Shift-based approximate sigmoid on raw Q8.8 values."""
    if isinstance(z, np.ndarray):
        z = z.astype(np.int64)
        neg = _sigmoid_approx_negative(np.where(z > 0, -z, z))
        return np.where(z > 0, ONE_RAW - neg, np.where(z == 0, HALF_RAW, neg))
    z = int(z)
    if z == 0:
        return HALF_RAW
    if z > 0:
        return ONE_RAW - _sigmoid_approx_negative(-z)
    return _sigmoid_approx_negative(z)


def tanh_approx_raw(z):
    """tanh via 2*sigmoid(2z) - 1; the x2 steps are saturating left shifts."""
    if isinstance(z, np.ndarray):
        z2 = np.clip(z.astype(np.int64) << 1, RAW_MIN, RAW_MAX)
    else:
        z2 = saturate(int(z) << 1)
    s = sigmoid_approx_raw(z2)
    return saturate((s << 1) - ONE_RAW)


@dataclass(frozen=True)
class LutTable:
    """64 Q8.8 samples of sigmoid or tanh over [-4, 4), plus clamp values."""

    function: str               # "sigmoid" | "tanh"
    samples: np.ndarray         # int16, shape (64,), monotone nondecreasing
    lo_raw: int                 # returned for z <= -4
    hi_raw: int                 # returned for z >= +4

    @classmethod
    def build(cls, function: str) -> "LutTable":
        if function == "sigmoid":
            fn, lo, hi = sigmoid_exact, 0.0, 1.0
        elif function == "tanh":
            fn, lo, hi = tanh_exact, -1.0, 1.0
        else:
            raise ValueError(f"unknown LUT function {function!r}")
        step = (LUT_HI - LUT_LO) / LUT_SAMPLES
        mids = LUT_LO + (np.arange(LUT_SAMPLES) + 0.5) * step
        samples = from_real(fn(mids)).astype(np.int16)
        return cls(function, samples, from_real(lo), from_real(hi))

    def lookup_raw(self, z):
        lo_edge = from_real(LUT_LO)   # -1024
        if isinstance(z, np.ndarray):
            z = z.astype(np.int64)
            idx = np.clip((z - lo_edge) >> LUT_INDEX_SHIFT, 0, LUT_SAMPLES - 1)
            out = self.samples.astype(np.int64)[idx]
            out = np.where(z < lo_edge, self.lo_raw, out)
            return np.where(z >= -lo_edge, self.hi_raw, out)
        z = int(z)
        if z < lo_edge:
            return int(self.lo_raw)
        if z >= -lo_edge:
            return int(self.hi_raw)
        idx = min(max((z - lo_edge) >> LUT_INDEX_SHIFT, 0), LUT_SAMPLES - 1)
        return int(self.samples[idx])


_SIGMOID_LUT = LutTable.build("sigmoid")
_TANH_LUT = LutTable.build("tanh")


def sigmoid_lut_raw(z):
    return _SIGMOID_LUT.lookup_raw(z)


def tanh_lut_raw(z):
    return _TANH_LUT.lookup_raw(z)


def activation_fns(impl: str):
    """Return (sigmoid, tanh) raw-level functions for an implementation tag."""
    if impl == "approx":
        return sigmoid_approx_raw, tanh_approx_raw
    if impl == "lut":
        return sigmoid_lut_raw, tanh_lut_raw
    raise ValueError(f"unknown activation implementation {impl!r}")
