"""Constrained three-layer approximator and its conductance instantiation.

The model is h = vtc(x @ W1 + V1), y = h @ W2 + V2 with per-neuron VTC
assignments.  Passive-crossbar realization bounds every first-layer
column to sum(|W1[:, j]|) < 1 (同 for W2) and quantizes weights onto the
differential grid of two A_R-bit conductances.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .. import _kernels
from ..crossbar import V_DD

#: Strict-inequality guard for the passive column-sum constraint.
COLUMN_SUM_GUARD = 1.0 - 1e-9


def column_scale_bounds(clip: float, a_r: int, rows: int,
                        fanout: int = 1) -> tuple[int, int]:
    """Feasible conductance-sum range for one column (plus its bias row).

    The column normalization epsilon = 1/S is a free design scale: S must
    be at least fanout*(2^A_R - 1)/clip so no representable weight exceeds
    the clip bound, and at most the fully-padded cell count.  ``fanout``
    is the number of substrate rows realizing one model weight.
    """
    levels = ((1 << a_r) - 1) * fanout
    s_min = int(np.ceil(levels / clip))
    s_max = 2 * ((1 << a_r) - 1) * (rows * fanout + 1)
    return s_min, max(s_max, s_min)


def quantize_columns(w: np.ndarray, clip: float, a_r: int,
                     scales: np.ndarray | None = None, fanout: int = 1):
    """Quantize each column onto its own differential-conductance grid.

    Weights in a column are integer level differences over the column sum
    S (W = (g_u - g_l)/S, spread across ``fanout`` rows per weight), so
    each column picks the S in its feasible range that best represents
    the float master.  Returns (w_q, scales).
    """
    levels = ((1 << a_r) - 1) * fanout
    rows = w.shape[0]
    if scales is None:
        s_min, s_max = column_scale_bounds(clip, a_r, rows, fanout)
        cand = np.unique(np.round(np.linspace(s_min, s_max, 48)).astype(int))
        codes = np.clip(np.round(w[None] * cand[:, None, None]),
                        -levels, levels)
        recon = codes / cand[:, None, None]
        err = ((recon - w[None]) ** 2).sum(axis=1)  # (cand, cols)
        used = np.abs(codes).sum(axis=1)            # (cand, cols)
        err = np.where(used < cand[:, None], err, np.inf)  # keep sum < 1 strict
        scales = cand[np.argmin(err, axis=0)]
    codes = np.clip(np.round(w * scales), -levels, levels)
    return codes / scales, np.asarray(scales, dtype=int)


def quantize_offsets(v: np.ndarray, scales, v_dd: float = V_DD) -> np.ndarray:
    """Offsets move in divider quanta v_dd / S of their column scale."""
    step = v_dd / np.asarray(scales, dtype=float)
    return step * np.round(np.asarray(v) / step)


@dataclass
class ApproximatorModel:
    """A trained NNS+A or NNADC-stage network plus substrate metadata.

    ``w1`` rows cover ``n_in * fanout`` signal lines (stage networks fan
    each input out across several rows to trade weight headroom for
    offset resolution); the always-on bias pair is carried by ``v1`` /
    ``v2``.  Inputs are signed pair differentials in ``input_range``.
    """

    kind: str                    # "nnsa" | "adc-cmp" | "adc-res" | "adc-flash"
    n_in: int
    hidden: int
    n_out: int
    w1: np.ndarray               # (n_in * fanout, hidden)
    v1: np.ndarray               # (hidden,)
    w2: np.ndarray               # (hidden, n_out)
    v2: np.ndarray               # (n_out,)
    vtc_k: np.ndarray            # (hidden,)
    vtc_vm: np.ndarray           # (hidden,)
    v_dd: float = V_DD
    fanout: int = 1
    a_r: int = 3
    quantized: bool = False
    input_range: tuple[float, float] = (-0.3, 0.3)
    scale1: np.ndarray | None = None  # per-hidden-column conductance sums
    scale2: np.ndarray | None = None  # per-output-column conductance sums
    meta: dict = field(default_factory=dict)

    @property
    def clip1(self) -> float:
        """Per-row bound: n_in*fanout signal rows + one bias pair share a column."""
        return 1.0 / (self.n_in * self.fanout + 1)

    @property
    def clip2(self) -> float:
        return 1.0 / self.hidden

    def expand_inputs(self, x: np.ndarray) -> np.ndarray:
        if self.fanout == 1:
            return x
        return np.repeat(x, self.fanout, axis=1)

    def forward(self, x, clamp: bool = True) -> np.ndarray:
        """Batched forward pass; out-of-range inputs warn and clamp."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        lo, hi = self.input_range
        if clamp:
            if x.min(initial=lo) < lo - 1e-9 or x.max(initial=hi) > hi + 1e-9:
                warnings.warn("approximator input outside trained range; clamped",
                              stacklevel=2)
                x = np.clip(x, lo, hi)
        return _kernels.sa_forward(
            self.expand_inputs(x), self.w1, self.v1, self.w2, self.v2,
            self.vtc_k, self.vtc_vm, self.v_dd)

    def kernel_params(self) -> dict:
        """Parameter dict consumed by the recurrence kernels."""
        return {
            "w1": np.ascontiguousarray(self.w1), "v1": np.ascontiguousarray(self.v1),
            "w2": np.ascontiguousarray(self.w2), "v2": np.ascontiguousarray(self.v2),
            "vtc_k": np.ascontiguousarray(self.vtc_k),
            "vtc_vm": np.ascontiguousarray(self.vtc_vm), "vdd": self.v_dd,
        }

    def column_sums(self) -> tuple[np.ndarray, np.ndarray]:
        return np.abs(self.w1).sum(axis=0), np.abs(self.w2).sum(axis=0)

    def check_constraints(self) -> None:
        s1, s2 = self.column_sums()
        if s1.size and s1.max() >= 1.0:
            raise ValueError(f"layer-1 column sum {s1.max()} violates passive bound")
        if s2.size and s2.max() >= 1.0:
            raise ValueError(f"layer-2 column sum {s2.max()} violates passive bound")

    def clipped(self) -> "ApproximatorModel":
        """Clip weights to the per-row bounds and enforce strict column sums."""
        w1 = clip_columns(np.clip(self.w1, -self.clip1, self.clip1))
        w2 = clip_columns(np.clip(self.w2, -self.clip2, self.clip2))
        v1 = np.clip(self.v1, 0.0, self.v_dd)
        v2 = np.clip(self.v2, -self.v_dd, self.v_dd)
        return replace(self, w1=w1, v1=v1, w2=w2, v2=v2)

    def perturbed(self, rng: np.random.Generator, sigma: float) -> "ApproximatorModel":
        """Static instantiation variation: W <- W * exp(N(0, sigma))."""
        if sigma <= 0:
            return self
        w1 = self.w1 * np.exp(rng.normal(0.0, sigma, self.w1.shape))
        w2 = self.w2 * np.exp(rng.normal(0.0, sigma, self.w2.shape))
        return replace(self, w1=w1, w2=w2)


def clip_columns(w: np.ndarray, guard: float = COLUMN_SUM_GUARD) -> np.ndarray:
    """Rescale any column whose |.|-sum saturates the passive bound."""
    sums = np.abs(w).sum(axis=0)
    bad = sums >= 1.0
    if bad.any():
        w = w.copy()
        w[:, bad] *= guard / sums[bad]
    return w


@dataclass
class ConductanceInstantiation:
    """Differential cell levels realizing one quantized weight layer.

    epsilon[j] = 1 / sum_k (g_upper[k, j] + g_lower[k, j]) in cell-level
    units, so epsilon * (g_upper - g_lower) equals the quantized weight.
    """

    g_upper: np.ndarray   # integer levels 0 .. 2^A_R - 1
    g_lower: np.ndarray
    epsilon: np.ndarray   # per column
    step: float           # weight quantum (volts of weight per level diff)
    max_error: float      # worst |reconstructed - quantized| in weight units

    def reconstruct(self) -> np.ndarray:
        """Weights seen by the column: epsilon * (g_upper - g_lower)."""
        return self.epsilon * (self.g_upper[:-1] - self.g_lower[:-1])


class InstantiationError(ValueError):
    """A weight magnitude exceeds what the column normalization allows."""


def instantiate_layer(w_q: np.ndarray, scales, a_r: int,
                      fanout: int = 1) -> ConductanceInstantiation:
    """Pick A_R-bit differential levels realizing one quantized layer.

    Each weight is an integer level difference over its column sum S_j
    (so W = (g_u - g_l)/S_j exactly), spread across ``fanout`` physical
    rows; leftover mass is padded as common mode plus one bias row.
    """
    cell_levels = (1 << a_r) - 1
    levels = cell_levels * fanout
    w_q = np.asarray(w_q, dtype=np.float64)
    scales = np.asarray(scales, dtype=int)
    eff_codes = np.round(w_q * scales).astype(int)
    if np.abs(eff_codes).max(initial=0) > levels:
        raise InstantiationError("quantized weight exceeds the differential range")
    # spread each effective code across its fanout rows, saturating ±cell range
    n_w, cols = eff_codes.shape
    codes = np.zeros((n_w * fanout, cols), dtype=int)
    for f in range(fanout):
        chunk = np.clip(eff_codes, -cell_levels, cell_levels)
        codes[f::fanout] = chunk
        eff_codes = eff_codes - chunk
    rows, cols = codes.shape
    gu = np.vstack([np.maximum(codes, 0), np.zeros((1, cols), dtype=int)])
    gl = np.vstack([np.maximum(-codes, 0), np.zeros((1, cols), dtype=int)])
    for j in range(cols):
        deficit = int(scales[j]) - int(gu[:, j].sum() + gl[:, j].sum())
        if deficit < 0:
            raise InstantiationError(
                f"column {j}: weight mass exceeds the passive normalization")
        for r in range(rows + 1):
            if deficit < 2:
                break
            room = cell_levels - max(gu[r, j], gl[r, j])
            add = min(room, deficit // 2)
            gu[r, j] += add
            gl[r, j] += add
            deficit -= 2 * add
        # an odd remainder cannot be split between the two sub-arrays; the
        # column sum ends one level short, keeping W within one level
    eps = 1.0 / np.maximum((gu + gl).sum(axis=0), 1)
    per_row = eps * (gu[:-1] - gl[:-1])
    recon = per_row.reshape(n_w, fanout, cols).sum(axis=1)
    step = float(np.max(1.0 / scales))
    max_err = float(np.abs(recon - w_q).max(initial=0.0))
    if max_err > step + 1e-12:
        raise InstantiationError(f"reconstruction error {max_err} exceeds one level")
    return ConductanceInstantiation(
        g_upper=gu, g_lower=gl, epsilon=eps, step=step, max_error=max_err,
        fanout=fanout)


def instantiate_conductances(model: ApproximatorModel):
    """Instantiate both layers; reconstruction error is reported per layer.

    Requires a quantized model (weights on the per-column A_R grids).
    """
    model.check_constraints()
    s1, s2 = model.scale1, model.scale2
    if s1 is None or s2 is None:
        _, s1 = quantize_columns(model.w1, model.clip1, model.a_r)
        _, s2 = quantize_columns(model.w2, model.clip2, model.a_r)
    l1 = instantiate_layer(model.w1, s1, model.a_r)
    l2 = instantiate_layer(model.w2, s2, model.a_r)
    return l1, l2


def reconstructed_model(model: ApproximatorModel) -> ApproximatorModel:
    """Model with weights read back from the instantiated conductances."""
    l1, l2 = instantiate_conductances(model)
    return replace(model, w1=l1.reconstruct(), w2=l2.reconstruct())
