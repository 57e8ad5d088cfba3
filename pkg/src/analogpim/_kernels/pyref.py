"""Pure-numpy reference kernels.

Semantically identical to the compiled extension; all randomness is drawn
by callers and passed in as arrays, so both backends consume the same
noise streams and differ only by floating-point summation order.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def vtc_eval(v, k, vm, vdd):
    """Inverter transfer curve: vdd / (1 + exp(k * (v - vm))).

    ``k``/``vm`` broadcast against ``v``; the argument is clipped so the
    exponential never overflows.
    """
    arg = np.clip(k * (np.asarray(v, dtype=np.float64) - vm), -500.0, 500.0)
    return vdd / (1.0 + np.exp(arg))


def sa_forward(x, w1, v1, w2, v2, vtc_k, vtc_vm, vdd):
    """Three-layer constrained approximator forward pass.

    x: (batch, n_in); w1: (n_in, h); v1: (h,); w2: (h, n_out); v2: (n_out,).
    Returns (batch, n_out).
    """
    h_pre = x @ w1 + v1
    h = vtc_eval(h_pre, vtc_k, vtc_vm, vdd)
    return h @ w2 + v2


def run_recurrence(ports, weights, prev0, lam, alpha, exact_mode,
                   eta, sh_noise, sa=None, keep_cycles=False):
    """Cyclic analog accumulation over bit-sliced partial sums.

    ports: (cycles, batch, n_ports) signed port voltages per input cycle.
    weights: (n_ports,) binary positional weights (2^j).
    prev0: (batch,) initial held value.
    lam: cross-cycle coefficient 2^-N_DAC; alpha: normalization.
    exact_mode: False -> v = (lam * prev + s) / alpha (literal recurrence);
                True  -> v = lam * prev + s / alpha (binary ratios kept).
    eta / sh_noise: sample-hold transfer efficiency and additive noise
    (cycles-1, batch) applied to every *held* intermediate value.
    sa: optional trained accumulator dict replacing the ideal recurrence;
        it consumes [ports, held_prev] and produces the new sum.
    Returns (batch,) final sums, or (cycles, batch) when keep_cycles.
    """
    ports = np.asarray(ports, dtype=np.float64)
    cycles, batch, _ = ports.shape
    if sh_noise is None:
        sh_noise = np.zeros((max(cycles - 1, 1), batch))
    held = np.array(prev0, dtype=np.float64, copy=True)
    out = np.empty((cycles, batch)) if keep_cycles else None
    for i in range(cycles):
        if sa is not None:
            x = np.concatenate([ports[i], held[:, None]], axis=1)
            v = sa_forward(x, sa["w1"], sa["v1"], sa["w2"], sa["v2"],
                           sa["vtc_k"], sa["vtc_vm"], sa["vdd"])[:, 0]
        else:
            s = ports[i] @ weights
            if exact_mode:
                v = lam * held + s / alpha
            else:
                v = (lam * held + s) / alpha
        if keep_cycles:
            out[i] = v
        if i + 1 < cycles:
            held = eta * v + sh_noise[i]
        else:
            held = v
    return out if keep_cycles else held
