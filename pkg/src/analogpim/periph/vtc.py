"""Inverter voltage-transfer-characteristic model and PVT corpus.

The analog neurons are CMOS inverters whose transfer curve is modeled as
a decreasing logistic: vdd / (1 + exp(k * (v - vm))).  A corpus of
(k, vm) variants stands in for PVT spread; training draws one variant
per neuron per step and deployment pins one per neuron.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._rng import substream
from ..crossbar import V_DD


@dataclass(frozen=True)
class VTCModel:
    """Nominal transfer curve plus the PVT variant corpus A_VTC."""

    v_dd: float = V_DD
    k: float = 30.0          # 1/V, nominal gain
    v_m: float = 0.5 * V_DD  # V, switching threshold
    k_spread: float = 0.10   # relative sigma of k across the corpus
    vm_spread: float = 0.05  # relative sigma of v_m across the corpus
    n_vtc: int = 20
    corpus_seed: int = 2024
    corpus_k: np.ndarray = field(default=None, repr=False)
    corpus_vm: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.corpus_k is None:
            rng = substream(self.corpus_seed, "vtc-corpus")
            ks = self.k * (1.0 + self.k_spread * rng.standard_normal(self.n_vtc))
            vms = self.v_m * (1.0 + self.vm_spread * rng.standard_normal(self.n_vtc))
            object.__setattr__(self, "corpus_k", np.abs(ks))
            object.__setattr__(self, "corpus_vm", np.clip(vms, 0.0, self.v_dd))
        else:
            object.__setattr__(self, "corpus_k", np.asarray(self.corpus_k, float))
            object.__setattr__(self, "corpus_vm", np.asarray(self.corpus_vm, float))

    def __call__(self, v, k=None, vm=None):
        return vtc_eval(v, self, k=k, vm=vm)

    def pick(self, rng: np.random.Generator, n: int):
        """Draw one corpus variant per neuron: returns (k[n], vm[n])."""
        idx = rng.integers(self.n_vtc, size=n)
        return self.corpus_k[idx], self.corpus_vm[idx]


def vtc_eval(v, params: VTCModel, k=None, vm=None):
    """Transfer curve value(s); monotone decreasing, vtc(v_m) = vdd / 2."""
    k = params.k if k is None else k
    vm = params.v_m if vm is None else vm
    return logistic_curve(v, k, vm, params.v_dd)


def logistic_curve(v, k, vm, vdd):
    """vdd / (1 + exp(k * (v - vm))) with overflow-safe argument."""
    arg = np.clip(np.asarray(k, float) * (np.asarray(v, float) - vm), -500, 500)
    return vdd / (1.0 + np.exp(arg))


def vtc_grad(v, k, vm, vdd):
    """d(vtc)/dv, used by the trainer's backward pass."""
    s = logistic_curve(v, k, vm, 1.0)
    return -k * vdd * s * (1.0 - s)
