"""First-order characterization of partial-sum accumulation dataflows.

Three accumulation strategies over bit-sliced crossbar VMM are compared at
the array level:

* ``A`` -- quantize every bit-line partial sum, accumulate digitally,
* ``B`` -- buffer per-cycle partial sums in RRAM cells, quantize the
  buffer array once per binary weight,
* ``C`` -- accumulate fully in the analog domain, quantize once.

All quantities are per final dot-product of one weight group (one
high-precision weight column pair set); scaling to a whole array
multiplies conversion counts by the number of weight groups.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

STRATEGIES = ("A", "B", "C")

#: Highest RRAM cell precision demonstrated in fabricated devices (bits).
MAX_BUFFER_CELL_BITS = 7

BREAKDOWN_KEYS = ("DAC", "ADC", "ACC", "XBAR", "BUF")

CSV_COLUMNS = (
    "strategy", "P_D", "adc_bits", "n_conv", "latency",
    "E_DAC", "E_ADC", "E_ACC", "E_XBAR", "E_BUF", "E_total", "E_norm",
)


@dataclass(frozen=True)
class DataflowConfig:
    """Precision/geometry record parameterizing the characterization.

    The VMM array is ``2**array_log_size`` square; each cell stores
    ``cell_bits`` and each wordline is driven by a ``dac_bits`` DAC.
    """

    input_bits: int = 8      # P_I
    weight_bits: int = 8     # P_W
    output_bits: int = 8     # P_O
    cell_bits: int = 1       # P_R
    dac_bits: int = 1        # P_D
    array_log_size: int = 7  # N, array is 2^N x 2^N

    def __post_init__(self):
        for name in ("input_bits", "weight_bits", "output_bits",
                     "cell_bits", "dac_bits", "array_log_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.array_log_size > 9:
            raise ValueError("array_log_size must be <= 9")
        if self.cell_bits > self.weight_bits:
            raise ValueError("cell_bits cannot exceed weight_bits")
        if self.dac_bits > self.input_bits:
            raise ValueError("dac_bits cannot exceed input_bits")

    @property
    def rows(self) -> int:
        return 1 << self.array_log_size

    @property
    def input_cycles(self) -> int:
        return math.ceil(self.input_bits / self.dac_bits)

    @property
    def weight_columns(self) -> int:
        """Bit-sliced columns per signed weight (per polarity)."""
        return math.ceil(self.weight_bits / self.cell_bits)

    def replace(self, **kw) -> "DataflowConfig":
        state = {
            "input_bits": self.input_bits, "weight_bits": self.weight_bits,
            "output_bits": self.output_bits, "cell_bits": self.cell_bits,
            "dac_bits": self.dac_bits, "array_log_size": self.array_log_size,
        }
        state.update(kw)
        return DataflowConfig(**state)


@dataclass(frozen=True)
class ComponentEnergyModel:
    """Per-operation energy constants (joules) and converter scaling laws.

    Converter energy follows ``base_energy * exponent_base ** bits``.  The
    constants are calibration inputs; the shipped default config carries
    values tuned against the tile-level component table.
    """

    adc_base_energy: float = 4.9e-14      # J per conversion at 0 bits
    adc_exponent_base: float = 2.0
    dac_base_energy: float = 3.2e-13      # J per conversion at 0 bits
    dac_exponent_base: float = math.sqrt(2.0)
    digital_sa_energy: float = 2.0e-13    # J per shift-add op
    nnsa_energy: float = 3.7e-12          # J per analog accumulation cycle
    crossbar_read_energy: float = 1.5e-11 # J per array activation
    buffer_write_energy_per_bit: float = 2.0e-12  # J per stored bit
    sh_energy: float = 2.0e-13            # J per sample/hold op

    def __post_init__(self):
        for name in ("adc_base_energy", "dac_base_energy", "digital_sa_energy",
                     "nnsa_energy", "crossbar_read_energy",
                     "buffer_write_energy_per_bit", "sh_energy"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (self.adc_exponent_base > self.dac_exponent_base > 1.0):
            raise ValueError("need adc_exponent_base > dac_exponent_base > 1")

    def adc_energy(self, bits: int) -> float:
        return self.adc_base_energy * self.adc_exponent_base ** bits

    def dac_energy(self, bits: int) -> float:
        return self.dac_base_energy * self.dac_exponent_base ** bits


@dataclass(frozen=True)
class BufferFeasibility:
    """Strategy-B buffer requirement at a given config.

    ``required_bits`` follows the strategy-A conversion resolution (the
    value reported in comparison tables); ``level_bits`` counts the bits
    needed to hold the bit-line level range itself, which is what decides
    whether a fabricated cell can store the partial sum.
    """

    feasible: bool
    required_bits: int
    level_bits: int
    cell_limit: int = MAX_BUFFER_CELL_BITS
    clamped_bits: int | None = None

    @property
    def stored_bits(self) -> int:
        """Bits actually held per buffer cell once clamping is applied."""
        if self.clamped_bits is not None:
            return min(self.clamped_bits, self.level_bits)
        return self.level_bits


@dataclass(frozen=True)
class StrategyReport:
    strategy: str
    config: DataflowConfig
    adc_resolution: int
    n_conversions: int
    latency: int
    energy_breakdown: dict[str, float]
    feasible: bool = True
    reason: str = ""
    e_norm: float | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def total_energy(self) -> float:
        return sum(self.energy_breakdown.values())


def adc_resolution(strategy: str, cfg: DataflowConfig) -> int:
    """Required A/D resolution (bits) for one conversion under a strategy."""
    _check_strategy(strategy)
    if strategy == "C":
        return cfg.output_bits
    if cfg.cell_bits > 1 and cfg.dac_bits > 1:
        res_a = cfg.cell_bits + cfg.dac_bits + cfg.array_log_size
    else:
        res_a = cfg.cell_bits + cfg.dac_bits - 1 + cfg.array_log_size
    if strategy == "A":
        return res_a
    # B: one extra log2(cycles) from aggregating all input cycles in the
    # buffer array, rounded up to whole bits.
    return res_a + math.ceil(math.log2(cfg.input_cycles)) if cfg.input_cycles > 1 else res_a


def n_conversions(strategy: str, cfg: DataflowConfig) -> int:
    """Number of A/D conversions per dot-product of one weight group."""
    _check_strategy(strategy)
    if strategy == "A":
        return cfg.input_cycles * cfg.weight_columns
    if strategy == "B":
        return cfg.input_cycles + cfg.weight_columns - 1
    return 1


def latency_cycles(cfg: DataflowConfig) -> int:
    """Input cycles to stream one input vector; identical for A, B and C."""
    return cfg.input_cycles


def buffer_level_bits(cfg: DataflowConfig) -> int:
    """Bits needed to hold one bit-line partial sum's level range."""
    levels = (2 ** cfg.cell_bits - 1) * (2 ** cfg.dac_bits - 1) * cfg.rows
    return math.ceil(math.log2(levels))


def strategy_b_feasibility(cfg: DataflowConfig,
                           clamp_bits: int | None = None,
                           cell_limit: int = MAX_BUFFER_CELL_BITS) -> BufferFeasibility:
    """Whether strategy B's buffer cells can store the partial sums.

    A cell must hold the full bit-line level range; fabricated devices top
    out at ``cell_limit`` bits.  ``clamp_bits`` opts into truncated storage
    (the CASCADE-style 6-bit buffer), recorded for noise modeling.
    """
    lev = buffer_level_bits(cfg)
    return BufferFeasibility(
        feasible=lev <= cell_limit,
        required_bits=adc_resolution("A", cfg),
        level_bits=lev,
        cell_limit=cell_limit,
        clamped_bits=clamp_bits,
    )


def b_conversion_bits(cfg: DataflowConfig, stored_bits: int) -> int:
    """Conversion resolution on the buffer array's bit-lines.

    The buffer bit-line aggregates ``input_cycles`` stored values, so the
    converter sees ``stored_bits + log2(cycles)`` of range.  With 7-bit
    cells at the reference config this lands on 10 bits; the Eq.-literal
    requirement from :func:`adc_resolution` ("B") stays 11.
    """
    extra = math.ceil(math.log2(cfg.input_cycles)) if cfg.input_cycles > 1 else 0
    return stored_bits + extra


def energy_estimate(strategy: str, cfg: DataflowConfig,
                    model: ComponentEnergyModel,
                    clamp_buffer_bits: int | None = None) -> StrategyReport:
    """Per-dot-product energy breakdown for one strategy.

    Keys: DAC (wordline drive), ADC (conversions), ACC (digital S+A, or
    analog accumulator + S/H for C), XBAR (array activations), BUF
    (strategy-B buffer writes).

    Raises :class:`InfeasibleStrategyError` for B when the buffer cell
    precision is exceeded and clamping is disabled.
    """
    _check_strategy(strategy)
    cycles = cfg.input_cycles
    res = adc_resolution(strategy, cfg)
    conv = n_conversions(strategy, cfg)
    notes: list[str] = []

    breakdown = dict.fromkeys(BREAKDOWN_KEYS, 0.0)
    breakdown["DAC"] = cycles * cfg.rows * model.dac_energy(cfg.dac_bits)
    breakdown["XBAR"] = cycles * model.crossbar_read_energy

    feasible, reason = True, ""
    if strategy == "A":
        breakdown["ADC"] = conv * model.adc_energy(res)
        breakdown["ACC"] = conv * model.digital_sa_energy
    elif strategy == "C":
        breakdown["ADC"] = model.adc_energy(cfg.output_bits)
        breakdown["ACC"] = cycles * (model.nnsa_energy + model.sh_energy)
    else:
        feas = strategy_b_feasibility(cfg, clamp_bits=clamp_buffer_bits)
        if not feas.feasible and clamp_buffer_bits is None:
            raise InfeasibleStrategyError(
                f"strategy B needs {feas.level_bits}-bit buffer cells "
                f"(> {feas.cell_limit}-bit limit); enable clamping to proceed")
        if not feas.feasible:
            feasible = False
            reason = (f"buffer cells need {feas.level_bits} bits "
                      f"(limit {feas.cell_limit}); clamped to {feas.stored_bits}")
        stored = feas.stored_bits
        if stored < feas.level_bits:
            notes.append(f"buffer clamped to {stored} bits")
        conv_bits = b_conversion_bits(cfg, stored)
        breakdown["ADC"] = conv * model.adc_energy(conv_bits)
        breakdown["ACC"] = conv * model.digital_sa_energy
        breakdown["BUF"] = (cycles * cfg.weight_columns * stored
                            * model.buffer_write_energy_per_bit)

    return StrategyReport(
        strategy=strategy, config=cfg, adc_resolution=res,
        n_conversions=conv, latency=cycles, energy_breakdown=breakdown,
        feasible=feasible, reason=reason, notes=tuple(notes),
    )


def compare_strategies(cfgs: Sequence[DataflowConfig],
                       model: ComponentEnergyModel,
                       strategies: Iterable[str] = STRATEGIES,
                       clamp_buffer_bits: int | None = 6) -> list[StrategyReport]:
    """One report per (strategy, config), normalized to (A, first config).

    The normalization column follows the DAC-resolution study: every total
    is divided by strategy A's total at the grid's first config.
    """
    if not cfgs:
        raise ValueError("empty config grid")
    reports = [
        energy_estimate(s, cfg, model, clamp_buffer_bits=clamp_buffer_bits)
        for cfg in cfgs for s in strategies
    ]
    ref = energy_estimate("A", cfgs[0], model).total_energy
    return [
        StrategyReport(
            strategy=r.strategy, config=r.config, adc_resolution=r.adc_resolution,
            n_conversions=r.n_conversions, latency=r.latency,
            energy_breakdown=r.energy_breakdown, feasible=r.feasible,
            reason=r.reason, e_norm=r.total_energy / ref, notes=r.notes,
        )
        for r in reports
    ]


def default_dac_grid(base: DataflowConfig, dac_bits=(1, 2, 4)) -> list[DataflowConfig]:
    return [base.replace(dac_bits=d) for d in dac_bits]


def write_comparison_csv(reports: Sequence[StrategyReport], fh: IO[str]) -> None:
    """Emit the fixed-column comparison table."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        bd = r.energy_breakdown
        writer.writerow([
            r.strategy, r.config.dac_bits, r.adc_resolution, r.n_conversions,
            r.latency,
            *(f"{bd[k]:.6e}" for k in BREAKDOWN_KEYS),
            f"{r.total_energy:.6e}",
            "" if r.e_norm is None else f"{r.e_norm:.6f}",
        ])


class InfeasibleStrategyError(ValueError):
    """Raised when a strategy cannot be realized at the given config."""


def _check_strategy(strategy: str) -> None:
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
