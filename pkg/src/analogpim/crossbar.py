"""Value-level simulation of bit-sliced VMM on RRAM crossbar arrays.

Signed weights are decomposed into positive/negative parts stored in
adjacent column pairs of the same array; high-precision inputs stream as
LSB-first digit slices through low-resolution DACs; bit-line outputs are
current sums normalized so every analog signal stays within the supply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataflow import DataflowConfig

#: Supply voltage (Table-level constant).
V_DD = 1.2

#: DAC full scale: wordline drive spans [0, 0.5 * V_DD].
DAC_FULL_SCALE = 0.5 * V_DD

#: Default multiplicative read-noise sigma for VMM computing arrays.
READ_NOISE_SIGMA = 0.025


class CapacityError(ValueError):
    """Weight matrix does not fit the available arrays."""


class PrecisionError(ValueError):
    """A weight or input needs more bits than the configured precision."""


@dataclass
class CrossbarArray:
    """One 2^N x 2^N array of normalized cell conductances in [0, 1].

    Cells hold one of ``2**cell_bits`` uniformly spaced levels; reads may
    apply fresh multiplicative lognormal noise per access.
    """

    cells: np.ndarray
    cell_bits: int = 1
    read_noise_sigma: float = READ_NOISE_SIGMA

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.float64)
        rows, cols = self.cells.shape
        if rows & (rows - 1) or cols & (cols - 1):
            raise ValueError("array dimensions must be powers of two")
        levels = (1 << self.cell_bits) - 1
        scaled = self.cells * levels
        if not np.allclose(scaled, np.round(scaled), atol=1e-9):
            raise ValueError("cell values must sit on the 2^cell_bits level grid")
        if self.cells.min() < 0 or self.cells.max() > 1:
            raise ValueError("cell values must lie in [0, 1]")

    @property
    def rows(self) -> int:
        return self.cells.shape[0]

    @property
    def cols(self) -> int:
        return self.cells.shape[1]


@dataclass
class WeightMapping:
    """Placement of a signed weight matrix across bit-sliced column pairs.

    ``placement[o]`` gives, per bit position, (array index, positive
    column, negative column); all bit columns of one weight share the
    array rows ``row_offset : row_offset + n_in``.
    """

    weights: np.ndarray
    weight_bits: int
    cell_bits: int
    array_rows: int
    weights_per_row: int
    row_tiles: int
    col_tiles: int
    placement: dict = field(repr=False, default_factory=dict)

    @property
    def n_arrays(self) -> int:
        return self.row_tiles * self.col_tiles

    @property
    def bit_columns(self) -> int:
        return math.ceil(self.weight_bits / self.cell_bits)


@dataclass
class BitSliceStream:
    """LSB-first digit slices of an unsigned input vector."""

    slices: np.ndarray  # (cycles, n) unsigned digits < 2**dac_bits
    dac_bits: int
    input_bits: int

    @property
    def cycles(self) -> int:
        return self.slices.shape[0]

    def recombine(self) -> np.ndarray:
        weights = (1 << (self.dac_bits * np.arange(self.cycles, dtype=np.int64)))
        return (self.slices.astype(np.int64) * weights[:, None]).sum(axis=0)


@dataclass
class AnalogVector:
    """Bounded analog signal bundle (volts)."""

    voltages: np.ndarray
    full_scale: float = V_DD

    def __post_init__(self):
        self.voltages = np.asarray(self.voltages, dtype=np.float64)
        if self.voltages.size and (
                self.voltages.min() < -1e-12
                or self.voltages.max() > self.full_scale + 1e-12):
            raise ValueError("voltages out of [0, full_scale]")


def dac_levels(digits: np.ndarray, dac_bits: int,
               full_scale: float = DAC_FULL_SCALE) -> np.ndarray:
    """Ideal uniform DAC: digit d -> d / (2^bits - 1) * full_scale volts."""
    span = (1 << dac_bits) - 1
    return np.asarray(digits, dtype=np.float64) * (full_scale / span)


def slice_inputs(x, input_bits: int, dac_bits: int) -> BitSliceStream:
    """Split unsigned inputs into LSB-first digits of ``dac_bits`` each."""
    x = np.asarray(x, dtype=np.int64)
    if x.min() < 0 or x.max() >= (1 << input_bits):
        raise PrecisionError(f"inputs exceed {input_bits}-bit unsigned range")
    cycles = math.ceil(input_bits / dac_bits)
    radix = 1 << dac_bits
    slices = np.empty((cycles, x.size), dtype=np.int64)
    rem = x.copy()
    for i in range(cycles):
        slices[i] = rem % radix
        rem //= radix
    return BitSliceStream(slices=slices, dac_bits=dac_bits, input_bits=input_bits)


def map_weights(w, cfg: DataflowConfig,
                max_arrays: int | None = None,
                read_noise_sigma: float = READ_NOISE_SIGMA):
    """Map a signed (n_out, n_in) weight matrix onto bit-sliced arrays.

    Positive magnitudes go to the positive column of each pair, negative
    to the adjacent negative column, one pair per stored bit.  Requires
    binary cells (the default system).  Returns (arrays, mapping).
    """
    if cfg.cell_bits != 1:
        raise NotImplementedError("weight mapping assumes 1-bit cells")
    w = np.asarray(w, dtype=np.int64)
    if w.ndim != 2:
        raise ValueError("weight matrix must be 2-D (n_out, n_in)")
    if np.abs(w).max(initial=0) >= (1 << (cfg.weight_bits - 1)):
        raise PrecisionError(f"|weights| must be < 2^{cfg.weight_bits - 1}")

    n_out, n_in = w.shape
    rows = cfg.rows
    bit_cols = math.ceil(cfg.weight_bits / cfg.cell_bits)
    per_array = rows // (2 * bit_cols)  # weight groups per array
    if per_array == 0:
        raise CapacityError(
            f"a {rows}x{rows} array cannot hold one {cfg.weight_bits}-bit "
            f"weight group ({2 * bit_cols} columns needed)")
    row_tiles = math.ceil(n_in / rows)
    col_tiles = math.ceil(n_out / per_array)
    if max_arrays is not None and row_tiles * col_tiles > max_arrays:
        raise CapacityError(
            f"need {row_tiles * col_tiles} arrays, only {max_arrays} available")

    cells = np.zeros((row_tiles, col_tiles, rows, rows))
    mag = np.abs(w)
    pos = w > 0
    for j in range(bit_cols):
        bit = (mag >> j) & 1
        for rt in range(row_tiles):
            r0, r1 = rt * rows, min((rt + 1) * rows, n_in)
            for o in range(n_out):
                ct, slot = divmod(o, per_array)
                cp = slot * 2 * bit_cols + 2 * j
                seg = bit[o, r0:r1]
                cells[rt, ct, : r1 - r0, cp] = np.where(pos[o, r0:r1], seg, 0)
                cells[rt, ct, : r1 - r0, cp + 1] = np.where(pos[o, r0:r1], 0, seg)

    arrays = [
        CrossbarArray(cells[rt, ct], cell_bits=1, read_noise_sigma=read_noise_sigma)
        for rt in range(row_tiles) for ct in range(col_tiles)
    ]
    placement = {
        o: [
            (rt * col_tiles + o // per_array, rt,
             (o % per_array) * 2 * bit_cols + 2 * j,
             (o % per_array) * 2 * bit_cols + 2 * j + 1)
            for rt in range(row_tiles) for j in range(bit_cols)
        ]
        for o in range(n_out)
    }
    mapping = WeightMapping(
        weights=w, weight_bits=cfg.weight_bits, cell_bits=cfg.cell_bits,
        array_rows=rows, weights_per_row=per_array,
        row_tiles=row_tiles, col_tiles=col_tiles, placement=placement,
    )
    return arrays, mapping


def read_back(arrays: list[CrossbarArray], mapping: WeightMapping) -> np.ndarray:
    """Reconstruct the signed weight matrix from noise-free cells."""
    n_out, n_in = mapping.weights.shape
    rows = mapping.array_rows
    per_array = mapping.weights_per_row
    bit_cols = mapping.bit_columns
    out = np.zeros((n_out, n_in), dtype=np.int64)
    for o in range(n_out):
        ct, slot = divmod(o, per_array)
        for rt in range(mapping.row_tiles):
            arr = arrays[rt * mapping.col_tiles + ct].cells
            r0, r1 = rt * rows, min((rt + 1) * rows, n_in)
            for j in range(bit_cols):
                cp = slot * 2 * bit_cols + 2 * j
                seg = np.round(arr[: r1 - r0, cp] - arr[: r1 - r0, cp + 1])
                out[o, r0:r1] += (seg.astype(np.int64) << j)
    return out


def bl_partial_sums(array: CrossbarArray, drive: AnalogVector,
                    noise_on: bool = False,
                    rng: np.random.Generator | None = None) -> AnalogVector:
    """Column outputs of one array read: (1/rows) * sum_k v_k * g_kj.

    The 1/rows normalization keeps any partial sum within [0, full_scale].
    With noise on, each effective cell value is multiplied by exp(theta),
    theta ~ N(0, read_noise_sigma), drawn fresh per read.
    """
    v = drive.voltages
    if v.shape != (array.rows,):
        raise ValueError(f"drive length {v.shape} != rows {array.rows}")
    cells = array.cells
    if noise_on and array.read_noise_sigma > 0:
        if rng is None:
            raise ValueError("noise_on requires an rng")
        cells = cells * np.exp(
            rng.normal(0.0, array.read_noise_sigma, size=cells.shape))
    out = (v @ cells) / array.rows
    return AnalogVector(out, full_scale=drive.full_scale)


def digital_oracle_dot(w, x) -> np.ndarray:
    """Exact integer W @ x; the reference for all equivalence tests."""
    w = np.asarray(w, dtype=object)
    x = np.asarray(x, dtype=object)
    return np.array([sum(int(a) * int(b) for a, b in zip(row, x)) for row in w],
                    dtype=object)


def dump_cells(arrays: list[CrossbarArray]) -> str:
    """Debug dump, one line per cell: array, row, col, level."""
    lines = []
    for a, arr in enumerate(arrays):
        levels = np.round(arr.cells * ((1 << arr.cell_bits) - 1)).astype(int)
        for r in range(arr.rows):
            for c in range(arr.cols):
                lines.append(f"{a},{r},{c},{levels[r, c]}")
    return "\n".join(lines)
