import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from analogpim._rng import substream
from analogpim.crossbar import (
    AnalogVector,
    CapacityError,
    DAC_FULL_SCALE,
    PrecisionError,
    bl_partial_sums,
    CrossbarArray,
    dac_levels,
    digital_oracle_dot,
    dump_cells,
    map_weights,
    read_back,
    slice_inputs,
)
from analogpim.dataflow import DataflowConfig

CFG = DataflowConfig()


def test_slice_255_with_4bit_dac():
    s = slice_inputs([255], 8, 4)
    assert s.slices.tolist() == [[15], [15]]
    assert s.cycles == 2


def test_slice_one_with_1bit_dac():
    s = slice_inputs([1], 8, 1)
    assert s.slices[:, 0].tolist() == [1, 0, 0, 0, 0, 0, 0, 0]


def test_slice_radix4_digits():
    s = slice_inputs([0b10110010], 8, 2)
    assert s.slices[:, 0].tolist() == [0b10, 0b00, 0b11, 0b10]


def test_slice_overflow_rejected():
    with pytest.raises(PrecisionError):
        slice_inputs([256], 8, 1)


@given(st.lists(st.integers(0, 255), min_size=1, max_size=40),
       st.sampled_from([1, 2, 3, 4, 8]))
def test_slice_recombination_exact(xs, dac_bits):
    s = slice_inputs(xs, 8, dac_bits)
    assert s.recombine().tolist() == xs


def test_map_8bit_weights_128_wide():
    w = np.arange(64 * 128).reshape(64, 128) % 100 - 50
    arrays, mapping = map_weights(w, CFG)
    assert len(arrays) == 8
    assert mapping.weights_per_row == 8
    assert mapping.weights_per_row * mapping.array_rows == 1024  # per array
    assert np.array_equal(read_back(arrays, mapping), w)


def test_map_all_zero():
    arrays, mapping = map_weights(np.zeros((4, 16), dtype=int), CFG)
    assert all(a.cells.sum() == 0 for a in arrays)
    assert np.array_equal(read_back(arrays, mapping), np.zeros((4, 16), dtype=int))


def test_map_single_negative_weight():
    arrays, mapping = map_weights(np.array([[-5]]), CFG)
    a = arrays[0]
    pos = a.cells[:, 0::2]
    neg = a.cells[0, 1::2][: mapping.bit_columns]
    assert pos.sum() == 0
    assert neg.tolist() == [1, 0, 1, 0, 0, 0, 0, 0]  # 5 = 0b101, LSB first


def test_map_capacity_error():
    with pytest.raises(CapacityError):
        map_weights(np.ones((64, 256), dtype=int), CFG, max_arrays=8)


def test_map_precision_error():
    with pytest.raises(PrecisionError):
        map_weights(np.array([[128]]), CFG)


def test_roundtrip_exhaustive_int4():
    cfg = DataflowConfig(weight_bits=4, array_log_size=3)
    vals = np.arange(-7, 8)
    # all int4 values in every position of a 4x4 matrix, row-rotated
    for v in vals:
        w = np.full((4, 4), int(v), dtype=int)
        arrays, mapping = map_weights(w, cfg)
        assert np.array_equal(read_back(arrays, mapping), w)
    rng = np.random.default_rng(0)
    w = rng.integers(-7, 8, size=(4, 4))
    arrays, mapping = map_weights(w, cfg)
    assert np.array_equal(read_back(arrays, mapping), w)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_roundtrip_random_int8(seed):
    rng = np.random.default_rng(seed)
    w = rng.integers(-127, 128, size=(6, 130))
    arrays, mapping = map_weights(w, CFG)
    assert np.array_equal(read_back(arrays, mapping), w)


def test_bl_single_cell_proportionality():
    cells = np.zeros((128, 128))
    cells[3, 0] = 1.0
    arr = CrossbarArray(cells)
    v = np.zeros(128)
    v[3] = 0.7
    out = bl_partial_sums(arr, AnalogVector(v))
    assert out.voltages[0] == pytest.approx(0.7 / 128)
    assert np.all(out.voltages[1:] == 0)


def test_bl_zero_cells():
    arr = CrossbarArray(np.zeros((16, 16)))
    out = bl_partial_sums(arr, AnalogVector(np.full(16, 0.5)))
    assert np.all(out.voltages == 0)


def test_bl_matches_integer_oracle():
    rng = np.random.default_rng(7)
    cells = rng.integers(0, 2, size=(16, 16)).astype(float)
    digits = rng.integers(0, 2, size=16)
    arr = CrossbarArray(cells)
    out = bl_partial_sums(arr, AnalogVector(dac_levels(digits, 1)))
    # brute-force integer dot product per column
    for j in range(16):
        exact = sum(int(digits[k]) * int(cells[k, j]) for k in range(16))
        expect = exact * DAC_FULL_SCALE / 16
        assert abs(out.voltages[j] - expect) <= 1e-12 * max(expect, 1e-30)


def test_bl_linearity_noise_off():
    rng = np.random.default_rng(3)
    arr = CrossbarArray(rng.integers(0, 2, size=(32, 32)).astype(float))
    v = rng.uniform(0, 0.3, size=32)
    a = bl_partial_sums(arr, AnalogVector(v)).voltages
    b = bl_partial_sums(arr, AnalogVector(2.0 * v)).voltages
    assert np.allclose(2.0 * a, b, rtol=1e-13, atol=0)


def test_bl_deterministic_with_zero_sigma():
    rng = np.random.default_rng(3)
    arr = CrossbarArray(rng.integers(0, 2, size=(16, 16)).astype(float),
                        read_noise_sigma=0.0)
    v = AnalogVector(rng.uniform(0, 0.5, size=16))
    a = bl_partial_sums(arr, v, noise_on=True, rng=substream(1, "x"))
    b = bl_partial_sums(arr, v, noise_on=True, rng=substream(2, "y"))
    assert np.array_equal(a.voltages, b.voltages)


def test_bl_noise_reproducible_per_stream():
    rng = np.random.default_rng(3)
    arr = CrossbarArray(rng.integers(0, 2, size=(16, 16)).astype(float))
    v = AnalogVector(rng.uniform(0, 0.5, size=16))
    a = bl_partial_sums(arr, v, noise_on=True, rng=substream(9, "arr", 0))
    b = bl_partial_sums(arr, v, noise_on=True, rng=substream(9, "arr", 0))
    c = bl_partial_sums(arr, v, noise_on=True, rng=substream(9, "arr", 1))
    assert np.array_equal(a.voltages, b.voltages)
    assert not np.array_equal(a.voltages, c.voltages)


def test_oracle_examples():
    assert digital_oracle_dot([[1, -1]], [3, 2]).tolist() == [1]
    eye = np.eye(5, dtype=int)
    x = [5, -3, 2, 0, 9]
    assert digital_oracle_dot(eye, x).tolist() == x


def test_oracle_against_python_bigints():
    rng = np.random.default_rng(11)
    w = rng.integers(-127, 128, size=(32, 32))
    x = rng.integers(0, 256, size=32)
    got = digital_oracle_dot(w, x)
    for i in range(32):
        assert got[i] == sum(int(w[i, k]) * int(x[k]) for k in range(32))


def test_dump_cells_format():
    arrays, _ = map_weights(np.array([[-5]]), CFG)
    lines = dump_cells(arrays).splitlines()
    assert len(lines) == 128 * 128
    assert lines[0].count(",") == 3
