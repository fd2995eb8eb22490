import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pvpc.codec.entropy import (
    BitReader, BitWriter, read_run_level, run_level_bits, se_bits, ue_bits, ue_bits_array,
    ue_code, write_run_level,
)
from pvpc.errors import BitstreamError


def test_ue_codewords():
    assert [ue_code(v) for v in range(5)] == ["1", "010", "011", "00100", "00101"]
    assert ue_code(1 << 20) == "0" * 20 + format((1 << 20) + 1, "b")


def test_bit_lengths_agree_with_codewords():
    values = np.arange(0, 5000)
    assert [len(ue_code(int(v))) for v in values] == ue_bits_array(values).tolist()
    assert all(ue_bits(int(v)) == len(ue_code(int(v))) for v in values[:200])


def test_se_mapping():
    # 0, 1, -1, 2, -2 map to codes 0..4
    writer = BitWriter()
    for v in (0, 1, -1, 2, -2):
        writer.write_se(v)
    reader = BitReader(writer.getvalue(), writer.bit_length)
    assert [reader.read_ue() for _ in range(5)] == [0, 1, 2, 3, 4]
    assert se_bits(-2) == ue_bits(4)


def test_negative_ue_rejected():
    with pytest.raises(ValueError):
        BitWriter().write_ue(-1)


@settings(max_examples=100)
@given(st.lists(st.tuples(st.sampled_from(["ue", "se", "bits"]), st.integers(0, 1 << 30)), max_size=60))
def test_mixed_symbol_stream_round_trips(symbols):
    writer = BitWriter()
    expected = []
    for kind, value in symbols:
        if kind == "ue":
            writer.write_ue(value)
        elif kind == "se":
            value = value - (1 << 29)
            writer.write_se(value)
        else:
            value &= 0x1FFF
            writer.write_bits(value, 13)
        expected.append(value)
    data = writer.getvalue()
    assert len(data) == -(-writer.bit_length // 8)
    reader = BitReader(data, writer.bit_length)
    got = []
    for kind, _ in symbols:
        got.append({"ue": reader.read_ue, "se": reader.read_se, "bits": lambda: reader.read_bits(13)}[kind]())
    assert got == expected
    assert reader.exhausted()


@settings(max_examples=200)
@given(st.lists(st.integers(-300, 300), min_size=64, max_size=64), st.floats(0, 1))
def test_run_level_round_trip_and_exact_size(values, density):
    levels = np.array(values)
    levels[np.random.default_rng(abs(int(levels.sum()))).random(64) > density] = 0
    writer = BitWriter()
    write_run_level(writer, levels)
    assert writer.bit_length == run_level_bits(levels)
    reader = BitReader(writer.getvalue(), writer.bit_length)
    assert np.array_equal(read_run_level(reader), levels)
    assert reader.exhausted()


def test_run_level_bits_vectorised():
    rng = np.random.default_rng(5)
    batch = rng.integers(-3, 4, (7, 3, 64)) * (rng.random((7, 3, 64)) < 0.2)
    sizes = run_level_bits(batch)
    for idx in np.ndindex(7, 3):
        w = BitWriter()
        write_run_level(w, batch[idx])
        assert sizes[idx] == w.bit_length


def test_all_zero_block_costs_one_bit():
    assert run_level_bits(np.zeros(64, np.int64)) == 1


def test_truncated_reads_raise():
    writer = BitWriter()
    writer.write_ue(1000)
    data = writer.getvalue()
    with pytest.raises(BitstreamError):
        BitReader(data, writer.bit_length - 1).read_ue()
    with pytest.raises(BitstreamError):
        BitReader(b"").read_bits(1)
    with pytest.raises(BitstreamError):
        BitReader(b"\x00", 9)


def test_corrupt_run_level_raises():
    writer = BitWriter()
    writer.write_ue(65)  # more coefficients than the block holds
    with pytest.raises(BitstreamError):
        read_run_level(BitReader(writer.getvalue(), writer.bit_length))
    writer = BitWriter()
    writer.write_ue(1)
    writer.write_ue(64)  # run past the end
    writer.write_se(1)
    with pytest.raises(BitstreamError):
        read_run_level(BitReader(writer.getvalue(), writer.bit_length))
