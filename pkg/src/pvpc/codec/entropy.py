"""Order-0 exponential-Golomb bit I/O and run-level block coding."""

from __future__ import annotations

import numpy as np

from ..errors import BitstreamError


def ue_bits(value: int) -> int:
    return 2 * (value + 1).bit_length() - 1


def se_code(value: int) -> int:
    return 2 * value - 1 if value > 0 else -2 * value


def se_bits(value: int) -> int:
    return ue_bits(se_code(value))


def ue_bits_array(values: np.ndarray) -> np.ndarray:
    # frexp gives the exponent e with 2**(e-1) <= v+1 < 2**e, i.e. bit_length
    _, exp = np.frexp(np.asarray(values, dtype=np.float64) + 1)
    return 2 * exp.astype(np.int64) - 1


def se_bits_array(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64)
    return ue_bits_array(np.where(v > 0, 2 * v - 1, -2 * v))


_UE_CACHE_SIZE = 1 << 14
_UE_CODES = [None] * _UE_CACHE_SIZE


def ue_code(value: int) -> str:
    """Codeword of ``value`` as a string of '0'/'1' characters."""
    if value < _UE_CACHE_SIZE:
        code = _UE_CODES[value]
        if code is None:
            bits = format(value + 1, "b")
            code = _UE_CODES[value] = "0" * (len(bits) - 1) + bits
        return code
    bits = format(value + 1, "b")
    return "0" * (len(bits) - 1) + bits


class BitWriter:
    def __init__(self):
        self._chunks: list[str] = []
        self.bit_length = 0

    def write_bits(self, value: int, count: int):
        if count:
            self._chunks.append(format(value, f"0{count}b"))
            self.bit_length += count

    def write_ue(self, value: int):
        if value < 0:
            raise ValueError("ue(v) needs a non-negative value")
        code = ue_code(value)
        self._chunks.append(code)
        self.bit_length += len(code)

    def write_codes(self, codes: str):
        """Append already-binarised codewords."""
        self._chunks.append(codes)
        self.bit_length += len(codes)

    def write_se(self, value: int):
        self.write_ue(se_code(value))

    def getvalue(self) -> bytes:
        bits = "".join(self._chunks)
        if not bits:
            return b""
        bits += "0" * (-len(bits) % 8)
        return int(bits, 2).to_bytes(len(bits) // 8, "big")


class BitReader:
    """Reads at most ``bit_length`` bits of ``data``; reading past raises BitstreamError."""

    def __init__(self, data: bytes, bit_length: int | None = None):
        self.data = bytes(data)
        total = len(self.data) * 8
        if bit_length is None:
            bit_length = total
        if bit_length > total:
            raise BitstreamError(
                f"payload declares {bit_length} bits but holds {total}", len(self.data)
            )
        self._bits = format(int.from_bytes(self.data, "big"), f"0{total}b")[:bit_length] if total else ""
        self.limit = bit_length
        self.pos = 0

    @property
    def byte_offset(self) -> int:
        return self.pos // 8

    def _fail(self, what: str):
        raise BitstreamError(f"truncated or corrupt payload while reading {what}", self.byte_offset)

    def read_bits(self, count: int) -> int:
        end = self.pos + count
        if end > self.limit:
            self._fail(f"{count} bits")
        value = int(self._bits[self.pos:end], 2) if count else 0
        self.pos = end
        return value

    def read_ue(self) -> int:
        one = self._bits.find("1", self.pos)
        if one < 0:
            self._fail("exp-Golomb prefix")
        zeros = one - self.pos
        end = one + zeros + 1
        if end > self.limit or zeros > 40:
            self._fail("exp-Golomb suffix")
        value = int(self._bits[one:end], 2) - 1
        self.pos = end
        return value

    def read_se(self) -> int:
        code = self.read_ue()
        return (code + 1) // 2 if code % 2 else -(code // 2)

    def exhausted(self) -> bool:
        return self.pos == self.limit


def run_level_bits(levels: np.ndarray) -> np.ndarray:
    """Exact coded size of zigzag-ordered level vectors ``(..., 64)``.

    Each vector is ``ue(count)`` followed by ``ue(run), se(level)`` for every
    nonzero level, where ``run`` counts the zeros since the previous one.
    """
    lv = np.asarray(levels, dtype=np.int64)
    nz = lv != 0
    idx = np.arange(lv.shape[-1])
    last = np.maximum.accumulate(np.where(nz, idx, -1), axis=-1)
    prev = np.concatenate([np.full(lv.shape[:-1] + (1,), -1), last[..., :-1]], axis=-1)
    runs = idx - prev - 1
    per = np.where(nz, ue_bits_array(runs) + se_bits_array(lv), 0)
    return ue_bits_array(nz.sum(axis=-1)) + per.sum(axis=-1)


def write_run_level(writer: BitWriter, levels: np.ndarray):
    levels = np.asarray(levels)
    pos = np.flatnonzero(levels)
    runs = np.diff(pos, prepend=-1) - 1
    vals = levels[pos]
    codes = np.where(vals > 0, 2 * vals - 1, -2 * vals)
    parts = [ue_code(len(pos))]
    for run, code in zip(runs.tolist(), codes.tolist()):
        parts.append(ue_code(run))
        parts.append(ue_code(code))
    writer.write_codes("".join(parts))


def read_run_level(reader: BitReader, size: int = 64) -> np.ndarray:
    out = np.zeros(size, np.int64)
    count = reader.read_ue()
    if count > size:
        raise BitstreamError(f"{count} coefficients in a {size}-coefficient block", reader.byte_offset)
    pos = -1
    for _ in range(count):
        pos += reader.read_ue() + 1
        if pos >= size:
            raise BitstreamError("coefficient run past end of block", reader.byte_offset)
        level = reader.read_se()
        if level == 0:
            raise BitstreamError("zero level in run-level pair", reader.byte_offset)
        out[pos] = level
    return out
