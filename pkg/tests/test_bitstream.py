from __future__ import annotations

import numpy as np
import pytest

from sanac.bitstream.huffman import HuffmanTable, table_from_counts
from sanac.bitstream.stream import (
    BadMagic,
    BitstreamError,
    CodecHeader,
    HashMismatch,
    InvalidSymbol,
    TruncatedStream,
    UnsupportedVersion,
    decode_stream,
    encode_stream,
    parse_header,
    stack_indices,
    theoretical_bitrate,
)

HASH = bytes(range(32))


def _header(frame_count: int, tables, *, k: int = 2, p: int = 8, m: int = 4) -> CodecHeader:
    return CodecHeader(
        sample_rate=16000,
        frame_size=2 * p,
        hop=2 * p - 4,
        num_sources=k,
        vq_dim=2,
        code_length=p,
        num_centroids=m,
        model_hash=HASH,
        frame_count=frame_count,
        original_length=frame_count * (2 * p - 4) + 4,
        tables=tuple(tables),
    )


def test_random_indices_round_trip(rng):
    for _ in range(100):
        k = int(rng.integers(1, 3))
        p = int(rng.choice([4, 8, 16]))
        m = int(rng.integers(1, 65))
        frames = int(rng.integers(0, 41))
        tables = []
        for _ in range(k):
            counts = rng.integers(0, 50, size=m)
            counts[rng.integers(m)] += 1
            tables.append(table_from_counts(counts))
        indices = rng.integers(0, m, size=(frames, k, p))
        stream = encode_stream(indices, _header(frames, tables, k=k, p=p, m=m))
        header, decoded = decode_stream(stream.to_bytes(), expected_hash=HASH)
        np.testing.assert_array_equal(decoded, indices)
        assert header.tables == tuple(tables)
        assert header.original_length == frames * (2 * p - 4) + 4


def test_empty_stream_is_header_only():
    tables = [HuffmanTable((2, 2, 2, 2))] * 2
    stream = encode_stream(np.zeros((0, 2, 8), dtype=np.int64), _header(0, tables))
    assert stream.payload == b""
    assert stream.measured_bitrate() == 0.0
    header, decoded = decode_stream(stream.to_bytes())
    assert header.frame_count == 0
    assert decoded.shape == (0, 2, 8)


def test_all_zero_indices_payload_size():
    tables = [HuffmanTable((1, 2, 3, 3))] * 2
    stream = encode_stream(np.zeros((10, 2, 8), dtype=np.int64), _header(10, tables))
    # 8 one-bit codes per (frame, source) fill exactly one byte
    assert stream.code_bits == 10 * 2 * 8
    assert len(stream.payload) == 20
    _, decoded = decode_stream(stream.to_bytes())
    assert not decoded.any()


def test_blocks_are_byte_aligned():
    tables = [HuffmanTable((1, 2, 3, 3))] * 2
    indices = np.full((3, 2, 8), 3)
    stream = encode_stream(indices, _header(3, tables))
    assert stream.code_bits == 3 * 2 * 8 * 3
    assert len(stream.payload) == 3 * 2 * 3
    assert stream.measured_bitrate(include_padding=False) <= stream.measured_bitrate()


def test_measured_bitrate(rng):
    tables = [HuffmanTable((2, 2, 2, 2))] * 2
    indices = rng.integers(0, 4, size=(50, 2, 8))
    stream = encode_stream(indices, _header(50, tables))
    # 2 bits * 8 slots * 2 sources per 12-sample hop at 16 kHz
    assert stream.measured_bitrate() == pytest.approx(32 * 16000 / 12)


def test_corruptions_have_distinct_errors(rng):
    tables = [HuffmanTable((2, 2, 2, 2))] * 2
    data = encode_stream(rng.integers(0, 4, size=(5, 2, 8)), _header(5, tables)).to_bytes()

    with pytest.raises(BadMagic) as bad:
        decode_stream(b"XXXX" + data[4:])
    with pytest.raises(UnsupportedVersion) as version:
        decode_stream(data[:4] + (99).to_bytes(2, "little") + data[6:])
    with pytest.raises(HashMismatch) as mismatch:
        decode_stream(data, expected_hash=bytes(32))
    with pytest.raises(TruncatedStream) as truncated:
        decode_stream(data[:-3])
    codes = {e.value.code for e in (bad, version, mismatch, truncated)}
    assert codes == {10, 11, 12, 13}


def test_trailing_bytes_are_rejected(rng):
    tables = [HuffmanTable((2, 2, 2, 2))] * 2
    data = encode_stream(np.zeros((2, 2, 8), dtype=np.int64), _header(2, tables)).to_bytes()
    with pytest.raises(BitstreamError):
        decode_stream(data + b"\x00")


def test_out_of_range_index_is_rejected():
    tables = [HuffmanTable((2, 2, 2, 2))] * 2
    indices = np.zeros((1, 2, 8), dtype=np.int64)
    indices[0, 1, 3] = 4
    with pytest.raises(InvalidSymbol):
        encode_stream(indices, _header(1, tables))


def test_unassigned_bit_pattern_is_an_invalid_symbol():
    tables = [HuffmanTable((2, 2, 2, 2))] * 2
    indices = np.zeros((1, 2, 8), dtype=np.int64)
    data = bytearray(encode_stream(indices, _header(1, tables)).to_bytes())
    size = parse_header(bytes(data)).size_bytes
    # second table becomes 00, 01, 10, 110: pattern 111 decodes to nothing
    data[size - 4 : size] = bytes((2, 2, 2, 3))
    data[-1] = 0xFF
    with pytest.raises(InvalidSymbol):
        decode_stream(bytes(data))


def test_header_validates_dimensions():
    with pytest.raises(BitstreamError):
        _header(1, [HuffmanTable((2, 2, 2, 2))])


@pytest.mark.parametrize("xi, kbps", [(1, 9.14), (2, 18.29), (3, 27.43), (0, 0.0)])
def test_theoretical_bitrate(xi, kbps):
    assert theoretical_bitrate(xi, 256, 16000, 448) / 1000 == pytest.approx(kbps, abs=0.005)


def test_stack_indices_orders_sources_second():
    a, b = np.zeros((3, 8), dtype=int), np.ones((3, 8), dtype=int)
    stacked = stack_indices([a, b])
    assert stacked.shape == (3, 2, 8)
    assert stacked[:, 1].all() and not stacked[:, 0].any()
