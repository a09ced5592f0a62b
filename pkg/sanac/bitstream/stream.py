from __future__ import annotations

import struct
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from sanac.bitstream.huffman import HuffmanTable
from sanac.errors import SanacError

MAGIC = b"SANC"
FORMAT_VERSION = 1
HASH_BYTES = 32

# magic, version, sample_rate, frame_size, hop, K, L, P, M, hash, frame_count, original_length
_HEADER = struct.Struct("<4sHIIIHHIIH32sIQ")


class BitstreamError(SanacError):
    code = 1


class BadMagic(BitstreamError):
    code = 10


class UnsupportedVersion(BitstreamError):
    code = 11


class HashMismatch(BitstreamError):
    code = 12


class TruncatedStream(BitstreamError):
    code = 13


class InvalidSymbol(BitstreamError):
    code = 14


@dataclass(frozen=True)
class CodecHeader:
    sample_rate: int
    frame_size: int
    hop: int
    num_sources: int  # K (1 for the baseline)
    vq_dim: int  # L
    code_length: int  # P
    num_centroids: int  # M
    model_hash: bytes
    frame_count: int
    original_length: int
    tables: tuple[HuffmanTable, ...]
    version: int = FORMAT_VERSION

    def __post_init__(self) -> None:
        dims = (self.sample_rate, self.frame_size, self.hop, self.num_sources, self.vq_dim,
                self.code_length, self.num_centroids)
        if any(d <= 0 for d in dims):
            raise BitstreamError("Header dimensions must be positive")
        if len(self.model_hash) != HASH_BYTES:
            raise BitstreamError(f"Model hash must be {HASH_BYTES} bytes")
        if len(self.tables) != self.num_sources:
            raise BitstreamError("Need one Huffman table per source")
        if any(t.size != self.num_centroids for t in self.tables):
            raise BitstreamError("Huffman tables must cover every centroid index")
        if any(t.max_length > 255 for t in self.tables):
            raise BitstreamError("Code lengths above 255 bits cannot be stored")

    def to_bytes(self) -> bytes:
        fixed = _HEADER.pack(
            MAGIC,
            self.version,
            self.sample_rate,
            self.frame_size,
            self.hop,
            self.num_sources,
            self.vq_dim,
            self.code_length,
            self.num_centroids,
            0,  # reserved
            self.model_hash,
            self.frame_count,
            self.original_length,
        )
        # code lengths per source, one byte per centroid; canonical codes rebuild from them
        tables = b"".join(bytes(t.lengths) for t in self.tables)
        return fixed + tables

    @property
    def size_bytes(self) -> int:
        return _HEADER.size + self.num_sources * self.num_centroids


class BitWriter:
    def __init__(self) -> None:
        self.buf = bytearray()
        self.acc = 0
        self.bits = 0
        self.code_bits = 0

    def write(self, code: int, length: int) -> None:
        self.acc = (self.acc << length) | code
        self.bits += length
        self.code_bits += length
        while self.bits >= 8:
            self.bits -= 8
            self.buf.append((self.acc >> self.bits) & 0xFF)
        self.acc &= (1 << self.bits) - 1

    def align(self) -> None:
        if self.bits:
            self.buf.append((self.acc << (8 - self.bits)) & 0xFF)
            self.acc = 0
            self.bits = 0

    def getvalue(self) -> bytes:
        self.align()
        return bytes(self.buf)


class BitReader:
    def __init__(self, data: bytes | memoryview, offset: int = 0):
        self.data = data
        self.pos = offset  # byte position
        self.bit = 0  # bits consumed within data[pos]

    def read_bit(self) -> int:
        if self.pos >= len(self.data):
            raise TruncatedStream("Payload ended in the middle of a frame")
        value = (self.data[self.pos] >> (7 - self.bit)) & 1
        self.bit += 1
        if self.bit == 8:
            self.bit = 0
            self.pos += 1
        return value

    def read_symbol(self, table: HuffmanTable) -> int:
        code = 0
        for length in range(1, table.max_length + 1):
            code = (code << 1) | self.read_bit()
            sym = table.decode_map.get((length, code))
            if sym is not None:
                return sym
        raise InvalidSymbol("Bit pattern matches no code in the table")

    def align(self) -> None:
        if self.bit:
            self.bit = 0
            self.pos += 1


@dataclass(frozen=True)
class Bitstream:
    header: CodecHeader
    payload: bytes
    code_bits: int  # Huffman bits without alignment padding

    def to_bytes(self) -> bytes:
        return self.header.to_bytes() + self.payload

    @property
    def payload_bits(self) -> int:
        return 8 * len(self.payload)

    @property
    def duration_s(self) -> float:
        return self.header.frame_count * self.header.hop / self.header.sample_rate

    def measured_bitrate(self, *, include_padding: bool = True) -> float:
        """Bits per second of payload; 0 for an empty stream."""
        if self.header.frame_count == 0:
            return 0.0
        bits = self.payload_bits if include_padding else self.code_bits
        return bits / self.duration_s


def encode_stream(indices: np.ndarray, header: CodecHeader) -> Bitstream:
    """indices: (frame_count, K, P) centroid indices. Each (frame, source) block is byte-aligned."""
    indices = np.asarray(indices)
    expected = (header.frame_count, header.num_sources, header.code_length)
    if indices.size == 0 and header.frame_count == 0:
        indices = indices.reshape(expected)
    if indices.shape != expected:
        raise BitstreamError(f"Index tensor shape {indices.shape} != {expected}")
    if indices.size and (indices.min() < 0 or indices.max() >= header.num_centroids):
        raise InvalidSymbol(f"Indices must lie in [0, {header.num_centroids})")

    writer = BitWriter()
    for frame in indices:
        for k, row in enumerate(frame):
            table = header.tables[k]
            for sym in row.tolist():
                writer.write(*table.code(sym))
            writer.align()
    return Bitstream(header=header, payload=writer.getvalue(), code_bits=writer.code_bits)


def parse_header(data: bytes) -> CodecHeader:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic("Not a SANC stream (bad magic)")
    if len(data) < _HEADER.size:
        raise TruncatedStream("Stream shorter than its fixed header")
    (_, version, sample_rate, frame_size, hop, k, l_dim, p, m, _reserved, model_hash,
     frame_count, original_length) = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"Stream format version {version} is not supported")
    end = _HEADER.size + k * m
    if len(data) < end:
        raise TruncatedStream("Stream ended inside the Huffman tables")
    try:
        tables = tuple(
            HuffmanTable(lengths=tuple(data[_HEADER.size + i * m : _HEADER.size + (i + 1) * m]))
            for i in range(k)
        )
        return CodecHeader(
            sample_rate=sample_rate, frame_size=frame_size, hop=hop, num_sources=k,
            vq_dim=l_dim, code_length=p, num_centroids=m, model_hash=model_hash,
            frame_count=frame_count, original_length=original_length, tables=tables,
            version=version,
        )
    except SanacError as e:
        raise BitstreamError(f"Corrupt header: {e}") from e


def decode_stream(
    data: bytes, *, expected_hash: bytes | None = None
) -> tuple[CodecHeader, np.ndarray]:
    """Inverse of encode_stream(...).to_bytes(): header and (frame_count, K, P) indices."""
    header = parse_header(data)
    if expected_hash is not None and header.model_hash != expected_hash:
        raise HashMismatch(
            "Model hash mismatch: stream was encoded with a different model "
            f"({header.model_hash.hex()[:16]} != {expected_hash.hex()[:16]})"
        )
    reader = BitReader(data, header.size_bytes)
    out = np.zeros((header.frame_count, header.num_sources, header.code_length), dtype=np.int64)
    for f in range(header.frame_count):
        for k in range(header.num_sources):
            table = header.tables[k]
            for p in range(header.code_length):
                out[f, k, p] = reader.read_symbol(table)
            reader.align()
    if reader.pos != len(data):
        raise BitstreamError(f"{len(data) - reader.pos} trailing bytes after the last frame")
    return header, out


def theoretical_bitrate(
    xi_total_bits: float, code_length: int, sample_rate: int, hop: int
) -> float:
    """Bits per second for xi bits per code slot and P slots per hop."""
    return sample_rate * code_length * xi_total_bits / hop


def stack_indices(per_source: Sequence[np.ndarray]) -> np.ndarray:
    """K arrays of (frames, P) -> (frames, K, P)."""
    return np.stack([np.asarray(ix) for ix in per_source], axis=1)
