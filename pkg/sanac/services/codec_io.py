from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from sanac.bitstream.huffman import HuffmanTable, table_from_counts
from sanac.bitstream.stream import (
    Bitstream,
    CodecHeader,
    decode_stream,
    encode_stream,
    stack_indices,
)
from sanac.dsp.audio import AudioSignal
from sanac.dsp.framing import FrameSequence, overlap_add, segment
from sanac.services.checkpoint import Checkpoint, CheckpointError
from sanac.services.training import hard_indices

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DecodedAudio:
    mixture: AudioSignal
    sources: tuple[AudioSignal, ...]  # (speech, noise); empty for the baseline


def huffman_tables(ckpt: Checkpoint) -> tuple[HuffmanTable, ...]:
    if ckpt.usage_counts is None:
        raise CheckpointError("Checkpoint carries no usage counts; it cannot drive the bitstream")
    return tuple(table_from_counts(c) for c in np.asarray(ckpt.usage_counts))


def encode_indices(ckpt: Checkpoint, signal: AudioSignal) -> tuple[FrameSequence, np.ndarray]:
    """Frames and their (frame_count, K, P) hard centroid indices."""
    frames = segment(signal, ckpt.frames)
    tensor = torch.from_numpy(frames.frames).float()
    return frames, stack_indices(hard_indices(ckpt.codec, tensor))


def build_header(ckpt: Checkpoint, frames: FrameSequence) -> CodecHeader:
    cfg = ckpt.codec.cfg
    return CodecHeader(
        sample_rate=frames.sample_rate,
        frame_size=ckpt.frames.frame_size,
        hop=ckpt.frames.hop,
        num_sources=ckpt.codec.num_codebooks,
        vq_dim=cfg.vq_dim,
        code_length=cfg.code_length,
        num_centroids=cfg.num_centroids,
        model_hash=ckpt.content_hash,
        frame_count=len(frames),
        original_length=frames.original_length,
        tables=huffman_tables(ckpt),
    )


def encode_signal(ckpt: Checkpoint, signal: AudioSignal) -> Bitstream:
    frames, indices = encode_indices(ckpt, signal)
    return encode_stream(indices, build_header(ckpt, frames))


@torch.no_grad()
def decode_indices(
    ckpt: Checkpoint, indices: np.ndarray, *, original_length: int, sample_rate: int
) -> DecodedAudio:
    """(frame_count, K, P) indices -> overlap-added mixture and per-source waveforms."""
    codec = ckpt.codec
    codec.eval()
    idx = torch.as_tensor(np.asarray(indices), dtype=torch.long)
    per_source = [idx[:, k, :] for k in range(idx.shape[1])]
    sources, mixture = codec.decode_indices(per_source)

    def _ola(frames: torch.Tensor) -> AudioSignal:
        seq = FrameSequence(
            frames=frames.double().numpy(),
            spec=ckpt.frames,
            original_length=original_length,
            sample_rate=sample_rate,
        )
        return overlap_add(seq)

    decoded_sources: tuple[AudioSignal, ...] = ()
    if sources is not None:
        decoded_sources = tuple(_ola(sources[:, k]) for k in range(sources.shape[1]))
    return DecodedAudio(mixture=_ola(mixture), sources=decoded_sources)


def decode_bitstream(ckpt: Checkpoint, data: bytes) -> DecodedAudio:
    header, indices = decode_stream(data, expected_hash=ckpt.content_hash)
    if header.frame_count == 0:
        empty = AudioSignal(np.zeros(0), header.sample_rate)
        n_sources = header.num_sources if header.num_sources > 1 else 0
        return DecodedAudio(mixture=empty, sources=(empty,) * n_sources)
    return decode_indices(
        ckpt, indices, original_length=header.original_length, sample_rate=header.sample_rate
    )


def write_bitstream(path: str | Path, stream: Bitstream) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(stream.to_bytes())
    return path
