from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from sanac.dsp.audio import SAMPLE_RATE, AudioError, AudioSignal


@dataclass(frozen=True)
class FrameSpec:
    frame_size: int = 512
    hop: int = 448
    crossfade_len: int = 64

    def __post_init__(self) -> None:
        if self.frame_size <= 0 or self.crossfade_len < 0:
            raise AudioError("frame_size must be positive and crossfade_len non-negative")
        if self.hop != self.frame_size - self.crossfade_len:
            raise AudioError("hop must equal frame_size - crossfade_len")
        if self.crossfade_len >= self.frame_size:
            raise AudioError("crossfade_len must be shorter than frame_size")

    @property
    def window_length(self) -> int:
        return 2 * self.crossfade_len

    def crossfade_halves(self) -> tuple[np.ndarray, np.ndarray]:
        """Rising and falling halves of a periodic Hann window of length 2*crossfade_len."""
        n = np.arange(self.window_length, dtype=np.float64)
        window = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / self.window_length)
        return window[: self.crossfade_len], window[self.crossfade_len :]

    def frame_count(self, length: int) -> int:
        if length <= self.frame_size:
            return 1
        return math.ceil((length - self.frame_size) / self.hop) + 1


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (n_frames, frame_size)
    spec: FrameSpec = field(default_factory=FrameSpec)
    original_length: int = 0
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.size == 0:
            frames = frames.reshape(0, self.spec.frame_size)
        if frames.ndim != 2 or frames.shape[1] != self.spec.frame_size:
            raise AudioError(
                f"Frames must be (n, {self.spec.frame_size}), got {frames.shape}"
            )
        object.__setattr__(self, "frames", frames.reshape(-1, self.spec.frame_size))

    def __len__(self) -> int:
        return int(self.frames.shape[0])

    def start(self, i: int) -> int:
        return i * self.spec.hop

    def with_frames(self, frames: np.ndarray) -> FrameSequence:
        """Same geometry, synthesized content (e.g. decoder output)."""
        return FrameSequence(
            frames=frames,
            spec=self.spec,
            original_length=self.original_length,
            sample_rate=self.sample_rate,
        )


def segment(signal: AudioSignal, spec: FrameSpec | None = None) -> FrameSequence:
    spec = spec or FrameSpec()
    length = len(signal)
    if length == 0:
        raise AudioError("Cannot segment an empty signal")

    n_frames = spec.frame_count(length)
    padded_len = (n_frames - 1) * spec.hop + spec.frame_size
    padded = np.zeros(padded_len, dtype=np.float64)
    padded[:length] = signal.samples

    starts = np.arange(n_frames) * spec.hop
    frames = padded[starts[:, None] + np.arange(spec.frame_size)[None, :]]
    return FrameSequence(
        frames=frames, spec=spec, original_length=length, sample_rate=signal.sample_rate
    )


def overlap_add(seq: FrameSequence) -> AudioSignal:
    """Cross-fade adjacent frames over the overlap with complementary Hann halves."""
    spec = seq.spec
    n_frames = len(seq)
    if n_frames == 0:
        return AudioSignal(samples=np.zeros(0), sample_rate=seq.sample_rate)

    rise, fall = spec.crossfade_halves()
    c = spec.crossfade_len
    out = np.zeros((n_frames - 1) * spec.hop + spec.frame_size, dtype=np.float64)
    for i, frame in enumerate(seq.frames):
        weights = np.ones(spec.frame_size, dtype=np.float64)
        if i > 0 and c:
            weights[:c] = rise
        if i < n_frames - 1 and c:
            weights[spec.frame_size - c :] = fall
        start = seq.start(i)
        out[start : start + spec.frame_size] += frame * weights

    length = seq.original_length or out.shape[0]
    return AudioSignal(samples=out[:length], sample_rate=seq.sample_rate)
