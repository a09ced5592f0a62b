from __future__ import annotations

import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from scipy import signal as sps

from sanac.dsp.audio import SAMPLE_RATE, AudioError, AudioSignal, mix_at_snr, read_wav, write_wav
from sanac.dsp.framing import FrameSpec, segment
from sanac.errors import EmptySplitError
from sanac.services.manifest import ManifestRow

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MixedUtterance:
    row: ManifestRow
    speech: AudioSignal
    noise: AudioSignal  # scaled to the row's SNR
    mixture: AudioSignal


@dataclass(frozen=True)
class UtteranceFrames:
    row: ManifestRow
    mixture: np.ndarray  # (n, N)
    speech: np.ndarray
    noise: np.ndarray


@dataclass(frozen=True)
class FrameBatch:
    mixture: torch.Tensor  # (B, N)
    speech: torch.Tensor
    noise: torch.Tensor

    def __len__(self) -> int:
        return int(self.mixture.shape[0])


def load_utterance(row: ManifestRow) -> MixedUtterance:
    speech = read_wav(row.speech_path)
    noise = read_wav(row.noise_path)
    mixture, scaled = mix_at_snr(speech, noise, row.snr_db)
    return MixedUtterance(row=row, speech=speech, noise=scaled, mixture=mixture)


def frame_utterance(utt: MixedUtterance, spec: FrameSpec) -> UtteranceFrames:
    """Segment mixture and both sources with the same geometry so frames stay aligned."""
    return UtteranceFrames(
        row=utt.row,
        mixture=segment(utt.mixture, spec).frames,
        speech=segment(utt.speech, spec).frames,
        noise=segment(utt.noise, spec).frames,
    )


class FrameCorpus:
    """Aligned (mixture, speech, noise) frames of one manifest split."""

    def __init__(self, utterances: Sequence[UtteranceFrames], spec: FrameSpec):
        self.utterances = list(utterances)
        self.spec = spec

    @classmethod
    def from_rows(cls, rows: Sequence[ManifestRow], spec: FrameSpec) -> FrameCorpus:
        utterances = []
        for row in rows:
            try:
                utterances.append(frame_utterance(load_utterance(row), spec))
            except (FileNotFoundError, RuntimeError, AudioError) as e:
                # soundfile raises RuntimeError/LibsndfileError for unreadable files
                logger.warning(f"Skipping {row.utterance_id}: {e}")
        return cls(utterances, spec)

    def __len__(self) -> int:
        return len(self.utterances)

    @property
    def frame_count(self) -> int:
        return sum(u.mixture.shape[0] for u in self.utterances)

    def require_nonempty(self, name: str) -> FrameCorpus:
        if not self.utterances:
            raise EmptySplitError(f"The {name} split has no usable utterances")
        return self

    def batches(
        self, batch_size: int, *, rng: np.random.Generator | None = None
    ) -> Iterator[FrameBatch]:
        """Shuffle utterance order when `rng` is given; frames inside an utterance keep order."""
        order = (
            rng.permutation(len(self.utterances))
            if rng is not None
            else np.arange(len(self.utterances))
        )
        mixture = np.concatenate([self.utterances[i].mixture for i in order])
        speech = np.concatenate([self.utterances[i].speech for i in order])
        noise = np.concatenate([self.utterances[i].noise for i in order])
        for start in range(0, mixture.shape[0], batch_size):
            sl = slice(start, start + batch_size)
            yield FrameBatch(
                mixture=torch.from_numpy(mixture[sl]).float(),
                speech=torch.from_numpy(speech[sl]).float(),
                noise=torch.from_numpy(noise[sl]).float(),
            )

    def sample_mixture_frames(self, count: int, rng: np.random.Generator) -> torch.Tensor:
        frames = np.concatenate([u.mixture for u in self.utterances])
        if frames.shape[0] > count:
            frames = frames[np.sort(rng.choice(frames.shape[0], size=count, replace=False))]
        return torch.from_numpy(frames).float()


def _harmonic_speech(rng: np.random.Generator, n: int, sr: int) -> np.ndarray:
    """Voiced-speech stand-in: harmonic stack with gliding pitch and syllabic envelope."""
    t = np.arange(n) / sr
    f0 = rng.uniform(100.0, 240.0) * (1.0 + 0.1 * np.sin(2 * np.pi * rng.uniform(0.5, 2.0) * t))
    phase = 2 * np.pi * np.cumsum(f0) / sr
    x = sum(np.sin(h * phase) / h for h in range(1, 8))
    envelope = 0.5 * (1.0 - np.cos(2 * np.pi * rng.uniform(3.0, 5.0) * t))
    return x * envelope


def _coloured_noise(rng: np.random.Generator, n: int, sr: int) -> np.ndarray:
    white = rng.standard_normal(n)
    cutoff = rng.uniform(1000.0, 6000.0)
    b, a = sps.butter(2, cutoff / (sr / 2), btype="low")
    return sps.lfilter(b, a, white)


def _normalize(x: np.ndarray, peak: float = 0.5) -> np.ndarray:
    return x * (peak / max(np.max(np.abs(x)), 1e-12))


def write_synthetic_corpus(
    directory: str | Path,
    *,
    num_speech: int,
    num_noise: int = 10,
    duration_s: float = 2.0,
    seed: int = 0,
    sample_rate: int = SAMPLE_RATE,
) -> tuple[Path, Path]:
    """Tone 'speech' and coloured-noise WAVs under directory/speech and directory/noise."""
    directory = Path(directory)
    rng = np.random.default_rng(seed)
    n = int(duration_s * sample_rate)
    speech_dir, noise_dir = directory / "speech", directory / "noise"
    for i in range(num_speech):
        x = _normalize(_harmonic_speech(rng, n, sample_rate))
        write_wav(speech_dir / f"utt{i:04d}.wav", AudioSignal(x, sample_rate))
    for i in range(num_noise):
        x = _normalize(_coloured_noise(rng, n, sample_rate))
        write_wav(noise_dir / f"noise{i:02d}.wav", AudioSignal(x, sample_rate))
    return speech_dir, noise_dir
