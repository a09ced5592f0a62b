from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import soundfile as sf

from sanac.errors import SanacError

logger = logging.getLogger(__name__)

SAMPLE_RATE = 16000
PCM16_SCALE = 32768.0


class AudioError(SanacError):
    pass


class SampleRateMismatch(AudioError):
    pass


class SilentSignalError(AudioError):
    pass


@dataclass(frozen=True)
class AudioSignal:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioError(f"Expected mono samples, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise AudioError("sample_rate must be positive")
        if not np.all(np.isfinite(samples)):
            raise AudioError("Signal contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate


def read_wav(path: str | Path, *, expected_rate: int = SAMPLE_RATE) -> AudioSignal:
    """Read a 16-bit PCM mono WAV as floats in [-1, 1)."""
    data, rate = sf.read(str(path), dtype="int16", always_2d=True)
    if data.shape[1] != 1:
        raise AudioError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if rate != expected_rate:
        raise SampleRateMismatch(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    return AudioSignal(samples=data[:, 0].astype(np.float64) / PCM16_SCALE, sample_rate=rate)


def write_wav(path: str | Path, signal: AudioSignal) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ints = np.clip(np.round(signal.samples * PCM16_SCALE), -32768, 32767).astype(np.int16)
    sf.write(str(path), ints, signal.sample_rate, subtype="PCM_16")


def signal_power(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return 0.0
    return float(np.mean(x * x))


def fit_noise_length(noise: np.ndarray, length: int) -> np.ndarray:
    """Loop or truncate noise to exactly `length` samples."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.size == 0:
        raise SilentSignalError("Noise signal is empty")
    if noise.size < length:
        reps = length // noise.size + 1
        noise = np.tile(noise, reps)
    return noise[:length]


def measure_snr_db(speech: AudioSignal, noise: AudioSignal) -> float:
    p_s = signal_power(speech.samples)
    p_n = signal_power(noise.samples)
    if p_s == 0.0 or p_n == 0.0:
        raise SilentSignalError("SNR is undefined for a zero-power signal")
    return 10.0 * float(np.log10(p_s / p_n))


def mix_at_snr(
    speech: AudioSignal, noise: AudioSignal, snr_db: float
) -> tuple[AudioSignal, AudioSignal]:
    """Scale noise to hit `snr_db` against speech; return (mixture, scaled noise)."""
    if speech.sample_rate != noise.sample_rate:
        raise SampleRateMismatch(
            f"Speech at {speech.sample_rate} Hz, noise at {noise.sample_rate} Hz"
        )
    noise_samples = fit_noise_length(noise.samples, len(speech))

    p_s = signal_power(speech.samples)
    p_n = signal_power(noise_samples)
    if p_s == 0.0:
        raise SilentSignalError("Speech has zero power; SNR undefined")
    if p_n == 0.0:
        raise SilentSignalError("Noise has zero power; SNR undefined")

    gain = np.sqrt(p_s / (p_n * 10.0 ** (snr_db / 10.0)))
    scaled = gain * noise_samples
    mixture = speech.samples + scaled
    return (
        AudioSignal(samples=mixture, sample_rate=speech.sample_rate),
        AudioSignal(samples=scaled, sample_rate=speech.sample_rate),
    )
