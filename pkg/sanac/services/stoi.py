from __future__ import annotations

import logging
from collections.abc import Callable
from functools import lru_cache

import numpy as np

from sanac.dsp.audio import AudioSignal

logger = logging.getLogger(__name__)

StoiFn = Callable[[np.ndarray, np.ndarray, int], float]


@lru_cache
def default_backend() -> StoiFn | None:
    """pystoi's stoi(reference, estimate, fs) when installed (extra 'stoi'), else None."""
    # Lazy import keeps STOI optional
    try:
        from pystoi import stoi
    except Exception:  # pragma: no cover
        logger.warning("pystoi is not installed; STOI columns will be empty")
        return None
    return lambda ref, est, fs: float(stoi(ref, est, fs, extended=False))


class StoiAdapter:
    """Boundary to an external STOI implementation; `None` scores mean 'unavailable'."""

    def __init__(self, backend: StoiFn | None = None, *, use_default: bool = True):
        self._backend = backend if backend is not None else (
            default_backend() if use_default else None
        )

    @property
    def available(self) -> bool:
        return self._backend is not None

    def __call__(self, estimate: AudioSignal, reference: AudioSignal) -> float | None:
        if self._backend is None:
            return None
        n = min(len(estimate), len(reference))
        score = self._backend(reference.samples[:n], estimate.samples[:n], reference.sample_rate)
        return float(np.clip(score, 0.0, 1.0))
