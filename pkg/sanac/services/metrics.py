from __future__ import annotations

import numpy as np

from sanac.dsp.audio import AudioSignal
from sanac.errors import SanacError

SISDR_CAP_DB = 100.0


class MetricError(SanacError):
    pass


def _samples(x: AudioSignal | np.ndarray) -> np.ndarray:
    return np.asarray(x.samples if isinstance(x, AudioSignal) else x, dtype=np.float64)


def sisdr(estimate: AudioSignal | np.ndarray, reference: AudioSignal | np.ndarray) -> float:
    """Scale-invariant SDR in dB, capped at +100 dB when the residual vanishes."""
    est, ref = _samples(estimate), _samples(reference)
    if est.shape != ref.shape:
        raise MetricError(f"Length mismatch: estimate {est.shape} vs reference {ref.shape}")
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise MetricError("SiSDR is undefined for a silent reference")
    target = (np.dot(est, ref) / ref_energy) * ref
    residual = est - target
    target_energy = float(np.dot(target, target))
    residual_energy = float(np.dot(residual, residual))
    # a silent or orthogonal estimate has no target component
    if target_energy == 0.0:
        return -SISDR_CAP_DB
    if residual_energy <= 1e-20 * target_energy:
        return SISDR_CAP_DB
    ratio_db = 10.0 * np.log10(target_energy / residual_energy)
    return float(np.clip(ratio_db, -SISDR_CAP_DB, SISDR_CAP_DB))


def sisdr_improvement(
    estimate: AudioSignal | np.ndarray,
    mixture: AudioSignal | np.ndarray,
    reference: AudioSignal | np.ndarray,
) -> float:
    return sisdr(estimate, reference) - sisdr(mixture, reference)
