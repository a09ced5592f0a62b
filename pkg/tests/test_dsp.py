from __future__ import annotations

import numpy as np
import pytest

from sanac.dsp.audio import (
    AudioError,
    AudioSignal,
    SampleRateMismatch,
    SilentSignalError,
    fit_noise_length,
    measure_snr_db,
    mix_at_snr,
    read_wav,
    signal_power,
    write_wav,
)
from sanac.dsp.framing import FrameSequence, FrameSpec, overlap_add, segment


def test_frame_counts():
    spec = FrameSpec()
    seq = segment(AudioSignal(np.ones(960)), spec)
    assert len(seq) == 2
    assert [seq.start(i) for i in range(len(seq))] == [0, 448]

    seq = segment(AudioSignal(np.ones(512)), spec)
    assert len(seq) == 1
    assert np.all(seq.frames[0] == 1.0)


def test_thousand_samples_use_three_frames_and_keep_every_sample():
    spec = FrameSpec()
    x = np.arange(1, 1001, dtype=np.float64) / 1000
    seq = segment(AudioSignal(x), spec)
    assert len(seq) == 3
    assert seq.original_length == 1000
    # last frame starts at 896: 104 real samples, 408 zeros
    assert np.all(seq.frames[2, 104:] == 0.0)
    assert seq.frames[2, 103] == x[999]


def test_short_signal_is_one_padded_frame():
    seq = segment(AudioSignal(np.ones(100)), FrameSpec())
    assert seq.frames.shape == (1, 512)
    assert np.all(seq.frames[0, 100:] == 0.0)


def test_segment_rejects_empty_signal():
    with pytest.raises(AudioError):
        segment(AudioSignal(np.zeros(0)), FrameSpec())


def test_window_halves_are_complementary():
    rise, fall = FrameSpec().crossfade_halves()
    assert rise.shape == fall.shape == (64,)
    np.testing.assert_allclose(rise + fall, 1.0, atol=1e-9)


def test_segment_then_overlap_add_is_identity(rng):
    spec = FrameSpec()
    lengths = [1, 511, 512, 513, 10 * spec.hop]
    lengths += rng.integers(1, 10 * spec.hop + 1, size=200 - len(lengths)).tolist()
    for length in lengths:
        x = rng.uniform(-1, 1, size=length)
        y = overlap_add(segment(AudioSignal(x), spec))
        assert len(y) == length
        assert np.max(np.abs(y.samples - x)) <= 1e-6


def test_constant_signal_survives_crossfade():
    y = overlap_add(segment(AudioSignal(np.ones(3000)), FrameSpec()))
    np.testing.assert_allclose(y.samples, 1.0, atol=1e-12)


def test_single_frame_is_unchanged(rng):
    frame = rng.standard_normal(512)
    seq = FrameSequence(frames=frame[None, :], original_length=512)
    np.testing.assert_array_equal(overlap_add(seq).samples, frame)


def test_empty_sequence_gives_empty_signal():
    seq = FrameSequence(frames=np.zeros((0, 512)))
    assert len(overlap_add(seq)) == 0


def test_frame_spec_validates_hop():
    with pytest.raises(AudioError):
        FrameSpec(frame_size=512, hop=400, crossfade_len=64)


def test_mix_equal_power_at_zero_db_keeps_gain_one(rng):
    speech = AudioSignal(rng.choice([-0.5, 0.5], size=4000))
    noise = AudioSignal(rng.choice([-0.5, 0.5], size=4000))
    mixture, scaled = mix_at_snr(speech, noise, 0.0)
    np.testing.assert_allclose(scaled.samples, noise.samples)
    np.testing.assert_allclose(mixture.samples, speech.samples + noise.samples)


def test_mix_at_five_db_gain(rng):
    speech = AudioSignal(rng.choice([-0.5, 0.5], size=4000))
    noise = AudioSignal(rng.choice([-0.5, 0.5], size=4000))
    _, scaled = mix_at_snr(speech, noise, 5.0)
    gain = scaled.samples[0] / noise.samples[0]
    assert gain == pytest.approx(10 ** (-5 / 20), rel=1e-12)
    assert measure_snr_db(speech, scaled) == pytest.approx(5.0, abs=1e-6)


@pytest.mark.parametrize("snr_db", [-5.0, 0.0, 5.0, 12.5])
def test_mixed_snr_matches_request(snr_db, rng):
    speech = AudioSignal(rng.standard_normal(3000))
    noise = AudioSignal(rng.standard_normal(1700))
    mixture, scaled = mix_at_snr(speech, noise, snr_db)
    assert len(mixture) == len(scaled) == 3000
    assert measure_snr_db(speech, scaled) == pytest.approx(snr_db, abs=1e-6)


def test_mix_rejects_silent_inputs(rng):
    speech = AudioSignal(rng.standard_normal(100))
    with pytest.raises(SilentSignalError):
        mix_at_snr(speech, AudioSignal(np.zeros(100)), 0.0)
    with pytest.raises(SilentSignalError):
        mix_at_snr(AudioSignal(np.zeros(100)), speech, 0.0)


def test_fit_noise_length_loops_and_truncates():
    noise = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(fit_noise_length(noise, 7), [1, 2, 3, 1, 2, 3, 1])
    np.testing.assert_array_equal(fit_noise_length(noise, 2), [1, 2])
    assert signal_power(np.array([2.0, -2.0])) == 4.0


def test_wav_round_trip_is_pcm16(tmp_path, rng):
    x = np.round(rng.uniform(-0.9, 0.9, size=1600) * 32768) / 32768
    path = tmp_path / "x.wav"
    write_wav(path, AudioSignal(x))
    y = read_wav(path)
    assert y.sample_rate == 16000
    np.testing.assert_array_equal(y.samples, x)


def test_read_wav_checks_rate(tmp_path, rng):
    path = tmp_path / "x.wav"
    write_wav(path, AudioSignal(rng.uniform(-0.5, 0.5, 800), sample_rate=8000))
    with pytest.raises(SampleRateMismatch):
        read_wav(path)


def test_audio_signal_rejects_non_finite():
    with pytest.raises(AudioError):
        AudioSignal(np.array([0.0, np.nan]))
