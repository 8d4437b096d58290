"""Supervised reference construction from a close-talk microphone.

The close mic never enters the output path directly; it only supplies
frequency-dependent voice-activity masks (energy percentile gates) that
steer mask-based MVDR beamforming of the array channels and a floored
postfilter, so its recording artifacts cannot leak into the reference.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import correlate

from maskbeam.audio import MultichannelSpectrogram, StftConfig, Waveform, istft, stft
from maskbeam.beamform import apply_beamformer, apply_postfilter, estimate_covariances, mvdr_weights
from maskbeam.masks import Mask

ADAPT_PERCENTILE = 85.0
POST_PERCENTILE = 75.0
POST_SUPPRESSION_DB = 15.0


def percentile_vad(close_spec: MultichannelSpectrogram, percentile: float,
                   channel: int = 0) -> Mask:
    """Binary per-band activity mask: 1 where energy strictly exceeds the
    per-frequency percentile over the utterance.

    Energy is squared magnitude; percentiles interpolate linearly between
    order statistics, so with distinct energies over T frames exactly
    floor(T * (1 - p/100)) frames fire per band.
    """
    if not 0.0 <= percentile < 100.0:
        raise ValueError(f"percentile must be in [0, 100), got {percentile}")
    energy = np.abs(close_spec.values[channel].astype(np.complex128)) ** 2
    if energy.size == 0:
        raise ValueError("empty spectrogram")
    thresholds = np.percentile(energy, percentile, axis=1)
    return Mask((energy > thresholds[:, None]).astype(np.float64))


def align_to_channel(close: Waveform, array: Waveform) -> Waveform:
    """Shift the close-mic signal by the best integer cross-correlation lag
    against array channel 0, zero-padded back to its original length."""
    x = close.samples[0]
    ref = array.samples[0]
    corr = correlate(x, ref, mode="full", method="fft")
    lag = int(np.argmax(corr)) - (len(ref) - 1)   # x is ref delayed by `lag`
    out = np.zeros_like(x)
    if lag > 0:
        out[:len(x) - lag] = x[lag:]
    elif lag < 0:
        out[-lag:] = x[:len(x) + lag]
    else:
        out = x.copy()
    return Waveform(out[None, :], close.sample_rate)


def build_reference(array: Waveform, close: Waveform,
                    cfg: StftConfig | None = None) -> Waveform:
    """Construct the enhanced reference for a raw array recording.

    The 85th-percentile close-mic gate adapts the MVDR covariances, the
    75th-percentile gate forms the postfilter mask applied with at most
    15 dB of suppression. Output comes from the array channels only.
    """
    cfg = cfg or StftConfig()
    if close.channels != 1:
        close = Waveform(close.samples[:1], close.sample_rate)
    if close.num_samples != array.num_samples:
        raise ValueError(
            f"close mic has {close.num_samples} samples, array has {array.num_samples}")
    close = align_to_channel(close, array)
    array_spec = stft(array, cfg)
    close_spec = stft(close, cfg)

    adapt_mask = percentile_vad(close_spec, ADAPT_PERCENTILE)
    if not np.any(adapt_mask.values):
        raise ValueError(
            "degenerate covariance: close-mic VAD selected no frames "
            "(close microphone is silent or constant)")
    post_mask = percentile_vad(close_spec, POST_PERCENTILE)

    cov = estimate_covariances(array_spec, adapt_mask)
    w = mvdr_weights(cov, ref_channel=0)
    beamformed = apply_beamformer(array_spec, w)
    filtered = apply_postfilter(beamformed, post_mask, POST_SUPPRESSION_DB)
    return istft(filtered)
