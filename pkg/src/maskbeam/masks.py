"""Time-frequency mask oracles and mask algebra.

Masks are real matrices of shape (freq_bins, frames) with values in
[0, 1], matching the spectrogram they apply to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from maskbeam.audio import MultichannelSpectrogram

COMBINE_MODES = ("average", "max", "min")


@dataclass
class Mask:
    """[0, 1]-valued gain matrix, frequency-major: values[f, t]."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"mask must be 2-D (freq_bins, frames), got ndim={self.values.ndim}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("mask contains non-finite values")
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise ValueError(
                f"mask values outside [0, 1]: min={self.values.min()}, max={self.values.max()}"
            )

    @property
    def freq_bins(self) -> int:
        return self.values.shape[0]

    @property
    def frames(self) -> int:
        return self.values.shape[1]

    def shape(self):
        return self.values.shape


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def _magnitude_ratio_mask(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(den)
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    return np.clip(out, 0.0, 1.0)


def ideal_amplitude_mask(clean: MultichannelSpectrogram, noisy: MultichannelSpectrogram,
                         channel: int = 0) -> Mask:
    """Oracle |clean| / |noisy| ratio, clamped to [0, 1].

    Bins where the noisy magnitude is exactly zero map to 0.
    """
    _check_same_shape(clean.values, noisy.values, "ideal_amplitude_mask")
    s = np.abs(clean.values[channel].astype(np.complex128))
    y = np.abs(noisy.values[channel].astype(np.complex128))
    return Mask(_magnitude_ratio_mask(s, y))


def phase_sensitive_mask(clean: MultichannelSpectrogram, noisy: MultichannelSpectrogram,
                         channel: int = 0) -> Mask:
    """cos(phase difference) * |clean| / |noisy|, clamped to [0, 1]."""
    _check_same_shape(clean.values, noisy.values, "phase_sensitive_mask")
    s = clean.values[channel].astype(np.complex128)
    y = noisy.values[channel].astype(np.complex128)
    ratio = _magnitude_ratio_mask(np.abs(s), np.abs(y))
    cos_dphi = np.cos(np.angle(s) - np.angle(y))
    return Mask(np.clip(cos_dphi * ratio, 0.0, 1.0))


def average_channel_masks(masks: list[Mask]) -> Mask:
    """Pointwise arithmetic mean of per-channel masks."""
    if not masks:
        raise ValueError("need at least one mask to average")
    for m in masks[1:]:
        _check_same_shape(masks[0].values, m.values, "average_channel_masks")
    stack = np.stack([m.values for m in masks], axis=0)
    return Mask(np.mean(stack, axis=0))


def combine(a: Mask, b: Mask, mode: str) -> Mask:
    """Fuse two masks pointwise: 'average', 'max' or 'min'."""
    _check_same_shape(a.values, b.values, "combine")
    if mode == "average":
        return Mask(0.5 * (a.values + b.values))
    if mode == "max":
        return Mask(np.maximum(a.values, b.values))
    if mode == "min":
        return Mask(np.minimum(a.values, b.values))
    raise ValueError(f"unknown combine mode '{mode}' (expected one of {COMBINE_MODES})")


def apply_mask(spec: MultichannelSpectrogram, m: Mask, channel: int | None = None) -> MultichannelSpectrogram:
    """Multiply spectrogram magnitudes by the mask, phases unchanged.

    With channel=None the mask is broadcast over all channels; otherwise a
    single-channel spectrogram for that channel is returned.
    """
    if (spec.freq_bins, spec.frames) != m.shape():
        raise ValueError(
            f"apply_mask: mask shape {m.shape()} does not match "
            f"spectrogram ({spec.freq_bins}, {spec.frames})"
        )
    if channel is None:
        values = spec.values * m.values[None, :, :]
    else:
        values = spec.values[channel:channel + 1] * m.values[None, :, :]
    return MultichannelSpectrogram(values=values.astype(np.complex64),
                                   config=spec.config, sample_rate=spec.sample_rate)
