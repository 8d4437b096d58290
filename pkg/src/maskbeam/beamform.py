"""Mask-driven spatial covariances, MVDR weights, beamforming, postfilter.

Covariances are per-frequency Hermitian matrices of shape (F, C, C),
accumulated in double precision. MVDR follows the covariance-ratio form
w = (Phi_n^-1 Phi_s / trace(Phi_n^-1 Phi_s)) e_ref, which needs no explicit
steering vector and is invariant to the scale of the speech covariance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from maskbeam.audio import MultichannelSpectrogram
from maskbeam.masks import Mask

DIAG_LOAD = 1e-6


@dataclass
class CovariancePair:
    """Speech / noise spatial covariances, (freq_bins, channels, channels)."""

    phi_s: np.ndarray
    phi_n: np.ndarray
    speech_fallback: np.ndarray = field(default=None)  # bool (F,), degenerate bins
    noise_fallback: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.phi_s.shape != self.phi_n.shape or self.phi_s.ndim != 3 \
                or self.phi_s.shape[1] != self.phi_s.shape[2]:
            raise ValueError(
                f"covariances must share shape (F, C, C), got {self.phi_s.shape} / {self.phi_n.shape}")
        if self.speech_fallback is None:
            self.speech_fallback = np.zeros(self.phi_s.shape[0], dtype=bool)
        if self.noise_fallback is None:
            self.noise_fallback = np.zeros(self.phi_n.shape[0], dtype=bool)

    @property
    def channels(self) -> int:
        return self.phi_s.shape[1]


def _hermitize(mats: np.ndarray) -> np.ndarray:
    return 0.5 * (mats + np.conj(np.transpose(mats, (0, 2, 1))))


def _weighted_cov(y: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-frequency weighted outer-product average.

    Arguments:
        y: complex observations (C, F, T)
        weights: real weights (F, T)
    Return:
        cov (F, C, C) and the bool vector of frequencies whose weights
        summed to ~zero (those fall back to the unweighted covariance).
    """
    wsum = weights.sum(axis=1)
    degenerate = wsum <= 1e-12
    w = weights.copy()
    w[degenerate, :] = 1.0  # fall back to the plain sample covariance
    wsum = w.sum(axis=1)
    cov = np.einsum("cft,dft,ft->fcd", y, np.conj(y), w) / wsum[:, None, None]
    return _hermitize(cov), degenerate


def estimate_covariances(spec: MultichannelSpectrogram, mask: Mask) -> CovariancePair:
    """Mask-weighted speech and (1-mask)-weighted noise covariances.

    Diagonal loading DIAG_LOAD * trace / C is added to the noise covariance
    to keep it invertible. A mask that is all ones or all zeros at some
    frequency degenerates one side there; that side falls back to the
    unweighted covariance and the frequency is flagged.
    """
    if (spec.freq_bins, spec.frames) != mask.values.shape:
        raise ValueError(
            f"mask shape {mask.values.shape} does not match spectrogram "
            f"({spec.freq_bins}, {spec.frames})")
    y = spec.values.astype(np.complex128)
    phi_s, bad_s = _weighted_cov(y, mask.values)
    phi_n, bad_n = _weighted_cov(y, 1.0 - mask.values)
    if bad_s.any() or bad_n.any():
        warnings.warn(
            f"degenerate mask weights at {int(bad_s.sum())} speech / "
            f"{int(bad_n.sum())} noise frequencies; using unweighted covariance there",
            RuntimeWarning, stacklevel=2)
    c = spec.channels
    load = DIAG_LOAD * np.real(np.trace(phi_n, axis1=1, axis2=2)) / c
    phi_n = phi_n + load[:, None, None] * np.eye(c)[None, :, :]
    return CovariancePair(phi_s=phi_s, phi_n=phi_n,
                          speech_fallback=bad_s, noise_fallback=bad_n)


def mvdr_weights(cov: CovariancePair, ref_channel: int = 0) -> np.ndarray:
    """Covariance-ratio MVDR weights, shape (F, C).

    w(f) = (Phi_n^-1 Phi_s / trace(Phi_n^-1 Phi_s)) e_ref
    """
    c = cov.channels
    if not 0 <= ref_channel < c:
        raise ValueError(f"ref_channel {ref_channel} out of range for {c} channels")
    try:
        ratio = np.linalg.solve(cov.phi_n, cov.phi_s)   # (F, C, C)
    except np.linalg.LinAlgError as err:
        raise ValueError(f"noise covariance is singular: {err}") from err
    tr = np.trace(ratio, axis1=1, axis2=2)
    if not np.all(np.isfinite(tr)) or np.any(np.abs(tr) < 1e-300):
        raise ValueError("non-finite or vanishing trace; degenerate covariances")
    return ratio[:, :, ref_channel] / tr[:, None]


def apply_beamformer(spec: MultichannelSpectrogram, w: np.ndarray) -> MultichannelSpectrogram:
    """out(f, t) = w(f)^H y(f, t); returns a single-channel spectrogram."""
    if w.shape != (spec.freq_bins, spec.channels):
        raise ValueError(
            f"weights shape {w.shape} does not match spectrogram "
            f"({spec.freq_bins}, {spec.channels})")
    out = np.einsum("fc,cft->ft", np.conj(w), spec.values.astype(np.complex128))
    return MultichannelSpectrogram(values=out[None].astype(np.complex64),
                                   config=spec.config, sample_rate=spec.sample_rate)


def apply_postfilter(spec: MultichannelSpectrogram, m: Mask,
                     max_suppression_db: float = 0.0) -> MultichannelSpectrogram:
    """Apply the mask as a gain floored at -max_suppression_db.

    A floor of 0 dB disables the postfilter entirely (gain 1 everywhere).
    """
    if max_suppression_db < 0:
        raise ValueError(f"max_suppression_db must be >= 0, got {max_suppression_db}")
    if (spec.freq_bins, spec.frames) != m.values.shape:
        raise ValueError(
            f"mask shape {m.values.shape} does not match spectrogram "
            f"({spec.freq_bins}, {spec.frames})")
    floor = 10.0 ** (-max_suppression_db / 20.0)
    gain = np.maximum(m.values, floor)
    values = spec.values * gain[None, :, :]
    return MultichannelSpectrogram(values=values.astype(np.complex64),
                                   config=spec.config, sample_rate=spec.sample_rate)
