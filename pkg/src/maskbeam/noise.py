"""Classical noise-power trackers and the multichannel SPP-gated baseline.

All trackers are recursive in time per frequency bin and independent
across bins. minima_track and mcra_track operate on single-channel power
spectrograms (F, T); mcspp_enhance consumes the full multichannel STFT.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from maskbeam.audio import MultichannelSpectrogram
from maskbeam.beamform import CovariancePair, mvdr_weights

ALPHA_SMOOTH = 0.85     # periodogram smoothing
ALPHA_D = 0.95          # noise-estimate recursion
ALPHA_P = 0.2           # speech-indicator smoothing
DELTA_THRESH = 5.0      # smoothed-power / minimum ratio for speech
MIN_WINDOW = 96         # trailing frames for minimum tracking (~3 s at 1024/512)
B_MIN = 1.66            # minimum-statistics bias compensation

MCSPP_SLOPE = 1.0       # logistic slope per dB
MCSPP_OFFSET_DB = 3.0   # logistic midpoint
MCSPP_BLOCK = 25        # frames per beamforming block
MCSPP_INIT_FRAMES = 10


@dataclass
class NoiseTrack:
    lambda_n: np.ndarray   # (F, T) noise PSD estimate, >= 0
    p_speech: np.ndarray   # (F, T) in [0, 1]


def _smooth_periodogram(power: np.ndarray, alpha: float) -> np.ndarray:
    smoothed = np.empty_like(power)
    smoothed[:, 0] = power[:, 0]
    for t in range(1, power.shape[1]):
        smoothed[:, t] = alpha * smoothed[:, t - 1] + (1.0 - alpha) * power[:, t]
    return smoothed


def _trailing_min(values: np.ndarray, window: int) -> np.ndarray:
    """Minimum over the trailing `window` frames (shorter at warm-up)."""
    f, t = values.shape
    padded = np.concatenate(
        [np.full((f, window - 1), np.inf), values], axis=1)
    view = np.lib.stride_tricks.sliding_window_view(padded, window, axis=1)
    return view.min(axis=-1)


def minima_track(power: np.ndarray, window_frames: int = MIN_WINDOW) -> NoiseTrack:
    """Minimum statistics: noise power from the trailing minimum of the
    smoothed periodogram, bias-compensated by B_MIN.

    Arguments:
        power: |Y|^2, shape (F, T)
        window_frames: trailing window length D
    """
    power = np.asarray(power, dtype=np.float64)
    if power.ndim != 2:
        raise ValueError(f"power must be (F, T), got shape {power.shape}")
    if window_frames < 1:
        raise ValueError(f"window_frames must be >= 1, got {window_frames}")
    if window_frames > power.shape[1]:
        warnings.warn(
            f"minimum window {window_frames} exceeds {power.shape[1]} frames; clamping",
            RuntimeWarning, stacklevel=2)
        window_frames = power.shape[1]
    smoothed = _smooth_periodogram(power, ALPHA_SMOOTH)
    lambda_n = B_MIN * _trailing_min(smoothed, window_frames)
    return NoiseTrack(lambda_n=lambda_n, p_speech=np.zeros_like(lambda_n))


def mcra_track(power: np.ndarray, alpha_d: float = ALPHA_D,
               delta_thresh: float = DELTA_THRESH,
               window_frames: int = MIN_WINDOW) -> NoiseTrack:
    """Minima-controlled recursive averaging.

    The speech indicator fires when smoothed power exceeds delta_thresh
    times its trailing minimum; its smoothed version p gates the recursion
    alpha_eff = alpha_d + (1 - alpha_d) * p, so the estimate is held
    (bitwise, once p saturates at 1) while speech is present.
    """
    power = np.asarray(power, dtype=np.float64)
    if power.ndim != 2:
        raise ValueError(f"power must be (F, T), got shape {power.shape}")
    if not 0.0 < alpha_d < 1.0:
        raise ValueError(f"alpha_d must be in (0, 1), got {alpha_d}")
    if window_frames > power.shape[1]:
        warnings.warn(
            f"minimum window {window_frames} exceeds {power.shape[1]} frames; clamping",
            RuntimeWarning, stacklevel=2)
        window_frames = power.shape[1]
    smoothed = _smooth_periodogram(power, ALPHA_SMOOTH)
    local_min = _trailing_min(smoothed, window_frames)
    indicator = (smoothed > delta_thresh * np.maximum(local_min, 1e-300)).astype(np.float64)

    f_bins, t_len = power.shape
    lambda_n = np.empty_like(power)
    p_speech = np.empty_like(power)
    p = np.zeros(f_bins)
    lam = power[:, 0].copy()
    for t in range(t_len):
        p = ALPHA_P * p + (1.0 - ALPHA_P) * indicator[:, t]
        alpha_eff = alpha_d + (1.0 - alpha_d) * p
        lam = alpha_eff * lam + (1.0 - alpha_eff) * power[:, t]
        lambda_n[:, t] = lam
        p_speech[:, t] = p
    return NoiseTrack(lambda_n=lambda_n, p_speech=p_speech)


def wiener_mask_from_track(power: np.ndarray, track: NoiseTrack) -> np.ndarray:
    """Wiener-style gain max(0, 1 - lambda_n / power), clipped to [0, 1]."""
    gain = 1.0 - track.lambda_n / np.maximum(power, 1e-300)
    return np.clip(gain, 0.0, 1.0)


def mcspp_enhance(spec: MultichannelSpectrogram, alpha_d: float = ALPHA_D,
                  slope: float = MCSPP_SLOPE, offset_db: float = MCSPP_OFFSET_DB,
                  block_frames: int = MCSPP_BLOCK) -> MultichannelSpectrogram:
    """Speech-presence-gated recursive covariance tracking plus MVDR.

    Per frame, the multichannel a-posteriori SNR beta = y^H Phi_n^-1 y is
    mapped through a logistic q = sigmoid(slope * (10 log10(beta / C) -
    offset_db)); q gates the noise covariance recursion and its complement
    the speech covariance. MVDR weights are refreshed once per frame block.

    With a single channel this degenerates to an SPP-gated Wiener mask on
    the lone channel (no spatial filtering is possible).
    """
    if not 0.0 < alpha_d < 1.0:
        raise ValueError(f"alpha_d must be in (0, 1), got {alpha_d}")
    y = spec.values.astype(np.complex128)      # (C, F, T)
    c, f_bins, t_len = y.shape
    if c == 1:
        return _mcspp_single_channel(spec, alpha_d, slope, offset_db)

    init = min(MCSPP_INIT_FRAMES, t_len)
    phi_n = np.einsum("cft,dft->fcd", y[:, :, :init], np.conj(y[:, :, :init])) / init
    phi_s = np.zeros_like(phi_n)
    eye = np.eye(c)[None, :, :]
    abs_load = 1e-10 * float(np.mean(np.abs(y) ** 2)) + 1e-300

    def loaded(mats):
        tr = np.real(np.trace(mats, axis1=1, axis2=2)) / c
        return mats + (1e-6 * tr + abs_load)[:, None, None] * eye

    out = np.empty((f_bins, t_len), dtype=np.complex128)
    q_all = np.empty((f_bins, t_len))
    w = None
    for start in range(0, t_len, block_frames):
        stop = min(start + block_frames, t_len)
        for t in range(start, stop):
            yt = y[:, :, t].T                      # (F, C)
            sol = np.linalg.solve(loaded(phi_n), yt[:, :, None])[:, :, 0]
            beta = np.real(np.sum(np.conj(yt) * sol, axis=1))
            snr_db = 10.0 * np.log10(np.maximum(beta / c, 1e-12))
            q = 1.0 / (1.0 + np.exp(-slope * (snr_db - offset_db)))
            q_all[:, t] = q
            outer = yt[:, :, None] * np.conj(yt[:, None, :])
            a_n = (alpha_d + (1.0 - alpha_d) * q)[:, None, None]
            phi_n = a_n * phi_n + (1.0 - a_n) * outer
            a_s = (alpha_d + (1.0 - alpha_d) * (1.0 - q))[:, None, None]
            phi_s = a_s * phi_s + (1.0 - a_s) * outer
        cov = CovariancePair(phi_s=_hermitize(phi_s), phi_n=_hermitize(loaded(phi_n)))
        w = mvdr_weights(cov, ref_channel=0)
        out[:, start:stop] = np.einsum("fc,cft->ft", np.conj(w), y[:, :, start:stop])

    result = MultichannelSpectrogram(values=out[None].astype(np.complex64),
                                     config=spec.config, sample_rate=spec.sample_rate)
    result.speech_presence = q_all  # diagnostic, used by tests
    return result


def _hermitize(mats: np.ndarray) -> np.ndarray:
    return 0.5 * (mats + np.conj(np.transpose(mats, (0, 2, 1))))


def _mcspp_single_channel(spec, alpha_d, slope, offset_db):
    """Documented 1-channel fallback: SPP-gated noise PSD + Wiener gain."""
    power = np.abs(spec.values[0].astype(np.complex128)) ** 2
    f_bins, t_len = power.shape
    init = min(MCSPP_INIT_FRAMES, t_len)
    lam = power[:, :init].mean(axis=1) + 1e-300
    out = np.empty((f_bins, t_len), dtype=np.complex128)
    q_all = np.empty((f_bins, t_len))
    vals = spec.values[0].astype(np.complex128)
    for t in range(t_len):
        beta = power[:, t] / lam
        snr_db = 10.0 * np.log10(np.maximum(beta, 1e-12))
        q = 1.0 / (1.0 + np.exp(-slope * (snr_db - offset_db)))
        q_all[:, t] = q
        a_n = alpha_d + (1.0 - alpha_d) * q
        lam = a_n * lam + (1.0 - a_n) * power[:, t]
        gain = np.clip(1.0 - lam / np.maximum(power[:, t], 1e-300), 0.0, 1.0)
        out[:, t] = vals[:, t] * gain
    result = MultichannelSpectrogram(values=out[None].astype(np.complex64),
                                     config=spec.config, sample_rate=spec.sample_rate)
    result.speech_presence = q_all
    return result
