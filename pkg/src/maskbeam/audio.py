"""Waveform I/O and the STFT / iSTFT analysis-synthesis framework.

Shape conventions used across the toolkit:
    Waveform samples:      (channels, num_samples)
    Spectrogram values:    (channels, freq_bins, frames), complex64
Spectrogram values are stored in single precision; all transforms and
accumulations run in double precision.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile

PCM16_SCALE = 32768.0


@dataclass
class Waveform:
    """Multichannel audio snippet, samples normalized to [-1, 1]."""

    samples: np.ndarray  # (channels, num_samples), float
    sample_rate: int

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 2:
            raise ValueError(f"samples must be 1-D or 2-D, got ndim={self.samples.ndim}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain non-finite values")

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate


@dataclass
class StftConfig:
    """Analysis/synthesis configuration.

    The default pair (fft 1024 / hop 512, square-root Hann on both sides)
    satisfies constant overlap-add at 50% overlap, which istft checks.
    """

    fft_size: int = 1024
    hop: int = 512
    window: str = "sqrt_hann"

    def __post_init__(self):
        if self.fft_size <= 0:
            raise ValueError(f"fft_size must be positive, got {self.fft_size}")
        if not 0 < self.hop <= self.fft_size:
            raise ValueError(f"need 0 < hop <= fft_size, got hop={self.hop}, fft_size={self.fft_size}")

    @property
    def freq_bins(self) -> int:
        return self.fft_size // 2 + 1

    def analysis_window(self) -> np.ndarray:
        return _make_window(self.window, self.fft_size)

    def synthesis_window(self) -> np.ndarray:
        # same window on both sides; COLA holds for sqrt-Hann at 50% overlap
        return _make_window(self.window, self.fft_size)


@dataclass
class MultichannelSpectrogram:
    """Complex STFT tensor of shape (channels, freq_bins, frames)."""

    values: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)
    sample_rate: int = 16000

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 3:
            raise ValueError(f"values must be 3-D (channels, freq_bins, frames), got ndim={self.values.ndim}")
        if self.values.shape[1] != self.config.freq_bins:
            raise ValueError(
                f"freq_bins mismatch: values have {self.values.shape[1]}, "
                f"config implies {self.config.freq_bins}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("spectrogram contains non-finite values")

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def freq_bins(self) -> int:
        return self.values.shape[1]

    @property
    def frames(self) -> int:
        return self.values.shape[2]


def _make_window(name: str, size: int) -> np.ndarray:
    """Periodic windows only; periodic Hann is COLA at 50% overlap."""
    n = np.arange(size)
    if name == "sqrt_hann":
        hann = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / size)
        return np.sqrt(hann)
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / size)
    if name == "rect":
        return np.ones(size)
    raise ValueError(f"unknown window '{name}'")


def num_frames(num_samples: int, cfg: StftConfig) -> int:
    """Frame count without padding: floor((N - fft) / hop) + 1."""
    if num_samples < cfg.fft_size:
        raise ValueError(
            f"signal of {num_samples} samples is shorter than one frame ({cfg.fft_size})"
        )
    return (num_samples - cfg.fft_size) // cfg.hop + 1


def load_wav(path) -> Waveform:
    """Read a RIFF WAV file (PCM16 or IEEE float32).

    Returns samples normalized to [-1, 1], channel order preserved,
    shape (channels, num_samples).
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as err:
        raise ValueError(f"unsupported encoding/corrupt file: {path}: {err}") from err
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    elif data.dtype == np.float64:
        samples = data
    else:
        raise ValueError(
            f"unsupported encoding/corrupt file: {path}: dtype {data.dtype} "
            "(expected PCM16 or float32)"
        )
    if samples.ndim == 1:
        samples = samples[None, :]
    else:
        samples = samples.T  # wavfile gives (num_samples, channels)
    return Waveform(samples=samples, sample_rate=int(rate))


def save_wav(w: Waveform, path, float32: bool = False) -> None:
    """Write a WAV file, PCM16 by default (float32 optional).

    PCM16 quantization error is at most 2**-15 per sample; writing is
    deterministic, so re-saving a loaded copy reproduces the data chunk.
    """
    if not np.all(np.isfinite(w.samples)):
        raise ValueError("refusing to write non-finite samples")
    data = w.samples.T  # (num_samples, channels)
    if data.shape[1] == 1:
        data = data[:, 0]
    if float32:
        wavfile.write(path, w.sample_rate, data.astype(np.float32))
    else:
        quantized = np.clip(np.round(data * PCM16_SCALE), -32768, 32767).astype(np.int16)
        wavfile.write(path, w.sample_rate, quantized)


def stft(w: Waveform, cfg: StftConfig | None = None) -> MultichannelSpectrogram:
    """Short-time Fourier transform without padding.

    Arguments:
        w: input waveform, any channel count
        cfg: analysis configuration (default 1024/512 sqrt-Hann)
    Return:
        spectrogram of shape (channels, fft_size // 2 + 1, frames) with
        frames = floor((num_samples - fft_size) / hop) + 1
    """
    cfg = cfg or StftConfig()
    frames = num_frames(w.num_samples, cfg)
    window = cfg.analysis_window()
    idx = np.arange(cfg.fft_size)[None, :] + cfg.hop * np.arange(frames)[:, None]
    # (channels, frames, fft_size) in double precision
    segments = w.samples[:, idx] * window[None, None, :]
    spec = np.fft.rfft(segments, axis=-1)
    values = np.transpose(spec, (0, 2, 1)).astype(np.complex64)
    return MultichannelSpectrogram(values=values, config=cfg, sample_rate=w.sample_rate)


def _cola_denominator(cfg: StftConfig, frames: int, length: int) -> np.ndarray:
    win = cfg.analysis_window() * cfg.synthesis_window()
    denom = np.zeros(length)
    for t in range(frames):
        denom[t * cfg.hop:t * cfg.hop + cfg.fft_size] += win
    return denom


def check_cola(cfg: StftConfig, tol: float = 1e-8) -> None:
    """Raise if the window pair misses constant overlap-add at cfg.hop."""
    # probe the steady-state region of a few overlapping frames
    frames = 8
    length = (frames - 1) * cfg.hop + cfg.fft_size
    denom = _cola_denominator(cfg, frames, length)
    interior = denom[cfg.fft_size:length - cfg.fft_size]
    if interior.size == 0 or np.max(np.abs(interior - interior[0])) > tol * max(interior[0], tol):
        raise ValueError(
            f"window '{cfg.window}' with hop {cfg.hop} does not satisfy "
            "constant overlap-add; cannot invert"
        )


def istft(spec: MultichannelSpectrogram) -> Waveform:
    """Inverse STFT by weighted overlap-add.

    Requires a COLA-compliant window pair. The round trip
    istft(stft(w)) reconstructs the interior of w (one fft_size of edge
    samples excluded at each end) to within 1e-6 relative L2 error.
    """
    cfg = spec.config
    check_cola(cfg)
    frames = spec.frames
    length = (frames - 1) * cfg.hop + cfg.fft_size
    syn = cfg.synthesis_window()
    segments = np.fft.irfft(
        np.transpose(spec.values.astype(np.complex128), (0, 2, 1)),
        n=cfg.fft_size, axis=-1,
    )
    segments *= syn[None, None, :]
    out = np.zeros((spec.channels, length))
    for t in range(frames):
        out[:, t * cfg.hop:t * cfg.hop + cfg.fft_size] += segments[:, t, :]
    denom = _cola_denominator(cfg, frames, length)
    nonzero = denom > 1e-10
    out[:, nonzero] /= denom[nonzero]
    return Waveform(samples=out, sample_rate=spec.sample_rate)
