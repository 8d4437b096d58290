"""End-to-end enhancement pipeline and report/mask file plumbing.

Every method reduces to: derive a driving mask, beamform the array with
mask-driven MVDR, apply the driving mask as postfilter (raw by default, or
floored when a suppression cap is given), then invert to audio. There is no
randomness anywhere in the enhancement path, so identical inputs and flags
give bit-identical outputs.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from maskbeam.audio import MultichannelSpectrogram, StftConfig, Waveform, istft, stft
from maskbeam.beamform import apply_beamformer, apply_postfilter, estimate_covariances, mvdr_weights
from maskbeam.masks import Mask, apply_mask, average_channel_masks, combine, ideal_amplitude_mask
from maskbeam.nnet import NetWeights, predict_mask
from maskbeam.noise import mcra_track, mcspp_enhance, minima_track, wiener_mask_from_track
from maskbeam.simulate import seg_snr, si_sdr
from maskbeam.spatial import compute_ipd, run_em

MSK1_MAGIC = b"MSK1"

METHODS = (
    "lstm", "messl", "combine:avg", "combine:max", "combine:min",
    "lstm-init-messl", "mcra", "minima", "mcspp", "oracle-iam",
)

SPATIAL_METHODS = ("messl", "combine:avg", "combine:max", "combine:min", "lstm-init-messl")

_COMBINE_MODE = {"combine:avg": "average", "combine:max": "max", "combine:min": "min"}


@dataclass
class EnhanceOptions:
    ref_channel: int = 0
    iters: int = 16
    hold_iters: int = 11
    post_floor_db: float = 0.0   # 0 = apply the raw driving mask (no floor)
    weights: NetWeights | None = None
    clean: Waveform | None = None          # oracle-iam only
    lstm_mask_override: Mask | None = None  # testing hook, replaces the averaged mask


@dataclass
class EnhanceResult:
    audio: Waveform
    mask: Mask                    # driving mask used for MVDR + postfilter
    method: str
    config: dict = field(default_factory=dict)


def _postfilter(spec: MultichannelSpectrogram, mask: Mask, floor_db: float) -> MultichannelSpectrogram:
    if floor_db <= 0:
        return apply_mask(spec, mask)
    return apply_postfilter(spec, mask, floor_db)


def _lstm_average_mask(spec: MultichannelSpectrogram, opts: EnhanceOptions) -> Mask:
    if opts.lstm_mask_override is not None:
        return opts.lstm_mask_override
    if opts.weights is None:
        raise ValueError("method requires --weights with an MNW1 container")
    per_channel = [predict_mask(spec, ch, opts.weights) for ch in range(spec.channels)]
    return average_channel_masks(per_channel)


def driving_mask(spec: MultichannelSpectrogram, method: str, opts: EnhanceOptions) -> Mask:
    """Compute the mask that drives MVDR and the post mask for a method."""
    if method in SPATIAL_METHODS and spec.channels < 2:
        raise ValueError(f"method '{method}' needs >= 2 channels, got {spec.channels}")

    if method == "lstm":
        return _lstm_average_mask(spec, opts)

    if method == "messl":
        obs = compute_ipd(spec)
        return run_em(obs, iters=opts.iters).mask

    if method in _COMBINE_MODE:
        lstm_avg = _lstm_average_mask(spec, opts)
        obs = compute_ipd(spec)
        messl = run_em(obs, iters=opts.iters).mask
        return combine(lstm_avg, messl, _COMBINE_MODE[method])

    if method == "lstm-init-messl":
        lstm_avg = _lstm_average_mask(spec, opts)
        obs = compute_ipd(spec)
        state = run_em(obs, init_mask=lstm_avg, iters=opts.iters,
                       hold_mask=lstm_avg, hold_iters=opts.hold_iters)
        return combine(lstm_avg, state.mask, "average")

    if method in ("mcra", "minima"):
        power = np.abs(spec.values[opts.ref_channel].astype(np.complex128)) ** 2
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            track = mcra_track(power) if method == "mcra" else minima_track(power)
        return Mask(wiener_mask_from_track(power, track))

    if method == "oracle-iam":
        if opts.clean is None:
            raise ValueError("method 'oracle-iam' requires the clean signal (--clean)")
        clean_spec = stft(opts.clean, spec.config)
        return ideal_amplitude_mask(clean_spec, spec, opts.ref_channel)

    raise ValueError(f"unknown method '{method}'; valid methods: {', '.join(METHODS)}")


def enhance_spectrogram(spec: MultichannelSpectrogram, method: str,
                        opts: EnhanceOptions | None = None) -> EnhanceResult:
    """Run one enhancement method on an STFT; see `enhance` for file I/O."""
    opts = opts or EnhanceOptions()
    if method not in METHODS:
        raise ValueError(f"unknown method '{method}'; valid methods: {', '.join(METHODS)}")

    if method == "mcspp":
        enhanced = mcspp_enhance(spec)
        mask = Mask(np.ones((spec.freq_bins, spec.frames)))
    else:
        mask = driving_mask(spec, method, opts)
        cov = estimate_covariances(spec, mask)
        w = mvdr_weights(cov, opts.ref_channel)
        beamformed = apply_beamformer(spec, w)
        post_mask = mask
        if method == "oracle-iam":
            # oracle debug path: the post mask is the oracle of the
            # beamformed pair, not the pre-beamforming reference channel
            clean_beamformed = apply_beamformer(stft(opts.clean, spec.config), w)
            post_mask = ideal_amplitude_mask(clean_beamformed, beamformed, 0)
        enhanced = _postfilter(beamformed, post_mask, opts.post_floor_db)

    audio = istft(enhanced)
    config = {
        "method": method,
        "fft": spec.config.fft_size,
        "hop": spec.config.hop,
        "ref_channel": opts.ref_channel,
        "iters": opts.iters,
        "hold": opts.hold_iters,
        "post_floor_db": opts.post_floor_db,
    }
    return EnhanceResult(audio=audio, mask=mask, method=method, config=config)


def enhance(noisy: Waveform, method: str, opts: EnhanceOptions | None = None,
            cfg: StftConfig | None = None) -> EnhanceResult:
    """Enhance a multichannel waveform with the chosen method."""
    spec = stft(noisy, cfg or StftConfig())
    return enhance_spectrogram(spec, method, opts)


def evaluate(estimate: Waveform, reference: Waveform,
             noisy: Waveform | None = None, utt: str = "",
             method: str = "", config: dict | None = None) -> dict:
    """Score an enhanced signal against a reference; one JSON-able record.

    Lengths are aligned to the shorter signal (a warning fires when they
    differ by more than one STFT frame). With the noisy signal supplied the
    record reports improvement deltas over it.
    """
    if estimate.sample_rate != reference.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: {estimate.sample_rate} vs {reference.sample_rate}")
    n = min(estimate.num_samples, reference.num_samples)
    if abs(estimate.num_samples - reference.num_samples) > 1024 + 512:
        warnings.warn(
            f"length mismatch beyond one frame "
            f"({estimate.num_samples} vs {reference.num_samples}); trimming",
            RuntimeWarning, stacklevel=2)
    est = estimate.samples[0, :n]
    ref = reference.samples[0, :n]
    record = {
        "utt": utt,
        "method": method,
        "si_sdr": si_sdr(est, ref),
        "seg_snr": seg_snr(est, ref, sample_rate=reference.sample_rate),
    }
    if noisy is not None:
        ref_ch = noisy.samples[0, :n]
        record["si_sdr_noisy"] = si_sdr(ref_ch, ref)
        record["seg_snr_noisy"] = seg_snr(ref_ch, ref, sample_rate=reference.sample_rate)
        record["si_sdr_delta"] = record["si_sdr"] - record["si_sdr_noisy"]
        record["seg_snr_delta"] = record["seg_snr"] - record["seg_snr_noisy"]
    if config:
        record["config"] = config
    return record


def aggregate_records(records: list[dict]) -> dict:
    """Mean of the numeric metric fields over per-utterance records."""
    summary = {"aggregate": True, "count": len(records)}
    for key in ("si_sdr", "seg_snr", "si_sdr_noisy", "si_sdr_delta", "seg_snr_delta"):
        vals = [r[key] for r in records if key in r]
        if vals:
            summary[f"mean_{key}"] = float(np.mean(vals))
    return summary


# --- MSK1 mask container ----------------------------------------------------
# magic "MSK1" | u32 freq_bins | u32 frames | float32 payload, frequency-major

def write_mask(mask: Mask, path) -> None:
    with open(path, "wb") as fh:
        fh.write(MSK1_MAGIC)
        fh.write(struct.pack("<II", mask.freq_bins, mask.frames))
        fh.write(np.ascontiguousarray(mask.values, dtype="<f4").tobytes(order="C"))


def read_mask(path) -> Mask:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MSK1_MAGIC:
            raise ValueError(f"bad magic in '{path}': not an MSK1 mask file")
        header = fh.read(8)
        if len(header) != 8:
            raise ValueError(f"truncated MSK1 header in '{path}'")
        freq_bins, frames = struct.unpack("<II", header)
        payload = fh.read()
    expected = 4 * freq_bins * frames
    if len(payload) != expected:
        raise ValueError(
            f"MSK1 payload size {len(payload)} does not match header "
            f"({freq_bins} x {frames} -> {expected} bytes)")
    values = np.frombuffer(payload, dtype="<f4").reshape(freq_bins, frames)
    return Mask(np.clip(values.astype(np.float64), 0.0, 1.0))


def write_report(records: list[dict], path) -> None:
    """JSON-lines report, one object per utterance."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
