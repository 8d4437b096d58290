"""Shared test oracles and deterministic fixtures.

The LSTM oracle here is an independent scalar transcription of the
recurrences (plain Python loops, no vectorized shortcuts) used to verify
the inference engine. The weight generators are the checked-in source of
MNW1 fixture files: `random_weights` for equivalence tests and
`gate_weights` for pipeline runs (a hand-built band-energy gate network
whose masks rise with above-average log energy, so fusion experiments see
an informative single-channel mask without any training).
"""

from __future__ import annotations

import math

import numpy as np

from maskbeam.audio import stft
from maskbeam.masks import Mask
from maskbeam.nnet import FeatureStats, LstmDirection, NetWeights
from maskbeam.simulate import synth_scene


# --- scalar-loop LSTM oracle -------------------------------------------------

def _sig(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def oracle_lstm_direction(x, W, U, b):
    """Per-timestep, per-unit LSTM loop over plain lists. x: (T, F) -> (T, H)."""
    t_len = len(x)
    h_dim = len(U[0])
    f_dim = len(x[0])
    h = [0.0] * h_dim
    c = [0.0] * h_dim
    out = []
    for t in range(t_len):
        z = [0.0] * (4 * h_dim)
        for r in range(4 * h_dim):
            acc = b[r]
            for j in range(f_dim):
                acc += W[r][j] * x[t][j]
            for j in range(h_dim):
                acc += U[r][j] * h[j]
            z[r] = acc
        new_h = [0.0] * h_dim
        new_c = [0.0] * h_dim
        for k in range(h_dim):
            i_g = _sig(z[k])
            f_g = _sig(z[h_dim + k])
            g_g = math.tanh(z[2 * h_dim + k])
            o_g = _sig(z[3 * h_dim + k])
            new_c[k] = f_g * c[k] + i_g * g_g
            new_h[k] = o_g * math.tanh(new_c[k])
        h, c = new_h, new_c
        out.append(list(h))
    return out


def oracle_predict(x: np.ndarray, weights: NetWeights) -> np.ndarray:
    """Full bidirectional forward pass via the scalar oracle; returns (F, T)."""
    x_list = x.tolist()
    h_fw = oracle_lstm_direction(x_list, weights.fw.W.tolist(),
                                 weights.fw.U.tolist(), weights.fw.b.tolist())
    h_bw_rev = oracle_lstm_direction(x_list[::-1], weights.bw.W.tolist(),
                                     weights.bw.U.tolist(), weights.bw.b.tolist())
    h_bw = h_bw_rev[::-1]
    t_len = len(x_list)
    f_dim = weights.freq_bins
    h_dim = weights.hidden
    mask = np.empty((f_dim, t_len))
    for t in range(t_len):
        hcat = h_fw[t] + h_bw[t]
        for f in range(f_dim):
            acc = weights.out_b[f]
            for j in range(2 * h_dim):
                acc += weights.out_W[f][j] * hcat[j]
            mask[f, t] = _sig(acc)
    return mask


# --- deterministic weight generators -----------------------------------------

def random_weights(hidden: int, freq_bins: int, seed: int,
                   scale: float = 0.4) -> NetWeights:
    """Arbitrary (non-informative) weights for equivalence/round-trip tests."""
    rng = np.random.default_rng(seed)

    def t(*shape):
        return rng.normal(0.0, scale, size=shape)

    stats = FeatureStats(mean=rng.normal(-30.0, 3.0, freq_bins),
                         std=np.abs(rng.normal(8.0, 1.0, freq_bins)) + 0.5)
    return NetWeights(
        fw=LstmDirection(t(4 * hidden, freq_bins), t(4 * hidden, hidden), t(4 * hidden)),
        bw=LstmDirection(t(4 * hidden, freq_bins), t(4 * hidden, hidden), t(4 * hidden)),
        out_W=t(freq_bins, 2 * hidden),
        out_b=t(freq_bins),
        stats=stats,
    )


def _scene_stats(freq_bins: int, seed: int) -> FeatureStats:
    """Feature statistics measured on a standard reference scene."""
    from maskbeam.nnet import DB_EPS

    scene = synth_scene(seed=seed, channels=2, delays=[0.0, 2.0], snr_db=0.0,
                        duration_s=3.0, noise_kind="diffuse")
    spec = stft(scene.noisy)
    if spec.freq_bins != freq_bins:
        raise ValueError(f"stats generator is pinned to {spec.freq_bins} bins")
    mags = np.abs(spec.values.astype(np.complex128))
    db = 20.0 * np.log10(mags + DB_EPS)
    mean = db.mean(axis=(0, 2))
    std = db.std(axis=(0, 2)) + 1e-3
    return FeatureStats(mean=mean, std=std)


def gate_weights(hidden: int = 32, freq_bins: int = 513, seed: int = 7) -> NetWeights:
    """Band-energy gate network: each hidden unit tracks one frequency band's
    normalized log energy; the output layer maps it back through a logistic.

    Gains: near-memoryless cell (forget ~ 0), input/output gates ~ 0.82, so
    h ~ 0.82 * tanh(0.82 * tanh(1.5 * band_mean(x))). Jitter keeps every
    code path honest without disturbing the monotone energy response.
    """
    rng = np.random.default_rng(seed)
    bands = np.array_split(np.arange(freq_bins), hidden)

    W = np.zeros((4 * hidden, freq_bins))
    b = np.zeros(4 * hidden)
    b[0:hidden] = 1.5                 # input gate ~ 0.82
    b[hidden:2 * hidden] = -4.0       # forget gate ~ 0.018
    b[3 * hidden:4 * hidden] = 1.5    # output gate ~ 0.82
    for k, band in enumerate(bands):
        W[2 * hidden + k, band] = 1.5 / len(band)   # candidate reads band mean
    U = np.zeros((4 * hidden, hidden))

    out_W = np.zeros((freq_bins, 2 * hidden))
    for k, band in enumerate(bands):
        out_W[band, k] = 2.2             # forward block
        out_W[band, hidden + k] = 2.2    # backward block
    out_b = np.zeros(freq_bins)

    jitter = 0.02

    def j(a):
        return a + rng.normal(0.0, jitter, size=a.shape)

    stats = _scene_stats(freq_bins, seed=1000 + seed)
    return NetWeights(
        fw=LstmDirection(j(W), j(U), j(b)),
        bw=LstmDirection(j(W), j(U), j(b)),
        out_W=j(out_W),
        out_b=j(out_b),
        stats=stats,
    )


# --- misc oracles -------------------------------------------------------------

def dft_oracle(frame: np.ndarray) -> np.ndarray:
    """Direct O(N^2) DFT of one real frame (first N/2+1 bins)."""
    n = len(frame)
    k = np.arange(n // 2 + 1)[:, None]
    t = np.arange(n)[None, :]
    return (frame[None, :] * np.exp(-2j * np.pi * k * t / n)).sum(axis=1)


def auc_threshold_sweep(scores: np.ndarray, labels: np.ndarray,
                        num_thresholds: int = 101) -> float:
    """ROC area via a uniform threshold sweep with trapezoidal integration."""
    scores = scores.ravel()
    labels = labels.ravel().astype(bool)
    pos = labels.sum()
    neg = (~labels).sum()
    if pos == 0 or neg == 0:
        raise ValueError("need both positive and negative labels for AUC")
    tpr = [1.0]
    fpr = [1.0]
    for th in np.linspace(0.0, 1.0, num_thresholds):
        pred = scores >= th
        tpr.append(np.logical_and(pred, labels).sum() / pos)
        fpr.append(np.logical_and(pred, ~labels).sum() / neg)
    tpr.append(0.0)
    fpr.append(0.0)
    order = np.argsort(fpr)
    trapezoid = getattr(np, "trapezoid", np.trapz)
    return float(trapezoid(np.asarray(tpr)[order], np.asarray(fpr)[order]))


def oracle_iam_labels(scene, cfg=None, ref_channel: int = 0,
                      threshold: float = 0.5) -> np.ndarray:
    """Binary speech-dominance labels from the clamped oracle amplitude mask."""
    from maskbeam.masks import ideal_amplitude_mask

    clean_spec = stft(scene.clean_image, cfg)
    noisy_spec = stft(scene.noisy, cfg)
    iam = ideal_amplitude_mask(clean_spec, noisy_spec, ref_channel)
    return iam.values > threshold
