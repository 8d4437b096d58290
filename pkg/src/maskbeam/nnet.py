"""Deterministic BLSTM mask inference and the MNW1 weight container.

Weight layout is pinned so containers are portable across implementations:
gate order [input, forget, candidate, output] stacked along the first axis,
row-major float32 tensors. Inference runs whole-utterance in float64 and is
pure given the loaded weights.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from maskbeam.audio import MultichannelSpectrogram
from maskbeam.masks import Mask

MNW1_MAGIC = b"MNW1"
DB_EPS = 1e-8

REQUIRED_TENSORS = (
    "lstm.fw.W", "lstm.fw.U", "lstm.fw.b",
    "lstm.bw.W", "lstm.bw.U", "lstm.bw.b",
    "out.W", "out.b", "stats.mean", "stats.std",
)


@dataclass
class FeatureStats:
    """Per-frequency mean/std of the dB input features."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("stats mean/std must be 1-D vectors of equal length")
        if np.any(self.std <= 0):
            raise ValueError("feature std must be positive")


@dataclass
class LstmDirection:
    """One direction's parameters: W (4H, F), U (4H, H), b (4H,)."""

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    @property
    def hidden(self) -> int:
        return self.U.shape[1]


@dataclass
class NetWeights:
    fw: LstmDirection
    bw: LstmDirection
    out_W: np.ndarray   # (F, 2H)
    out_b: np.ndarray   # (F,)
    stats: FeatureStats

    def __post_init__(self):
        h, f = self.hidden, self.freq_bins
        checks = {
            "lstm.fw.W": (self.fw.W, (4 * h, f)),
            "lstm.fw.U": (self.fw.U, (4 * h, h)),
            "lstm.fw.b": (self.fw.b, (4 * h,)),
            "lstm.bw.W": (self.bw.W, (4 * h, f)),
            "lstm.bw.U": (self.bw.U, (4 * h, h)),
            "lstm.bw.b": (self.bw.b, (4 * h,)),
            "out.W": (self.out_W, (f, 2 * h)),
            "out.b": (self.out_b, (f,)),
            "stats.mean": (self.stats.mean, (f,)),
            "stats.std": (self.stats.std, (f,)),
        }
        for name, (tensor, want) in checks.items():
            if tensor.shape != want:
                raise ValueError(f"tensor '{name}' has shape {tensor.shape}, expected {want}")
            if not np.all(np.isfinite(tensor)):
                raise ValueError(f"tensor '{name}' contains non-finite values")

    @property
    def hidden(self) -> int:
        return self.fw.U.shape[1]

    @property
    def freq_bins(self) -> int:
        return self.out_W.shape[0]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def normalize_features(spec: MultichannelSpectrogram, channel: int,
                       stats: FeatureStats) -> np.ndarray:
    """Per-frequency standardized dB magnitudes, shape (frames, F).

    x = (20 log10(|Y| + 1e-8) - mean) / std
    """
    if stats.mean.shape[0] != spec.freq_bins:
        raise ValueError(
            f"stats cover {stats.mean.shape[0]} bins, spectrogram has {spec.freq_bins}")
    mag = np.abs(spec.values[channel].astype(np.complex128))
    db = 20.0 * np.log10(mag + DB_EPS)
    return (db.T - stats.mean[None, :]) / stats.std[None, :]


def lstm_forward(x: np.ndarray, direction: LstmDirection) -> np.ndarray:
    """Run one LSTM direction over (T, F) features; returns (T, H) states.

    Gates: i, f, o logistic and g tanh, c_t = f*c + i*g, h_t = o*tanh(c_t),
    zero initial state.
    """
    t_len, f_dim = x.shape
    h_dim = direction.hidden
    if direction.W.shape != (4 * h_dim, f_dim):
        raise ValueError(
            f"input kernel {direction.W.shape} does not match features "
            f"({4 * h_dim}, {f_dim})")
    xw = x @ direction.W.T + direction.b[None, :]   # (T, 4H)
    h = np.zeros(h_dim)
    c = np.zeros(h_dim)
    out = np.empty((t_len, h_dim))
    u_t = direction.U.T
    for t in range(t_len):
        z = xw[t] + h @ u_t
        i = _sigmoid(z[0:h_dim])
        f = _sigmoid(z[h_dim:2 * h_dim])
        g = np.tanh(z[2 * h_dim:3 * h_dim])
        o = _sigmoid(z[3 * h_dim:4 * h_dim])
        c = f * c + i * g
        h = o * np.tanh(c)
        out[t] = h
    return out


def predict_mask(spec: MultichannelSpectrogram, channel: int,
                 weights: NetWeights, stats: FeatureStats | None = None) -> Mask:
    """Bidirectional mask prediction for one channel.

    The backward direction consumes the reversed feature sequence and its
    states are re-reversed before concatenation; the output layer applies a
    logistic, so values are strictly inside (0, 1).
    """
    stats = stats if stats is not None else weights.stats
    if weights.freq_bins != spec.freq_bins:
        raise ValueError(
            f"weights expect {weights.freq_bins} bins, spectrogram has {spec.freq_bins}")
    x = normalize_features(spec, channel, stats)
    h_fw = lstm_forward(x, weights.fw)
    h_bw = lstm_forward(x[::-1], weights.bw)[::-1]
    hcat = np.concatenate([h_fw, h_bw], axis=1)          # (T, 2H)
    logits = hcat @ weights.out_W.T + weights.out_b[None, :]
    mask = _sigmoid(logits).T                            # (F, T)
    if not np.all(np.isfinite(mask)):
        raise FloatingPointError("non-finite activations in mask prediction")
    return Mask(mask)


# --- MNW1 container -------------------------------------------------------
#
# magic "MNW1" | u32 tensor count | per tensor:
#   u16 name length | UTF-8 name | u8 ndim | u32 dims[] | float32 data
# All integers and floats little-endian; data row-major.

def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise ValueError(f"truncated MNW1 file while reading {what}")
    return buf


def read_tensor_map(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MNW1_MAGIC:
            raise ValueError(f"bad magic in '{path}': not an MNW1 container")
        (count,) = struct.unpack("<I", _read_exact(fh, 4, "tensor count"))
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, "name length"))
            name = _read_exact(fh, name_len, "name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, "ndim"))
            dims = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim, "dims"))
            num = int(np.prod(dims)) if ndim else 1
            data = np.frombuffer(
                _read_exact(fh, 4 * num, f"data of '{name}'"), dtype="<f4")
            tensors[name] = data.reshape(dims).astype(np.float64)
    return tensors


def write_tensor_map(tensors: dict[str, np.ndarray], path) -> None:
    """Serialize tensors in the given order; float32, little-endian."""
    with open(path, "wb") as fh:
        fh.write(MNW1_MAGIC)
        fh.write(struct.pack("<I", len(tensors)))
        for name, tensor in tensors.items():
            raw = name.encode("utf-8")
            arr = np.ascontiguousarray(tensor, dtype="<f4")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes(order="C"))


def load_weights(path) -> NetWeights:
    """Load and validate an MNW1 weight container."""
    tensors = read_tensor_map(path)
    missing = [name for name in REQUIRED_TENSORS if name not in tensors]
    if missing:
        raise ValueError(f"MNW1 container '{path}' is missing tensors: {missing}")
    return NetWeights(
        fw=LstmDirection(tensors["lstm.fw.W"], tensors["lstm.fw.U"], tensors["lstm.fw.b"]),
        bw=LstmDirection(tensors["lstm.bw.W"], tensors["lstm.bw.U"], tensors["lstm.bw.b"]),
        out_W=tensors["out.W"],
        out_b=tensors["out.b"],
        stats=FeatureStats(tensors["stats.mean"], tensors["stats.std"]),
    )


def save_weights(weights: NetWeights, path) -> None:
    """Write weights to MNW1 in the canonical tensor order (deterministic)."""
    tensors = {
        "lstm.fw.W": weights.fw.W, "lstm.fw.U": weights.fw.U, "lstm.fw.b": weights.fw.b,
        "lstm.bw.W": weights.bw.W, "lstm.bw.U": weights.bw.U, "lstm.bw.b": weights.bw.b,
        "out.W": weights.out_W, "out.b": weights.out_b,
        "stats.mean": weights.stats.mean, "stats.std": weights.stats.std,
    }
    write_tensor_map(tensors, path)
