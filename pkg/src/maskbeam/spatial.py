"""EM spatial clustering over inter-channel phase differences.

One speech source with a per-pair continuous delay and a per-frequency
circular-Gaussian phase residual competes against a uniform-phase noise
source. E/M steps alternate between a speech posterior mask and the
spatial parameters (delays, residual variances, speech prior).

The speech phase density is a Gaussian on the wrapped residual,
renormalized over (-pi, pi]; as the variance grows it flattens to the
uniform density, so an uninformative fit collapses the posterior to the
prior instead of vanishing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, expit

from maskbeam.audio import MultichannelSpectrogram
from maskbeam.masks import Mask

TWO_PI = 2.0 * np.pi

SIGMA2_FLOOR = 1e-4       # rad^2
PRIOR_MIN, PRIOR_MAX = 0.01, 0.99
TAU_MAX_DEFAULT = 16.0    # samples
TAU_STEP = 0.5            # candidate grid step, samples
DEFAULT_ITERS = 16


@dataclass
class IpdObservations:
    """Wrapped cross-channel phases phi[p, f, t] with per-bin omega."""

    pairs: list
    phi: np.ndarray     # (pairs, freq_bins, frames), radians in (-pi, pi]
    omega: np.ndarray   # (freq_bins,), rad/sample

    @property
    def num_pairs(self) -> int:
        return self.phi.shape[0]

    @property
    def freq_bins(self) -> int:
        return self.phi.shape[1]

    @property
    def frames(self) -> int:
        return self.phi.shape[2]


@dataclass
class SpatialParams:
    tau: np.ndarray      # (pairs,), samples
    sigma2: np.ndarray   # (freq_bins,), rad^2
    prior: float

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=np.float64)
        self.sigma2 = np.asarray(self.sigma2, dtype=np.float64)
        if np.any(self.sigma2 <= 0):
            raise ValueError("sigma2 must be positive")
        if not 0.0 < self.prior < 1.0:
            raise ValueError(f"prior must be in (0, 1), got {self.prior}")


@dataclass
class EmState:
    params: SpatialParams
    mask: Mask
    loglik: float
    iteration: int
    loglik_history: list = field(default_factory=list)


def wrap_phase(x: np.ndarray) -> np.ndarray:
    """Wrap radians into (-pi, pi]."""
    return x - TWO_PI * np.ceil((x - np.pi) / TWO_PI)


def compute_ipd(spec: MultichannelSpectrogram, pairs: list | None = None) -> IpdObservations:
    """Cross-spectrum phases for the given channel pairs.

    Default pairing is every channel against channel 0. For pair (i, j),
    phi = angle(Y_i * conj(Y_j)), so a source arriving at j a delay d after
    i shows phi ~ wrap(omega * d).
    """
    if spec.channels < 2:
        raise ValueError(f"need >= 2 channels for phase differences, got {spec.channels}")
    if pairs is None:
        pairs = [(0, c) for c in range(1, spec.channels)]
    vals = spec.values.astype(np.complex128)
    phi = np.stack(
        [np.angle(vals[i] * np.conj(vals[j])) for (i, j) in pairs], axis=0
    )
    omega = TWO_PI * np.arange(spec.freq_bins) / spec.config.fft_size
    return IpdObservations(pairs=list(pairs), phi=wrap_phase(phi), omega=omega)


def _log_norm_const(sigma2: np.ndarray) -> np.ndarray:
    """log of the circle-renormalized Gaussian partition function.

    Z(sigma2) = sqrt(2 pi sigma2) * erf(pi / sqrt(2 sigma2)); tends to
    sqrt(2 pi sigma2) for small variance and to 2 pi for large variance.
    """
    return 0.5 * np.log(TWO_PI * sigma2) + np.log(erf(np.pi / np.sqrt(2.0 * sigma2)))


def _speech_loglik(obs: IpdObservations, params: SpatialParams) -> np.ndarray:
    """Sum over pairs of the log speech-phase density, shape (F, T)."""
    resid = wrap_phase(obs.phi - obs.omega[None, :, None] * params.tau[:, None, None])
    inv2s = 1.0 / (2.0 * params.sigma2)
    ll = -(resid ** 2).sum(axis=0) * inv2s[:, None]
    ll -= obs.num_pairs * _log_norm_const(params.sigma2)[:, None]
    return ll


def e_step(obs: IpdObservations, params: SpatialParams) -> tuple[Mask, float]:
    """Speech posterior per TF point and total data log-likelihood."""
    log_sp = _speech_loglik(obs, params)
    log_noise = -obs.num_pairs * np.log(TWO_PI)
    log_odds = np.log(params.prior) - np.log1p(-params.prior) + log_sp - log_noise
    if not np.all(np.isfinite(log_odds)):
        raise FloatingPointError("non-finite likelihoods in e_step (sigma2 underflow?)")
    posterior = expit(log_odds)
    # loglik = sum log(pi*L_sp + (1-pi)*L_noise), evaluated stably
    a = np.log(params.prior) + log_sp
    b = np.log1p(-params.prior) + log_noise
    loglik = float(np.sum(np.logaddexp(a, b)))
    return Mask(posterior), loglik


def _phat_delay_scores(obs: IpdObservations, weights: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Weighted GCC-PHAT style histogram: score[p, g] = sum w * cos(phi - omega*tau)."""
    scores = np.empty((obs.num_pairs, grid.size))
    for gi, tau in enumerate(grid):
        resid = obs.phi - obs.omega[None, :, None] * tau
        scores[:, gi] = np.sum(weights[None, :, :] * np.cos(resid), axis=(1, 2))
    return scores


def _quadratic_delay_scores(obs: IpdObservations, weights: np.ndarray,
                            inv2s: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Mask-weighted log-likelihood of each delay candidate per pair
    (variance-weighted negative squared wrapped residual)."""
    w = weights * inv2s[:, None]
    scores = np.empty((obs.num_pairs, candidates.shape[1]))
    for gi in range(candidates.shape[1]):
        resid = wrap_phase(obs.phi - obs.omega[None, :, None] * candidates[:, gi, None, None])
        scores[:, gi] = -np.sum(w[None, :, :] * resid ** 2, axis=(1, 2))
    return scores


def _sigma2_objective(weighted_rss: np.ndarray, weight_sum: np.ndarray,
                      sigma2: np.ndarray) -> np.ndarray:
    """Per-frequency expected log-likelihood terms that depend on sigma2."""
    return -weighted_rss / (2.0 * sigma2) - weight_sum * _log_norm_const(sigma2)


def m_step(obs: IpdObservations, mask: Mask, current: SpatialParams | None = None,
           tau_max: float = TAU_MAX_DEFAULT) -> SpatialParams:
    """Maximize the mask-weighted likelihood over delays, variances, prior.

    Delays search the grid {-tau_max : 0.5 : tau_max}, always including the
    current delay so the step can never lose likelihood. Variances take the
    mask-weighted mean squared wrapped residual (floored); since the phase
    density is renormalized over the circle, the closed form is only the
    unimodal optimum's argmax candidate, so the previous variance is kept
    whenever it scores better. Prior is the clamped mask mean.
    """
    m = mask.values
    if (obs.freq_bins, obs.frames) != m.shape:
        raise ValueError(f"mask shape {m.shape} does not match observations "
                         f"({obs.freq_bins}, {obs.frames})")
    total = m.sum()
    if total <= 0:
        raise ValueError("degenerate all-zero mask in m_step")

    grid = np.arange(-tau_max, tau_max + TAU_STEP / 2, TAU_STEP)

    if current is None:
        scores = _phat_delay_scores(obs, m, grid)
        tau = grid[np.argmax(scores, axis=1)]
    else:
        candidates = np.concatenate(
            [np.broadcast_to(grid, (obs.num_pairs, grid.size)),
             current.tau[:, None]], axis=1)
        inv2s = 1.0 / (2.0 * current.sigma2)
        scores = _quadratic_delay_scores(obs, m, inv2s, candidates)
        tau = candidates[np.arange(obs.num_pairs), np.argmax(scores, axis=1)]

    resid = wrap_phase(obs.phi - obs.omega[None, :, None] * tau[:, None, None])
    weighted_rss = np.sum(m[None, :, :] * resid ** 2, axis=(0, 2))   # (F,)
    weight_sum = obs.num_pairs * m.sum(axis=1)                       # (F,)

    nonzero = weight_sum > 0
    sigma2 = np.full(obs.freq_bins, np.pi ** 2 / 3.0)
    sigma2[nonzero] = np.maximum(weighted_rss[nonzero] / weight_sum[nonzero], SIGMA2_FLOOR)
    if current is not None:
        # keep the previous variance where the closed form would lose
        # likelihood (renormalization bends the optimum for wide residuals)
        keep = _sigma2_objective(weighted_rss, weight_sum, current.sigma2) > \
            _sigma2_objective(weighted_rss, weight_sum, sigma2)
        sigma2[keep] = current.sigma2[keep]
        sigma2[~nonzero] = current.sigma2[~nonzero]

    prior = float(np.clip(m.mean(), PRIOR_MIN, PRIOR_MAX))
    return SpatialParams(tau=tau, sigma2=sigma2, prior=prior)


def init_state(obs: IpdObservations, init_mask: Mask | None = None,
               tau_max: float = TAU_MAX_DEFAULT) -> EmState:
    """Initial EM state.

    With an external mask, the first parameter fit runs against it;
    otherwise against a uniform 0.5 mask (the two coincide for a constant
    0.5 external mask). Delays come from a mask-weighted PHAT histogram.
    """
    if init_mask is not None and (obs.freq_bins, obs.frames) != init_mask.values.shape:
        raise ValueError(
            f"init mask shape {init_mask.values.shape} does not match observations "
            f"({obs.freq_bins}, {obs.frames})")
    mask = init_mask if init_mask is not None else Mask(np.full((obs.freq_bins, obs.frames), 0.5))
    params = m_step(obs, mask, current=None, tau_max=tau_max)
    return EmState(params=params, mask=mask, loglik=-np.inf, iteration=0)


def run_em(obs: IpdObservations, init_mask: Mask | None = None,
           iters: int = DEFAULT_ITERS, hold_mask: Mask | None = None,
           hold_iters: int = 0, tau_max: float = TAU_MAX_DEFAULT) -> EmState:
    """Full EM loop with an optional mask hold schedule.

    For iterations 1..hold_iters the posterior is replaced by its average
    with hold_mask before the parameter update ((m + m) / 2 == m, so a hold
    mask equal to the posterior reproduces plain EM bit for bit). Plain EM
    afterwards. Deterministic given the observations.
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    if hold_iters > iters:
        raise ValueError(f"hold_iters {hold_iters} exceeds iters {iters}")
    state = init_state(obs, init_mask, tau_max=tau_max)
    params = state.params
    history = []
    mask = state.mask
    loglik = -np.inf
    for it in range(1, iters + 1):
        mask, loglik = e_step(obs, params)
        if hold_mask is not None and it <= hold_iters:
            mask = Mask(0.5 * (mask.values + hold_mask.values))
        history.append(loglik)
        params = m_step(obs, mask, current=params, tau_max=tau_max)
    return EmState(params=params, mask=mask, loglik=loglik, iteration=iters,
                   loglik_history=history)
