"""Multichannel speech enhancement toolkit.

Combines single-channel recurrent mask estimation, EM spatial clustering
over inter-channel phase differences and mask-driven MVDR beamforming,
plus classical noise-tracking baselines and a synthetic scene simulator
for end-to-end evaluation.
"""

from maskbeam.audio import (
    MultichannelSpectrogram,
    StftConfig,
    Waveform,
    istft,
    load_wav,
    save_wav,
    stft,
)
from maskbeam.masks import (
    Mask,
    apply_mask,
    average_channel_masks,
    combine,
    ideal_amplitude_mask,
    phase_sensitive_mask,
)

__version__ = "0.1.0"

__all__ = [
    "Waveform",
    "StftConfig",
    "MultichannelSpectrogram",
    "load_wav",
    "save_wav",
    "stft",
    "istft",
    "Mask",
    "ideal_amplitude_mask",
    "phase_sensitive_mask",
    "average_channel_masks",
    "combine",
    "apply_mask",
]
