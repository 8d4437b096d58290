import numpy as np
import pytest

from maskbeam.audio import MultichannelSpectrogram, StftConfig
from maskbeam.masks import (
    Mask,
    apply_mask,
    average_channel_masks,
    combine,
    ideal_amplitude_mask,
    phase_sensitive_mask,
)

CFG = StftConfig(fft_size=16, hop=8)


def spec_from(values):
    values = np.asarray(values, dtype=np.complex64)
    if values.ndim == 2:
        values = values[None]
    return MultichannelSpectrogram(values, CFG, 16000)


def random_spec(rng, channels=1, frames=6):
    vals = rng.standard_normal((channels, CFG.freq_bins, frames)) \
        + 1j * rng.standard_normal((channels, CFG.freq_bins, frames))
    return spec_from(vals)


class TestIdealAmplitudeMask:
    def test_clean_equals_noisy(self, rng):
        spec = random_spec(rng)
        m = ideal_amplitude_mask(spec, spec, 0)
        np.testing.assert_allclose(m.values, 1.0)

    def test_zero_clean(self, rng):
        noisy = random_spec(rng)
        clean = spec_from(np.zeros_like(noisy.values[0]))
        assert np.all(ideal_amplitude_mask(clean, noisy, 0).values == 0)

    def test_clamped_at_one(self, rng):
        noisy = random_spec(rng)
        clean = spec_from(2.0 * noisy.values[0])
        np.testing.assert_allclose(ideal_amplitude_mask(clean, noisy, 0).values, 1.0)

    def test_zero_noisy_bins_map_to_zero(self, rng):
        noisy_vals = rng.standard_normal((1, CFG.freq_bins, 4)) + 0j
        noisy_vals[0, 3, :] = 0
        clean = random_spec(rng, frames=4)
        m = ideal_amplitude_mask(clean, spec_from(noisy_vals[0]), 0)
        assert np.all(m.values[3, :] == 0)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError, match="shape"):
            ideal_amplitude_mask(random_spec(rng, frames=4), random_spec(rng, frames=5), 0)

    def test_apply_after_iam_gives_min_magnitude(self, rng):
        # clamp interaction: |masked| == min(|s|, |y|), brute force on small specs
        for trial in range(10):
            clean = random_spec(rng, frames=5)
            noisy = random_spec(rng, frames=5)
            m = ideal_amplitude_mask(clean, noisy, 0)
            masked = apply_mask(noisy, m, 0)
            want = np.minimum(np.abs(clean.values[0]), np.abs(noisy.values[0]))
            np.testing.assert_allclose(np.abs(masked.values[0]), want, atol=1e-5)


class TestPhaseSensitiveMask:
    def test_clean_equals_noisy(self, rng):
        spec = random_spec(rng)
        np.testing.assert_allclose(phase_sensitive_mask(spec, spec, 0).values, 1.0)

    def test_opposite_phase_clamps_to_zero(self, rng):
        noisy = random_spec(rng)
        clean = spec_from(-noisy.values[0])
        np.testing.assert_allclose(phase_sensitive_mask(clean, noisy, 0).values, 0.0, atol=1e-7)

    def test_sixty_degree_case(self):
        vals = np.full((CFG.freq_bins, 3), 1.0 + 0j)
        noisy = spec_from(vals)
        clean = spec_from(vals * np.exp(1j * np.pi / 3))
        np.testing.assert_allclose(phase_sensitive_mask(clean, noisy, 0).values, 0.5, atol=1e-6)


class TestAverageAndCombine:
    def test_average_idempotent(self, rng):
        m = Mask(rng.uniform(0, 1, (9, 4)))
        avg = average_channel_masks([m] * 6)
        np.testing.assert_allclose(avg.values, m.values)

    def test_average_two(self):
        a = Mask(np.full((3, 3), 0.2))
        b = Mask(np.full((3, 3), 0.8))
        np.testing.assert_allclose(average_channel_masks([a, b]).values, 0.5)

    def test_average_stays_valid(self, rng):
        masks = [Mask(rng.uniform(0, 1, (5, 5))) for _ in range(7)]
        avg = average_channel_masks(masks)
        assert avg.values.min() >= 0 and avg.values.max() <= 1

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            average_channel_masks([])

    def test_combine_modes(self):
        a = Mask(np.full((2, 2), 0.3))
        b = Mask(np.full((2, 2), 0.7))
        np.testing.assert_allclose(combine(a, b, "average").values, 0.5)
        np.testing.assert_allclose(combine(a, b, "max").values, 0.7)
        np.testing.assert_allclose(combine(a, b, "min").values, 0.3)

    def test_combine_idempotent(self, rng):
        a = Mask(rng.uniform(0, 1, (4, 6)))
        for mode in ("average", "max", "min"):
            np.testing.assert_array_equal(combine(a, a, mode).values, a.values)

    def test_unknown_mode(self):
        a = Mask(np.zeros((2, 2)))
        with pytest.raises(ValueError, match="unknown combine mode"):
            combine(a, a, "median")

    def test_min_le_average_le_max(self, rng):
        for _ in range(20):
            a = Mask(rng.uniform(0, 1, (8, 8)))
            b = Mask(rng.uniform(0, 1, (8, 8)))
            lo = combine(a, b, "min").values
            mid = combine(a, b, "average").values
            hi = combine(a, b, "max").values
            assert np.all(lo <= mid + 1e-15) and np.all(mid <= hi + 1e-15)


class TestApplyMask:
    def test_ones_identity(self, rng):
        spec = random_spec(rng, channels=2)
        m = Mask(np.ones((CFG.freq_bins, spec.frames)))
        np.testing.assert_array_equal(apply_mask(spec, m).values, spec.values)

    def test_zeros(self, rng):
        spec = random_spec(rng)
        m = Mask(np.zeros((CFG.freq_bins, spec.frames)))
        assert np.all(apply_mask(spec, m).values == 0)

    def test_never_amplifies(self, rng):
        for _ in range(10):
            spec = random_spec(rng)
            m = Mask(rng.uniform(0, 1, (CFG.freq_bins, spec.frames)))
            out = apply_mask(spec, m)
            assert np.all(np.abs(out.values) <= np.abs(spec.values) + 1e-6)

    def test_phase_unchanged(self, rng):
        spec = random_spec(rng)
        m = Mask(rng.uniform(0.1, 1, (CFG.freq_bins, spec.frames)))
        out = apply_mask(spec, m, 0)
        np.testing.assert_allclose(np.angle(out.values[0]), np.angle(spec.values[0]), atol=1e-5)

    def test_shape_mismatch(self, rng):
        spec = random_spec(rng)
        with pytest.raises(ValueError, match="shape"):
            apply_mask(spec, Mask(np.zeros((CFG.freq_bins, spec.frames + 1))))


class TestMaskInvariants:
    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            Mask(np.array([[0.5, 1.2]]))
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            Mask(np.array([[-0.1, 0.5]]))

    def test_nan_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            Mask(np.array([[np.nan]]))

    def test_oracle_masks_always_valid(self, rng):
        # adversarial inputs: zeros, huge dynamic range, tiny magnitudes
        for _ in range(20):
            vals = rng.standard_normal((1, CFG.freq_bins, 5)) * 10.0 ** rng.integers(-8, 8)
            vals[0, rng.integers(0, CFG.freq_bins), :] = 0
            noisy = spec_from(vals[0])
            clean = random_spec(rng, frames=5)
            for m in (ideal_amplitude_mask(clean, noisy, 0),
                      phase_sensitive_mask(clean, noisy, 0)):
                assert m.values.min() >= 0 and m.values.max() <= 1
