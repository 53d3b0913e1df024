"""Tests for seeded samplers."""
import numpy as np
import pytest

from pimfhe.sampling import Sampler, ZeroNoiseSampler, as_sampler


class TestSampler:
    """Deterministic randomness."""

    def test_same_seed_same_stream(self):
        """Test that two samplers with one seed agree."""
        a, b = Sampler(7), Sampler(7)
        assert np.array_equal(a.uniform(97, 32), b.uniform(97, 32))
        assert np.array_equal(a.gaussian(3.19, 32), b.gaussian(3.19, 32))

    def test_uniform_range(self):
        """Test uniform residues stay in [0, modulus)."""
        values = Sampler(1).uniform(512, 10_000)
        assert values.min() >= 0
        assert values.max() < 512

    def test_uniform_large_modulus(self):
        """Test the Python-integer path above 2^62."""
        modulus = (1 << 63) + 1
        values = Sampler(1).uniform(modulus, (3, 4))
        assert values.shape == (3, 4)
        assert all(0 <= int(v) < modulus for v in values.ravel())

    def test_gaussian_width(self):
        """Test that the rounded Gaussian has roughly the requested spread."""
        values = Sampler(2).gaussian(3.19, 50_000)
        assert abs(values.mean()) < 0.1
        assert 2.9 < values.std() < 3.5

    def test_secret_distributions(self):
        """Test binary and ternary supports."""
        s = Sampler(3)
        assert set(np.unique(s.secret("binary", 1000))) == {0, 1}
        assert set(np.unique(s.secret("ternary", 1000))) == {-1, 0, 1}

    def test_unknown_distribution(self):
        """Test that an unknown distribution is rejected."""
        with pytest.raises(ValueError, match="unknown secret distribution"):
            Sampler(0).secret("gaussian", 4)

    def test_spawn_independent(self):
        """Test that children are reproducible but differ from the parent."""
        child_a = Sampler(5).spawn()
        child_b = Sampler(5).spawn()
        assert np.array_equal(child_a.uniform(1000, 16), child_b.uniform(1000, 16))
        assert not np.array_equal(Sampler(5).spawn().uniform(1000, 16), Sampler(5).uniform(1000, 16))


class TestZeroNoiseSampler:
    """Noise-free sampling for exact oracles."""

    def test_no_noise(self):
        """Test that Gaussian draws are identically zero."""
        assert not ZeroNoiseSampler(0).gaussian(3.19, 100).any()

    def test_masks_kept_by_default(self):
        """Test that uniform masks are still random."""
        assert ZeroNoiseSampler(0).uniform(97, 100).any()

    def test_zero_masks(self):
        """Test that zero_masks removes the masks too."""
        assert not ZeroNoiseSampler(0, zero_masks=True).uniform(97, 100).any()

    def test_spawn_keeps_type(self):
        """Test that a spawned child is still noise-free."""
        child = ZeroNoiseSampler(0, zero_masks=True).spawn()
        assert isinstance(child, ZeroNoiseSampler)
        assert not child.uniform(97, 10).any()


class TestAsSampler:
    def test_passthrough(self):
        """Test that a Sampler is returned unchanged."""
        s = Sampler(1)
        assert as_sampler(s) is s

    def test_from_seed(self):
        """Test that an int seed builds a Sampler."""
        assert isinstance(as_sampler(4), Sampler)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
