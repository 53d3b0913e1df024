"""Seeded randomness for key generation and encryption.

All sampling goes through a Sampler so that every key and ciphertext is
reproducible from a seed. Tests swap in ZeroNoiseSampler to remove the
Gaussian error (and optionally the uniform masks) entirely.
"""
from __future__ import annotations

import numpy as np

from pimfhe.config import SECRET_DISTRIBUTIONS


class Sampler:
    """Deterministic generator wrapper (numpy PCG64)."""

    def __init__(self, seed: int | None = 0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def spawn(self) -> "Sampler":
        """Independent child stream, for concurrent workers."""
        child = Sampler.__new__(type(self))
        child.__dict__.update(self.__dict__)
        child.rng = np.random.default_rng(self.rng.integers(0, 2**63 - 1))
        return child

    def uniform(self, modulus: int, shape) -> np.ndarray:
        """Uniform residues in [0, modulus)."""
        if modulus < (1 << 62):
            return self.rng.integers(0, modulus, size=shape, dtype=np.int64)
        flat = [int(x) for x in self.rng.integers(0, 2**62, size=int(np.prod(shape)), dtype=np.int64)]
        return np.array([x % modulus for x in flat], dtype=object).reshape(shape)

    def gaussian(self, stddev: float, shape) -> np.ndarray:
        """Rounded Gaussian integers (signed)."""
        return np.rint(self.rng.normal(0.0, stddev, size=shape)).astype(np.int64)

    def secret(self, dist: str, size: int) -> np.ndarray:
        """Signed secret coefficients: {0,1} for binary, {-1,0,1} for ternary."""
        if dist == "binary":
            return self.rng.integers(0, 2, size=size, dtype=np.int64)
        if dist == "ternary":
            return self.rng.integers(-1, 2, size=size, dtype=np.int64)
        raise ValueError(f"unknown secret distribution '{dist}', expected one of {', '.join(SECRET_DISTRIBUTIONS)}")


class ZeroNoiseSampler(Sampler):
    """Sampler whose Gaussian error is identically zero.

    With zero_masks=True the uniform masks are zero too, so ciphertexts
    carry their message in the clear (b = m').
    """

    def __init__(self, seed: int | None = 0, zero_masks: bool = False):
        super().__init__(seed)
        self.zero_masks = zero_masks

    def uniform(self, modulus: int, shape) -> np.ndarray:
        if self.zero_masks:
            return np.zeros(shape, dtype=np.int64)
        return super().uniform(modulus, shape)

    def gaussian(self, stddev: float, shape) -> np.ndarray:
        return np.zeros(shape, dtype=np.int64)


def as_sampler(seed_or_sampler: int | Sampler | None) -> Sampler:
    if isinstance(seed_or_sampler, Sampler):
        return seed_or_sampler
    return Sampler(seed_or_sampler)


__all__ = ["Sampler", "ZeroNoiseSampler", "as_sampler"]
