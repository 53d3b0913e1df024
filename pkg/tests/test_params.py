"""Tests for parameter sets and derived quantities."""
import os
import tempfile
from unittest.mock import patch

import pytest

from pimfhe.config import NAMED_PARAM_SETS, PARAM_SETS_ENV
from pimfhe.params import (
    ParameterError,
    ParamSet,
    derive_digit_counts,
    is_probable_prime,
    list_param_sets,
    load_param_set,
    select_modulus,
)

TABLE = {
    "STD128": (512, 512, 1024, 27, 25, 2**7, 23),
    "STD192": (512, 512, 2048, 37, 25, 2**13, 23),
    "STD256": (1024, 1024, 2048, 29, 25, 2**10, 32),
    "STD128Q": (512, 512, 2048, 50, 25, 2**25, 23),
    "STD192Q": (1024, 1024, 2048, 35, 25, 2**12, 32),
    "STD256Q": (1024, 1024, 2048, 27, 25, 2**7, 32),
}


def _trial_division_prime(p: int) -> bool:
    if p < 2:
        return False
    i = 2
    while i * i <= p:
        if p % i == 0:
            return False
        i += 1
    return True


class TestLoadParamSet:
    """Named sets load with the published values."""

    @pytest.mark.parametrize("name", NAMED_PARAM_SETS)
    def test_named_set_values(self, name):
        """Test that the seven published values round-trip exactly."""
        p = load_param_set(name)
        assert (p.n, p.q, p.N, p.log2_Q, p.B_s, p.B_g, p.B_r) == TABLE[name]

    @pytest.mark.parametrize("name", NAMED_PARAM_SETS)
    def test_modulus_is_ntt_friendly_prime(self, name):
        """Test Q prime, Q = 1 mod 2N, inside (2^(log2_Q-1), 2^log2_Q)."""
        p = load_param_set(name)
        assert p.Q % (2 * p.N) == 1
        assert is_probable_prime(p.Q)
        assert 2 ** (p.log2_Q - 1) < p.Q < 2**p.log2_Q

    def test_toy_set(self):
        """Test the toy set used by exact unit tests."""
        p = load_param_set("TOY")
        assert (p.n, p.q, p.N, p.Q, p.B_s, p.B_g, p.B_r) == (4, 16, 16, 97, 4, 4, 4)
        assert (p.d_s, p.d_g, p.d_r) == (4, 4, 2)

    def test_std128_digit_counts(self):
        """Test d_g = ceil(27/7) and d_r = 2 for STD128."""
        p = load_param_set("STD128")
        assert p.d_g == 4
        assert p.d_r == 2
        assert p.d_s == 6

    def test_unknown_name_lists_valid_sets(self):
        """Test that an unknown name raises with the valid names."""
        with pytest.raises(ParameterError, match="valid sets: .*STD128"):
            load_param_set("STD512")

    def test_unknown_mode(self):
        """Test that an unknown bootstrapping mode is rejected."""
        with pytest.raises(ParameterError, match="bootstrapping mode"):
            load_param_set("STD128", mode="cggi")

    def test_secret_distribution_follows_mode(self):
        """Test binary for GINX, ternary for AP, override wins."""
        assert load_param_set("STD128", mode="ginx").secret_dist == "binary"
        assert load_param_set("STD128", mode="ap").secret_dist == "ternary"
        assert load_param_set("STD128", mode="ginx", secret_dist="ternary").secret_dist == "ternary"

    def test_with_mode_switches_distribution(self):
        """Test with_mode returns a copy with the mode's distribution."""
        p = load_param_set("TOY", mode="ginx")
        assert p.with_mode("ap").secret_dist == "ternary"
        assert p.secret_dist == "binary"

    def test_derived_properties(self):
        """Test rotation scale, NTT stage count and word width."""
        p = load_param_set("STD128")
        assert p.rotation_scale == 4
        assert p.ntt_stages == 10
        assert p.log2_q == 9
        assert p.word_bits == 32
        assert load_param_set("STD128Q").word_bits == 64

    def test_list_param_sets(self):
        """Test that every named set and TOY are listed."""
        names = list_param_sets()
        for name in NAMED_PARAM_SETS + ("TOY",):
            assert name in names

    def test_env_override_path(self):
        """Test that PIMFHE_PARAM_SETS points the loader at another file."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "sets.yaml")
            with open(path, "w") as f:
                f.write("param_sets:\n  MINI:\n    n: 4\n    q: 16\n    N: 16\n    log2_Q: 10\n    B_s: 4\n    B_g: 4\n    B_r: 4\n")
            with patch.dict(os.environ, {PARAM_SETS_ENV: path}):
                assert list_param_sets() == ["MINI"]
                assert load_param_set("MINI").Q == 929


class TestDeriveDigitCounts:
    """Minimal digit counts per base."""

    def test_minimality(self):
        """Test B^(d-1) < modulus <= B^d for every named set."""
        for name in NAMED_PARAM_SETS:
            p = load_param_set(name)
            for base, d, modulus in ((p.B_s, p.d_s, p.Q), (p.B_g, p.d_g, p.Q), (p.B_r, p.d_r, p.q)):
                assert base ** (d - 1) < modulus <= base**d

    def test_floor_of_one(self):
        """Test that a modulus of 1 still yields one digit."""
        assert derive_digit_counts(1, 1, 2, 2, 2) == (1, 1, 1)

    def test_base_below_two_rejected(self):
        """Test that a base of 1 is rejected."""
        with pytest.raises(ParameterError, match="B_r must be >= 2"):
            derive_digit_counts(512, 97, 4, 4, 1)


class TestSelectModulus:
    """NTT-friendly prime selection."""

    def test_known_values(self):
        """Test hand-checked moduli."""
        assert select_modulus(10, 16) == 929
        assert select_modulus(7, 16) == 97

    def test_no_modulus(self):
        """Test that no prime below 4 is 1 mod 2048."""
        with pytest.raises(ParameterError, match="no NTT-friendly modulus"):
            select_modulus(2, 1024)

    def test_largest_qualifying_prime(self):
        """Test that no larger qualifying prime exists below 2^log2_Q."""
        Q = select_modulus(14, 64)
        for candidate in range(Q + 128, 2**14, 128):
            assert not _trial_division_prime(candidate)
        assert _trial_division_prime(Q)

    def test_miller_rabin_agrees_with_trial_division(self):
        """Test the primality oracle on small integers."""
        for p in range(2000):
            assert is_probable_prime(p) == _trial_division_prime(p)


class TestParamSetValidation:
    """Construction-time checks."""

    def test_q_larger_than_2n_rejected(self):
        """Test that q > 2N is rejected."""
        with pytest.raises(ParameterError, match="exceeds 2N"):
            ParamSet(name="BAD", security_bits=0, quantum_safe=False, n=4, q=64, N=16, log2_Q=7, Q=97,
                     B_s=4, B_g=4, B_r=4, d_s=4, d_g=4, d_r=3)

    def test_unknown_distribution_rejected(self):
        """Test that an unknown secret distribution is rejected."""
        with pytest.raises(ParameterError, match="secret distribution"):
            ParamSet(name="BAD", security_bits=0, quantum_safe=False, n=4, q=16, N=16, log2_Q=7, Q=97,
                     B_s=4, B_g=4, B_r=4, d_s=4, d_g=4, d_r=2, secret_dist="gaussian")

    def test_to_dict_round_trip(self):
        """Test that to_dict carries every field."""
        p = load_param_set("TOY")
        d = p.to_dict()
        assert ParamSet(**d) == p


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
