"""Tests for the gate table and bootstrapped gate evaluation."""
import numpy as np
import pytest

from pimfhe.bootstrap import bootstrap, eighth
from pimfhe.gates import (
    GATE_NAMES,
    PLAIN_GATES,
    EvaluationKeys,
    GateSpec,
    eval_gate,
    find_window,
    gate_table,
    generate_key_material,
    generate_keys,
    window_is_valid,
)
from pimfhe.lwe import (
    KeyMismatchError,
    LweSecretKey,
    decrypt_bit,
    encrypt_bit,
    key_switch,
    lwe_add_constant,
    lwe_linear,
    lwe_phase,
)
from pimfhe.params import load_param_set
from pimfhe.ringmath import center
from pimfhe.sampling import Sampler, ZeroNoiseSampler

ROWS = [(0, 0), (0, 1), (1, 0), (1, 1)]


@pytest.fixture(scope="module", params=["ginx", "ap"])
def toy_keys(request):
    params = load_param_set("TOY", mode=request.param)
    sampler = ZeroNoiseSampler(1)
    sk, keys = generate_keys(params, request.param, sampler)
    return params, sampler, sk, keys


class TestGateTable:
    """Combinations and windows."""

    def test_shipped_windows(self):
        """Test the shipped windows at q = 512."""
        table = gate_table(512)
        assert table["AND"].window == (192, 448)
        assert table["OR"].window == (64, 320)
        assert table["NAND"].window == (448, 192)
        assert table["NOR"].window == (320, 64)
        assert table["XOR"].window == (192, 448)
        assert table["XNOR"].window == (448, 192)
        assert (table["XOR"].c1, table["XOR"].c2) == (2, 2)

    def test_not_is_linear(self):
        """Test NOT = (-1, 0, q/4) without a bootstrap."""
        spec = gate_table(512)["NOT"]
        assert (spec.c1, spec.c2, spec.c0) == (-1, 0, 128)
        assert not spec.bootstrap_required
        assert spec.arity == 1

    @pytest.mark.parametrize("q", [16, 512, 1024])
    def test_every_window_valid(self, q):
        """Test that every bootstrapped gate passes validation at each q."""
        table = gate_table(q)
        assert set(table) == set(GATE_NAMES)
        for name, spec in table.items():
            if spec.bootstrap_required:
                assert window_is_valid(spec, q), name

    def test_invalid_window_detected(self):
        """Test that swapping AND's window for OR's fails validation."""
        assert not window_is_valid(GateSpec("AND", 1, 1, 0, (64, 320)), 512)

    def test_find_window(self):
        """Test window search finds AND's window and refuses XOR from a plain sum."""
        assert find_window("AND", 1, 1, 512) == (192, 448)
        assert find_window("XOR", 1, 1, 512) is None

    def test_plain_gates(self):
        """Test the cleartext truth tables."""
        assert [PLAIN_GATES["NAND"](x, y) for x, y in ROWS] == [1, 1, 1, 0]
        assert [PLAIN_GATES["XNOR"](x, y) for x, y in ROWS] == [1, 0, 0, 1]
        assert PLAIN_GATES["NOT"](1) == 0


class TestNoiselessGates:
    """Exact refreshed phases at TOY scale."""

    @pytest.mark.parametrize("name", ["AND", "OR", "NAND", "NOR", "XOR", "XNOR"])
    def test_truth_table_phase(self, name, toy_keys):
        """Test the key-switched phase is Q/4 exactly on true rows and 0 on false rows."""
        params, sampler, sk, keys = toy_keys
        spec = gate_table(params.q)[name]
        sk_Q = LweSecretKey(s=sk.s, modulus=params.Q)
        for x, y in ROWS:
            ct1 = encrypt_bit(sk, x, params, sampler)
            ct2 = encrypt_bit(sk, y, params, sampler)
            combined = lwe_linear(ct1, ct2, spec.c1, spec.c2, spec.c0)
            refreshed = key_switch(bootstrap(combined, keys.refresh_key, spec.window), keys.ksk)
            expected = 2 * eighth(params.Q) if PLAIN_GATES[name](x, y) else 0
            assert lwe_phase(refreshed, sk_Q) == expected

    def test_not_phase(self, toy_keys):
        """Test NOT maps phase p to q/4 - p."""
        params, sampler, sk, keys = toy_keys
        for bit in (0, 1):
            ct = encrypt_bit(sk, bit, params, sampler)
            out = eval_gate("NOT", ct, None, keys)
            assert lwe_phase(out, sk) == (params.q // 4 - bit * params.q // 4) % params.q

    def test_output_shape(self, toy_keys):
        """Test a gate returns dimension n modulo q."""
        params, sampler, sk, keys = toy_keys
        out = eval_gate("AND", encrypt_bit(sk, 1, params, sampler), encrypt_bit(sk, 1, params, sampler), keys)
        assert out.dimension == params.n
        assert out.modulus == params.q

    def test_mode_reported(self, toy_keys):
        """Test the key bundle reports its mode."""
        params, _, _, keys = toy_keys
        assert keys.mode == ("ap" if params.secret_dist == "ternary" else "ginx")


class TestGateErrors:
    def test_wrong_input_dimension(self, toy_keys):
        """Test that an input under another parameter set is rejected."""
        params, _, _, keys = toy_keys
        other = load_param_set("STD128")
        ct = encrypt_bit(LweSecretKey(s=Sampler(0).secret("binary", 512), modulus=512), 1, other, seed=0)
        with pytest.raises(KeyMismatchError, match="does not match"):
            eval_gate("AND", ct, ct, keys)

    def test_mode_conflict(self, toy_keys):
        """Test that forcing the other mode is rejected."""
        params, sampler, sk, keys = toy_keys
        other = "ap" if keys.mode == "ginx" else "ginx"
        ct = encrypt_bit(sk, 1, params, sampler)
        with pytest.raises(KeyMismatchError):
            eval_gate("OR", ct, ct, keys, mode=other)

    def test_key_material_includes_ring_secret(self):
        """Test generate_key_material returns the ring secret used by the keys."""
        params = load_param_set("TOY")
        sk, z, keys = generate_key_material(params, "ginx", ZeroNoiseSampler(2))
        assert z.N == params.N
        assert keys.ksk.N == params.N
        assert isinstance(keys, EvaluationKeys)


@pytest.mark.slow
class TestStd128Gates:
    """Real-noise end-to-end gates at STD128, for both bootstrapping modes."""

    TRIALS = 25

    @pytest.fixture(scope="class", params=["ginx", "ap"])
    def std128_keys(self, request):
        params = load_param_set("STD128", mode=request.param)
        sk, keys = generate_keys(params, request.param, seed=42)
        return params, sk, keys

    @pytest.mark.parametrize("name", ["AND", "OR", "NAND", "NOR", "XOR", "XNOR"])
    def test_truth_table(self, name, std128_keys):
        """Test every truth-table row decrypts correctly on fresh encryptions."""
        params, sk, keys = std128_keys
        sampler = Sampler(7)
        for _ in range(self.TRIALS):
            for x, y in ROWS:
                ct1, ct2 = encrypt_bit(sk, x, params, sampler), encrypt_bit(sk, y, params, sampler)
                out = eval_gate(name, ct1, ct2, keys, mode=keys.mode)
                assert decrypt_bit(sk, out) == PLAIN_GATES[name](x, y), (name, x, y)

    def test_not(self, std128_keys):
        """Test NOT on both inputs."""
        params, sk, keys = std128_keys
        sampler = Sampler(9)
        for _ in range(self.TRIALS):
            for bit in (0, 1):
                out = eval_gate("NOT", encrypt_bit(sk, bit, params, sampler), None, keys)
                assert decrypt_bit(sk, out) == 1 - bit

    def test_chained_gates(self, std128_keys):
        """Test refreshed outputs feed further gates."""
        params, sk, keys = std128_keys
        sampler = Sampler(8)
        a, b, c = (encrypt_bit(sk, v, params, sampler) for v in (1, 0, 1))
        ab = eval_gate("XOR", a, b, keys)
        abc = eval_gate("AND", ab, c, keys)
        assert decrypt_bit(sk, eval_gate("NOT", abc, None, keys)) == 0
        assert decrypt_bit(sk, eval_gate("NAND", abc, abc, keys)) == 0


@pytest.mark.slow
class TestStd128NoiseStability:
    """Refreshed noise does not accumulate or follow the input noise (GINX)."""

    @pytest.fixture(scope="class")
    def std128_ginx(self):
        params = load_param_set("STD128", mode="ginx")
        sk, keys = generate_keys(params, "ginx", seed=43)
        return params, sk, keys

    @staticmethod
    def _noise(sk, ct, bit: int) -> int:
        q = ct.modulus
        return int(center(np.array([(lwe_phase(ct, sk) - bit * (q // 4)) % q]), q)[0])

    def test_twenty_chained_bootstraps(self, std128_ginx):
        """Test twenty NAND(x, x) refreshes in a row keep the bit and a bounded error."""
        params, sk, keys = std128_ginx
        ct = encrypt_bit(sk, 1, params, Sampler(10))
        bit = 1
        for step in range(20):
            ct = eval_gate("NAND", ct, ct, keys)
            bit = 1 - bit
            assert decrypt_bit(sk, ct) == bit, step
            assert abs(self._noise(sk, ct, bit)) < params.q // 8, step

    def test_output_noise_uncorrelated_with_input(self, std128_ginx):
        """Test |r| < 0.2 between injected input error and refreshed output error."""
        params, sk, keys = std128_ginx
        sampler = Sampler(11)
        rng = np.random.default_rng(12)
        zero = encrypt_bit(sk, 0, params, sampler)
        inputs, outputs = [], []
        for _ in range(200):
            bit = int(rng.integers(0, 2))
            ct = lwe_add_constant(encrypt_bit(sk, bit, params, sampler), int(rng.integers(-24, 25)))
            out = eval_gate("OR", ct, zero, keys)
            assert decrypt_bit(sk, out) == bit
            inputs.append(self._noise(sk, ct, bit))
            outputs.append(self._noise(sk, out, bit))
        r = np.corrcoef(inputs, outputs)[0, 1]
        assert abs(r) < 0.2


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
