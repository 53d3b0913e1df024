"""Unit tests for level-wise parallel circuit evaluation."""
import threading
from unittest.mock import Mock, patch

import numpy as np
import pytest

from pimfhe.circuits import (
    NetlistError,
    bits_to_int,
    build_kogge_stone_adder,
    build_multiplier,
    parse_netlist,
    word_inputs,
)
from pimfhe.gates import PLAIN_GATES, generate_keys
from pimfhe.lwe import KeyMismatchError, LweCiphertext, decrypt_bit, encrypt_bit
from pimfhe.parallel import eval_circuit
from pimfhe.params import load_param_set
from pimfhe.sampling import Sampler

TOY = load_param_set("TOY")
QUARTER = TOY.q // 4


def trivial(bit: int) -> LweCiphertext:
    """Noise-free ciphertext under the all-zero key."""
    return LweCiphertext(a=np.zeros(TOY.n, dtype=np.int64), b=bit * QUARTER, modulus=TOY.q)


def fake_eval_gate(spec, ct1, ct2, keys, mode=None):
    """Cleartext stand-in for eval_gate on trivial ciphertexts."""
    bits = [ct1.b // QUARTER] + ([ct2.b // QUARTER] if ct2 is not None else [])
    return trivial(PLAIN_GATES[spec.name](*bits))


def mock_keys() -> Mock:
    keys = Mock()
    keys.params = TOY
    keys.mode = "ginx"
    return keys


def encrypt_word_inputs(x: int, y: int, width: int) -> dict:
    assignment = {**word_inputs("a", x, width), **word_inputs("b", y, width)}
    return {w: trivial(bit) for w, bit in assignment.items()}


class TestEvalCircuit:
    """Test eval_circuit with a cleartext gate stand-in."""

    @pytest.mark.parametrize("jobs", [1, 2, 8])
    def test_adder_matches_integer_sum(self, jobs):
        """Test a 4-bit adder for every worker count."""
        circuit = build_kogge_stone_adder(4)
        with patch("pimfhe.parallel.eval_gate", side_effect=fake_eval_gate):
            for x, y in ((0, 0), (15, 15), (9, 6), (3, 12)):
                out = eval_circuit(circuit, encrypt_word_inputs(x, y, 4), mock_keys(), jobs=jobs)
                assert list(out) == circuit.outputs
                assert bits_to_int([out[w].b // QUARTER for w in circuit.outputs]) == x + y

    def test_worker_count_does_not_change_result(self):
        """Test that 1 and 8 workers give identical ciphertexts."""
        circuit = build_kogge_stone_adder(8)
        inputs = encrypt_word_inputs(200, 77, 8)
        with patch("pimfhe.parallel.eval_gate", side_effect=fake_eval_gate):
            serial = eval_circuit(circuit, inputs, mock_keys(), jobs=1)
            threaded = eval_circuit(circuit, inputs, mock_keys(), jobs=8)
        assert all(serial[w] == threaded[w] for w in circuit.outputs)

    def test_each_gate_evaluated_once(self):
        """Test that every gate is dispatched exactly once."""
        circuit = build_kogge_stone_adder(8)
        with patch("pimfhe.parallel.eval_gate", side_effect=fake_eval_gate) as mock_eval:
            eval_circuit(circuit, encrypt_word_inputs(1, 2, 8), mock_keys(), jobs=4)
        assert mock_eval.call_count == len(circuit.gates)

    def test_uses_multiple_threads(self):
        """Test that a wide level is spread over worker threads."""
        text = "INPUT a b\nOUTPUT " + " ".join(f"y{i}" for i in range(16)) + "\n"
        text += "".join(f"y{i} = AND(a, b)\n" for i in range(16))
        circuit = parse_netlist(text)
        seen = set()
        lock = threading.Lock()
        second_thread = threading.Event()

        def tracking_eval(*args, **kwargs):
            with lock:
                seen.add(threading.get_ident())
                if len(seen) >= 2:
                    second_thread.set()
            second_thread.wait(timeout=5)
            return fake_eval_gate(*args, **kwargs)

        with patch("pimfhe.parallel.eval_gate", side_effect=tracking_eval):
            out = eval_circuit(circuit, {"a": trivial(1), "b": trivial(1)}, mock_keys(), jobs=4)
        assert len(seen) >= 2
        assert all(ct.b == QUARTER for ct in out.values())

    def test_unbound_input(self):
        """Test that a missing input wire is reported before any work."""
        circuit = build_kogge_stone_adder(2)
        inputs = encrypt_word_inputs(1, 1, 2)
        del inputs["b1"]
        with patch("pimfhe.parallel.eval_gate") as mock_eval:
            with pytest.raises(NetlistError, match="unbound input wire\\(s\\): b1"):
                eval_circuit(circuit, inputs, mock_keys())
        mock_eval.assert_not_called()

    def test_worker_failure_raises(self):
        """Test that a failing gate aborts the level with its wire named."""
        text = "INPUT a b\nOUTPUT x y\nx = AND(a, b)\ny = OR(a, b)\n"
        circuit = parse_netlist(text, name="pair")

        def failing_eval(spec, ct1, ct2, keys, mode=None):
            if spec.name == "OR":
                raise RuntimeError("refresh key corrupted")
            return fake_eval_gate(spec, ct1, ct2, keys)

        with patch("pimfhe.parallel.eval_gate", side_effect=failing_eval):
            with pytest.raises(Exception, match="1 of 2 gates failed at level 1.*wire=y"):
                eval_circuit(circuit, {"a": trivial(1), "b": trivial(0)}, mock_keys(), jobs=2)

    @pytest.mark.parametrize("jobs", [1, 4])
    def test_mode_forwarded_to_every_gate(self, jobs):
        """Test that the requested mode reaches each eval_gate call."""
        circuit = build_kogge_stone_adder(4)
        with patch("pimfhe.parallel.eval_gate", side_effect=fake_eval_gate) as mock_eval:
            eval_circuit(circuit, encrypt_word_inputs(5, 9, 4), mock_keys(), jobs=jobs, mode="ginx")
        assert mock_eval.call_count == len(circuit.gates)
        assert {call.kwargs["mode"] for call in mock_eval.call_args_list} == {"ginx"}

    def test_mode_defaults_to_keys(self):
        """Test that no mode leaves the choice to the refresh key."""
        circuit = build_kogge_stone_adder(2)
        with patch("pimfhe.parallel.eval_gate", side_effect=fake_eval_gate) as mock_eval:
            eval_circuit(circuit, encrypt_word_inputs(1, 2, 2), mock_keys())
        assert {call.kwargs["mode"] for call in mock_eval.call_args_list} == {None}

    def test_mode_mismatch_rejected(self):
        """Test that an AP request against GINX keys fails before any gate runs."""
        circuit = build_kogge_stone_adder(2)
        with patch("pimfhe.parallel.eval_gate") as mock_eval:
            with pytest.raises(KeyMismatchError, match="mode ap does not match the ginx refresh key"):
                eval_circuit(circuit, encrypt_word_inputs(1, 2, 2), mock_keys(), mode="ap")
        mock_eval.assert_not_called()

    def test_no_outputs_returns_inputs(self):
        """Test that a circuit without outputs returns its inputs."""
        circuit = parse_netlist("INPUT a\n")
        ct = trivial(1)
        assert eval_circuit(circuit, {"a": ct}, mock_keys()) == {"a": ct}


@pytest.mark.slow
class TestEncryptedAdder:
    """Real bootstrapped evaluation at STD128."""

    @pytest.fixture(scope="class")
    def std128_ginx(self):
        params = load_param_set("STD128")
        sk, keys = generate_keys(params, "ginx", seed=3)
        return params, sk, keys

    @staticmethod
    def _run(circuit, x, y, width, std128_ginx, sampler):
        params, sk, keys = std128_ginx
        assignment = {**word_inputs("a", x, width), **word_inputs("b", y, width)}
        inputs = {w: encrypt_bit(sk, bit, params, sampler) for w, bit in assignment.items()}
        out = eval_circuit(circuit, inputs, keys, jobs=4, mode="ginx")
        return bits_to_int([decrypt_bit(sk, out[w]) for w in circuit.outputs])

    def test_two_bit_adder(self, std128_ginx):
        """Test an encrypted 2-bit adder with several workers."""
        assert self._run(build_kogge_stone_adder(2), 3, 2, 2, std128_ginx, Sampler(4)) == 5

    def test_eight_bit_adder(self, std128_ginx):
        """Test twenty random 8-bit additions, carry-out included."""
        circuit = build_kogge_stone_adder(8)
        rng = np.random.default_rng(20)
        sampler = Sampler(21)
        for x, y in rng.integers(0, 256, size=(20, 2)):
            assert self._run(circuit, int(x), int(y), 8, std128_ginx, sampler) == int(x) + int(y)

    def test_four_bit_multiplier(self, std128_ginx):
        """Test ten random 4-bit products."""
        circuit = build_multiplier(4)
        rng = np.random.default_rng(10)
        sampler = Sampler(11)
        for x, y in rng.integers(0, 16, size=(10, 2)):
            assert self._run(circuit, int(x), int(y), 4, std128_ginx, sampler) == int(x) * int(y)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
