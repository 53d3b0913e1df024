"""Tests for netlists, circuit builders and structural metadata."""
import math
import os
import tempfile

import pytest

from pimfhe.circuits import (
    Circuit,
    CircuitBuilder,
    Gate,
    NetlistError,
    bits_to_int,
    build_kogge_stone_adder,
    build_multiplier,
    format_netlist,
    generate_circuit,
    load_netlist,
    parse_netlist,
    word_inputs,
)

HALF_ADDER = """
# half adder
INPUT a, b
OUTPUT s c
s = XOR(a, b)
c = AND(a, b)
"""


def run_word_circuit(circuit: Circuit, x: int, y: int, width: int) -> int:
    assignment = {**word_inputs("a", x, width), **word_inputs("b", y, width)}
    outputs = circuit.evaluate_plain(assignment)
    return bits_to_int([outputs[w] for w in circuit.outputs])


class TestParseNetlist:
    """Netlist text to circuits."""

    def test_half_adder(self):
        """Test parsing and cleartext evaluation."""
        circuit = parse_netlist(HALF_ADDER, name="ha")
        assert circuit.inputs == ["a", "b"]
        assert circuit.outputs == ["s", "c"]
        assert circuit.evaluate_plain({"a": 1, "b": 1}) == {"s": 0, "c": 1}
        assert circuit.evaluate_plain({"a": 1, "b": 0}) == {"s": 1, "c": 0}

    def test_out_of_order_gates_sorted(self):
        """Test that gates listed before their inputs are reordered."""
        text = "INPUT a b\nOUTPUT y\ny = NOT(t)\nt = OR(a, b)\n"
        circuit = parse_netlist(text)
        assert [g.out for g in circuit.gates] == ["t", "y"]
        assert circuit.evaluate_plain({"a": 0, "b": 0}) == {"y": 1}

    def test_lowercase_gate_names(self):
        """Test that gate names are case-insensitive."""
        circuit = parse_netlist("INPUT a b\nOUTPUT y\ny = nand(a, b)\n")
        assert circuit.gates[0].op == "NAND"

    @pytest.mark.parametrize("text,message", [
        ("INPUT a\nOUTPUT y\ny = MUX(a, a)\n", "line 3: unknown gate 'MUX'"),
        ("INPUT a\nOUTPUT y\ny = AND(a)\n", "line 3: AND takes 2 operand"),
        ("INPUT a\nOUTPUT y\ny = NOT(a)\ny = NOT(a)\n", "line 4: wire 'y' driven more than once"),
        ("INPUT a\nOUTPUT y\ny = AND(a, ghost)\n", "line 3: wire 'ghost' is never driven"),
        ("INPUT a\nOUTPUT y z\ny = NOT(a)\n", "line 2: output 'z' is never driven"),
        ("INPUT a\nOUTPUT y\ny := NOT(a)\n", "line 3: cannot parse"),
        ("INPUT\n", "line 1: INPUT declares no wires"),
        ("INPUT a\nOUTPUT y\nx = AND(a, y)\ny = AND(a, x)\n", "combinational cycle"),
        ("INPUT a\na = NOT(a)\n", "line 2: wire 'a' driven more than once"),
    ])
    def test_errors_carry_line_numbers(self, text, message):
        """Test each structural error names its line."""
        with pytest.raises(NetlistError, match=message):
            parse_netlist(text)

    def test_error_line_attribute(self):
        """Test the line number is also an attribute."""
        with pytest.raises(NetlistError) as exc:
            parse_netlist("INPUT a\n\n\ny = XOR(a)\n")
        assert exc.value.line == 4

    def test_format_round_trip(self):
        """Test format_netlist output parses back to the same gates."""
        circuit = build_kogge_stone_adder(4)
        again = parse_netlist(format_netlist(circuit))
        assert again.inputs == circuit.inputs
        assert again.outputs == circuit.outputs
        assert again.gates == circuit.gates

    def test_load_netlist(self):
        """Test reading a netlist from disk."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "ha.net")
            with open(path, "w") as f:
                f.write(HALF_ADDER)
            circuit = load_netlist(path)
            assert circuit.name == path
            assert len(circuit.gates) == 2


class TestMetadata:
    """Depth and level structure."""

    def test_not_adds_no_bootstrap_depth(self):
        """Test that NOT gates do not count towards depth."""
        circuit = parse_netlist("INPUT a b\nOUTPUT y\nt = AND(a, b)\nu = NOT(t)\ny = OR(u, a)\n")
        assert circuit.depth == 2
        assert len(circuit.levels()) == 3
        assert circuit.bootstrap_count == 2
        assert circuit.gate_counts == {"AND": 1, "OR": 1, "NOT": 1}

    def test_metadata_fields(self):
        """Test the dictionary consumed by the simulator."""
        meta = parse_netlist(HALF_ADDER, name="ha").metadata()
        assert meta["name"] == "ha"
        assert meta["depth"] == 1
        assert meta["level_widths"] == [2]
        assert meta["max_level_width"] == 2
        assert meta["bootstrap_count"] == 2

    def test_empty_circuit(self):
        """Test a circuit with no gates has depth 0."""
        circuit = parse_netlist("INPUT a\nOUTPUT a\n")
        assert circuit.depth == 0
        assert circuit.metadata()["level_widths"] == []
        assert circuit.evaluate_plain({"a": 1}) == {"a": 1}


class TestKoggeStoneAdder:
    """Parallel-prefix adder."""

    @pytest.mark.parametrize("width", [1, 2, 3, 4])
    def test_exhaustive_small(self, width):
        """Test every operand pair for small widths."""
        circuit = build_kogge_stone_adder(width)
        assert len(circuit.outputs) == width + 1
        for x in range(2**width):
            for y in range(2**width):
                assert run_word_circuit(circuit, x, y, width) == x + y

    def test_eight_bit_samples(self):
        """Test the 8-bit adder on boundary and mixed operands."""
        circuit = build_kogge_stone_adder(8)
        for x, y in ((0, 0), (255, 1), (255, 255), (170, 85), (19, 200)):
            assert run_word_circuit(circuit, x, y, 8) == x + y

    @pytest.mark.parametrize("width", [8, 16, 32])
    def test_logarithmic_depth(self, width):
        """Test depth <= 2*log2(width) + 2."""
        depth = build_kogge_stone_adder(width).depth
        assert depth <= 2 * math.log2(width) + 2
        assert depth >= math.log2(width)

    def test_invalid_width(self):
        """Test that width 0 is rejected."""
        with pytest.raises(ValueError, match="width must be >= 1"):
            build_kogge_stone_adder(0)


class TestMultiplier:
    """Shift-and-add multipliers."""

    @pytest.mark.parametrize("reduction", ["chain", "tree"])
    def test_exhaustive_4bit(self, reduction):
        """Test every 4-bit product."""
        circuit = build_multiplier(4, reduction)
        for x in range(16):
            for y in range(16):
                assert run_word_circuit(circuit, x, y, 4) == x * y

    def test_tree_is_shallower(self):
        """Test the pairwise reduction is no deeper than the chain."""
        assert build_multiplier(8, "tree").depth <= build_multiplier(8, "chain").depth

    def test_depth_grows_with_width(self):
        """Test a wider chain multiplier is deeper."""
        d4, d8 = build_multiplier(4).depth, build_multiplier(8).depth
        assert d8 > d4

    def test_eight_bit_samples(self):
        """Test the 8-bit multiplier on boundary operands."""
        circuit = build_multiplier(8)
        for x, y in ((0, 200), (255, 255), (13, 17), (128, 2)):
            assert run_word_circuit(circuit, x, y, 8) == x * y

    def test_unknown_reduction(self):
        """Test that an unknown reduction is rejected."""
        with pytest.raises(ValueError, match="unknown reduction"):
            build_multiplier(4, "wallace")


class TestBuilderAndHelpers:
    def test_constant_folding(self):
        """Test that AND with constant 0 folds away and XOR/OR pass through."""
        b = CircuitBuilder()
        x = b.input("x")
        assert b.AND(x, None) is None
        assert b.XOR(None, x) == x
        assert b.OR(x, None) == x
        assert b.gates == []

    def test_zero_wire(self):
        """Test folded constant outputs become a real zero wire."""
        b = CircuitBuilder()
        x = b.input("x")
        circuit = b.build([None, x, None])
        assert len(circuit.outputs) == 2
        assert circuit.gates == [Gate("XOR", circuit.outputs[0], ("x", "x"))]
        assert circuit.evaluate_plain({"x": 1})[circuit.outputs[0]] == 0

    def test_word_helpers(self):
        """Test little-endian bit helpers."""
        assert word_inputs("a", 6, 4) == {"a0": 0, "a1": 1, "a2": 1, "a3": 0}
        assert bits_to_int([0, 1, 1, 0]) == 6

    def test_generate_circuit(self):
        """Test generation from short names."""
        assert generate_circuit("add8").name == "add8"
        assert generate_circuit("mul4", reduction="tree").name == "mul4"
        with pytest.raises(ValueError, match="unknown circuit"):
            generate_circuit("sub8")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
