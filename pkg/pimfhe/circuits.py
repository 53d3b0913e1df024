"""Gate-level circuits: netlist format, builders and structural metadata.

Netlist format (one statement per line, '#' starts a comment):

    INPUT a0 a1 b0 b1
    OUTPUT s0 s1 c
    s0 = XOR(a0, b0)
    n1 = NOT(a1)

Gates may appear in any order; parse_netlist sorts them topologically and
rejects cycles, undriven wires and double drivers.
"""
from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from pimfhe.gates import GATE_NAMES, PLAIN_GATES

logger = logging.getLogger(__name__)

_GATE_RE = re.compile(r"^(\w+)\s*=\s*([A-Za-z]+)\s*\(\s*([^)]*)\)$")
MULTIPLIER_REDUCTIONS = ("chain", "tree")


class NetlistError(ValueError):
    """Malformed or structurally invalid netlist."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def arity(op: str) -> int:
    return 1 if op == "NOT" else 2


@dataclass(frozen=True)
class Gate:
    op: str
    out: str
    inputs: tuple[str, ...]


@dataclass
class Circuit:
    """Topologically ordered gates over named wires."""

    inputs: list[str]
    outputs: list[str]
    gates: list[Gate] = field(default_factory=list)
    name: str = "circuit"

    def drivers(self) -> dict[str, Gate]:
        return {g.out: g for g in self.gates}

    def levels(self) -> list[list[Gate]]:
        """Evaluation levels: every gate one step deeper than its deepest input."""
        depth: dict[str, int] = {w: 0 for w in self.inputs}
        grouped: dict[int, list[Gate]] = {}
        for g in self.gates:
            d = 1 + max(depth[w] for w in g.inputs)
            depth[g.out] = d
            grouped.setdefault(d, []).append(g)
        return [grouped[d] for d in sorted(grouped)]

    def bootstrap_levels(self) -> list[list[Gate]]:
        """Bootstrapped gates grouped by refresh depth; NOT adds no depth."""
        depth: dict[str, int] = {w: 0 for w in self.inputs}
        grouped: dict[int, list[Gate]] = {}
        for g in self.gates:
            d = max(depth[w] for w in g.inputs)
            if g.op != "NOT":
                d += 1
                grouped.setdefault(d, []).append(g)
            depth[g.out] = d
        return [grouped[d] for d in sorted(grouped)]

    @property
    def depth(self) -> int:
        """Number of sequential bootstraps on the longest path."""
        return len(self.bootstrap_levels())

    @property
    def gate_counts(self) -> dict[str, int]:
        counts = Counter(g.op for g in self.gates)
        return {op: counts[op] for op in GATE_NAMES if counts[op]}

    @property
    def bootstrap_count(self) -> int:
        return sum(1 for g in self.gates if g.op != "NOT")

    def metadata(self) -> dict:
        widths = [len(level) for level in self.bootstrap_levels()]
        return {
            "name": self.name,
            "inputs": len(self.inputs),
            "outputs": len(self.outputs),
            "gates": len(self.gates),
            "gate_counts": self.gate_counts,
            "bootstrap_count": self.bootstrap_count,
            "depth": self.depth,
            "eval_levels": len(self.levels()),
            "level_widths": widths,
            "max_level_width": max(widths, default=0),
        }

    def evaluate_plain(self, assignment: dict[str, int]) -> dict[str, int]:
        """Reference evaluation on cleartext bits."""
        values = {w: int(assignment[w]) & 1 for w in self.inputs}
        for g in self.gates:
            values[g.out] = PLAIN_GATES[g.op](*(values[w] for w in g.inputs))
        return {w: values[w] for w in self.outputs}


def _topological_order(gates: list[tuple[Gate, int]], inputs: list[str]) -> list[Gate]:
    ready = set(inputs)
    pending = list(gates)
    ordered: list[Gate] = []
    while pending:
        remaining = []
        for g, line in pending:
            if all(w in ready for w in g.inputs):
                ordered.append(g)
                ready.add(g.out)
            else:
                remaining.append((g, line))
        if len(remaining) == len(pending):
            g, line = remaining[0]
            raise NetlistError(f"combinational cycle through wire '{g.out}'", line)
        pending = remaining
    return ordered


def parse_netlist(text: str, name: str = "circuit") -> Circuit:
    """Parse netlist text into a validated, topologically ordered Circuit.

    Raises:
        NetlistError: syntax error, unknown gate, wrong arity, double driver,
            undriven wire or cycle, with the offending line number
    """
    inputs: list[str] = []
    outputs: list[tuple[str, int]] = []
    gates: list[tuple[Gate, int]] = []
    driven: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.replace("\t", " ").partition(" ")
        if head in ("INPUT", "OUTPUT"):
            wires = [w for w in re.split(r"[\s,]+", rest.strip()) if w]
            if not wires:
                raise NetlistError(f"{head} declares no wires", lineno)
            for w in wires:
                if head == "INPUT":
                    if w in driven:
                        raise NetlistError(f"wire '{w}' driven more than once", lineno)
                    driven[w] = lineno
                    inputs.append(w)
                else:
                    outputs.append((w, lineno))
            continue

        match = _GATE_RE.match(line)
        if not match:
            raise NetlistError(f"cannot parse '{line}'", lineno)
        out, op, args = match.group(1), match.group(2).upper(), match.group(3)
        if op not in GATE_NAMES:
            raise NetlistError(f"unknown gate '{op}', expected one of {', '.join(GATE_NAMES)}", lineno)
        operands = tuple(a.strip() for a in args.split(",") if a.strip())
        if len(operands) != arity(op):
            raise NetlistError(f"{op} takes {arity(op)} operand(s), got {len(operands)}", lineno)
        if out in driven:
            raise NetlistError(f"wire '{out}' driven more than once", lineno)
        driven[out] = lineno
        gates.append((Gate(op, out, operands), lineno))

    for g, lineno in gates:
        for w in g.inputs:
            if w not in driven:
                raise NetlistError(f"wire '{w}' is never driven", lineno)
    for w, lineno in outputs:
        if w not in driven:
            raise NetlistError(f"output '{w}' is never driven", lineno)

    ordered = _topological_order(gates, inputs)
    return Circuit(inputs=inputs, outputs=[w for w, _ in outputs], gates=ordered, name=name)


def format_netlist(circuit: Circuit) -> str:
    lines = [f"# {circuit.name}"]
    if circuit.inputs:
        lines.append("INPUT " + " ".join(circuit.inputs))
    if circuit.outputs:
        lines.append("OUTPUT " + " ".join(circuit.outputs))
    for g in circuit.gates:
        lines.append(f"{g.out} = {g.op}({', '.join(g.inputs)})")
    return "\n".join(lines) + "\n"


def load_netlist(path: str) -> Circuit:
    with open(path) as f:
        text = f.read()
    return parse_netlist(text, name=path)


# ----------------------------------------------------------------------------
# Builders
# ----------------------------------------------------------------------------

Wire = Optional[str]  # None is the constant 0


class CircuitBuilder:
    """Emits gates with constant-zero folding."""

    def __init__(self, name: str = "circuit"):
        self.name = name
        self.inputs: list[str] = []
        self.gates: list[Gate] = []
        self._counter = 0
        self._zero: Optional[str] = None

    def input(self, wire: str) -> str:
        self.inputs.append(wire)
        return wire

    def _emit(self, op: str, *operands: str) -> str:
        out = f"n{self._counter}"
        self._counter += 1
        self.gates.append(Gate(op, out, tuple(operands)))
        return out

    def AND(self, x: Wire, y: Wire) -> Wire:
        if x is None or y is None:
            return None
        return self._emit("AND", x, y)

    def OR(self, x: Wire, y: Wire) -> Wire:
        if x is None:
            return y
        if y is None:
            return x
        return self._emit("OR", x, y)

    def XOR(self, x: Wire, y: Wire) -> Wire:
        if x is None:
            return y
        if y is None:
            return x
        return self._emit("XOR", x, y)

    def zero(self) -> str:
        """A real wire carrying 0, for outputs that fold to the constant."""
        if self._zero is None:
            self._zero = self._emit("XOR", self.inputs[0], self.inputs[0])
        return self._zero

    def build(self, outputs: list[Wire]) -> Circuit:
        while outputs and outputs[-1] is None:
            outputs = outputs[:-1]
        wires = [w if w is not None else self.zero() for w in outputs]
        return Circuit(inputs=list(self.inputs), outputs=wires, gates=list(self.gates), name=self.name)


def _kogge_stone(b: CircuitBuilder, xs: list[Wire], ys: list[Wire]) -> tuple[list[Wire], Wire]:
    """Parallel-prefix addition of two equal-length little-endian words."""
    width = len(xs)
    g = [b.AND(x, y) for x, y in zip(xs, ys)]
    p = [b.XOR(x, y) for x, y in zip(xs, ys)]
    G, P = list(g), list(p)
    d = 1
    while d < width:
        newG, newP = list(G), list(P)
        for i in range(d, width):
            newG[i] = b.OR(G[i], b.AND(P[i], G[i - d]))
            if i >= 2 * d:
                newP[i] = b.AND(P[i], P[i - d])
        G, P = newG, newP
        d *= 2
    sums = [p[0]] + [b.XOR(p[i], G[i - 1]) for i in range(1, width)]
    return sums, G[width - 1]


def build_kogge_stone_adder(width: int) -> Circuit:
    """width-bit adder; outputs are the width sum bits then the carry-out.

    Raises:
        ValueError: width < 1
    """
    if width < 1:
        raise ValueError(f"adder width must be >= 1, got {width}")
    b = CircuitBuilder(name=f"add{width}")
    xs = [b.input(f"a{i}") for i in range(width)]
    ys = [b.input(f"b{i}") for i in range(width)]
    sums, carry = _kogge_stone(b, xs, ys)
    circuit = b.build(sums + [carry])
    logger.debug(f"Built {circuit.name}: {len(circuit.gates)} gates, depth {circuit.depth}")
    return circuit


def _add_rows(b: CircuitBuilder, r1: dict[int, Wire], r2: dict[int, Wire]) -> dict[int, Wire]:
    """Add two sparse bit rows keyed by bit position."""
    positions = [p for p, w in list(r1.items()) + list(r2.items()) if w is not None]
    if not positions:
        return {}
    lo, hi = min(positions), max(positions)
    xs = [r1.get(p) for p in range(lo, hi + 1)]
    ys = [r2.get(p) for p in range(lo, hi + 1)]
    sums, carry = _kogge_stone(b, xs, ys)
    out = {lo + k: s for k, s in enumerate(sums)}
    out[hi + 1] = carry
    return out


def build_multiplier(width: int, reduction: str = "chain") -> Circuit:
    """width x width shift-and-add multiplier.

    Args:
        width: Operand width in bits
        reduction: "chain" accumulates partial products one row at a time,
            "tree" adds them pairwise

    Returns:
        Circuit whose outputs are the product bits, least significant first
    """
    if width < 1:
        raise ValueError(f"multiplier width must be >= 1, got {width}")
    if reduction not in MULTIPLIER_REDUCTIONS:
        raise ValueError(f"unknown reduction '{reduction}', expected one of {', '.join(MULTIPLIER_REDUCTIONS)}")
    b = CircuitBuilder(name=f"mul{width}")
    xs = [b.input(f"a{i}") for i in range(width)]
    ys = [b.input(f"b{i}") for i in range(width)]
    rows = [{i + j: b.AND(xs[i], ys[j]) for i in range(width)} for j in range(width)]

    if reduction == "chain":
        acc = rows[0]
        for row in rows[1:]:
            acc = _add_rows(b, acc, row)
    else:
        while len(rows) > 1:
            paired = [_add_rows(b, rows[k], rows[k + 1]) for k in range(0, len(rows) - 1, 2)]
            if len(rows) % 2:
                paired.append(rows[-1])
            rows = paired
        acc = rows[0]

    top = max((p for p, w in acc.items() if w is not None), default=-1)
    circuit = b.build([acc.get(p) for p in range(top + 1)])
    logger.debug(f"Built {circuit.name} ({reduction}): {len(circuit.gates)} gates, depth {circuit.depth}")
    return circuit


def word_inputs(prefix: str, value: int, width: int) -> dict[str, int]:
    """Little-endian bit assignment {prefix0: bit0, ...}."""
    return {f"{prefix}{i}": (value >> i) & 1 for i in range(width)}


def bits_to_int(bits: list[int]) -> int:
    return sum((bit & 1) << i for i, bit in enumerate(bits))


def generate_circuit(spec: str, reduction: str = "chain") -> Circuit:
    """Build from a short name such as "add8" or "mul4"."""
    match = re.fullmatch(r"(add|mul)(\d+)", spec)
    if not match:
        raise ValueError(f"unknown circuit '{spec}', expected add<width> or mul<width>")
    width = int(match.group(2))
    if match.group(1) == "add":
        return build_kogge_stone_adder(width)
    return build_multiplier(width, reduction)


__all__ = [
    "NetlistError",
    "MULTIPLIER_REDUCTIONS",
    "Gate",
    "Circuit",
    "CircuitBuilder",
    "arity",
    "parse_netlist",
    "format_netlist",
    "load_netlist",
    "build_kogge_stone_adder",
    "build_multiplier",
    "word_inputs",
    "bits_to_int",
    "generate_circuit",
]
