"""Boolean gates over LWE ciphertexts.

A bootstrapped gate is: linear combine -> bootstrap with the gate's window
-> key switch -> modulus switch. NOT is a linear map and needs no refresh.

Bits are encrypted at phase bit * q/4, so a sum of two bits lands on
{0, q/4, q/2}; doubling the inputs (XOR/XNOR) lands on {0, q/2, q}. Each
window is a half-circle [lb, lb + q/2) on the q/8 grid.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

from pimfhe.bootstrap import RefreshKey, RefreshKeyAP, RlweSecret, bootstrap, refresh_keygen, rlwe_keygen
from pimfhe.lwe import (
    KeyMismatchError,
    KeySwitchKey,
    LweCiphertext,
    LweSecretKey,
    key_switch,
    keygen,
    keyswitch_keygen,
    lwe_linear,
    modulus_switch,
)
from pimfhe.params import ParamSet
from pimfhe.sampling import Sampler, as_sampler

logger = logging.getLogger(__name__)

GATE_NAMES = ("AND", "NAND", "OR", "NOR", "XOR", "XNOR", "NOT")

PLAIN_GATES: dict[str, Callable[..., int]] = {
    "AND": lambda x, y: x & y,
    "NAND": lambda x, y: 1 - (x & y),
    "OR": lambda x, y: x | y,
    "NOR": lambda x, y: 1 - (x | y),
    "XOR": lambda x, y: x ^ y,
    "XNOR": lambda x, y: 1 - (x ^ y),
    "NOT": lambda x, y=0: 1 - x,
}

# name -> (c1, c2, window start in eighths of q); every window spans 4 eighths
_SHIPPED = {
    "AND": (1, 1, 3),
    "OR": (1, 1, 1),
    "NAND": (1, 1, 7),
    "NOR": (1, 1, 5),
    "XOR": (2, 2, 3),
    "XNOR": (2, 2, 7),
}


@dataclass(frozen=True)
class GateSpec:
    """Linear combination c1*ct1 + c2*ct2 + (0, c0) and a bootstrap window."""

    name: str
    c1: int
    c2: int
    c0: int
    window: tuple[int, int]
    bootstrap_required: bool = True

    @property
    def arity(self) -> int:
        return 1 if self.name == "NOT" else 2


@dataclass(frozen=True)
class EvaluationKeys:
    """Server-side key bundle: refresh key plus key-switching key."""

    params: ParamSet
    refresh_key: RefreshKey
    ksk: KeySwitchKey

    @property
    def mode(self) -> str:
        return "ap" if isinstance(self.refresh_key, RefreshKeyAP) else "ginx"


def _noiseless_phase(spec_c: tuple[int, int, int], x: int, y: int, q: int) -> int:
    c1, c2, c0 = spec_c
    return (c1 * x * (q // 4) + c2 * y * (q // 4) + c0) % q


def _margin(window: tuple[int, int], phase: int, q: int) -> int:
    """Distance from phase to the nearest window boundary."""
    lb, ub = window
    return min((phase - lb) % q, (lb - phase) % q, (phase - ub) % q, (ub - phase) % q)


def window_is_valid(spec: GateSpec, q: int) -> bool:
    """Every truth-table row lands on the right side with margin >= q/8."""
    truth = PLAIN_GATES[spec.name]
    lb, ub = spec.window
    for x in (0, 1):
        for y in (0, 1):
            phase = _noiseless_phase((spec.c1, spec.c2, spec.c0), x, y, q)
            inside = (phase - lb) % q < (ub - lb) % q
            if inside != bool(truth(x, y)) or _margin(spec.window, phase, q) < q // 8:
                return False
    return True


def find_window(name: str, c1: int, c2: int, q: int, c0: int = 0) -> Optional[tuple[int, int]]:
    """Search the 8 canonical q/8-aligned half-circle windows for a gate."""
    eighth = q // 8
    for k in range(8):
        window = (k * eighth, (k * eighth + q // 2) % q)
        if window_is_valid(GateSpec(name, c1, c2, c0, window), q):
            return window
    return None


def gate_table(q: int = 512) -> dict[str, GateSpec]:
    """Specs for the seven gates at LWE modulus q.

    Raises:
        ValueError: a gate has no valid window for this combination
    """
    eighth = q // 8
    table: dict[str, GateSpec] = {}
    for name, (c1, c2, start) in _SHIPPED.items():
        window = (start * eighth, ((start + 4) * eighth) % q)
        spec = GateSpec(name, c1, c2, 0, window)
        if not window_is_valid(spec, q):
            found = find_window(name, c1, c2, q)
            if found is None:
                raise ValueError(f"no canonical window realizes {name} with combine ({c1}, {c2})")
            logger.warning(f"{name}: shipped window {window} failed validation, using {found}")
            spec = GateSpec(name, c1, c2, 0, found)
        table[name] = spec
    table["NOT"] = GateSpec("NOT", -1, 0, q // 4, (0, q // 2), bootstrap_required=False)
    return table


def generate_key_material(
    params: ParamSet,
    mode: str = "ginx",
    seed: int | Sampler | None = 0,
) -> tuple[LweSecretKey, RlweSecret, EvaluationKeys]:
    """Client secret, ring secret and server evaluation keys, all from one seed."""
    sampler = as_sampler(seed)
    sk = keygen(params, sampler)
    z = rlwe_keygen(params, sampler)
    logger.info(f"[KEYGEN] {params.name} {mode}: n={params.n} N={params.N} Q={params.Q}")
    refresh_key = refresh_keygen(sk, z, params, mode, sampler)
    ksk = keyswitch_keygen(z.as_lwe_key(), sk, params, sampler)
    logger.info(f"[KEYGEN] {params.name} {mode}: key-switch key {ksk.nbytes:,} bytes")
    return sk, z, EvaluationKeys(params=params, refresh_key=refresh_key, ksk=ksk)


def generate_keys(
    params: ParamSet,
    mode: str = "ginx",
    seed: int | Sampler | None = 0,
) -> tuple[LweSecretKey, EvaluationKeys]:
    """Client secret plus the server evaluation keys."""
    sk, _, keys = generate_key_material(params, mode, seed)
    return sk, keys


def eval_gate(
    gate: GateSpec | str,
    ct1: LweCiphertext,
    ct2: Optional[LweCiphertext],
    keys: EvaluationKeys,
    mode: Optional[str] = None,
) -> LweCiphertext:
    """Evaluate one gate; the output is dimension n modulo q.

    Raises:
        KeyMismatchError: inputs are not dimension n mod q, or mode disagrees with keys
    """
    params = keys.params
    if isinstance(gate, str):
        gate = gate_table(params.q)[gate.upper()]
    for ct in (ct1, ct2):
        if ct is not None and (ct.dimension != params.n or ct.modulus != params.q):
            raise KeyMismatchError(
                f"{gate.name}: input (dim={ct.dimension}, mod={ct.modulus}) does not match "
                f"{params.name} (n={params.n}, q={params.q})"
            )

    combined = lwe_linear(ct1, ct2, gate.c1, gate.c2, gate.c0)
    if not gate.bootstrap_required:
        return combined
    refreshed = bootstrap(combined, keys.refresh_key, gate.window, mode)
    return modulus_switch(key_switch(refreshed, keys.ksk), params.q)


__all__ = [
    "GATE_NAMES",
    "PLAIN_GATES",
    "GateSpec",
    "EvaluationKeys",
    "window_is_valid",
    "find_window",
    "gate_table",
    "generate_key_material",
    "generate_keys",
    "eval_gate",
]
