"""Security parameter sets and the quantities derived from them.

Each named set carries n, q, N, log2_Q and the three digit bases. The
concrete ring modulus Q and the digit counts are derived here so every
other module sees one fully resolved ParamSet.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import yaml

from pimfhe.config import (
    BOOTSTRAP_MODES,
    DEFAULT_ERROR_STDDEV,
    DEFAULT_MESSAGE_MODULUS,
    DEFAULT_SECRET_BY_MODE,
    SECRET_DISTRIBUTIONS,
    get_param_sets_path,
)

logger = logging.getLogger(__name__)

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


class ParameterError(ValueError):
    """Invalid or unknown parameter set."""


def _is_power_of_two(x: int) -> bool:
    return x > 0 and x & (x - 1) == 0


def is_probable_prime(p: int) -> bool:
    """Deterministic Miller-Rabin for p < 3.3e24."""
    if p < 2:
        return False
    for small in _MR_BASES:
        if p % small == 0:
            return p == small
    d, r = p - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, p)
        if x in (1, p - 1):
            continue
        for _ in range(r - 1):
            x = pow(x, 2, p)
            if x == p - 1:
                break
        else:
            return False
    return True


def _min_digits(base: int, modulus: int) -> int:
    """Smallest k >= 1 with base^k >= modulus."""
    k, reach = 1, base
    while reach < modulus:
        reach *= base
        k += 1
    return k


def derive_digit_counts(q: int, Q: int, B_s: int, B_g: int, B_r: int) -> tuple[int, int, int]:
    """Derive (d_s, d_g, d_r), each minimal with base^d >= modulus.

    Args:
        q: LWE modulus
        Q: ring modulus
        B_s: key-switching base
        B_g: gadget base
        B_r: refreshing base

    Returns:
        Tuple (d_s, d_g, d_r), every entry at least 1
    """
    for label, base in (("B_s", B_s), ("B_g", B_g), ("B_r", B_r)):
        if base < 2:
            raise ParameterError(f"{label} must be >= 2, got {base}")
    return _min_digits(B_s, Q), _min_digits(B_g, Q), _min_digits(B_r, q)


@lru_cache(maxsize=None)
def select_modulus(log2_Q: int, N: int) -> int:
    """Largest prime Q < 2^log2_Q with Q = 1 mod 2N and Q > 2^(log2_Q - 1).

    Raises:
        ParameterError: no NTT-friendly modulus in the range
    """
    if log2_Q < 2 or not _is_power_of_two(N):
        raise ParameterError(f"no NTT-friendly modulus for log2_Q={log2_Q}, N={N}")
    step = 2 * N
    upper = 1 << log2_Q
    lower = upper >> 1
    candidate = ((upper - 2) // step) * step + 1
    while candidate > lower:
        if is_probable_prime(candidate):
            return candidate
        candidate -= step
    raise ParameterError(f"no NTT-friendly modulus below 2^{log2_Q} for N={N}")


@dataclass(frozen=True)
class ParamSet:
    """One fully derived parameter set."""

    name: str
    security_bits: int
    quantum_safe: bool
    n: int
    q: int
    N: int
    log2_Q: int
    Q: int
    B_s: int
    B_g: int
    B_r: int
    d_s: int
    d_g: int
    d_r: int
    t: int = DEFAULT_MESSAGE_MODULUS
    error_stddev: float = DEFAULT_ERROR_STDDEV
    secret_dist: str = "binary"

    def __post_init__(self) -> None:
        if not (_is_power_of_two(self.q) and _is_power_of_two(self.N)):
            raise ParameterError(f"{self.name}: q and N must be powers of two")
        if self.q > 2 * self.N:
            raise ParameterError(f"{self.name}: q={self.q} exceeds 2N={2 * self.N}")
        if not _is_power_of_two(self.B_g):
            raise ParameterError(f"{self.name}: B_g={self.B_g} is not a power of two")
        if self.secret_dist not in SECRET_DISTRIBUTIONS:
            raise ParameterError(
                f"{self.name}: unknown secret distribution '{self.secret_dist}', "
                f"expected one of {', '.join(SECRET_DISTRIBUTIONS)}"
            )

    @property
    def rotation_scale(self) -> int:
        """2N/q: maps Z_q phases onto exponents of X in Z_2N."""
        return 2 * self.N // self.q

    @property
    def ntt_stages(self) -> int:
        return self.N.bit_length() - 1

    @property
    def log2_q(self) -> int:
        return self.q.bit_length() - 1

    @property
    def word_bits(self) -> int:
        """Envelope word width able to hold any residue mod Q."""
        return 32 if self.Q < (1 << 32) else 64

    def with_mode(self, mode: str) -> "ParamSet":
        """Copy with the secret distribution implied by a bootstrapping mode."""
        if mode not in BOOTSTRAP_MODES:
            raise ParameterError(f"unknown bootstrapping mode '{mode}', expected one of {', '.join(BOOTSTRAP_MODES)}")
        return replace(self, secret_dist=DEFAULT_SECRET_BY_MODE[mode])

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "security_bits": self.security_bits,
            "quantum_safe": self.quantum_safe,
            "n": self.n,
            "q": self.q,
            "N": self.N,
            "log2_Q": self.log2_Q,
            "Q": self.Q,
            "B_s": self.B_s,
            "B_g": self.B_g,
            "B_r": self.B_r,
            "d_s": self.d_s,
            "d_g": self.d_g,
            "d_r": self.d_r,
            "t": self.t,
            "error_stddev": self.error_stddev,
            "secret_dist": self.secret_dist,
        }

    @classmethod
    def from_record(cls, name: str, record: dict, secret_dist: str = "binary") -> "ParamSet":
        """Build a ParamSet from one YAML record, deriving Q and digit counts."""
        N = int(record["N"])
        log2_Q = int(record["log2_Q"])
        Q = int(record.get("Q") or select_modulus(log2_Q, N))
        q = int(record["q"])
        B_s, B_g, B_r = int(record["B_s"]), int(record["B_g"]), int(record["B_r"])
        d_s, d_g, d_r = derive_digit_counts(q, Q, B_s, B_g, B_r)
        return cls(
            name=name,
            security_bits=int(record.get("security_bits", 0)),
            quantum_safe=bool(record.get("quantum_safe", False)),
            n=int(record["n"]),
            q=q,
            N=N,
            log2_Q=log2_Q,
            Q=Q,
            B_s=B_s,
            B_g=B_g,
            B_r=B_r,
            d_s=d_s,
            d_g=d_g,
            d_r=d_r,
            t=int(record.get("t", DEFAULT_MESSAGE_MODULUS)),
            error_stddev=float(record.get("error_stddev", DEFAULT_ERROR_STDDEV)),
            secret_dist=secret_dist,
        )


@lru_cache(maxsize=8)
def _load_records(path: str) -> dict:
    with open(path) as f:
        data = yaml.safe_load(f) or {}
    records = data.get("param_sets") or {}
    logger.debug(f"Loaded {len(records)} parameter sets from {path}")
    return records


def list_param_sets(path: Optional[str] = None) -> list[str]:
    """Names of all parameter sets in the YAML file, in file order."""
    return list(_load_records(path or get_param_sets_path()).keys())


def load_param_set(
    name: str,
    mode: str = "ginx",
    secret_dist: Optional[str] = None,
    path: Optional[str] = None,
) -> ParamSet:
    """Load and derive a named parameter set.

    Args:
        name: Set identifier, e.g. "STD128" or "TOY"
        mode: Bootstrapping mode; picks the default secret distribution
        secret_dist: Explicit override of the secret distribution
        path: Optional YAML path (default config/param_sets.yaml)

    Returns:
        Fully derived ParamSet

    Raises:
        ParameterError: unknown parameter set or mode
    """
    records = _load_records(path or get_param_sets_path())
    if name not in records:
        raise ParameterError(f"unknown parameter set '{name}'; valid sets: {', '.join(records)}")
    if mode not in BOOTSTRAP_MODES:
        raise ParameterError(f"unknown bootstrapping mode '{mode}', expected one of {', '.join(BOOTSTRAP_MODES)}")
    dist = secret_dist or DEFAULT_SECRET_BY_MODE[mode]
    return ParamSet.from_record(name, records[name], secret_dist=dist)


__all__ = [
    "ParameterError",
    "ParamSet",
    "is_probable_prime",
    "derive_digit_counts",
    "select_modulus",
    "list_param_sets",
    "load_param_set",
]
