"""Modular integer and negacyclic polynomial arithmetic over Z_Q[X]/(X^N + 1).

The NTT is the constant-geometry (Singleton) form: every stage reads the
pair (x[2i], x[2i+1]) and writes y[i], y[i + N/2], so the data movement
between stages never changes and only the twiddle factors do. Inputs are
twisted by powers of psi (a primitive 2N-th root) to make the cyclic
transform negacyclic; the spectrum comes out in natural order with
X[k] = a(psi^(2k+1)).

Array-level functions operate on the last axis and accept any number of
leading batch axes. RingElement wraps a single polynomial with its
domain tag for the public API.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from pimfhe.config import INT64_MODULUS_LIMIT

logger = logging.getLogger(__name__)

COEFFICIENT = "coefficient"
NTT = "ntt"


class DomainMismatchError(ValueError):
    """Operands disagree on (N, Q) or on their domain tag."""


def word_dtype(Q: int):
    """int64 while residue products fit, Python objects beyond."""
    return np.int64 if Q < INT64_MODULUS_LIMIT else object


def storage_dtype(Q: int):
    """Compact dtype for stored key material."""
    return np.uint32 if Q < (1 << 32) else word_dtype(Q)


def as_residues(values, Q: int) -> np.ndarray:
    """Reduce arbitrary integers into [0, Q) with the working dtype for Q."""
    dtype = word_dtype(Q)
    if dtype is object:
        arr = np.asarray(values, dtype=object)
        return np.vectorize(lambda v: int(v) % Q, otypes=[object])(arr) if arr.size else arr
    return np.asarray(values, dtype=np.int64) % Q


def center(values: np.ndarray, Q: int) -> np.ndarray:
    """Map residues in [0, Q) to the centered range [-Q/2, Q/2)."""
    half = (Q + 1) // 2
    return np.where(values >= half, values - Q, values)


# ----------------------------------------------------------------------------
# Scalar reductions
# ----------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _barrett_constants(Q: int) -> tuple[int, int]:
    k = 2 * Q.bit_length()
    return k, (1 << k) // Q


def barrett_reduce(x: int, Q: int) -> int:
    """Reduce x in [0, 2Q) modulo Q with a precomputed reciprocal."""
    k, mu = _barrett_constants(Q)
    x = int(x)
    r = x - ((x * mu) >> k) * Q
    while r >= Q:
        r -= Q
    return r


@lru_cache(maxsize=None)
def _montgomery_constants(Q: int) -> tuple[int, int, int]:
    if Q % 2 == 0:
        raise ValueError(f"Montgomery requires odd modulus, got {Q}")
    r_bits = Q.bit_length()
    R = 1 << r_bits
    q_neg_inv = (-pow(Q, -1, R)) % R
    r2 = (R * R) % Q
    return r_bits, q_neg_inv, r2


def _redc(t: int, Q: int, r_bits: int, q_neg_inv: int) -> int:
    m = ((t & ((1 << r_bits) - 1)) * q_neg_inv) & ((1 << r_bits) - 1)
    u = (t + m * Q) >> r_bits
    return u - Q if u >= Q else u


def montgomery_mul(a: int, b: int, Q: int) -> int:
    """a * b mod Q via two Montgomery reductions (the second folds in R^2)."""
    r_bits, q_neg_inv, r2 = _montgomery_constants(Q)
    t = _redc(int(a) * int(b), Q, r_bits, q_neg_inv)
    return _redc(t * r2, Q, r_bits, q_neg_inv)


# ----------------------------------------------------------------------------
# Twiddle tables
# ----------------------------------------------------------------------------

def _prime_factors(x: int) -> list[int]:
    factors, p = [], 2
    while p * p <= x:
        if x % p == 0:
            factors.append(p)
            while x % p == 0:
                x //= p
        p += 1
    if x > 1:
        factors.append(x)
    return factors


@lru_cache(maxsize=None)
def primitive_root(Q: int) -> int:
    """Smallest generator of the multiplicative group mod prime Q."""
    order = Q - 1
    factors = _prime_factors(order)
    g = 2
    while any(pow(g, order // p, Q) == 1 for p in factors):
        g += 1
    return g


def _bit_reverse_indices(N: int) -> np.ndarray:
    bits = N.bit_length() - 1
    idx = np.arange(N)
    rev = np.zeros(N, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def singleton_layout(N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Row access pattern of one constant-geometry stage.

    Returns:
        (read_even, read_odd, write_low, write_high) index arrays
    """
    half = N // 2
    return (
        np.arange(0, N, 2),
        np.arange(1, N, 2),
        np.arange(half),
        np.arange(half, N),
    )


@dataclass(frozen=True)
class TwiddleTable:
    """Precomputed factors for the negacyclic constant-geometry NTT of (N, Q)."""

    N: int
    Q: int
    psi: int
    n_inv: int
    twist: np.ndarray = field(repr=False)
    untwist: np.ndarray = field(repr=False)
    forward_factors: np.ndarray = field(repr=False)  # (stages, N/2)
    inverse_factors: np.ndarray = field(repr=False)
    bit_reverse: np.ndarray = field(repr=False)
    layouts: tuple = field(repr=False)

    @property
    def stages(self) -> int:
        return self.N.bit_length() - 1

    @classmethod
    def build(cls, N: int, Q: int) -> "TwiddleTable":
        if (Q - 1) % (2 * N):
            raise ValueError(f"Q={Q} has no 2N-th roots of unity for N={N}")
        g = primitive_root(Q)
        psi = pow(g, (Q - 1) // (2 * N), Q)
        psi_inv = pow(psi, -1, Q)
        omega, omega_inv = psi * psi % Q, psi_inv * psi_inv % Q
        stages = N.bit_length() - 1
        dtype = word_dtype(Q)

        def powers(base: int, count: int) -> np.ndarray:
            out, acc = [], 1
            for _ in range(count):
                out.append(acc)
                acc = acc * base % Q
            return np.array(out, dtype=dtype)

        omega_pows = powers(omega, N)
        omega_inv_pows = powers(omega_inv, N)
        rows = np.arange(N // 2)
        forward, inverse = [], []
        for s in range(stages):
            exponents = (N >> (s + 1)) * (rows >> (stages - 1 - s))
            forward.append(omega_pows[exponents])
            inverse.append(omega_inv_pows[exponents])

        n_inv = pow(N, -1, Q)
        untwist = powers(psi_inv, N)
        untwist = np.array([int(v) * n_inv % Q for v in untwist], dtype=dtype)
        layouts = tuple(singleton_layout(N) for _ in range(stages))
        return cls(
            N=N,
            Q=Q,
            psi=psi,
            n_inv=n_inv,
            twist=powers(psi, N),
            untwist=untwist,
            forward_factors=np.array(forward, dtype=dtype).reshape(stages, N // 2),
            inverse_factors=np.array(inverse, dtype=dtype).reshape(stages, N // 2),
            bit_reverse=_bit_reverse_indices(N),
            layouts=layouts,
        )


@lru_cache(maxsize=None)
def get_twiddle_table(N: int, Q: int) -> TwiddleTable:
    if word_dtype(Q) is object:
        logger.warning(f"Q={Q} needs more than 31 bits; ring arithmetic falls back to Python integers (slow)")
    return TwiddleTable.build(N, Q)


# ----------------------------------------------------------------------------
# Array-level transforms
# ----------------------------------------------------------------------------

def _run_stages(x: np.ndarray, factors: np.ndarray, tw: TwiddleTable) -> np.ndarray:
    Q = tw.Q
    for s in range(tw.stages):
        read_even, read_odd, write_low, write_high = tw.layouts[s]
        even = x[..., read_even]
        t = (x[..., read_odd] * factors[s]) % Q
        y = np.empty_like(x)
        y[..., write_low] = (even + t) % Q
        y[..., write_high] = (even - t) % Q
        x = y
    return x


def ntt_forward_array(coeffs: np.ndarray, tw: TwiddleTable) -> np.ndarray:
    x = (coeffs * tw.twist) % tw.Q
    return _run_stages(x[..., tw.bit_reverse], tw.forward_factors, tw)


def ntt_inverse_array(spectrum: np.ndarray, tw: TwiddleTable) -> np.ndarray:
    x = _run_stages(spectrum[..., tw.bit_reverse], tw.inverse_factors, tw)
    return (x * tw.untwist) % tw.Q


def monomial_mul_array(coeffs: np.ndarray, m: int, Q: int) -> np.ndarray:
    """X^m * a(X) mod (X^N + 1) along the last axis."""
    N = coeffs.shape[-1]
    m %= 2 * N
    negate_all = m >= N
    if negate_all:
        m -= N
    out = np.roll(coeffs, m, axis=-1)
    if m:
        out[..., :m] = -out[..., :m]
    if negate_all:
        out = -out
    return out % Q


# ----------------------------------------------------------------------------
# RingElement API
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class RingElement:
    """One polynomial of Z_Q[X]/(X^N + 1) in coefficient or NTT domain."""

    coeffs: np.ndarray
    N: int
    Q: int
    domain: str = COEFFICIENT

    def __post_init__(self) -> None:
        if self.domain not in (COEFFICIENT, NTT):
            raise DomainMismatchError(f"unknown domain tag '{self.domain}'")
        if self.coeffs.shape != (self.N,):
            raise DomainMismatchError(f"expected {self.N} coefficients, got shape {self.coeffs.shape}")

    @classmethod
    def from_coeffs(cls, values, N: int, Q: int, domain: str = COEFFICIENT) -> "RingElement":
        arr = as_residues(values, Q)
        return cls(coeffs=arr, N=N, Q=Q, domain=domain)

    @classmethod
    def zero(cls, N: int, Q: int, domain: str = COEFFICIENT) -> "RingElement":
        return cls(coeffs=np.zeros(N, dtype=word_dtype(Q)), N=N, Q=Q, domain=domain)

    def to_list(self) -> list[int]:
        return [int(c) for c in self.coeffs]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RingElement):
            return NotImplemented
        return (
            (self.N, self.Q, self.domain) == (other.N, other.Q, other.domain)
            and bool(np.all(self.coeffs == other.coeffs))
        )


def _check_pair(a: RingElement, b: RingElement, domain: str | None = None) -> None:
    if (a.N, a.Q) != (b.N, b.Q):
        raise DomainMismatchError(f"ring mismatch: (N={a.N}, Q={a.Q}) vs (N={b.N}, Q={b.Q})")
    if a.domain != b.domain:
        raise DomainMismatchError(f"domain mismatch: {a.domain} vs {b.domain}")
    if domain is not None and a.domain != domain:
        raise DomainMismatchError(f"operation requires {domain} domain, got {a.domain}")


def _like(a: RingElement, coeffs: np.ndarray, domain: str | None = None) -> RingElement:
    return RingElement(coeffs=coeffs, N=a.N, Q=a.Q, domain=domain or a.domain)


def ntt_forward(a: RingElement, tw: TwiddleTable | None = None) -> RingElement:
    if a.domain != COEFFICIENT:
        raise DomainMismatchError("ntt_forward requires a coefficient-domain element")
    tw = tw or get_twiddle_table(a.N, a.Q)
    return _like(a, ntt_forward_array(a.coeffs, tw), NTT)


def ntt_inverse(a: RingElement, tw: TwiddleTable | None = None) -> RingElement:
    if a.domain != NTT:
        raise DomainMismatchError("ntt_inverse requires an ntt-domain element")
    tw = tw or get_twiddle_table(a.N, a.Q)
    return _like(a, ntt_inverse_array(a.coeffs, tw), COEFFICIENT)


def poly_add(a: RingElement, b: RingElement) -> RingElement:
    _check_pair(a, b)
    return _like(a, (a.coeffs + b.coeffs) % a.Q)


def poly_sub(a: RingElement, b: RingElement) -> RingElement:
    _check_pair(a, b)
    return _like(a, (a.coeffs - b.coeffs) % a.Q)


def poly_scalar_mul(a: RingElement, c: int) -> RingElement:
    return _like(a, (a.coeffs * (int(c) % a.Q)) % a.Q)


def pointwise_mul(a: RingElement, b: RingElement) -> RingElement:
    _check_pair(a, b, NTT)
    return _like(a, (a.coeffs * b.coeffs) % a.Q)


def poly_mul_negacyclic(a: RingElement, b: RingElement) -> RingElement:
    _check_pair(a, b, COEFFICIENT)
    tw = get_twiddle_table(a.N, a.Q)
    return ntt_inverse(pointwise_mul(ntt_forward(a, tw), ntt_forward(b, tw)), tw)


def monomial_mul(a: RingElement, m: int) -> RingElement:
    if a.domain != COEFFICIENT:
        raise DomainMismatchError("monomial_mul requires a coefficient-domain element")
    return _like(a, monomial_mul_array(a.coeffs, m, a.Q))


__all__ = [
    "COEFFICIENT",
    "NTT",
    "DomainMismatchError",
    "word_dtype",
    "storage_dtype",
    "as_residues",
    "center",
    "barrett_reduce",
    "montgomery_mul",
    "primitive_root",
    "singleton_layout",
    "TwiddleTable",
    "get_twiddle_table",
    "ntt_forward_array",
    "ntt_inverse_array",
    "monomial_mul_array",
    "RingElement",
    "ntt_forward",
    "ntt_inverse",
    "poly_add",
    "poly_sub",
    "poly_scalar_mul",
    "pointwise_mul",
    "poly_mul_negacyclic",
    "monomial_mul",
]
