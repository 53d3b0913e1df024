"""LWE encryption and the ciphertext conversions around bootstrapping.

Client side: key generation, encoding, encryption and decryption of bits.
Server side: key switching from the extracted dimension-N key back to the
dimension-n key, and modulus switching from Q down to q.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from pimfhe.params import ParameterError, ParamSet
from pimfhe.ringmath import storage_dtype, word_dtype
from pimfhe.sampling import Sampler, as_sampler

logger = logging.getLogger(__name__)


class KeyMismatchError(ValueError):
    """Ciphertext and key disagree on dimension, modulus or parameter set."""


@dataclass(frozen=True, eq=False)
class LweSecretKey:
    """LWE secret of a given dimension over a given modulus.

    Coefficients are kept signed ({0,1} or {-1,0,1}); `residues` gives the
    mod-modulus view used in dot products.
    """

    s: np.ndarray
    modulus: int
    dist: str = "binary"

    @property
    def dimension(self) -> int:
        return int(self.s.shape[0])

    @property
    def residues(self) -> np.ndarray:
        return self.s % self.modulus

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LweSecretKey):
            return NotImplemented
        return self.modulus == other.modulus and np.array_equal(self.s, other.s)


@dataclass(frozen=True, eq=False)
class LweCiphertext:
    """(a, b) with every entry in [0, modulus)."""

    a: np.ndarray
    b: int
    modulus: int

    def __post_init__(self) -> None:
        if self.a.ndim != 1:
            raise ValueError(f"ciphertext mask must be a vector, got shape {self.a.shape}")

    @property
    def dimension(self) -> int:
        return int(self.a.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LweCiphertext):
            return NotImplemented
        return (
            self.modulus == other.modulus
            and int(self.b) == int(other.b)
            and np.array_equal(self.a, other.a)
        )


@dataclass(frozen=True)
class KeySwitchKey:
    """EK_S[i][j][v] as one array of shape (N, d_s, B_s, n + 1).

    The last axis holds the mask followed by the body; entry (i, j, v)
    encrypts v * z_i * B_s^j under the dimension-n key, modulo Q.
    """

    data: np.ndarray = field(repr=False)
    n: int
    Q: int
    B_s: int
    d_s: int

    @property
    def N(self) -> int:
        return int(self.data.shape[0])

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(int(x) for x in self.data.shape[:3])

    @property
    def nbytes(self) -> int:
        return int(self.data.nbytes)

    def entry(self, i: int, j: int, v: int) -> LweCiphertext:
        row = self.data[i, j, v].astype(word_dtype(self.Q))
        return LweCiphertext(a=row[:-1], b=int(row[-1]), modulus=self.Q)


# ----------------------------------------------------------------------------
# Client operations
# ----------------------------------------------------------------------------

def keygen(params: ParamSet, seed: int | Sampler | None = 0) -> LweSecretKey:
    """Sample the dimension-n LWE secret from params.secret_dist."""
    sampler = as_sampler(seed)
    return LweSecretKey(s=sampler.secret(params.secret_dist, params.n), modulus=params.q, dist=params.secret_dist)


def encode(m: int, t: int, q: int) -> int:
    """Scale message m mod t onto the q/(2t)-spaced levels of Z_q."""
    if t < 1 or q % (2 * t):
        raise ParameterError(f"message modulus t={t} does not divide q={q} with room for the 2t grid")
    return (m % t) * (q // (2 * t))


def lwe_encrypt(
    sk: LweSecretKey,
    m_enc: int,
    params: ParamSet | None = None,
    seed: int | Sampler | None = 0,
) -> LweCiphertext:
    """Encrypt an already-encoded value m' in [0, modulus).

    Args:
        sk: Secret key; its modulus is the ciphertext modulus
        m_enc: Encoded message
        params: Supplies the Gaussian width (default 3.19 when omitted)
        seed: Seed or Sampler

    Returns:
        LweCiphertext with b = a.s + e + m'
    """
    sampler = as_sampler(seed)
    M = sk.modulus
    stddev = params.error_stddev if params is not None else 3.19
    a = sampler.uniform(M, sk.dimension)
    e = int(sampler.gaussian(stddev, 1)[0])
    b = (int(np.dot(a, sk.s)) + e + int(m_enc)) % M
    return LweCiphertext(a=a, b=b, modulus=M)


def lwe_phase(ct: LweCiphertext, sk: LweSecretKey) -> int:
    """(b - a.s) mod modulus, the noisy encoded message."""
    _check_key(ct, sk)
    return (int(ct.b) - int(np.dot(ct.a, sk.s))) % ct.modulus


def lwe_decrypt(sk: LweSecretKey, ct: LweCiphertext, t: int = 4) -> int:
    """round(t * phase / q) mod t with round-half-up."""
    q = ct.modulus
    phase = lwe_phase(ct, sk)
    return ((2 * t * phase + q) // (2 * q)) % t


def encrypt_bit(sk: LweSecretKey, bit: int, params: ParamSet | None = None, seed: int | Sampler | None = 0) -> LweCiphertext:
    """Encrypt a boolean at phase bit * q/4."""
    t = params.t if params is not None else 4
    return lwe_encrypt(sk, encode(2 * (int(bit) & 1), t, sk.modulus), params, seed)


def decrypt_bit(sk: LweSecretKey, ct: LweCiphertext) -> int:
    return 1 if lwe_decrypt(sk, ct) == 1 else 0


def _check_key(ct: LweCiphertext, sk: LweSecretKey) -> None:
    if ct.dimension != sk.dimension or ct.modulus != sk.modulus:
        raise KeyMismatchError(
            f"ciphertext (dim={ct.dimension}, mod={ct.modulus}) does not match key "
            f"(dim={sk.dimension}, mod={sk.modulus})"
        )


# ----------------------------------------------------------------------------
# Linear operations
# ----------------------------------------------------------------------------

def _check_pair(ct1: LweCiphertext, ct2: LweCiphertext) -> None:
    if ct1.dimension != ct2.dimension or ct1.modulus != ct2.modulus:
        raise KeyMismatchError(
            f"ciphertexts disagree: (dim={ct1.dimension}, mod={ct1.modulus}) vs "
            f"(dim={ct2.dimension}, mod={ct2.modulus})"
        )


def lwe_add(ct1: LweCiphertext, ct2: LweCiphertext) -> LweCiphertext:
    _check_pair(ct1, ct2)
    M = ct1.modulus
    return LweCiphertext(a=(ct1.a + ct2.a) % M, b=(int(ct1.b) + int(ct2.b)) % M, modulus=M)


def lwe_scale(ct: LweCiphertext, c: int) -> LweCiphertext:
    M = ct.modulus
    return LweCiphertext(a=(ct.a * (c % M)) % M, b=(int(ct.b) * c) % M, modulus=M)


def lwe_negate(ct: LweCiphertext) -> LweCiphertext:
    return lwe_scale(ct, -1)


def lwe_add_constant(ct: LweCiphertext, c: int) -> LweCiphertext:
    M = ct.modulus
    return LweCiphertext(a=ct.a.copy(), b=(int(ct.b) + c) % M, modulus=M)


def lwe_linear(ct1: LweCiphertext, ct2: LweCiphertext | None, c1: int, c2: int, c0: int) -> LweCiphertext:
    """c1*ct1 + c2*ct2 + (0, c0), with ct2 optional when c2 == 0."""
    out = lwe_scale(ct1, c1)
    if c2:
        if ct2 is None:
            raise ValueError("second operand required for a nonzero coefficient")
        out = lwe_add(out, lwe_scale(ct2, c2))
    return lwe_add_constant(out, c0)


# ----------------------------------------------------------------------------
# Key switching & modulus switching
# ----------------------------------------------------------------------------

def keyswitch_keygen(
    z: LweSecretKey,
    sk: LweSecretKey,
    params: ParamSet,
    seed: int | Sampler | None = 0,
) -> KeySwitchKey:
    """Encrypt every v * z_i * B_s^j under sk, modulo Q.

    Args:
        z: Dimension-N source key (the extracted ring secret) over Q
        sk: Dimension-n target key
        params: Supplies Q, B_s, d_s and the noise width
        seed: Seed or Sampler

    Returns:
        KeySwitchKey of shape (N, d_s, B_s)
    """
    sampler = as_sampler(seed)
    Q, B_s, d_s, n = params.Q, params.B_s, params.d_s, params.n
    N = z.dimension
    if sk.dimension != n:
        raise KeyMismatchError(f"target key has dimension {sk.dimension}, expected n={n}")
    storage = storage_dtype(Q)
    data = np.zeros((N, d_s, B_s, n + 1), dtype=storage)
    gadget = [pow(B_s, j, Q) for j in range(d_s)]
    values = np.arange(B_s, dtype=np.int64)
    logger.info(f"[KEYGEN] Key-switching key: N={N} d_s={d_s} B_s={B_s} n={n} ({data.nbytes / (1 << 20):.1f} MiB)")

    for i in range(N):
        z_i = int(z.s[i])
        a = sampler.uniform(Q, (d_s, B_s, n))
        e = sampler.gaussian(params.error_stddev, (d_s, B_s))
        msg = np.array(
            [[(int(v) * z_i * gadget[j]) % Q for v in values] for j in range(d_s)],
            dtype=word_dtype(Q),
        )
        body = (np.tensordot(a, sk.s, axes=([2], [0])) + e + msg) % Q
        data[i, :, :, :n] = a
        data[i, :, :, n] = body

    return KeySwitchKey(data=data, n=n, Q=Q, B_s=B_s, d_s=d_s)


def _base_digits(values: np.ndarray, base: int, count: int) -> np.ndarray:
    """Unsigned base-`base` digits, least significant first, on a new last axis."""
    digits = []
    rest = values
    for _ in range(count):
        digits.append(rest % base)
        rest = rest // base
    return np.stack(digits, axis=-1).astype(np.int64)


def key_switch(ct: LweCiphertext, ksk: KeySwitchKey) -> LweCiphertext:
    """Re-encrypt a dimension-N ciphertext under the dimension-n key.

    Raises:
        KeyMismatchError: ct is not dimension N modulo Q
    """
    if ct.dimension != ksk.N or ct.modulus != ksk.Q:
        raise KeyMismatchError(
            f"key_switch expects (dim={ksk.N}, mod={ksk.Q}), got (dim={ct.dimension}, mod={ct.modulus})"
        )
    Q = ksk.Q
    digits = _base_digits(ct.a, ksk.B_s, ksk.d_s)  # (N, d_s)
    rows = np.arange(ksk.N)[:, None]
    cols = np.arange(ksk.d_s)[None, :]
    selected = ksk.data[rows, cols, digits]  # (N, d_s, n + 1)
    if word_dtype(Q) is object:
        total = np.sum(selected.astype(object).reshape(-1, ksk.n + 1), axis=0)
    else:
        total = np.sum(selected.astype(np.int64).reshape(-1, ksk.n + 1) % Q, axis=0)
    total = total % Q
    a = (-total[:-1]) % Q
    b = (int(ct.b) - int(total[-1])) % Q
    return LweCiphertext(a=a.astype(word_dtype(Q)), b=b, modulus=Q)


def modulus_switch(ct: LweCiphertext, q: int) -> LweCiphertext:
    """Map every entry x to floor(x*q/Q + 1/2) mod q in exact integers."""
    Q = ct.modulus
    if word_dtype(Q) is object or q * Q >= (1 << 62):
        a = np.array([((2 * int(x) * q + Q) // (2 * Q)) % q for x in ct.a], dtype=np.int64)
    else:
        a = ((2 * ct.a.astype(np.int64) * q + Q) // (2 * Q)) % q
    b = ((2 * int(ct.b) * q + Q) // (2 * Q)) % q
    return LweCiphertext(a=a, b=b, modulus=q)


__all__ = [
    "KeyMismatchError",
    "LweSecretKey",
    "LweCiphertext",
    "KeySwitchKey",
    "keygen",
    "encode",
    "lwe_encrypt",
    "lwe_phase",
    "lwe_decrypt",
    "encrypt_bit",
    "decrypt_bit",
    "lwe_add",
    "lwe_scale",
    "lwe_negate",
    "lwe_add_constant",
    "lwe_linear",
    "keyswitch_keygen",
    "key_switch",
    "modulus_switch",
]
