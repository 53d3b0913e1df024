"""Gate bootstrapping: refresh keys, accumulator, AP/GINX blind rotation.

Flow per ciphertext:
    acc_initialize  -> test polynomial rotated by b
    ap_accumulate / ginx_accumulate -> rotate by -(a.s) under encryption
    extract         -> constant term as a dimension-N LWE sample, +Q/8

Refresh keys are RGSW ciphertexts kept in the NTT domain; the accumulator
stays in the coefficient domain between steps because the signed digit
decomposition needs coefficients.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from pimfhe.config import BOOTSTRAP_MODES, SECRET_DISTRIBUTIONS
from pimfhe.lwe import KeyMismatchError, LweCiphertext, LweSecretKey
from pimfhe.params import ParameterError, ParamSet
from pimfhe.ringmath import (
    center,
    get_twiddle_table,
    monomial_mul_array,
    ntt_forward_array,
    ntt_inverse_array,
    storage_dtype,
    word_dtype,
)
from pimfhe.sampling import Sampler, as_sampler

logger = logging.getLogger(__name__)


def eighth(Q: int) -> int:
    """Q/8 rounded to the nearest integer."""
    return (Q + 4) // 8


# ----------------------------------------------------------------------------
# Types
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RlweSecret:
    """Ring secret z of degree N, signed coefficients."""

    z: np.ndarray
    N: int
    Q: int
    dist: str = "binary"

    @property
    def residues(self) -> np.ndarray:
        return (self.z % self.Q).astype(word_dtype(self.Q))

    @property
    def ntt(self) -> np.ndarray:
        return ntt_forward_array(self.residues, get_twiddle_table(self.N, self.Q))

    def as_lwe_key(self) -> LweSecretKey:
        """z's coefficients as the dimension-N key of extracted samples."""
        return LweSecretKey(s=self.z, modulus=self.Q, dist=self.dist)


@dataclass(frozen=True)
class RgswCiphertext:
    """(2*d_g) x 2 matrix of ring elements in the NTT domain."""

    rows: np.ndarray = field(repr=False)  # (2*d_g, 2, N)
    N: int
    Q: int
    B_g: int
    d_g: int

    def __post_init__(self) -> None:
        expected = (2 * self.d_g, 2, self.N)
        if self.rows.shape != expected:
            raise ValueError(f"RGSW rows must have shape {expected}, got {self.rows.shape}")


@dataclass(frozen=True)
class Accumulator:
    """RLWE pair (a, b) in the coefficient domain; phase is b - a*z."""

    a: np.ndarray
    b: np.ndarray
    N: int
    Q: int

    def _check(self, other: "Accumulator") -> None:
        if (self.N, self.Q) != (other.N, other.Q):
            raise KeyMismatchError(f"accumulator ring mismatch: ({self.N}, {self.Q}) vs ({other.N}, {other.Q})")

    def __add__(self, other: "Accumulator") -> "Accumulator":
        self._check(other)
        return Accumulator((self.a + other.a) % self.Q, (self.b + other.b) % self.Q, self.N, self.Q)

    def __sub__(self, other: "Accumulator") -> "Accumulator":
        self._check(other)
        return Accumulator((self.a - other.a) % self.Q, (self.b - other.b) % self.Q, self.N, self.Q)

    def rotate(self, m: int) -> "Accumulator":
        """Multiply both halves by X^m."""
        return Accumulator(
            monomial_mul_array(self.a, m, self.Q),
            monomial_mul_array(self.b, m, self.Q),
            self.N,
            self.Q,
        )

    @classmethod
    def zero(cls, N: int, Q: int) -> "Accumulator":
        dtype = word_dtype(Q)
        return cls(np.zeros(N, dtype=dtype), np.zeros(N, dtype=dtype), N, Q)


@dataclass(frozen=True)
class RefreshKeyAP:
    """EK_B[i][j][v] encrypting X^(v * B_r^j * s_i * 2N/q)."""

    data: np.ndarray = field(repr=False)  # (n, d_r, B_r, 2*d_g, 2, N)
    params: ParamSet

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(int(x) for x in self.data.shape[:3])

    @property
    def nbytes(self) -> int:
        return int(self.data.nbytes)

    def entry(self, i: int, j: int, v: int) -> RgswCiphertext:
        p = self.params
        return RgswCiphertext(self.data[i, j, v], p.N, p.Q, p.B_g, p.d_g)


@dataclass(frozen=True)
class RefreshKeyGINX:
    """EK_B[i][c] encrypting the c-th component of s_i (s = s+ - s-)."""

    data: np.ndarray = field(repr=False)  # (n, 2, 2*d_g, 2, N)
    params: ParamSet
    secret_dist: str = "binary"

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(int(x) for x in self.data.shape[:2])

    @property
    def nbytes(self) -> int:
        return int(self.data.nbytes)

    @property
    def active_columns(self) -> tuple[int, ...]:
        """Key columns the accumulation visits.

        A binary secret has an all-zero negative component, so binary GINX
        evaluates column 0 only: n external products per bootstrap where the
        pipeline model provisions 2n U_ACC units.
        """
        return (0,) if self.secret_dist == "binary" else (0, 1)

    def entry(self, i: int, c: int) -> RgswCiphertext:
        p = self.params
        return RgswCiphertext(self.data[i, c], p.N, p.Q, p.B_g, p.d_g)


RefreshKey = Union[RefreshKeyAP, RefreshKeyGINX]


# ----------------------------------------------------------------------------
# Key generation
# ----------------------------------------------------------------------------

def rlwe_keygen(params: ParamSet, seed: int | Sampler | None = 0) -> RlweSecret:
    """Sample z from the same distribution family as the LWE secret."""
    sampler = as_sampler(seed)
    z = sampler.secret(params.secret_dist, params.N)
    return RlweSecret(z=z, N=params.N, Q=params.Q, dist=params.secret_dist)


def _rgsw_encrypt_ntt(z: RlweSecret, mu_ntt: np.ndarray, params: ParamSet, sampler: Sampler) -> np.ndarray:
    """Batch RGSW encryption of plaintexts given in the NTT domain.

    Args:
        z: Ring secret
        mu_ntt: Plaintexts, shape (..., N), NTT domain
        params: Supplies B_g, d_g and the noise width
        sampler: Randomness source

    Returns:
        Array of shape (..., 2*d_g, 2, N) in the NTT domain
    """
    Q, N, d_g = params.Q, params.N, params.d_g
    tw = get_twiddle_table(N, Q)
    batch = mu_ntt.shape[:-1]
    a = sampler.uniform(Q, batch + (2 * d_g, N)).astype(word_dtype(Q))
    e = sampler.gaussian(params.error_stddev, batch + (2 * d_g, N)) % Q
    e_ntt = ntt_forward_array(e.astype(word_dtype(Q)), tw)
    body = ((a * z.ntt) % Q + e_ntt) % Q

    rows = np.stack([a, body], axis=-2)  # (..., 2*d_g, 2, N)
    for k in range(d_g):
        g = (mu_ntt * pow(params.B_g, k, Q)) % Q
        rows[..., k, 0, :] = (rows[..., k, 0, :] + g) % Q
        rows[..., d_g + k, 1, :] = (rows[..., d_g + k, 1, :] + g) % Q
    return rows


def _monomial_ntt(exponents: np.ndarray, N: int, Q: int) -> np.ndarray:
    """NTT of X^e for every e in `exponents`: entry k is psi^((2k+1)e)."""
    tw = get_twiddle_table(N, Q)
    psi_pows = [1]
    for _ in range(2 * N - 1):
        psi_pows.append(psi_pows[-1] * tw.psi % Q)
    psi_pows = np.array(psi_pows, dtype=word_dtype(Q))
    odd = 2 * np.arange(N) + 1
    idx = (np.asarray(exponents, dtype=np.int64)[..., None] * odd) % (2 * N)
    return psi_pows[idx]


def rgsw_keygen(
    z: RlweSecret,
    exponent: int,
    params: ParamSet,
    seed: int | Sampler | None = 0,
) -> RgswCiphertext:
    """RGSW encryption of the monomial X^exponent under z."""
    sampler = as_sampler(seed)
    mu = _monomial_ntt(np.array(exponent % (2 * params.N)), params.N, params.Q)
    rows = _rgsw_encrypt_ntt(z, mu, params, sampler)
    return RgswCiphertext(rows, params.N, params.Q, params.B_g, params.d_g)


def refresh_keygen(
    sk: LweSecretKey,
    z: RlweSecret,
    params: ParamSet,
    mode: str = "ginx",
    seed: int | Sampler | None = 0,
) -> RefreshKey:
    """Build EK_B for the requested bootstrapping mode.

    Raises:
        ParameterError: unknown mode or secret distribution
        KeyMismatchError: sk is not dimension n
    """
    if mode not in BOOTSTRAP_MODES:
        raise ParameterError(f"unknown bootstrapping mode '{mode}', expected one of {', '.join(BOOTSTRAP_MODES)}")
    if sk.dist not in SECRET_DISTRIBUTIONS:
        raise ParameterError(f"{mode} refresh key needs a binary or ternary secret, got '{sk.dist}'")
    if sk.dimension != params.n:
        raise KeyMismatchError(f"secret has dimension {sk.dimension}, expected n={params.n}")
    sampler = as_sampler(seed)
    n, N, Q = params.n, params.N, params.Q
    two_n = 2 * N
    f = params.rotation_scale
    storage = storage_dtype(Q)

    if mode == "ap":
        B_r, d_r = params.B_r, params.d_r
        data = np.zeros((n, d_r, B_r, 2 * params.d_g, 2, N), dtype=storage)
        logger.info(f"[KEYGEN] AP refresh key: {n}x{d_r}x{B_r} RGSW ({data.nbytes / (1 << 20):.1f} MiB)")
        v = np.arange(B_r, dtype=np.int64)
        for i in range(n):
            s_i = int(sk.s[i])
            exps = np.stack([(v * pow(B_r, j) * s_i * f) % two_n for j in range(d_r)])  # (d_r, B_r)
            data[i] = _rgsw_encrypt_ntt(z, _monomial_ntt(exps, N, Q), params, sampler)
            if (i + 1) % 128 == 0:
                logger.debug(f"[KEYGEN] AP rows {i + 1}/{n}")
        return RefreshKeyAP(data=data, params=params)

    data = np.zeros((n, 2, 2 * params.d_g, 2, N), dtype=storage)
    logger.info(f"[KEYGEN] GINX refresh key: {n}x2 RGSW ({data.nbytes / (1 << 20):.1f} MiB)")
    s = sk.s.astype(np.int64)
    parts = np.stack([(s > 0).astype(np.int64), (s < 0).astype(np.int64)], axis=1)  # (n, 2)
    for i in range(n):
        mu = np.repeat(parts[i][:, None], N, axis=1).astype(word_dtype(Q))  # constants are flat in NTT
        data[i] = _rgsw_encrypt_ntt(z, mu, params, sampler)
    return RefreshKeyGINX(data=data, params=params, secret_dist=sk.dist)


# ----------------------------------------------------------------------------
# Accumulator operations
# ----------------------------------------------------------------------------

def _sdd_array(values: np.ndarray, Q: int, B_g: int, d_g: int) -> np.ndarray:
    """Signed digits of centered residues; shape (d_g, ...) mod Q."""
    c = center(values, Q)
    half = B_g // 2
    digits = []
    for k in range(d_g):
        r = c % B_g
        d = np.where(r >= half, r - B_g, r)
        c = (c - d) // B_g
        if k == d_g - 1:
            # fold any leftover carry into the top digit
            d = d + c * B_g
        digits.append(d)
    return np.stack(digits) % Q


def signed_digit_decompose(acc: Accumulator, B_g: int, d_g: int) -> np.ndarray:
    """Decompose (acc.a, acc.b) into 2*d_g coefficient-domain polynomials.

    Rows 0..d_g-1 come from acc.a, rows d_g..2*d_g-1 from acc.b. Digits lie in
    [-B_g/2, B_g/2) and are returned mod Q; sum_k dec_k * B_g^k recomposes
    each input coefficient.
    """
    return np.concatenate([
        _sdd_array(acc.a, acc.Q, B_g, d_g),
        _sdd_array(acc.b, acc.Q, B_g, d_g),
    ])


def external_product(acc: Accumulator, C: RgswCiphertext) -> Accumulator:
    """acc <- acc (x) C: multiply the RLWE accumulator by C's plaintext."""
    if (acc.N, acc.Q) != (C.N, C.Q):
        raise KeyMismatchError(f"accumulator ({acc.N}, {acc.Q}) does not match RGSW ({C.N}, {C.Q})")
    Q = acc.Q
    tw = get_twiddle_table(acc.N, Q)
    dec = ntt_forward_array(signed_digit_decompose(acc, C.B_g, C.d_g), tw)  # (2*d_g, N)
    rows = C.rows.astype(word_dtype(Q))
    prod = (dec[:, None, :] * rows) % Q  # (2*d_g, 2, N)
    out = ntt_inverse_array(prod.sum(axis=0) % Q, tw)
    return Accumulator(out[0], out[1], acc.N, Q)


def _window_member(phase: np.ndarray, lb: int, ub: int, q: int) -> np.ndarray:
    return (phase - lb) % q < (ub - lb) % q


def acc_initialize(ct: LweCiphertext, window: tuple[int, int], params: ParamSet) -> Accumulator:
    """Noiseless accumulator (0, T * X^(b*2N/q)) for a half-circle window.

    After rotation by -(a.s)*2N/q the constant term of the phase is +Q/8
    when (b - a.s) mod q lies in [lb, ub) and -Q/8 otherwise.

    Raises:
        ValueError: window bounds off the q/8 grid or not a half-circle
    """
    q, N, Q = params.q, params.N, params.Q
    lb, ub = (int(w) % q for w in window)
    if lb % (q // 8) or ub % (q // 8):
        raise ValueError(f"window [{lb}, {ub}) is not aligned to q/8={q // 8}")
    if (ub - lb) % q != q // 2:
        raise ValueError(f"window [{lb}, {ub}) must span q/2={q // 2}")
    if ct.modulus != q or ct.dimension != params.n:
        raise KeyMismatchError(f"acc_initialize expects (dim={params.n}, mod={q}), got ({ct.dimension}, {ct.modulus})")

    f = params.rotation_scale
    q8 = eighth(Q)
    j = np.arange(1, N)
    phases = np.concatenate([[0], (N - j) // f])
    values = np.where(_window_member(phases, lb, ub, q), q8, -q8)
    test = np.concatenate([[values[0]], -values[1:]]) % Q
    test = test.astype(word_dtype(Q))

    b_rot = (int(ct.b) * f) % (2 * N)
    return Accumulator(
        np.zeros(N, dtype=word_dtype(Q)),
        monomial_mul_array(test, b_rot, Q),
        N,
        Q,
    )


def prepare_a_dec(ct: LweCiphertext, params: ParamSet, mode: str) -> np.ndarray:
    """Selector digits (AP, shape (n, d_r)) or rotation amounts (GINX, (n, 2))."""
    q = params.q
    neg = (-ct.a.astype(np.int64)) % q
    if mode == "ap":
        digits = []
        rest = neg
        for _ in range(params.d_r):
            digits.append(rest % params.B_r)
            rest = rest // params.B_r
        return np.stack(digits, axis=1)
    if mode == "ginx":
        two_n = 2 * params.N
        m = (neg * params.rotation_scale) % two_n
        return np.stack([m, (-m) % two_n], axis=1)
    raise ParameterError(f"unknown bootstrapping mode '{mode}', expected one of {', '.join(BOOTSTRAP_MODES)}")


def ap_accumulate(acc: Accumulator, ek: RefreshKeyAP, digits: np.ndarray) -> Accumulator:
    """acc <- acc (x) EK_B[i][j][digits[i, j]] for every (i, j), in order."""
    n, d_r, _ = ek.shape
    if digits.shape != (n, d_r):
        raise ValueError(f"AP digits must have shape {(n, d_r)}, got {digits.shape}")
    for i in range(n):
        for j in range(d_r):
            acc = external_product(acc, ek.entry(i, j, int(digits[i, j])))
    return acc


def ginx_accumulate(acc: Accumulator, ek: RefreshKeyGINX, rotations: np.ndarray) -> Accumulator:
    """acc <- acc + (X^m - 1) * (acc (x) EK_B[i][c]) per key column."""
    n, _ = ek.shape
    if rotations.shape != (n, 2):
        raise ValueError(f"GINX rotations must have shape {(n, 2)}, got {rotations.shape}")
    for i in range(n):
        for c in ek.active_columns:
            m = int(rotations[i, c])
            if m == 0:
                continue
            p = external_product(acc, ek.entry(i, c))
            acc = acc + p.rotate(m) - p
    return acc


def extract(acc: Accumulator) -> LweCiphertext:
    """Constant coefficient of acc as an LWE sample under z, plus Q/8."""
    Q, N = acc.Q, acc.N
    a = np.empty(N, dtype=word_dtype(Q))
    a[0] = acc.a[0]
    a[1:] = (-acc.a[:0:-1]) % Q
    b = (int(acc.b[0]) + eighth(Q)) % Q
    return LweCiphertext(a=a, b=b, modulus=Q)


def rlwe_phase(acc: Accumulator, z: RlweSecret) -> np.ndarray:
    """b - a*z in the coefficient domain."""
    tw = get_twiddle_table(acc.N, acc.Q)
    az = ntt_inverse_array((ntt_forward_array(acc.a, tw) * z.ntt) % acc.Q, tw)
    return (acc.b - az) % acc.Q


def bootstrap(
    ct: LweCiphertext,
    refresh_key: RefreshKey,
    window: tuple[int, int],
    mode: Optional[str] = None,
) -> LweCiphertext:
    """Refresh ct into a dimension-N sample of Q/4 * [phase(ct) in window].

    Raises:
        KeyMismatchError: mode disagrees with the refresh key type
    """
    key_mode = "ap" if isinstance(refresh_key, RefreshKeyAP) else "ginx"
    if mode is not None and mode != key_mode:
        raise KeyMismatchError(f"bootstrapping mode '{mode}' does not match a {key_mode} refresh key")
    params = refresh_key.params
    acc = acc_initialize(ct, window, params)
    rot = prepare_a_dec(ct, params, key_mode)
    if key_mode == "ap":
        acc = ap_accumulate(acc, refresh_key, rot)
    else:
        acc = ginx_accumulate(acc, refresh_key, rot)
    logger.debug(f"[BOOTSTRAP] {key_mode} accumulation done (n={params.n}, N={params.N})")
    return extract(acc)


__all__ = [
    "eighth",
    "RlweSecret",
    "RgswCiphertext",
    "Accumulator",
    "RefreshKeyAP",
    "RefreshKeyGINX",
    "RefreshKey",
    "rlwe_keygen",
    "rgsw_keygen",
    "refresh_keygen",
    "signed_digit_decompose",
    "external_product",
    "acc_initialize",
    "prepare_a_dec",
    "ap_accumulate",
    "ginx_accumulate",
    "extract",
    "rlwe_phase",
    "bootstrap",
]
