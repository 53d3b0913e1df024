"""Binary file envelope for keys and ciphertexts.

Layout (little-endian):

    magic      4 bytes  b"MFHE"
    version    u16
    word_bits  u8       32 or 64
    modulus    u64      modulus of the payload words
    name       u16 length + UTF-8   parameter-set name
    tag        u16 length + UTF-8   object tag
    dist       u16 length + UTF-8   secret distribution ("" if not applicable)
    ndim       u8
    shape      ndim x u64
    payload    prod(shape) words of word_bits

Payloads are written and read in chunks so multi-GB keys never need a
second full copy in memory.
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from typing import BinaryIO, Optional, Union

import numpy as np

from pimfhe.bootstrap import RefreshKeyAP, RefreshKeyGINX, RlweSecret
from pimfhe.config import ENVELOPE_CHUNK_WORDS, ENVELOPE_MAGIC, ENVELOPE_VERSION, OBJECT_TAGS
from pimfhe.lwe import KeySwitchKey, LweCiphertext, LweSecretKey
from pimfhe.params import ParamSet, load_param_set
from pimfhe.ringmath import storage_dtype, word_dtype

logger = logging.getLogger(__name__)

EnvelopeObject = Union[LweSecretKey, LweCiphertext, KeySwitchKey, RefreshKeyAP, RefreshKeyGINX, RlweSecret]


class EnvelopeError(ValueError):
    """Malformed, truncated or mismatched envelope."""


@dataclass
class Envelope:
    tag: str
    params_name: str
    word_bits: int
    modulus: int
    dist: str
    data: np.ndarray


def _pack_str(value: str) -> bytes:
    raw = value.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def _read_exact(f: BinaryIO, size: int, what: str) -> bytes:
    raw = f.read(size)
    if len(raw) != size:
        raise EnvelopeError(f"truncated file: expected {size} bytes of {what}, got {len(raw)}")
    return raw


def _read_str(f: BinaryIO, what: str) -> str:
    (length,) = struct.unpack("<H", _read_exact(f, 2, what))
    return _read_exact(f, length, what).decode("utf-8")


def write_envelope(
    path: str,
    tag: str,
    params_name: str,
    data: np.ndarray,
    modulus: int,
    word_bits: int = 32,
    dist: str = "",
) -> int:
    """Write one array as an envelope; returns bytes written."""
    if tag not in OBJECT_TAGS:
        raise EnvelopeError(f"unknown object tag '{tag}', expected one of {', '.join(OBJECT_TAGS)}")
    if word_bits not in (32, 64):
        raise EnvelopeError(f"word width must be 32 or 64, got {word_bits}")
    if word_bits == 32 and modulus > (1 << 32):
        raise EnvelopeError(f"modulus {modulus} does not fit 32-bit words")
    wire_dtype = np.dtype("<u4") if word_bits == 32 else np.dtype("<u8")

    header = (
        ENVELOPE_MAGIC
        + struct.pack("<HBQ", ENVELOPE_VERSION, word_bits, modulus)
        + _pack_str(params_name)
        + _pack_str(tag)
        + _pack_str(dist)
        + struct.pack("<B", data.ndim)
        + b"".join(struct.pack("<Q", int(d)) for d in data.shape)
    )
    flat = data.reshape(-1)
    written = len(header)
    with open(path, "wb") as f:
        f.write(header)
        for start in range(0, flat.size, ENVELOPE_CHUNK_WORDS):
            chunk = flat[start:start + ENVELOPE_CHUNK_WORDS]
            if chunk.dtype == object:
                chunk = np.array([int(x) for x in chunk], dtype=np.uint64)
            raw = np.asarray(chunk).astype(wire_dtype).tobytes()
            f.write(raw)
            written += len(raw)
            logger.debug(f"Wrote {tag} chunk at word {start} ({len(raw)} bytes)")
    return written


def read_envelope(path: str, out_dtype=None) -> Envelope:
    """Read an envelope back.

    Raises:
        EnvelopeError: bad magic, unsupported version, unknown tag or truncation
    """
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != ENVELOPE_MAGIC:
            raise EnvelopeError(f"{path}: not a pimfhe file (bad magic)")
        version, word_bits, modulus = struct.unpack("<HBQ", _read_exact(f, 11, "header"))
        if version != ENVELOPE_VERSION:
            raise EnvelopeError(f"{path}: unsupported format version {version}, expected {ENVELOPE_VERSION}")
        if word_bits not in (32, 64):
            raise EnvelopeError(f"{path}: invalid word width {word_bits}")
        name = _read_str(f, "parameter-set name")
        tag = _read_str(f, "object tag")
        if tag not in OBJECT_TAGS:
            raise EnvelopeError(f"{path}: unknown object tag '{tag}'")
        dist = _read_str(f, "distribution")
        (ndim,) = struct.unpack("<B", _read_exact(f, 1, "ndim"))
        shape = tuple(struct.unpack("<Q", _read_exact(f, 8, "shape"))[0] for _ in range(ndim))

        wire_dtype = np.dtype("<u4") if word_bits == 32 else np.dtype("<u8")
        total = int(np.prod(shape, dtype=np.int64)) if shape else 1
        target = out_dtype or (np.uint32 if word_bits == 32 else np.uint64)
        flat = np.empty(total, dtype=target)
        for start in range(0, total, ENVELOPE_CHUNK_WORDS):
            count = min(ENVELOPE_CHUNK_WORDS, total - start)
            raw = _read_exact(f, count * wire_dtype.itemsize, "payload")
            words = np.frombuffer(raw, dtype=wire_dtype)
            flat[start:start + count] = words.astype(object) if target is object else words
        if f.read(1):
            raise EnvelopeError(f"{path}: trailing bytes after payload")

    return Envelope(tag=tag, params_name=name, word_bits=word_bits, modulus=modulus, dist=dist, data=flat.reshape(shape))


# ----------------------------------------------------------------------------
# Typed save/load
# ----------------------------------------------------------------------------

def _tag_of(obj: EnvelopeObject) -> str:
    if isinstance(obj, LweSecretKey):
        return "secret-key"
    if isinstance(obj, LweCiphertext):
        return "lwe-ct"
    if isinstance(obj, KeySwitchKey):
        return "ksk"
    if isinstance(obj, RefreshKeyAP):
        return "rk-ap"
    if isinstance(obj, RefreshKeyGINX):
        return "rk-ginx"
    if isinstance(obj, RlweSecret):
        return "rlwe-secret"
    raise EnvelopeError(f"cannot serialize {type(obj).__name__}")


def save_object(path: str, obj: EnvelopeObject, params: ParamSet) -> int:
    """Serialize any key or ciphertext; returns bytes written."""
    tag = _tag_of(obj)
    dist = ""
    if tag == "secret-key":
        data, modulus, dist = obj.residues, obj.modulus, obj.dist
    elif tag == "rlwe-secret":
        data, modulus, dist = obj.z % obj.Q, obj.Q, obj.dist
    elif tag == "lwe-ct":
        data = np.append(obj.a.astype(object), int(obj.b))
        modulus = obj.modulus
    elif tag == "ksk":
        data, modulus = obj.data, obj.Q
    elif tag == "rk-ginx":
        data, modulus, dist = obj.data, params.Q, obj.secret_dist
    else:
        data, modulus = obj.data, params.Q
    word_bits = 32 if modulus <= (1 << 32) else 64
    return write_envelope(path, tag, params.name, np.asarray(data), modulus, word_bits, dist)


def _signed(values: np.ndarray, modulus: int) -> np.ndarray:
    v = values.astype(object) if modulus >= (1 << 62) else values.astype(np.int64)
    return np.where(v > modulus // 2, v - modulus, v).astype(np.int64)


def load_object(
    path: str,
    expected_tag: Optional[str] = None,
    params: Optional[ParamSet] = None,
    param_sets_path: Optional[str] = None,
) -> tuple[EnvelopeObject, ParamSet]:
    """Deserialize a key or ciphertext and its parameter set.

    Raises:
        EnvelopeError: tag or parameter-set mismatch, or malformed file
    """
    env = read_envelope(path)
    if expected_tag is not None and env.tag != expected_tag:
        raise EnvelopeError(f"{path}: expected a '{expected_tag}' object, found '{env.tag}'")
    if params is not None and params.name != env.params_name:
        raise EnvelopeError(f"{path}: written for parameter set '{env.params_name}', not '{params.name}'")
    if params is None:
        mode = "ap" if env.tag == "rk-ap" else "ginx"
        params = load_param_set(env.params_name, mode=mode, secret_dist=env.dist or None, path=param_sets_path)

    data = env.data
    if env.tag == "secret-key":
        obj = LweSecretKey(s=_signed(data, env.modulus), modulus=env.modulus, dist=env.dist)
    elif env.tag == "rlwe-secret":
        obj = RlweSecret(z=_signed(data, env.modulus), N=params.N, Q=env.modulus, dist=env.dist)
    elif env.tag == "lwe-ct":
        words = data.astype(word_dtype(env.modulus))
        obj = LweCiphertext(a=words[:-1], b=int(words[-1]), modulus=env.modulus)
    elif env.tag == "ksk":
        obj = KeySwitchKey(data=data.astype(storage_dtype(env.modulus)), n=params.n, Q=env.modulus, B_s=params.B_s, d_s=params.d_s)
    elif env.tag == "rk-ap":
        obj = RefreshKeyAP(data=data.astype(storage_dtype(env.modulus)), params=params)
    else:
        obj = RefreshKeyGINX(data=data.astype(storage_dtype(env.modulus)), params=params, secret_dist=env.dist or "binary")
    logger.debug(f"Loaded {env.tag} for {env.params_name} from {path} (shape {data.shape})")
    return obj, params


__all__ = [
    "EnvelopeError",
    "Envelope",
    "write_envelope",
    "read_envelope",
    "save_object",
    "load_object",
]
