"""Configuration constants for pimfhe.

This module defines all configuration constants for:
- Noise and message encoding defaults
- Parameter-set file location and environment overrides
- Binary file envelope layout
- Circuit evaluation parallelism
- PIM hardware model (block geometry, cycle time, cost formulas)
- Energy calibration and workload gate counts
"""
import os

# ===== Encoding & Noise =====
DEFAULT_MESSAGE_MODULUS = 4  # t: plaintext space Z_4, bits use {0, 1}
DEFAULT_ERROR_STDDEV = 3.19  # rounded Gaussian width for every named set
SECRET_DISTRIBUTIONS = ("binary", "ternary")
DEFAULT_SECRET_BY_MODE = {"ginx": "binary", "ap": "ternary"}
BOOTSTRAP_MODES = ("ap", "ginx")


# ===== Parameter Sets =====
PARAM_SETS_ENV = "PIMFHE_PARAM_SETS"  # override path to the YAML file
DEFAULT_PARAMS_ENV = "PIMFHE_PARAMS"  # default set name for CLI commands
FALLBACK_PARAMS = "STD128"
NAMED_PARAM_SETS = ("STD128", "STD192", "STD256", "STD128Q", "STD192Q", "STD256Q")
INT64_MODULUS_LIMIT = 1 << 31  # products of two residues must fit in int64


def get_param_sets_path() -> str:
    """Resolve the parameter-set YAML path.

    Returns:
        $PIMFHE_PARAM_SETS if set, else config/param_sets.yaml at the repo root
    """
    override = os.getenv(PARAM_SETS_ENV)
    if override:
        return override
    return os.path.join(
        os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
        "config",
        "param_sets.yaml",
    )


def get_default_params_name() -> str:
    """Default parameter-set name for CLI commands ($PIMFHE_PARAMS or STD128)."""
    return os.getenv(DEFAULT_PARAMS_ENV, FALLBACK_PARAMS)


# ===== File Envelope =====
ENVELOPE_MAGIC = b"MFHE"
ENVELOPE_VERSION = 1
ENVELOPE_CHUNK_WORDS = 1 << 20  # words per streamed write/read (4-8 MB)
OBJECT_TAGS = ("secret-key", "lwe-ct", "ksk", "rk-ap", "rk-ginx", "rlwe-secret")
KEY_FILES = {  # keygen output names inside --out-dir
    "secret-key": "secret_key.mfhe",
    "rlwe-secret": "rlwe_secret.mfhe",
    "refresh-key": "refresh_key.mfhe",
    "ksk": "keyswitch_key.mfhe",
}
CIPHERTEXT_SUFFIX = ".mfhe"


# ===== Circuit Evaluation =====
JOBS_ENV = "PIMFHE_JOBS"
DEFAULT_JOBS = 1  # sequential evaluation
MAX_JOBS = 32  # Upper limit for --jobs flag
MIN_JOBS = 1


def get_default_jobs() -> int:
    """Default evaluator width ($PIMFHE_JOBS or 1)."""
    return int(os.getenv(JOBS_ENV, str(DEFAULT_JOBS)))


# ===== PIM Hardware =====
BLOCK_ROWS = 1024  # bits per block column
BLOCK_COLS = 1024  # bits per block row
CYCLE_NS = 1.1  # switching delay per memory cycle
BLOCK_POLY_CAPACITY = 2048  # coefficients one block serves in an NTT stage
NTT_TRANSFER_PHASES = 4  # column transfers per NTT stage handoff
BYTES_PER_MB = 1 << 20
BYTES_PER_GB = 1 << 30


# ===== Cost Formulas =====
# add(b) = 6b + 1 and mul(b) = 7b^2 + 4b are given; the rest are modeling choices
ADD_CYCLES_PER_BIT = 6
ADD_CYCLES_BASE = 1
MUL_CYCLES_SQUARE = 7
MUL_CYCLES_LINEAR = 4
SEARCH_CYCLES_PER_BIT = 1  # one associative search per bit column
ROTATION_CYCLES_PER_ROW = 2  # read + write back
TRANSFER_CYCLES_PER_COLUMN = 1
BIT_ADD_CYCLES = 7  # add formula at b=1


# ===== Client Model =====
CLIENT_ENGINE_LWE_DIM = 512  # LWE dimensions served by one block engine
CLIENT_MEMORY_SIZES_KB = (256, 1024, 4096, 16384, 65536)


# ===== Energy Calibration =====
ENERGY_ANCHOR_SET = "STD128"
ENERGY_ANCHOR_MJ = 34.0  # per bootstrapped input
ENERGY_REFERENCE_MJ = {"STD128": 34.0, "STD128Q": 164.0}  # reported for comparison


# ===== Workloads =====
# Bootstrapped gate operations per inference
WORKLOAD_GATE_OPS = {
    "MNIST": 856_000,
    "CIFAR-10": 211_000_000,
    "ImageNet": 1_100_000_000,
    "PennTreebank": 24_400_000,
}


__all__ = [
    # Encoding & noise
    "DEFAULT_MESSAGE_MODULUS",
    "DEFAULT_ERROR_STDDEV",
    "SECRET_DISTRIBUTIONS",
    "DEFAULT_SECRET_BY_MODE",
    "BOOTSTRAP_MODES",
    # Parameter sets
    "PARAM_SETS_ENV",
    "DEFAULT_PARAMS_ENV",
    "FALLBACK_PARAMS",
    "NAMED_PARAM_SETS",
    "INT64_MODULUS_LIMIT",
    "get_param_sets_path",
    "get_default_params_name",
    # Envelope
    "ENVELOPE_MAGIC",
    "ENVELOPE_VERSION",
    "ENVELOPE_CHUNK_WORDS",
    "OBJECT_TAGS",
    "KEY_FILES",
    "CIPHERTEXT_SUFFIX",
    # Circuit evaluation
    "JOBS_ENV",
    "DEFAULT_JOBS",
    "MAX_JOBS",
    "MIN_JOBS",
    "get_default_jobs",
    # PIM hardware
    "BLOCK_ROWS",
    "BLOCK_COLS",
    "CYCLE_NS",
    "BLOCK_POLY_CAPACITY",
    "NTT_TRANSFER_PHASES",
    "BYTES_PER_MB",
    "BYTES_PER_GB",
    # Cost formulas
    "ADD_CYCLES_PER_BIT",
    "ADD_CYCLES_BASE",
    "MUL_CYCLES_SQUARE",
    "MUL_CYCLES_LINEAR",
    "SEARCH_CYCLES_PER_BIT",
    "ROTATION_CYCLES_PER_ROW",
    "TRANSFER_CYCLES_PER_COLUMN",
    "BIT_ADD_CYCLES",
    # Client
    "CLIENT_ENGINE_LWE_DIM",
    "CLIENT_MEMORY_SIZES_KB",
    # Energy & workloads
    "ENERGY_ANCHOR_SET",
    "ENERGY_ANCHOR_MJ",
    "ENERGY_REFERENCE_MJ",
    "WORKLOAD_GATE_OPS",
]
