"""Analytical cycle model of the processing-in-memory FHE accelerator.

The server is modeled as one synchronous pipeline per input stream. Every
stage advances once per period; the period is the slowest stage. A
pipeline holds, in order:

    init -> U_ACC x (2n GINX | n*d_r AP) -> key-switch division
         -> subtraction tree -> modulus switch

and each U_ACC unit holds the SDD digits, forward NTT, key multiply, digit
accumulation, inverse NTT, 1/N scaling and (GINX only) the rotate-update.

Latency is the sum of stage latencies along an input's path. A stage split
into substages contributes the latency of one substage.

Memory is counted in 1024x1024-bit blocks. Every pipeline carries its own
copy of the keys; the U_ACC working blocks dominate. Below one pipeline the
layout keeps the keys and each unit's accumulator pair and shrinks the NTT
replication.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import pandas as pd

from pimfhe.config import (
    ADD_CYCLES_BASE,
    ADD_CYCLES_PER_BIT,
    BIT_ADD_CYCLES,
    BLOCK_COLS,
    BLOCK_POLY_CAPACITY,
    BLOCK_ROWS,
    BOOTSTRAP_MODES,
    BYTES_PER_GB,
    BYTES_PER_MB,
    CLIENT_ENGINE_LWE_DIM,
    CLIENT_MEMORY_SIZES_KB,
    CYCLE_NS,
    ENERGY_ANCHOR_MJ,
    ENERGY_ANCHOR_SET,
    ENERGY_REFERENCE_MJ,
    MUL_CYCLES_LINEAR,
    MUL_CYCLES_SQUARE,
    NAMED_PARAM_SETS,
    NTT_TRANSFER_PHASES,
    ROTATION_CYCLES_PER_ROW,
    SEARCH_CYCLES_PER_BIT,
    TRANSFER_CYCLES_PER_COLUMN,
    WORKLOAD_GATE_OPS,
)
from pimfhe.params import ParameterError, ParamSet, load_param_set

logger = logging.getLogger(__name__)

OPTIMIZATIONS = ("throughput", "area")
OP_KINDS = (
    "add", "mul", "search", "compare", "rotation", "transfer",
    "bit_add", "montgomery", "barrett", "barrett_add",
)
XOR_NOTE = "XOR/XNOR use one bootstrap on the doubled combination"


class InsufficientMemoryError(ValueError):
    """Memory budget below the minimum footprint of one pipeline."""


# ============================================================================
# Configuration
# ============================================================================

@dataclass(frozen=True)
class CostFormulaTable:
    """Per-operation cycle formulas; every constant is overridable."""

    add_per_bit: int = ADD_CYCLES_PER_BIT
    add_base: int = ADD_CYCLES_BASE
    mul_square: int = MUL_CYCLES_SQUARE
    mul_linear: int = MUL_CYCLES_LINEAR
    search_per_bit: int = SEARCH_CYCLES_PER_BIT
    rotation_per_row: int = ROTATION_CYCLES_PER_ROW
    transfer_per_column: int = TRANSFER_CYCLES_PER_COLUMN
    bit_add: int = BIT_ADD_CYCLES

    def cycles(self, kind: str, b: int) -> int:
        if b < 1:
            raise ValueError(f"bitwidth must be >= 1, got {b}")
        if kind == "add":
            return self.add_per_bit * b + self.add_base
        if kind == "mul":
            return self.mul_square * b * b + self.mul_linear * b
        if kind in ("search", "compare"):
            return self.search_per_bit * b
        if kind == "rotation":
            return self.rotation_per_row * b
        if kind == "transfer":
            return self.transfer_per_column * b
        if kind == "bit_add":
            return self.bit_add * b
        if kind == "montgomery":
            return 2 * self.cycles("mul", b) + 2 * self.cycles("add", b)
        if kind == "barrett":
            return self.cycles("mul", b) + 2 * self.cycles("add", b)
        if kind == "barrett_add":
            # reduction after an addition: compare, then conditional subtract
            return self.cycles("compare", b) + self.cycles("add", b)
        raise ValueError(f"unknown operation kind '{kind}', expected one of {', '.join(OP_KINDS)}")


@dataclass(frozen=True)
class PimConfig:
    """Hardware and modeling knobs."""

    block_rows: int = BLOCK_ROWS
    block_cols: int = BLOCK_COLS
    cycle_ns: float = CYCLE_NS
    optimization: str = "throughput"
    keyswitch_fanin: Optional[int] = None  # None: largest fan-in within one period
    costs: CostFormulaTable = field(default_factory=CostFormulaTable)
    energy_anchor_set: str = ENERGY_ANCHOR_SET
    energy_anchor_mj: float = ENERGY_ANCHOR_MJ

    def __post_init__(self) -> None:
        if self.optimization not in OPTIMIZATIONS:
            raise ValueError(f"unknown optimization '{self.optimization}', expected one of {', '.join(OPTIMIZATIONS)}")
        if self.block_rows <= 0 or self.block_cols <= 0 or self.cycle_ns <= 0:
            raise ValueError("block geometry and cycle time must be positive")
        if self.keyswitch_fanin is not None and self.keyswitch_fanin < 1:
            raise ValueError(f"keyswitch_fanin must be >= 1, got {self.keyswitch_fanin}")

    @property
    def block_bytes(self) -> int:
        return self.block_rows * self.block_cols // 8


def op_cycles(kind: str, b: int, table: Optional[CostFormulaTable] = None) -> int:
    """Cycle count of one in-memory operation at bitwidth b.

    Raises:
        ValueError: unknown kind or b < 1
    """
    return (table or CostFormulaTable()).cycles(kind, b)


# ============================================================================
# Pipeline model
# ============================================================================

@dataclass(frozen=True)
class Stage:
    """One stage template.

    count is how many copies of the stage the pipeline holds. visits is how
    often an input waits on the stage's latency along its path; it defaults
    to count, and an NTT network of L butterfly stages is visited once per
    unit. lanes is the number of polynomials the stage transforms side by
    side. A stage whose cost exceeds the split budget is cut into
    `substages` pieces of at most `budget` cycles, each with its own blocks.
    """

    label: str
    group: str
    cycles: int
    base_blocks: int
    count: int = 1
    substages: int = 1
    budget: Optional[int] = None
    visits: Optional[int] = None
    lanes: int = 1

    @property
    def path_visits(self) -> int:
        return self.count if self.visits is None else self.visits

    @property
    def stage_cycles(self) -> int:
        return self.budget if self.substages > 1 else self.cycles

    @property
    def substage_cycles(self) -> list[int]:
        if self.substages == 1:
            return [self.cycles]
        return [self.budget] * (self.substages - 1) + [self.cycles - self.budget * (self.substages - 1)]

    @property
    def blocks(self) -> int:
        return self.base_blocks * self.substages

    @property
    def depth(self) -> int:
        return self.count * self.substages

    @property
    def total_blocks(self) -> int:
        return self.count * self.blocks

    @property
    def active_block_cycles(self) -> int:
        return self.count * self.base_blocks * self.cycles


def _split(stage: Stage, budget: int) -> Stage:
    if stage.cycles <= budget:
        return stage
    return replace(stage, substages=math.ceil(stage.cycles / budget), budget=budget)


@dataclass
class PipelineModel:
    """Ordered stage templates of one server pipeline."""

    params: ParamSet
    mode: str
    config: PimConfig
    stages: list[Stage] = field(default_factory=list)
    u_acc_count: int = 0
    staging_blocks: int = 0  # key operands held next to each U_ACC
    keyswitch_fanin: int = 0

    @property
    def depth(self) -> int:
        return sum(s.depth for s in self.stages)

    @property
    def period(self) -> int:
        """Bottleneck cycles: the slowest (sub)stage."""
        return max((s.stage_cycles for s in self.stages), default=0)

    @property
    def bottleneck(self) -> str:
        if not self.stages:
            return ""
        return max(self.stages, key=lambda s: s.stage_cycles).label

    @property
    def path_cycles(self) -> int:
        """Cycles an input spends waiting on stage latencies along its path."""
        return sum(s.path_visits * s.stage_cycles for s in self.stages)

    @property
    def ntt_stages(self) -> int:
        ntt = self._stage("acc.ntt")
        return ntt.count // self.u_acc_count if ntt and self.u_acc_count else 0

    def _stage(self, label: str) -> Optional[Stage]:
        return next((s for s in self.stages if s.label == label), None)

    def op_counts(self) -> dict:
        """Operations one bootstrap performs, per external product where noted.

        external_products: U_ACC units along the path
        sdd_digits: signed digits decomposed per external product
        ntt_stages: butterfly stages per transform
        forward_ntt_polys / inverse_ntt_polys: polynomials transformed per
        external product
        """
        units = self.u_acc_count
        if units == 0:
            return {"external_products": 0, "sdd_digits": 0, "ntt_stages": 0, "forward_ntt_polys": 0, "inverse_ntt_polys": 0}
        sdd, ntt, intt = self._stage("acc.sdd"), self._stage("acc.ntt"), self._stage("acc.intt")
        return {
            "external_products": units,
            "sdd_digits": sdd.count // units,
            "ntt_stages": ntt.count // units,
            "forward_ntt_polys": ntt.lanes,
            "inverse_ntt_polys": intt.lanes,
        }

    @property
    def min_working_blocks(self) -> int:
        """Double-buffered accumulator pair held by every U_ACC unit."""
        return self.u_acc_count * interleaved_blocks(4, self.params.N)

    def group_blocks(self, group: str) -> int:
        return sum(s.total_blocks for s in self.stages if s.group == group)

    @property
    def acc_blocks(self) -> int:
        return self.group_blocks("acc") + self.staging_blocks

    @property
    def other_blocks(self) -> int:
        return sum(s.total_blocks for s in self.stages if s.group != "acc")

    @property
    def active_block_cycles(self) -> int:
        return sum(s.active_block_cycles for s in self.stages)

    def stage_frame(self) -> pd.DataFrame:
        """One row per stage template, for --explain."""
        block_mb = self.config.block_bytes / BYTES_PER_MB
        rows = [
            {
                "label": s.label,
                "group": s.group,
                "count": s.count,
                "cycles": s.cycles,
                "substages": s.substages,
                "stage_cycles": s.stage_cycles,
                "blocks": s.blocks,
                "memory_mb": round(s.total_blocks * block_mb, 3),
            }
            for s in self.stages
        ]
        return pd.DataFrame(rows, columns=["label", "group", "count", "cycles", "substages", "stage_cycles", "blocks", "memory_mb"])


def interleaved_blocks(k: int, N: int) -> int:
    """Blocks needed for k polynomials of degree N in one pipeline.

    N < 2048 packs 2048/N polynomials per block; N > 2048 spans N/2048 blocks
    per polynomial.
    """
    if N <= BLOCK_POLY_CAPACITY:
        return math.ceil(k / (BLOCK_POLY_CAPACITY // N))
    return math.ceil(k * N / BLOCK_POLY_CAPACITY)


def u_acc_count(params: ParamSet, mode: str) -> int:
    """Accumulation units along one pipeline: 2n (GINX) or n*d_r (AP)."""
    if mode == "ginx":
        return 2 * params.n
    if mode == "ap":
        return params.n * params.d_r
    raise ParameterError(f"unknown bootstrapping mode '{mode}', expected one of {', '.join(BOOTSTRAP_MODES)}")


def build_server_pipeline(params: ParamSet, mode: str = "ginx", config: Optional[PimConfig] = None) -> PipelineModel:
    """Compose the bootstrapping pipeline for one parameter set and mode.

    Args:
        params: Parameter set
        mode: "ap" or "ginx"
        config: Hardware knobs; optimization picks throughput or area layout

    Returns:
        PipelineModel with stages in path order
    """
    config = config or PimConfig()
    c = config.costs
    b = params.log2_Q
    N, L, d_g = params.N, params.ntt_stages, params.d_g
    units = u_acc_count(params, mode)

    add, badd = c.cycles("add", b), c.cycles("barrett_add", b)
    mont = c.cycles("montgomery", b)
    ntt = mont + 2 * add + 2 * badd + c.cycles("transfer", NTT_TRANSFER_PHASES * b)
    bf = lambda k: interleaved_blocks(k, N)  # noqa: E731

    acc_stages = [
        Stage("acc.sdd", "acc", c.cycles("search", b) + add + badd, bf(4), count=d_g * units),
        Stage("acc.ntt", "acc", ntt, bf(2 * d_g), count=L * units, visits=units, lanes=2 * d_g),
        Stage("acc.mul", "acc", mont, bf(10 * d_g), count=units),
        Stage("acc.accumulate", "acc", math.ceil(math.log2(2 * d_g)) * (add + badd), bf(4 * d_g), count=units),
        Stage("acc.intt", "acc", ntt, bf(2), count=L * units, visits=units, lanes=2),
        Stage("acc.scale", "acc", mont, bf(2), count=units),
    ]
    if mode == "ginx":
        # a polynomial spans N/2 rows of an interleaved block pair
        rotate = c.cycles("rotation", N // 2) + 2 * add + 2 * badd
        acc_stages.append(Stage("acc.rotate-update", "acc", rotate, bf(4), count=units))
    staging = units * bf(8 * d_g if mode == "ginx" else 4 * d_g)

    init = Stage("init", "init", c.cycles("search", params.log2_q) + c.cycles("rotation", N // 2), bf(2))
    divide = [
        Stage("keyswitch.divide", "keyswitch", c.cycles("mul", b), bf(2), count=params.d_s - 1),
        Stage("keyswitch.reduce", "keyswitch", mont, bf(2), count=params.d_s - 1),
    ]
    modswitch = Stage("modswitch", "modswitch", c.cycles("mul", b) + add, math.ceil((N + 1) / config.block_rows))

    stages = [init] + acc_stages + divide + [modswitch]
    if config.optimization == "throughput":
        budget = c.cycles("mul", b)
        stages = [_split(s, budget) for s in stages]
    period = max(s.stage_cycles for s in stages)

    sub = add + badd
    fanin = config.keyswitch_fanin or max(1, period // sub)
    terms = N * max(1, params.d_s - 1)
    levels = max(1, math.ceil(math.log2(terms / fanin))) if terms > fanin else 1
    tree = [
        Stage(f"keyswitch.tree{l}", "keyswitch", fanin * sub, math.ceil(terms / (fanin * 2 ** l)))
        for l in range(levels)
    ]
    if config.optimization == "throughput":
        tree = [_split(s, c.cycles("mul", b)) for s in tree]
    stages = stages[:-1] + tree + stages[-1:]

    model = PipelineModel(
        params=params,
        mode=mode,
        config=config,
        stages=stages,
        u_acc_count=units,
        staging_blocks=staging,
        keyswitch_fanin=fanin,
    )
    for s in stages:
        logger.debug(f"[PIMSIM] {params.name} {mode}: {s.label} x{s.count} {s.cycles} cycles, {s.substages} substage(s), {s.blocks} blocks")
    return model


def estimate_throughput(model: PipelineModel, pipelines: float = 1) -> float:
    """Inputs per millisecond: one input leaves each pipeline per period."""
    if model.period == 0:
        return 0.0
    return pipelines * 1e6 / (model.period * model.config.cycle_ns)


def estimate_latency(model: PipelineModel) -> float:
    """Milliseconds per input: the sum of stage latencies along its path.

    Each U_ACC unit contributes its SDD digits, one pass through each NTT
    network and its remaining stages, each at that stage's own latency.
    """
    return model.path_cycles * model.config.cycle_ns / 1e6


# ============================================================================
# Memory
# ============================================================================

@dataclass(frozen=True)
class KeySizes:
    """Key sizes in bits; the *_alt figures count 4*d_g polynomials per RGSW."""

    ek_b_ginx: int
    ek_b_ap: int
    ek_s: int

    @property
    def ek_b_ginx_alt(self) -> int:
        return 2 * self.ek_b_ginx

    @property
    def ek_b_ap_alt(self) -> int:
        return 2 * self.ek_b_ap

    def ek_b(self, mode: str) -> int:
        return self.ek_b_ginx if mode == "ginx" else self.ek_b_ap

    def ek_b_alt(self, mode: str) -> int:
        return self.ek_b_ginx_alt if mode == "ginx" else self.ek_b_ap_alt


def key_sizes(params: ParamSet) -> KeySizes:
    """EK_B (both modes) and EK_S sizes at log2_Q bits per word."""
    w = params.log2_Q
    N, n = params.N, params.n
    return KeySizes(
        ek_b_ginx=n * 2 * (2 * params.d_g) * N * w,
        ek_b_ap=n * params.d_r * (2 * params.B_r * params.d_g) * N * w,
        ek_s=N * params.d_s * params.B_s * (n + 1) * w,
    )


def key_size_table(names: Optional[list[str]] = None, path: Optional[str] = None) -> pd.DataFrame:
    """Key sizes in MB per parameter set."""
    rows = []
    for name in names or list(NAMED_PARAM_SETS):
        ks = key_sizes(load_param_set(name, path=path))
        mb = lambda bits: round(bits / 8 / BYTES_PER_MB, 1)  # noqa: E731
        rows.append({
            "params": name,
            "ek_b_ginx_mb": mb(ks.ek_b_ginx),
            "ek_b_ginx_alt_mb": mb(ks.ek_b_ginx_alt),
            "ek_b_ap_mb": mb(ks.ek_b_ap),
            "ek_b_ap_alt_mb": mb(ks.ek_b_ap_alt),
            "ek_s_mb": mb(ks.ek_s),
            "total_ginx_mb": mb(ks.ek_b_ginx + ks.ek_s),
            "total_ap_mb": mb(ks.ek_b_ap + ks.ek_s),
        })
    return pd.DataFrame(rows)


@dataclass(frozen=True)
class MemoryBreakdown:
    """Bytes per pipeline by component."""

    ek_b: int
    ek_b_alt: int
    ek_s: int
    acc: int
    other: int
    acc_floor: int = 0

    @property
    def keys(self) -> int:
        return self.ek_b + self.ek_s

    @property
    def working(self) -> int:
        return self.acc + self.other

    @property
    def total(self) -> int:
        return self.keys + self.working

    @property
    def minimum(self) -> int:
        """Keys plus the accumulator pairs one pipeline cannot run without."""
        return self.keys + self.acc_floor

    def to_gb(self) -> dict:
        return {
            "ek_b": self.ek_b / BYTES_PER_GB,
            "ek_b_alt": self.ek_b_alt / BYTES_PER_GB,
            "ek_s": self.ek_s / BYTES_PER_GB,
            "acc": self.acc / BYTES_PER_GB,
            "other": self.other / BYTES_PER_GB,
            "total": self.total / BYTES_PER_GB,
            "minimum": self.minimum / BYTES_PER_GB,
        }


def estimate_memory(model: PipelineModel) -> MemoryBreakdown:
    ks = key_sizes(model.params)
    block = model.config.block_bytes
    return MemoryBreakdown(
        ek_b=ks.ek_b(model.mode) // 8,
        ek_b_alt=ks.ek_b_alt(model.mode) // 8,
        ek_s=ks.ek_s // 8,
        acc=model.acc_blocks * block,
        other=model.other_blocks * block,
        acc_floor=model.min_working_blocks * block,
    )


# ============================================================================
# Reports
# ============================================================================

def estimate_energy(model: PipelineModel) -> Optional[float]:
    """mJ per input from a one-point calibration; None for uncalibrated sets."""
    if model.params.name not in NAMED_PARAM_SETS or model.active_block_cycles == 0:
        return None
    anchor_params = load_param_set(model.config.energy_anchor_set, mode=model.mode)
    anchor = build_server_pipeline(anchor_params, model.mode, model.config)
    per_block_cycle = model.config.energy_anchor_mj / anchor.active_block_cycles
    return per_block_cycle * model.active_block_cycles


@dataclass
class CostReport:
    """Modeled figures for one parameter set, mode and memory budget."""

    params: str
    mode: str
    optimization: str
    throughput_per_ms: float
    latency_ms: float
    period_cycles: int
    stage_ns: float
    depth: int
    bottleneck: str
    pipeline_count: int
    ntt_fraction: float
    memory_gb: dict
    total_memory_gb: float
    budget_gb: Optional[float] = None
    energy_mj: Optional[float] = None
    energy_status: str = "uncalibrated"
    energy_reference_mj: Optional[float] = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "mode": self.mode,
            "optimization": self.optimization,
            "throughput_per_ms": round(self.throughput_per_ms, 3),
            "latency_ms": round(self.latency_ms, 3),
            "period_cycles": self.period_cycles,
            "stage_ns": round(self.stage_ns, 3),
            "depth": self.depth,
            "bottleneck": self.bottleneck,
            "pipeline_count": self.pipeline_count,
            "ntt_fraction": round(self.ntt_fraction, 4),
            "memory_gb": {k: round(v, 4) for k, v in self.memory_gb.items()},
            "total_memory_gb": round(self.total_memory_gb, 4),
            "budget_gb": self.budget_gb,
            "energy_mj": None if self.energy_mj is None else round(self.energy_mj, 3),
            "energy_status": self.energy_status,
            "energy_reference_mj": self.energy_reference_mj,
            "notes": list(self.notes),
        }

    def to_frame(self) -> pd.DataFrame:
        flat = {k: v for k, v in self.to_dict().items() if k not in ("memory_gb", "notes")}
        flat.update({f"memory_{k}_gb": v for k, v in self.to_dict()["memory_gb"].items()})
        return pd.DataFrame({"field": list(flat.keys()), "value": list(flat.values())})


def scale_to_budget(
    params: ParamSet,
    mode: str = "ginx",
    budget_gb: Optional[float] = None,
    config: Optional[PimConfig] = None,
) -> CostReport:
    """Fit whole pipelines into the budget, or shrink NTT replication below one.

    Raises:
        InsufficientMemoryError: budget below the keys plus accumulator pairs of
            one pipeline
    """
    config = config or PimConfig()
    model = build_server_pipeline(params, mode, config)
    memory = estimate_memory(model)
    single_throughput = estimate_throughput(model)
    single_latency = estimate_latency(model)

    pipelines, fraction = 1, 1.0
    if budget_gb is not None:
        budget = budget_gb * BYTES_PER_GB
        if budget < memory.minimum:
            raise InsufficientMemoryError(
                f"{params.name} {mode}: {budget_gb} GB is below the minimum footprint "
                f"of {memory.minimum / BYTES_PER_GB:.2f} GB (keys {memory.keys / BYTES_PER_GB:.2f} GB)"
            )
        if budget >= memory.total:
            pipelines = int(budget // memory.total)
        else:
            fraction = (budget - memory.keys) / memory.working
        logger.info(
            f"[PIMSIM] {params.name} {mode} {config.optimization}: budget {budget_gb} GB -> "
            f"{pipelines} pipeline(s), NTT fraction {fraction:.3f}"
        )

    energy = estimate_energy(model)
    footprint = memory.keys + memory.working * fraction if fraction < 1 else memory.total * pipelines
    return CostReport(
        params=params.name,
        mode=mode,
        optimization=config.optimization,
        throughput_per_ms=single_throughput * pipelines * fraction,
        latency_ms=single_latency / fraction,
        period_cycles=model.period,
        stage_ns=model.period * config.cycle_ns / fraction,
        depth=model.depth,
        bottleneck=model.bottleneck,
        pipeline_count=pipelines,
        ntt_fraction=fraction,
        memory_gb=memory.to_gb(),
        total_memory_gb=footprint / BYTES_PER_GB,
        budget_gb=budget_gb,
        energy_mj=energy,
        energy_status="calibrated" if energy is not None else "uncalibrated",
        energy_reference_mj=ENERGY_REFERENCE_MJ.get(params.name),
        notes=[XOR_NOTE],
    )


def simulate(params: ParamSet, mode: str = "ginx", config: Optional[PimConfig] = None, budget_gb: Optional[float] = None) -> CostReport:
    return scale_to_budget(params, mode, budget_gb, config)


# ============================================================================
# Client, circuits, workloads
# ============================================================================

@dataclass(frozen=True)
class ClientReport:
    params: str
    cycles: dict
    latency_us: float
    dot_product_fraction: float
    engine_blocks: int
    throughput_per_ms: dict  # memory size in KB -> encryptions per ms

    @property
    def total_cycles(self) -> int:
        return sum(self.cycles.values())

    def throughput_for_blocks(self, blocks: int) -> float:
        engines = blocks // self.engine_blocks
        return engines * 1e3 / self.latency_us


def estimate_client(params: ParamSet, config: Optional[PimConfig] = None) -> ClientReport:
    """Encryption cost of one bit on a client block engine."""
    config = config or PimConfig()
    c = config.costs
    log2q = params.log2_q
    log2n = math.ceil(math.log2(params.n))
    cycles = {
        "products": c.cycles("mul", log2q),
        "column_adds": c.cycles("bit_add", params.n - 2),
        "transfers": c.cycles("transfer", log2q * log2n),
        "serial_adds": c.cycles("bit_add", log2q * log2n),
        "error_message_add": 2 * c.cycles("add", log2q),
    }
    total = sum(cycles.values())
    latency_us = total * config.cycle_ns / 1e3
    engine_blocks = max(1, params.n // CLIENT_ENGINE_LWE_DIM)

    report = ClientReport(
        params=params.name,
        cycles=cycles,
        latency_us=latency_us,
        dot_product_fraction=(total - cycles["error_message_add"]) / total,
        engine_blocks=engine_blocks,
        throughput_per_ms={},
    )
    for kb in CLIENT_MEMORY_SIZES_KB:
        report.throughput_per_ms[kb] = report.throughput_for_blocks(kb * 1024 // config.block_bytes)
    return report


def estimate_circuit(model: PipelineModel, metadata: dict, count: int = 1, pipeline_count: int = 1) -> dict:
    """Latency of a circuit and of `count` independent instances of it.

    Each refresh level waits for one pipeline traversal plus any gates that
    did not find a free pipeline slot.
    """
    depth = metadata.get("depth", 0)
    widths = metadata.get("level_widths", [])
    if depth == 0:
        return {"depth": 0, "instances": count, "single_latency_ms": 0.0, "total_ms": 0.0, "amortization": 1.0}

    latency = estimate_latency(model)
    period_ms = model.period * model.config.cycle_ns / 1e6
    slots = model.depth * pipeline_count
    total = sum(
        latency + max(0, count * w - slots) * period_ms / pipeline_count
        for w in widths
    )
    single = depth * latency
    return {
        "depth": depth,
        "instances": count,
        "single_latency_ms": single,
        "total_ms": total,
        "amortization": total / single,
    }


def estimate_workload(throughput_per_ms: float, gate_ops: int) -> float:
    """Inferences per second at full pipeline utilization."""
    if gate_ops <= 0:
        raise ValueError(f"gate_ops must be positive, got {gate_ops}")
    return throughput_per_ms * 1000 / gate_ops


def workload_table(throughput_per_ms: float) -> pd.DataFrame:
    rows = [
        {"workload": name, "gate_ops": ops, "inferences_per_s": estimate_workload(throughput_per_ms, ops)}
        for name, ops in WORKLOAD_GATE_OPS.items()
    ]
    return pd.DataFrame(rows)


__all__ = [
    "OPTIMIZATIONS",
    "OP_KINDS",
    "InsufficientMemoryError",
    "CostFormulaTable",
    "PimConfig",
    "op_cycles",
    "Stage",
    "PipelineModel",
    "interleaved_blocks",
    "u_acc_count",
    "build_server_pipeline",
    "estimate_throughput",
    "estimate_latency",
    "KeySizes",
    "key_sizes",
    "key_size_table",
    "MemoryBreakdown",
    "estimate_memory",
    "estimate_energy",
    "CostReport",
    "scale_to_budget",
    "simulate",
    "ClientReport",
    "estimate_client",
    "estimate_circuit",
    "estimate_workload",
    "workload_table",
]
