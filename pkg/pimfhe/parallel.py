"""Level-wise encrypted circuit evaluation using a shared work queue.

Gates are grouped into evaluation levels; every gate in a level depends only
on wires from earlier levels, so a level is a batch of independent jobs.

Architecture:
    - Put all gates of the current level in a thread-safe queue.Queue()
    - N worker threads pop gates, evaluate, store the output wire
    - Join, check errors, move to the next level

Results are keyed by wire name, so the decrypted outputs do not depend on
the worker count or completion order.
"""
from __future__ import annotations

import logging
import queue
import threading
from typing import Dict, List, Optional, Tuple

from pimfhe.circuits import Circuit, Gate, NetlistError
from pimfhe.config import DEFAULT_JOBS
from pimfhe.gates import EvaluationKeys, eval_gate, gate_table
from pimfhe.lwe import KeyMismatchError, LweCiphertext

logger = logging.getLogger(__name__)


def _eval_one(
    gate: Gate,
    wires: Dict[str, LweCiphertext],
    keys: EvaluationKeys,
    table: dict,
    mode: Optional[str] = None,
) -> LweCiphertext:
    operands = [wires[w] for w in gate.inputs]
    ct2 = operands[1] if len(operands) > 1 else None
    return eval_gate(table[gate.op], operands[0], ct2, keys, mode=mode)


def eval_circuit(
    circuit: Circuit,
    inputs: Dict[str, LweCiphertext],
    keys: EvaluationKeys,
    jobs: int = DEFAULT_JOBS,
    mode: Optional[str] = None,
) -> Dict[str, LweCiphertext]:
    """Evaluate a circuit over ciphertexts.

    Args:
        circuit: Validated circuit
        inputs: Ciphertext per input wire
        keys: Evaluation keys (their mode selects AP or GINX)
        jobs: Number of worker threads per level
        mode: Bootstrapping mode every gate must run in; None follows the keys

    Returns:
        Ciphertext per output wire, in circuit output order; a circuit
        without outputs returns its inputs

    Raises:
        NetlistError: an input wire is not bound
        KeyMismatchError: mode disagrees with the refresh key
        Exception: if any gate fails (after all workers of the level finish)
    """
    missing = [w for w in circuit.inputs if w not in inputs]
    if missing:
        raise NetlistError(f"unbound input wire(s): {', '.join(missing)}")
    if mode is not None and mode != keys.mode:
        raise KeyMismatchError(f"{circuit.name}: mode {mode} does not match the {keys.mode} refresh key")

    wires: Dict[str, LweCiphertext] = {w: inputs[w] for w in circuit.inputs}
    table = gate_table(keys.params.q)
    levels = circuit.levels()
    logger.info(
        f"[PARALLEL] {circuit.name}: {len(circuit.gates)} gates in {len(levels)} levels "
        f"with {jobs} workers ({keys.mode})"
    )

    for depth, level in enumerate(levels, start=1):
        if jobs <= 1 or len(level) == 1:
            for gate in level:
                wires[gate.out] = _eval_one(gate, wires, keys, table, mode)
        else:
            _eval_level(circuit.name, depth, level, wires, keys, table, jobs, mode)
        logger.debug(f"[PARALLEL] {circuit.name}: level {depth}/{len(levels)} done ({len(level)} gates)")

    if not circuit.outputs:
        return {w: wires[w] for w in circuit.inputs}
    return {w: wires[w] for w in circuit.outputs}


def _eval_level(
    name: str,
    depth: int,
    level: List[Gate],
    wires: Dict[str, LweCiphertext],
    keys: EvaluationKeys,
    table: dict,
    jobs: int,
    mode: Optional[str] = None,
) -> None:
    work_queue: queue.Queue[Gate] = queue.Queue()
    for gate in level:
        work_queue.put(gate)

    results_lock = threading.Lock()
    results: Dict[str, LweCiphertext] = {}
    errors: List[Tuple[str, str]] = []

    def worker():
        """Worker thread: pulls gates from the queue and evaluates them."""
        while True:
            try:
                gate = work_queue.get_nowait()
            except queue.Empty:
                return

            try:
                out = _eval_one(gate, wires, keys, table, mode)
                with results_lock:
                    results[gate.out] = out
            except Exception as e:
                with results_lock:
                    errors.append((gate.out, str(e)))
                logger.error(f"[PARALLEL] {name}: {gate.op} -> {gate.out} FAILED: {e}")
            finally:
                work_queue.task_done()

    num_workers = min(jobs, len(level))
    threads = []
    for _ in range(num_workers):
        t = threading.Thread(target=worker, daemon=True)
        t.start()
        threads.append(t)

    for t in threads:
        t.join()

    if errors:
        error_msg = (
            f"[PARALLEL] {name}: {len(errors)} of {len(level)} gates failed at level {depth}. "
            f"First error: wire={errors[0][0]}, {errors[0][1]}"
        )
        logger.error(error_msg)
        raise Exception(error_msg)

    wires.update(results)


__all__ = ["eval_circuit"]
