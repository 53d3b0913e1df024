"""Command-line interface for pimfhe."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from typing import Iterable

import pandas as pd
from dotenv import load_dotenv

from pimfhe.bootstrap import RefreshKeyAP, RefreshKeyGINX
from pimfhe.circuits import NetlistError, format_netlist, generate_circuit, load_netlist, MULTIPLIER_REDUCTIONS
from pimfhe.config import (
    BOOTSTRAP_MODES,
    BYTES_PER_MB,
    CIPHERTEXT_SUFFIX,
    KEY_FILES,
    MAX_JOBS,
    MIN_JOBS,
    SECRET_DISTRIBUTIONS,
    WORKLOAD_GATE_OPS,
    get_default_jobs,
    get_default_params_name,
)
from pimfhe.envelope import EnvelopeError, load_object, save_object
from pimfhe.gates import GATE_NAMES, PLAIN_GATES, EvaluationKeys, eval_gate, gate_table, generate_key_material
from pimfhe.lwe import KeyMismatchError, decrypt_bit, encrypt_bit, lwe_phase
from pimfhe.parallel import eval_circuit
from pimfhe.params import ParameterError, list_param_sets, load_param_set
from pimfhe.pimsim import (
    OPTIMIZATIONS,
    InsufficientMemoryError,
    PimConfig,
    build_server_pipeline,
    estimate_circuit,
    estimate_client,
    key_size_table,
    key_sizes,
    simulate,
    workload_table,
)
from pimfhe.progress import BenchTracker
from pimfhe.ringmath import DomainMismatchError, center
from pimfhe.sampling import Sampler

# Load .env file if it exists
load_dotenv()

logger = logging.getLogger(__name__)

DATA_ERRORS = (ParameterError, EnvelopeError, NetlistError, KeyMismatchError, DomainMismatchError, OSError)


class UsageError(ValueError):
    """Invalid flag combination (exit code 2)."""


def _fail(message: str, code: int) -> None:
    logger.error(message)
    print(f"Error: {message}", file=sys.stderr)
    sys.exit(code)


def _emit(payload: dict) -> None:
    print(json.dumps(payload), flush=True)


def _parse_bits(text: str) -> list[int]:
    if any(ch not in "01" for ch in text):
        raise UsageError(f"bit string must contain only 0 and 1, got '{text}'")
    return [int(ch) for ch in text]


def _check_jobs(jobs: int) -> int:
    if not MIN_JOBS <= jobs <= MAX_JOBS:
        raise UsageError(f"--jobs must be between {MIN_JOBS} and {MAX_JOBS}, got {jobs}")
    return jobs


def load_evaluation_keys(keys_dir: str) -> EvaluationKeys:
    """Refresh key and key-switching key written by `keygen`."""
    refresh_key, params = load_object(os.path.join(keys_dir, KEY_FILES["refresh-key"]))
    if not isinstance(refresh_key, (RefreshKeyAP, RefreshKeyGINX)):
        raise EnvelopeError(f"{keys_dir}: {KEY_FILES['refresh-key']} does not hold a refresh key")
    ksk, _ = load_object(os.path.join(keys_dir, KEY_FILES["ksk"]), expected_tag="ksk", params=params)
    logger.info(f"Loaded evaluation keys for {params.name} from {keys_dir}")
    return EvaluationKeys(params=params, refresh_key=refresh_key, ksk=ksk)


# ============================================================================
# Commands
# ============================================================================

def cmd_params(args) -> None:
    if args.params_command == "list":
        records = [load_param_set(name).to_dict() for name in list_param_sets()]
        if args.format == "json":
            _emit({"param_sets": records})
        else:
            print(pd.DataFrame(records).to_string(index=False))
        return
    params = load_param_set(args.name)
    if args.format == "json":
        _emit(params.to_dict())
    else:
        for key, value in params.to_dict().items():
            print(f"{key:>14}: {value}")


def cmd_keygen(args) -> None:
    params = load_param_set(args.params, mode=args.mode, secret_dist=args.secret)
    os.makedirs(args.out_dir, exist_ok=True)
    start = time.time()
    sk, z, keys = generate_key_material(params, args.mode, Sampler(args.seed))
    sizes = key_sizes(params)  # log2_Q bits per stored word

    files = {}
    for role, obj in (
        ("secret-key", sk),
        ("rlwe-secret", z),
        ("refresh-key", keys.refresh_key),
        ("ksk", keys.ksk),
    ):
        path = os.path.join(args.out_dir, KEY_FILES[role])
        files[role] = {"path": path, "bytes": save_object(path, obj, params)}
        logger.info(f"[KEYGEN] wrote {role} to {path} ({files[role]['bytes']:,} bytes)")

    _emit({
        "params": params.name,
        "mode": args.mode,
        "secret_dist": params.secret_dist,
        "seed": args.seed,
        "files": files,
        "refresh_key_mb": round(sizes.ek_b(args.mode) / 8 / BYTES_PER_MB, 3),
        "ksk_mb": round(sizes.ek_s / 8 / BYTES_PER_MB, 3),
        "resident_mb": {
            "refresh_key": round(keys.refresh_key.nbytes / BYTES_PER_MB, 3),
            "ksk": round(keys.ksk.nbytes / BYTES_PER_MB, 3),
        },
        "elapsed_s": round(time.time() - start, 3),
    })


def cmd_encrypt(args) -> None:
    bits = _parse_bits(args.bits)
    sk, params = load_object(args.key, expected_tag="secret-key")
    os.makedirs(args.out_dir, exist_ok=True)
    sampler = Sampler(args.seed)
    paths = []
    for i, bit in enumerate(bits):
        path = os.path.join(args.out_dir, f"{args.prefix}{i}{CIPHERTEXT_SUFFIX}")
        save_object(path, encrypt_bit(sk, bit, params, sampler), params)
        paths.append(path)
    logger.info(f"Encrypted {len(bits)} bit(s) under {params.name} into {args.out_dir}")
    _emit({"params": params.name, "count": len(paths), "files": paths})


def cmd_decrypt(args) -> None:
    sk, params = load_object(args.key, expected_tag="secret-key")
    bits = []
    for path in args.ciphertexts:
        ct, _ = load_object(path, expected_tag="lwe-ct", params=params)
        bits.append(decrypt_bit(sk, ct))
    print("".join(str(b) for b in bits), flush=True)


def cmd_gate(args) -> None:
    gate = args.gate.upper()
    arity = 1 if gate == "NOT" else 2
    if len(args.inputs) != arity:
        raise UsageError(f"{gate} takes {arity} input ciphertext(s), got {len(args.inputs)}")
    keys = load_evaluation_keys(args.keys)
    operands = [load_object(path, expected_tag="lwe-ct", params=keys.params)[0] for path in args.inputs]
    ct2 = operands[1] if arity == 2 else None

    start = time.time()
    out = eval_gate(gate, operands[0], ct2, keys, mode=args.mode)
    elapsed = time.time() - start
    save_object(args.out, out, keys.params)
    _emit({"gate": gate, "mode": keys.mode, "out": args.out, "elapsed_ms": round(elapsed * 1e3, 3)})


def _parse_bindings(bindings: list[str], inputs_dir: str | None, wires: list[str]) -> dict[str, str]:
    paths = {}
    if inputs_dir:
        for wire in wires:
            candidate = os.path.join(inputs_dir, f"{wire}{CIPHERTEXT_SUFFIX}")
            if os.path.exists(candidate):
                paths[wire] = candidate
    for binding in bindings:
        wire, sep, path = binding.partition("=")
        if not sep or not wire or not path:
            raise UsageError(f"--bind expects WIRE=PATH, got '{binding}'")
        paths[wire.strip()] = path.strip()
    return paths


def cmd_circuit(args) -> None:
    if args.circuit_command == "gen":
        circuit = generate_circuit(args.name, reduction=args.reduction)
        text = format_netlist(circuit)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as f:
                f.write(text)
            _emit({"circuit": circuit.name, "out": args.out, **circuit.metadata()})
        else:
            sys.stdout.write(text)
        return

    circuit = load_netlist(args.netlist)
    if args.circuit_command == "info":
        _emit(circuit.metadata())
        return

    jobs = _check_jobs(args.jobs)
    keys = load_evaluation_keys(args.keys)
    if args.mode and args.mode != keys.mode:
        raise KeyMismatchError(f"--mode {args.mode} does not match the {keys.mode} refresh key in {args.keys}")
    paths = _parse_bindings(args.bind, args.inputs_dir, circuit.inputs)
    inputs = {
        wire: load_object(path, expected_tag="lwe-ct", params=keys.params)[0]
        for wire, path in paths.items()
    }

    start = time.time()
    outputs = eval_circuit(circuit, inputs, keys, jobs=jobs, mode=args.mode)
    elapsed = time.time() - start

    os.makedirs(args.out_dir, exist_ok=True)
    files = []
    for wire, ct in outputs.items():
        path = os.path.join(args.out_dir, f"{wire}{CIPHERTEXT_SUFFIX}")
        save_object(path, ct, keys.params)
        files.append(path)
    _emit({
        "circuit": circuit.name,
        "mode": keys.mode,
        "jobs": jobs,
        "depth": circuit.depth,
        "bootstrap_count": circuit.bootstrap_count,
        "outputs": files,
        "elapsed_s": round(elapsed, 3),
    })


def cmd_simulate(args) -> None:
    params = load_param_set(args.params, mode=args.mode)
    config = PimConfig(optimization=args.opt, keyswitch_fanin=args.keyswitch_fanin)
    try:
        report = simulate(params, args.mode, config, budget_gb=args.budget_gb)
    except InsufficientMemoryError as e:
        if args.format == "json":
            _emit({"error": "insufficient_memory", "message": str(e), "params": params.name, "budget_gb": args.budget_gb})
        _fail(str(e), 4)
        return

    payload = report.to_dict()
    model = build_server_pipeline(params, args.mode, config) if (args.explain or args.circuit) else None
    frames = []
    if args.explain:
        stages = model.stage_frame()
        payload["stages"] = stages.to_dict(orient="records")
        frames.append(("stages", stages))
    if args.keys:
        keys = key_size_table()
        payload["key_sizes"] = keys.to_dict(orient="records")
        frames.append(("key sizes", keys))
    if args.workloads:
        workloads = workload_table(report.throughput_per_ms)
        payload["workloads"] = workloads.to_dict(orient="records")
        frames.append(("workloads", workloads))
    if args.client:
        client = estimate_client(params, config)
        payload["client"] = {
            "cycles": client.cycles,
            "total_cycles": client.total_cycles,
            "latency_us": round(client.latency_us, 4),
            "dot_product_fraction": round(client.dot_product_fraction, 4),
            "throughput_per_ms": {str(k): round(v, 3) for k, v in client.throughput_per_ms.items()},
        }
    if args.circuit:
        metadata = generate_circuit(args.circuit).metadata() if not os.path.exists(args.circuit) else load_netlist(args.circuit).metadata()
        payload["circuit"] = estimate_circuit(model, metadata, count=args.count, pipeline_count=report.pipeline_count)

    if args.format == "json":
        _emit(payload)
        return
    print(report.to_frame().to_string(index=False))
    for title, frame in frames:
        print(f"\n{title}:")
        print(frame.to_string(index=False))
    for section in ("client", "circuit"):
        if section in payload:
            print(f"\n{section}:")
            for key, value in payload[section].items():
                print(f"{key:>22}: {value}")


def cmd_bench(args) -> None:
    gates = [g.upper() for g in (args.gate or GATE_NAMES)]
    unknown = [g for g in gates if g not in GATE_NAMES]
    if unknown:
        raise UsageError(f"unknown gate(s) {', '.join(unknown)}; valid gates: {', '.join(GATE_NAMES)}")
    if args.gates < 1:
        raise UsageError(f"--gates must be positive, got {args.gates}")

    params = load_param_set(args.params, mode=args.mode)
    sampler = Sampler(args.seed)
    sk, _, keys = generate_key_material(params, args.mode, sampler)
    table = gate_table(params.q)

    tracker = BenchTracker(params.name, args.mode, update_interval_seconds=args.progress_interval)
    for gate in gates:
        tracker.add_gate(gate, args.gates)

    failures = 0
    for gate in gates:
        spec = table[gate]
        for _ in range(args.gates):
            x, y = (int(v) for v in sampler.rng.integers(0, 2, size=2))
            ct1 = encrypt_bit(sk, x, params, sampler)
            ct2 = encrypt_bit(sk, y, params, sampler) if spec.arity == 2 else None
            start = time.perf_counter()
            out = eval_gate(spec, ct1, ct2, keys)
            elapsed = time.perf_counter() - start

            expected = PLAIN_GATES[gate](x, y) if spec.arity == 2 else PLAIN_GATES[gate](x)
            noise = None
            if args.noise:
                noise = abs(int(center((lwe_phase(out, sk) - expected * (params.q // 4)) % params.q, params.q)))
            if decrypt_bit(sk, out) != expected:
                failures += 1
                logger.warning(f"[BENCH] {gate}({x}, {y}) decrypted wrong")
            tracker.record(gate, elapsed, noise)
            if args.format == "table":
                tracker.print_progress()

    summary = tracker.summary()
    summary["failures"] = failures
    if args.format == "json":
        _emit(summary)
    else:
        tracker.print_final_summary()
        print(f"Decryption failures: {failures}")


# ============================================================================
# Parser
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    default_params = get_default_params_name()
    parser = argparse.ArgumentParser(description="pimfhe: boolean-gate FHE and PIM cost model")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)

    params_parser = subparsers.add_parser("params", help="Inspect parameter sets")
    params_sub = params_parser.add_subparsers(dest="params_command", required=True)
    p_list = params_sub.add_parser("list", help="List all parameter sets")
    p_list.add_argument("--format", choices=("json", "table"), default="table")
    p_show = params_sub.add_parser("show", help="Show one parameter set with derived fields")
    p_show.add_argument("name", help="Parameter set name, e.g. STD128")
    p_show.add_argument("--format", choices=("json", "table"), default="table")

    keygen = subparsers.add_parser("keygen", help="Generate client and evaluation keys")
    keygen.add_argument("--params", default=default_params, help=f"Parameter set (default {default_params}, or $PIMFHE_PARAMS)")
    keygen.add_argument("--mode", choices=BOOTSTRAP_MODES, default="ginx", help="Bootstrapping mode (default ginx)")
    keygen.add_argument("--secret", choices=SECRET_DISTRIBUTIONS, default=None, help="Secret distribution (default by mode)")
    keygen.add_argument("--seed", type=int, default=0, help="Seed for all key material (default 0)")
    keygen.add_argument("--out-dir", required=True, help="Directory for the four key files")

    encrypt = subparsers.add_parser("encrypt", help="Encrypt a bit string, one ciphertext file per bit")
    encrypt.add_argument("--key", required=True, help="Secret key file")
    encrypt.add_argument("--bits", required=True, help="Bits to encrypt, e.g. 1011 (bit i goes to <prefix><i>)")
    encrypt.add_argument("--out-dir", required=True, help="Output directory")
    encrypt.add_argument("--prefix", default="ct", help="Ciphertext file prefix (default ct)")
    encrypt.add_argument("--seed", type=int, default=0, help="Encryption seed (default 0)")

    decrypt = subparsers.add_parser("decrypt", help="Decrypt ciphertext files and print the bits")
    decrypt.add_argument("--key", required=True, help="Secret key file")
    decrypt.add_argument("ciphertexts", nargs="*", help="Ciphertext files, in bit order")

    gate = subparsers.add_parser("gate", help="Evaluate one gate on ciphertext files")
    gate.add_argument("gate", choices=GATE_NAMES + tuple(g.lower() for g in GATE_NAMES), help="Gate name")
    gate.add_argument("inputs", nargs="+", help="One (NOT) or two input ciphertext files")
    gate.add_argument("--keys", required=True, help="Directory written by keygen")
    gate.add_argument("--out", required=True, help="Output ciphertext file")
    gate.add_argument("--mode", choices=BOOTSTRAP_MODES, default=None, help="Assert the refresh-key mode")

    circuit = subparsers.add_parser("circuit", help="Generate, inspect or evaluate netlists")
    circuit_sub = circuit.add_subparsers(dest="circuit_command", required=True)
    c_gen = circuit_sub.add_parser("gen", help="Emit a generated netlist (add<w> or mul<w>)")
    c_gen.add_argument("name", help="Circuit name, e.g. add8 or mul4")
    c_gen.add_argument("--reduction", choices=MULTIPLIER_REDUCTIONS, default="chain", help="Multiplier partial-product reduction")
    c_gen.add_argument("--out", default=None, help="Write to a file instead of stdout")
    c_info = circuit_sub.add_parser("info", help="Print depth, gate counts and level widths")
    c_info.add_argument("netlist", help="Netlist file")
    c_eval = circuit_sub.add_parser("eval", help="Evaluate a netlist over ciphertext files")
    c_eval.add_argument("netlist", help="Netlist file")
    c_eval.add_argument("--keys", required=True, help="Directory written by keygen")
    c_eval.add_argument("--bind", action="append", default=[], help="WIRE=PATH input binding (repeatable)")
    c_eval.add_argument("--inputs-dir", default=None, help="Bind each input wire to <dir>/<wire>.mfhe if present")
    c_eval.add_argument("--out-dir", required=True, help="Directory for output ciphertexts (<wire>.mfhe)")
    c_eval.add_argument("--mode", choices=BOOTSTRAP_MODES, default=None, help="Assert the refresh-key mode")
    c_eval.add_argument(
        "--jobs",
        type=int,
        default=get_default_jobs(),
        help=f"Evaluator worker threads ({MIN_JOBS}-{MAX_JOBS}, default $PIMFHE_JOBS or 1)",
    )

    sim = subparsers.add_parser("simulate", help="Modeled PIM throughput, latency, memory and energy")
    sim.add_argument("--params", default=default_params, help=f"Parameter set (default {default_params})")
    sim.add_argument("--mode", choices=BOOTSTRAP_MODES, default="ginx")
    sim.add_argument("--opt", choices=OPTIMIZATIONS, default="throughput", help="Pipeline variant (default throughput)")
    sim.add_argument("--budget-gb", type=float, default=None, help="Memory budget to scale into")
    sim.add_argument("--keyswitch-fanin", type=int, default=None, help="Override the subtraction-tree fan-in")
    sim.add_argument("--format", choices=("json", "table"), default="json")
    sim.add_argument("--explain", action="store_true", help="Include the per-stage table")
    sim.add_argument("--keys", action="store_true", help="Include key sizes for all parameter sets")
    sim.add_argument("--workloads", action="store_true", help=f"Include inference rates for {', '.join(WORKLOAD_GATE_OPS)}")
    sim.add_argument("--client", action="store_true", help="Include client encryption costs")
    sim.add_argument("--circuit", default=None, help="Netlist file or generated name (add8, mul4) to estimate")
    sim.add_argument("--count", type=int, default=1, help="Independent circuit instances for --circuit")

    bench = subparsers.add_parser("bench", help="Wall-clock timing of the functional gates")
    bench.add_argument("--params", default=default_params, help=f"Parameter set (default {default_params})")
    bench.add_argument("--mode", choices=BOOTSTRAP_MODES, default="ginx")
    bench.add_argument("--gates", type=int, default=10, help="Evaluations per gate kind (default 10)")
    bench.add_argument("--gate", action="append", default=None, help="Restrict to a gate kind (repeatable)")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--noise", action="store_true", help="Record refreshed phase distance from its ideal value")
    bench.add_argument("--format", choices=("json", "table"), default="table")
    bench.add_argument("--progress-interval", type=int, default=30, help="Seconds between progress banners")

    return parser


COMMANDS = {
    "params": cmd_params,
    "keygen": cmd_keygen,
    "encrypt": cmd_encrypt,
    "decrypt": cmd_decrypt,
    "gate": cmd_gate,
    "circuit": cmd_circuit,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
}


def main(argv: Iterable[str] | None = None) -> None:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "simulate" and args.count < 1:
        _fail(f"--count must be positive, got {args.count}", 2)
    if args.command == "simulate" and args.count > 1 and not args.circuit:
        _fail("--count requires --circuit", 2)

    try:
        COMMANDS[args.command](args)
    except UsageError as e:
        _fail(str(e), 2)
    except InsufficientMemoryError as e:
        _fail(str(e), 4)
    except DATA_ERRORS as e:
        _fail(str(e), 3)
    except ValueError as e:
        # circuit names, multiplier reductions, bootstrap mode/distribution conflicts
        _fail(str(e), 3)


def configure_logging(argv: list[str]) -> None:
    log_level = logging.DEBUG if ("-v" in argv or "--verbose" in argv) else logging.INFO
    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(sys.stderr),
        ]
    )


def run() -> None:
    """Console-script entry point."""
    configure_logging(sys.argv)
    main()


if __name__ == "__main__":
    run()
