"""Command-line front end: ``lossyqsim simulate`` and ``lossyqsim bench``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from . import bench
from .circuits import gate_count, parse_circuit
from .engine import EngineConfig, gather_state, run
from .errors import (
    CapacityError,
    CircuitParseError,
    CodecDecodeError,
    EngineError,
    InvalidArgumentError,
    NumericDegradationError,
    QSimError,
)
from .reference import DenseState, ref_run
from .statevec import fidelity, init_basis_state, write_dump

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_CAPACITY = 4
EXIT_ENGINE = 5
EXIT_FILE_NOT_FOUND = 6

log = logging.getLogger("lossyqsim")


def _qubit_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad qubit list {text!r}") from None


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("codec")
    mode = g.add_mutually_exclusive_group()
    mode.add_argument("--eb", type=float, default=None,
                      help="range-relative error bound per plane (default 0.01)")
    mode.add_argument("--abs-eb", type=float, default=None, help="absolute error bound")
    mode.add_argument("--lossless", action="store_true", help="bit-exact codec")
    mode.add_argument("--no-compress", action="store_true", help="keep slices dense")
    g.add_argument("--quant-bits", type=int, default=16, help="quantization code bits (4-24)")
    g.add_argument("--predictor", choices=("previous", "linear"), default="previous")
    e = p.add_argument_group("engine")
    e.add_argument("--slice-bits", type=int, default=None, help="log2 amplitudes per slice (default min(n, 20))")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--norm-every", type=int, default=1, help="normalize before every k-th gate; 0 disables")
    e.add_argument("--norm-tol", type=float, default=0.02, help="allowed drift of the squared norm")
    p.add_argument("--overhead", action="store_true", help="also time an uncompressed run")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.add_argument("-v", "--verbose", action="store_true")


def _engine_config(args) -> EngineConfig:
    codec = bench.codec_from_flags(args.eb, args.abs_eb, args.lossless, args.quant_bits, args.predictor)
    return EngineConfig(
        slice_bits=args.slice_bits,
        codec=codec,
        compression_enabled=not args.no_compress,
        workers=args.workers,
        norm_every=args.norm_every,
        norm_drift_tolerance=args.norm_tol,
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lossyqsim", description="Compressed state-vector simulator")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one circuit file")
    sim.add_argument("circuit_file")
    sim.add_argument("--basis", type=int, default=0, help="initial basis state index")
    sim.add_argument("--compare-reference", action="store_true", help="report fidelity vs the dense oracle")
    sim.add_argument("--metrics-csv", default=None, help="write per-gate ratios and timings as CSV")
    sim.add_argument("--dump", default=None, help="write the final state in QSV1 dump format")
    _add_engine_flags(sim)

    b = sub.add_parser("bench", help="run a benchmark suite")
    b.add_argument("suite", choices=bench.SUITES)
    b.add_argument("--qubits", type=_qubit_list, required=True, help="comma-separated qubit counts")
    b.add_argument("--repeat", type=int, default=1)
    b.add_argument("--iterations", type=int, default=None, help="Grover iterations (default optimal)")
    b.add_argument("--seed", type=int, default=0, help="seed for Grover marked states")
    b.add_argument("--format", choices=("json", "csv"), default="json")
    b.add_argument("--oracle-max-qubits", type=int, default=24)
    b.add_argument("--max-qubits", type=int, default=bench.DEFAULT_ENGINE_MAX_QUBITS)
    _add_engine_flags(b)
    return p


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def cmd_simulate(args) -> int:
    if not os.path.exists(args.circuit_file):
        print(f"error: circuit file not found: {args.circuit_file}", file=sys.stderr)
        return EXIT_FILE_NOT_FOUND
    with open(args.circuit_file) as fh:
        circuit = parse_circuit(fh.read(), name=os.path.basename(args.circuit_file))
    config = _engine_config(args)
    n = circuit.num_qubits
    initial = init_basis_state(n, args.basis, config.resolved_slice_bits(n))
    state, metrics = run(circuit, config, initial)
    if args.overhead:
        _, baseline = run(circuit, replace(config, compression_enabled=False), initial)
        metrics.baseline_wall_seconds = baseline.wall_seconds
        metrics.overhead_factor = metrics.wall_seconds / baseline.wall_seconds

    report = {"circuit": circuit.name, "gate_count": gate_count(circuit),
              "codec_mode": config.codec.mode.name.lower() if config.compression_enabled else "off",
              "codec_bound": config.codec.bound if config.compression_enabled else None,
              "fidelity": None}
    report.update(metrics.to_dict())
    report["qubit_headroom"] = bench.qubit_headroom(metrics.min_compression_ratio)
    if args.compare_reference:
        ref = ref_run(circuit, DenseState.basis(n, args.basis))
        report["fidelity"] = fidelity(state, ref.amplitudes)
    if args.metrics_csv:
        with open(args.metrics_csv, "w") as fh:
            fh.write(metrics.to_csv())
    if args.dump:
        with open(args.dump, "wb") as fh:
            write_dump(gather_state(state, config.gather_max_qubits), fh)
    _emit(json.dumps(report, indent=2), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _engine_config(args)
    rows = bench.run_suite(
        args.suite, args.qubits, config, seed=args.seed, iterations=args.iterations,
        repeat=args.repeat, overhead=args.overhead, oracle_max_qubits=args.oracle_max_qubits,
        engine_max_qubits=args.max_qubits,
    )
    if args.format == "csv":
        _emit(bench.reports_to_csv(rows), args.out)
    else:
        _emit(json.dumps([r.to_dict() for r in rows], indent=2), args.out)
    for r in rows:
        if r.error:
            print(f"row n={r.num_qubits}: {r.error}", file=sys.stderr)
            return EXIT_CAPACITY if r.error.startswith("CapacityError") else EXIT_ENGINE
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = cmd_simulate if args.command == "simulate" else cmd_bench
    try:
        return handler(args)
    except CircuitParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except InvalidArgumentError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EngineError, CodecDecodeError, NumericDegradationError, QSimError) as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
