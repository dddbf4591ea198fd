"""Benchmark suites (QFT, Grover) and their per-row reports."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .circuits import Circuit, build_grover, build_qft, gate_count
from .codec import CodecConfig, Mode
from .engine import EngineConfig, measure_overhead, run
from .errors import CapacityError, InvalidArgumentError, QSimError
from .reference import DEFAULT_MAX_QUBITS, DenseState, ref_run, success_probability
from .statevec import fidelity, init_basis_state

SUITES = ("qft", "grover")
DEFAULT_ENGINE_MAX_QUBITS = 28
# Fractional part of the golden ratio; picks a quasi-periodic QFT input.
_GOLDEN_FRACTION = (math.sqrt(5.0) - 1.0) / 2.0


def qubit_headroom(min_ratio: float | None) -> int:
    """Extra qubits the saved memory could host: floor(log2(ratio)), 0 below 1."""
    if min_ratio is None or not min_ratio >= 1:
        return 0
    return int(math.floor(math.log2(min_ratio)))


@dataclass
class BenchReport:
    benchmark: str
    num_qubits: int
    gate_count: int | None = None
    codec_mode: str | None = None
    codec_bound: float | None = None
    slice_bits: int | None = None
    basis_input: int | None = None
    marked: int | None = None
    fidelity: float | None = None
    success_probability: float | None = None
    reference_success_probability: float | None = None
    min_compression_ratio: float | None = None
    mean_compression_ratio: float | None = None
    wall_seconds: float | None = None
    overhead_factor: float | None = None
    qubit_headroom: int = 0
    peak_compressed_bytes: int | None = None
    dense_bytes: int | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def report_columns() -> list[str]:
    return [f.name for f in fields(BenchReport)]


def qft_input_index(n: int) -> int:
    return int(_GOLDEN_FRACTION * (1 << n))


def bench_circuit(suite: str, n: int, *, rng: np.random.Generator,
                  iterations: int | None = None) -> tuple[Circuit, int, int | None]:
    """Build one benchmark circuit; returns (circuit, initial basis index, marked)."""
    if suite == "qft":
        return build_qft(n), qft_input_index(n), None
    if suite == "grover":
        marked = int(rng.integers(1 << n))
        return build_grover(n, marked, iterations), 0, marked
    raise InvalidArgumentError(f"unknown suite {suite!r}")


def run_row(suite: str, n: int, config: EngineConfig, *, rng: np.random.Generator,
            iterations: int | None = None, repeat: int = 1, overhead: bool = False,
            oracle_max_qubits: int = DEFAULT_MAX_QUBITS,
            engine_max_qubits: int = DEFAULT_ENGINE_MAX_QUBITS) -> BenchReport:
    codec = config.codec
    row = BenchReport(
        benchmark=suite,
        num_qubits=n,
        codec_mode=codec.mode.name.lower() if config.compression_enabled else "off",
        codec_bound=None if codec.mode == Mode.LOSSLESS or not config.compression_enabled else codec.bound,
    )
    try:
        if n > engine_max_qubits:
            raise CapacityError(f"{n} qubits exceeds engine guard of {engine_max_qubits}")
        circuit, k, marked = bench_circuit(suite, n, rng=rng, iterations=iterations)
        row.gate_count = gate_count(circuit)
        row.basis_input = k
        row.marked = marked
        row.slice_bits = config.resolved_slice_bits(n)

        walls = []
        state = metrics = None
        for _ in range(max(1, repeat)):
            initial = init_basis_state(n, k, row.slice_bits)
            if overhead:
                metrics = measure_overhead(circuit, config, initial)
                state = None
            else:
                state, metrics = run(circuit, config, initial)
            walls.append(metrics.wall_seconds)
        row.wall_seconds = statistics.median(walls)
        row.min_compression_ratio = metrics.min_compression_ratio
        row.mean_compression_ratio = metrics.mean_compression_ratio
        row.overhead_factor = metrics.overhead_factor
        row.peak_compressed_bytes = metrics.peak_compressed_bytes
        row.dense_bytes = metrics.dense_bytes
        row.qubit_headroom = qubit_headroom(metrics.min_compression_ratio)

        if n <= oracle_max_qubits:
            if state is None:
                state, _ = run(circuit, config, init_basis_state(n, k, row.slice_bits))
            ref = ref_run(circuit, DenseState.basis(n, k), max_qubits=oracle_max_qubits)
            row.fidelity = fidelity(state, ref.amplitudes)
            if marked is not None:
                row.success_probability = success_probability(state, marked)
                row.reference_success_probability = success_probability(ref, marked)
    except InvalidArgumentError:
        raise
    except QSimError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def run_suite(suite: str, qubits: list[int], config: EngineConfig, *, seed: int = 0,
              **kw) -> list[BenchReport]:
    if suite not in SUITES:
        raise InvalidArgumentError(f"unknown suite {suite!r}; choose from {SUITES}")
    floor = 2 if suite == "grover" else 1
    for n in qubits:
        if n < floor:
            raise InvalidArgumentError(f"{suite} needs at least {floor} qubit(s), got {n}")
    rng = np.random.default_rng(seed)
    return [run_row(suite, n, config, rng=rng, **kw) for n in qubits]


def reports_to_csv(rows: list[BenchReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=report_columns(), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else v) for k, v in r.to_dict().items()})
    return buf.getvalue()


def codec_from_flags(eb: float | None = None, abs_eb: float | None = None, lossless: bool = False,
                     quant_code_bits: int = 16, predictor: str = "previous") -> CodecConfig:
    from .codec import Predictor

    pred = Predictor.LINEAR_EXTRAPOLATION if predictor == "linear" else Predictor.PREVIOUS_VALUE
    if lossless:
        return replace(CodecConfig.lossless(), quant_code_bits=quant_code_bits, predictor=pred)
    if abs_eb is not None:
        return CodecConfig.absolute(abs_eb, quant_code_bits=quant_code_bits, predictor=pred)
    return CodecConfig.relative(0.01 if eb is None else eb, quant_code_bits=quant_code_bits, predictor=pred)
