"""Slice-wise compressed simulation.

For every gate, every slice is decompressed, rescaled by the inverse square
root of the global norm, updated, and compressed again. Gates whose mixing
qubits live above the slice boundary are processed on groups of slices that
differ only in those bits (pairs for one such qubit, quads for a SWAP of two),
concatenated so the high qubits become extra local bits of a combined block.
Diagonal gates never need grouping: a slice index decides whether the
non-local part of the gate's predicate holds.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .circuits import Circuit, Gate
from .codec import CodecConfig
from .errors import (
    CapacityError,
    CodecDecodeError,
    EngineError,
    InvalidArgumentError,
    NumericDegradationError,
)
from .statevec import (
    BYTES_PER_AMPLITUDE,
    DensePlanes,
    Slice,
    StateVector,
    default_slice_bits,
    dense_bytes,
)

log = logging.getLogger(__name__)

DEFAULT_GATHER_MAX_QUBITS = 28


@dataclass(frozen=True)
class EngineConfig:
    """Run settings.

    ``norm_every`` selects the normalization policy: 1 normalizes before
    every gate, k > 1 before every k-th gate, 0 never.
    """

    slice_bits: int | None = None
    codec: CodecConfig = field(default_factory=CodecConfig)
    compression_enabled: bool = True
    workers: int = 1
    norm_every: int = 1
    norm_drift_tolerance: float = 0.02
    gather_max_qubits: int = DEFAULT_GATHER_MAX_QUBITS
    # Upper bound on amplitudes stacked into one work batch. Batch layout is a
    # function of this alone, never of ``workers``, which keeps results
    # identical for any worker count.
    batch_amplitudes: int = 1 << 16
    keep_ratio_log: bool = False

    def __post_init__(self):
        if self.workers < 1:
            raise InvalidArgumentError("workers must be >= 1")
        if self.norm_every < 0:
            raise InvalidArgumentError("norm_every must be >= 0")
        if not self.norm_drift_tolerance > 0:
            raise InvalidArgumentError("norm_drift_tolerance must be positive")

    def resolved_slice_bits(self, num_qubits: int) -> int:
        s = default_slice_bits(num_qubits) if self.slice_bits is None else self.slice_bits
        if not 0 <= s <= num_qubits:
            raise InvalidArgumentError(f"slice_bits {s} outside [0, {num_qubits}]")
        return s

    def normalizes_before(self, gate_index: int) -> bool:
        return self.norm_every > 0 and gate_index % self.norm_every == 0


@dataclass
class RunMetrics:
    num_qubits: int
    gate_count: int
    slice_bits: int
    compression_enabled: bool
    min_compression_ratio: float
    mean_compression_ratio: float
    per_gate_min_ratio: list[float]
    per_gate_mean_ratio: list[float]
    gate_seconds: list[float]
    wall_seconds: float
    peak_compressed_bytes: int
    dense_bytes: int
    final_norm: float
    baseline_wall_seconds: float | None = None
    overhead_factor: float | None = None
    ratio_log: list[tuple[int, int, int, int]] | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("ratio_log")
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gate_index", "min_ratio", "mean_ratio", "seconds"])
        for i, (lo, mean, sec) in enumerate(zip(self.per_gate_min_ratio, self.per_gate_mean_ratio, self.gate_seconds)):
            w.writerow([i, repr(lo), repr(mean), repr(sec)])
        return buf.getvalue()


class SliceStore:
    """Slices of one state plus their cached squared norms.

    ``global_sq_norm`` is maintained as the sum of the per-slice values.
    """

    def __init__(self, state: StateVector, codec: CodecConfig | None):
        self.state = state
        self.codec = codec
        self.sq_norms = np.array([sl.sq_norm for sl in state.slices], dtype=np.float64)
        self.global_sq_norm = math.fsum(self.sq_norms)

    @property
    def num_qubits(self) -> int:
        return self.state.num_qubits

    @property
    def slice_bits(self) -> int:
        return self.state.slice_bits

    @property
    def stored_bytes(self) -> int:
        return self.state.stored_bytes

    def put(self, sl: Slice) -> None:
        self.state.slices[sl.index] = sl
        self.sq_norms[sl.index] = sl.sq_norm

    def refresh_norm(self) -> float:
        self.global_sq_norm = math.fsum(self.sq_norms)
        return self.global_sq_norm

    @classmethod
    def build(cls, initial, slice_bits: int, codec: CodecConfig | None, log_entry=None) -> SliceStore:
        """Slice (and, with a codec, compress) an initial state."""
        if isinstance(initial, SliceStore):
            initial = initial.state
        if isinstance(initial, StateVector) and initial.slice_bits == slice_bits:
            src = ((sl.index, sl.amplitudes()) for sl in initial.slices)
            n = initial.num_qubits
        else:
            amps = initial.to_array() if isinstance(initial, StateVector) else np.asarray(
                getattr(initial, "amplitudes", initial), dtype=np.complex128).ravel()
            n = amps.shape[0].bit_length() - 1
            if not 0 <= slice_bits <= n:
                raise InvalidArgumentError(f"slice_bits {slice_bits} outside [0, {n}]")
            step = 1 << slice_bits
            src = ((j, amps[j * step:(j + 1) * step]) for j in range(1 << (n - slice_bits)))
        state = StateVector(n, slice_bits)
        for j, chunk in src:
            sl, nbytes = Slice.from_amplitudes(j, chunk, codec)
            if log_entry is not None and codec is not None:
                log_entry(j, nbytes)
            state.slices.append(sl)
        return cls(state, codec)


def partner(slice_index: int, target: int, slice_bits: int) -> int:
    """Slice holding the other half of a butterfly on non-local qubit ``target``."""
    if target < slice_bits:
        raise InvalidArgumentError("partner() is only defined for non-local qubits")
    return slice_index ^ (1 << (target - slice_bits))


@dataclass(frozen=True)
class _Plan:
    group_qubits: tuple[int, ...]  # non-local qubits folded into a combined block
    units: list[tuple[tuple[int, ...], bool]]  # (member slices, gate applies)
    bit_pos: dict[int, int]  # qubit -> bit in the combined block index
    nbits: int


def _mixing_qubits(gate: Gate) -> tuple[int, ...]:
    if gate.is_diagonal:
        return ()
    if gate.kind == "SWAP":
        return gate.qubits
    return (gate.target,)


def plan_gate(gate: Gate, num_qubits: int, slice_bits: int) -> _Plan:
    s = slice_bits
    group = tuple(sorted(q for q in _mixing_qubits(gate) if q >= s))
    group_mask = 0
    for q in group:
        group_mask |= 1 << (q - s)
    # Non-local qubits that only act as predicates (controls, diagonal bits).
    pred_mask = 0
    for q in gate.qubits:
        if q >= s and q not in group:
            pred_mask |= 1 << (q - s)
    offsets = [0]
    for q in group:
        bit = 1 << (q - s)
        offsets = offsets + [o | bit for o in offsets]
    units = []
    for j in range(1 << (num_qubits - s)):
        if j & group_mask:
            continue
        members = tuple(j | o for o in offsets)
        units.append((members, (j & pred_mask) == pred_mask))
    bit_pos = {q: q for q in gate.qubits if q < s}
    for i, q in enumerate(group):
        bit_pos[q] = s + i
    return _Plan(group, units, bit_pos, s + len(group))


def _bit_view(buf: np.ndarray, bits, nbits: int):
    """Reshape (B, 2**nbits) so each listed bit gets its own length-2 axis."""
    shape = [buf.shape[0]]
    axes = {}
    prev = nbits
    for b in sorted(bits, reverse=True):
        shape.append(1 << (prev - b - 1))
        axes[b] = len(shape)
        shape.append(2)
        prev = b
    shape.append(1 << prev)
    return buf.reshape(shape), axes


def _index(ndim: int, axes: dict, fixed: dict) -> tuple:
    idx = [slice(None)] * ndim
    for b, v in fixed.items():
        idx[axes[b]] = v
    return tuple(idx)


def apply_block(buf: np.ndarray, gate: Gate, bit_pos: dict[int, int], nbits: int) -> None:
    """Apply ``gate`` in place to each row of ``buf`` (shape (B, 2**nbits)).

    Qubits absent from ``bit_pos`` are non-local predicates the caller has
    already found satisfied.
    """
    if gate.is_diagonal:
        bits = [bit_pos[q] for q in gate.qubits if q in bit_pos]
        if not bits:
            buf *= gate.phase()
            return
        v, axes = _bit_view(buf, bits, nbits)
        v[_index(v.ndim, axes, {b: 1 for b in bits})] *= gate.phase()
        return
    if gate.kind == "SWAP":
        a, b = (bit_pos[q] for q in gate.qubits)
        v, axes = _bit_view(buf, (a, b), nbits)
        i10 = _index(v.ndim, axes, {a: 1, b: 0})
        i01 = _index(v.ndim, axes, {a: 0, b: 1})
        tmp = v[i10].copy()
        v[i10] = v[i01]
        v[i01] = tmp
        return
    t = bit_pos[gate.target]
    ctrl = [bit_pos[q] for q in gate.controls if q in bit_pos]
    v, axes = _bit_view(buf, [t, *ctrl], nbits)
    fixed = {c: 1 for c in ctrl}
    i0 = _index(v.ndim, axes, {**fixed, t: 0})
    i1 = _index(v.ndim, axes, {**fixed, t: 1})
    u = gate.matrix()
    if gate.kind in ("X", "CNOT"):
        tmp = v[i0].copy()
        v[i0] = v[i1]
        v[i1] = tmp
        return
    a0 = v[i0].copy()
    a1 = v[i1]
    v[i0] = u[0, 0] * a0 + u[0, 1] * a1
    v[i1] = u[1, 0] * a0 + u[1, 1] * a1


def _batches(units: list, unit_len: int, batch_amplitudes: int) -> list[list]:
    per = max(1, batch_amplitudes // unit_len)
    return [units[i:i + per] for i in range(0, len(units), per)]


class _Runner:
    def __init__(self, store: SliceStore, config: EngineConfig):
        self.store = store
        self.config = config
        self.pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    def gate_pass(self, gate: Gate, gate_index: int, scale: float) -> list[tuple[int, int]]:
        st = self.store
        plan = plan_gate(gate, st.num_qubits, st.slice_bits)
        units = plan.units
        if scale == 1.0:
            # Slices the gate does not touch stay as they are.
            units = [u for u in units if u[1]]
        batches = _batches(units, 1 << plan.nbits, self.config.batch_amplitudes)
        work = lambda b: self._run_batch(b, plan, gate, gate_index, scale)  # noqa: E731
        if self.pool is None:
            results = [work(b) for b in batches]
        else:
            results = list(self.pool.map(work, batches))
        written = []
        for res in results:
            for sl, nbytes in res:
                st.put(sl)
                written.append((sl.index, nbytes))
        st.refresh_norm()
        return written

    def _run_batch(self, units, plan: _Plan, gate: Gate, gate_index: int, scale: float):
        st = self.store
        L = 1 << st.slice_bits
        k = len(units[0][0])
        buf = np.empty((len(units), k * L), dtype=np.complex128)
        for r, (members, _) in enumerate(units):
            for m, j in enumerate(members):
                try:
                    re, im = st.state.slices[j].planes()
                except CodecDecodeError as exc:
                    raise EngineError(f"decompression failed: {exc}", gate_index, j) from exc
                row = buf[r, m * L:(m + 1) * L]
                row.real = re
                row.imag = im
        if scale != 1.0:
            buf *= scale
        active = [r for r, (_, on) in enumerate(units) if on]
        if len(active) == len(units):
            apply_block(buf, gate, plan.bit_pos, plan.nbits)
        elif active:
            sub = buf[active]
            apply_block(sub, gate, plan.bit_pos, plan.nbits)
            buf[active] = sub
        codec = st.codec
        out = []
        for r, (members, _) in enumerate(units):
            for m, j in enumerate(members):
                out.append(Slice.from_amplitudes(j, buf[r, m * L:(m + 1) * L], codec))
        return out


def _check_initial_norm(store: SliceStore, tol: float) -> None:
    g = store.global_sq_norm
    if not abs(g - 1.0) <= tol:
        raise InvalidArgumentError(f"initial state norm^2 {g!r} is not within {tol} of 1")


def run(circuit: Circuit, config: EngineConfig | None = None, initial=None) -> tuple[StateVector, RunMetrics]:
    """Simulate ``circuit``; returns the final (compressed) state and metrics."""
    config = config or EngineConfig()
    circuit.validate()
    n = circuit.num_qubits
    s = config.resolved_slice_bits(n)
    codec = config.codec if config.compression_enabled else None
    tol = config.norm_drift_tolerance
    if initial is not None:
        width = initial.num_qubits if hasattr(initial, "num_qubits") else (
            np.asarray(initial).size.bit_length() - 1)
        if width != n:
            raise InvalidArgumentError(f"initial state has {width} qubits, circuit has {n}")

    in_bytes = BYTES_PER_AMPLITUDE << s
    ratio_log: list[tuple[int, int, int, int]] = []
    all_ratios: list[float] = []

    t0 = time.perf_counter()
    if initial is None:
        from .statevec import init_basis_state

        initial = init_basis_state(n, 0, s)
    store = SliceStore.build(
        initial, s, codec, log_entry=lambda j, nb: _log(ratio_log, all_ratios, -1, j, in_bytes, nb, config))
    _check_initial_norm(store, tol)
    peak = store.stored_bytes

    per_gate_min: list[float] = []
    per_gate_mean: list[float] = []
    gate_seconds: list[float] = []
    runner = _Runner(store, config)
    try:
        for gi, gate in enumerate(circuit.gates):
            g0 = time.perf_counter()
            norm = store.global_sq_norm
            if not abs(norm - 1.0) <= 10 * tol:
                raise NumericDegradationError(
                    f"gate {gi}: norm^2 {norm!r} drifted beyond {10 * tol} of 1")
            scale = 1.0 / math.sqrt(norm) if config.normalizes_before(gi) else 1.0
            written = runner.gate_pass(gate, gi, scale)
            if codec is not None and written:
                ratios = [_log(ratio_log, all_ratios, gi, j, in_bytes, nb, config) for j, nb in written]
                per_gate_min.append(min(ratios))
                per_gate_mean.append(sum(ratios) / len(ratios))
            else:
                per_gate_min.append(float("nan") if codec is not None else 1.0)
                per_gate_mean.append(per_gate_min[-1])
            peak = max(peak, store.stored_bytes)
            gate_seconds.append(time.perf_counter() - g0)
    finally:
        runner.close()
    wall = time.perf_counter() - t0

    final = store.global_sq_norm
    if not abs(final - 1.0) <= tol:
        raise NumericDegradationError(f"final norm^2 {final!r} outside tolerance {tol}")
    if codec is None:
        lo = mean = 1.0
    else:
        lo = min(all_ratios)
        mean = sum(all_ratios) / len(all_ratios)
    metrics = RunMetrics(
        num_qubits=n,
        gate_count=len(circuit.gates),
        slice_bits=s,
        compression_enabled=codec is not None,
        min_compression_ratio=lo,
        mean_compression_ratio=mean,
        per_gate_min_ratio=per_gate_min,
        per_gate_mean_ratio=per_gate_mean,
        gate_seconds=gate_seconds,
        wall_seconds=wall,
        peak_compressed_bytes=peak,
        dense_bytes=dense_bytes(n),
        final_norm=final,
        ratio_log=ratio_log if config.keep_ratio_log else None,
    )
    log.debug("ran %s: %d gates in %.3fs, min ratio %.3g", circuit.name, len(circuit.gates), wall, lo)
    return store.state, metrics


def _log(ratio_log, all_ratios, gi, j, in_bytes, nbytes, config) -> float:
    r = in_bytes / nbytes
    all_ratios.append(r)
    if config.keep_ratio_log:
        ratio_log.append((gi, j, in_bytes, nbytes))
    return r


def gather_state(store, max_qubits: int = DEFAULT_GATHER_MAX_QUBITS) -> StateVector:
    """Decompress every slice into a dense state in global index order."""
    state = store.state if isinstance(store, SliceStore) else store
    if state.num_qubits > max_qubits:
        raise CapacityError(f"{state.num_qubits} qubits exceeds gather guard of {max_qubits}")
    dense = StateVector(state.num_qubits, state.slice_bits)
    for sl in state.slices:
        re, im = sl.planes()
        dense.slices.append(Slice(sl.index, DensePlanes(re.copy(), im.copy()),
                                  float(np.dot(re, re) + np.dot(im, im))))
    return dense


def measure_overhead(circuit: Circuit, config: EngineConfig | None = None, initial=None) -> RunMetrics:
    """Run with the given config, then with compression off; report the time ratio."""
    config = config or EngineConfig()
    _, metrics = run(circuit, config, initial)
    _, base = run(circuit, replace(config, compression_enabled=False), initial)
    metrics.baseline_wall_seconds = base.wall_seconds
    metrics.overhead_factor = metrics.wall_seconds / base.wall_seconds
    return metrics
