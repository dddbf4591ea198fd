import math
import os
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import lossyqsim.statevec as sv
from lossyqsim.circuits import CNOT, CZ, Circuit, Gate, H, X, build_grover, build_qft
from lossyqsim.codec import CodecConfig
from lossyqsim.engine import EngineConfig, gather_state, measure_overhead, partner, plan_gate, run
from lossyqsim.errors import (
    CapacityError,
    CodecDecodeError,
    EngineError,
    InvalidArgumentError,
    NumericDegradationError,
)
from lossyqsim.reference import DenseState, ref_run, success_probability
from lossyqsim.statevec import StateVector, fidelity, global_sq_norm, init_basis_state

OFF = EngineConfig(compression_enabled=False, norm_every=0)
LOSSLESS = EngineConfig(codec=CodecConfig.lossless())
MAX_WORKERS = os.cpu_count() or 2

# Measured with this build (range-relative 1%, QFT16 on basis int(0.618...*2^16)).
QFT16_FIDELITY = 0.9904


def random_circuit(n, depth, seed):
    rng = np.random.default_rng(seed)
    gates = []
    for _ in range(depth):
        kind = rng.choice(["H", "X", "Y", "Z", "S", "T", "P", "CP", "CNOT", "CZ", "SWAP", "MCZ"])
        qs = [int(q) for q in rng.permutation(n)]
        if kind in ("H", "X", "Y", "Z", "S", "T"):
            gates.append(Gate(kind, (qs[0],)))
        elif kind == "P":
            gates.append(Gate("P", (qs[0],), float(rng.uniform(-4, 4))))
        elif kind == "CP":
            gates.append(Gate("CP", (qs[0], qs[1]), float(rng.uniform(-4, 4))))
        elif kind == "MCZ":
            gates.append(Gate("MCZ", tuple(qs[: int(rng.integers(1, n + 1))])))
        else:
            gates.append(Gate(str(kind), (qs[0], qs[1])))
    return Circuit(n, gates)


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return psi / np.linalg.norm(psi)


@pytest.mark.parametrize("n", [2, 3, 5, 7])
@pytest.mark.parametrize("workers", [1, 3])
def test_uncompressed_matches_reference(n, workers):
    c = random_circuit(n, 60, seed=n)
    psi = random_state(n, n + 100)
    expected = ref_run(c, DenseState.from_array(psi)).amplitudes
    for s in range(n + 1):
        cfg = EngineConfig(slice_bits=s, compression_enabled=False, norm_every=0, workers=workers,
                           batch_amplitudes=8)
        state, _ = run(c, cfg, psi)
        assert np.max(np.abs(state.to_array() - expected)) <= 1e-12


@pytest.mark.parametrize("s", [0, 2, 6])
def test_lossless_codec_matches_reference(s):
    c = random_circuit(6, 50, seed=11)
    psi = random_state(6, 12)
    expected = ref_run(c, DenseState.from_array(psi)).amplitudes
    state, m = run(c, EngineConfig(slice_bits=s, codec=CodecConfig.lossless(), norm_every=0), psi)
    assert state.compressed
    assert np.max(np.abs(state.to_array() - expected)) <= 1e-12


def test_hadamard_on_single_amplitude_slices():
    state, _ = run(Circuit(1, [H(0)]), EngineConfig(slice_bits=0, compression_enabled=False))
    assert np.allclose(state.to_array(), [1 / math.sqrt(2)] * 2, atol=1e-15)


@pytest.mark.parametrize("t", [3, 4, 5])
def test_nonlocal_x_swaps_partner_slices(t):
    n, s = 6, 3
    psi = random_state(n, t)
    before = StateVector.from_array(psi, s)
    after, _ = run(Circuit(n, [X(t)]), EngineConfig(slice_bits=s, codec=CodecConfig.lossless(), norm_every=0), psi)
    for j in range(1 << (n - s)):
        assert np.array_equal(after.slices[j].amplitudes(), before.slices[partner(j, t, s)].amplitudes())


@pytest.mark.parametrize("c,t", [(0, 1), (0, 5), (4, 5)])
def test_cz_only_touches_both_set(c, t):
    n = 6
    psi = random_state(n, 1)
    state, _ = run(Circuit(n, [CZ(c, t)]), EngineConfig(slice_bits=3, codec=CodecConfig.lossless(), norm_every=0), psi)
    out = state.to_array()
    idx = np.arange(1 << n)
    both = ((idx >> c) & 1) & ((idx >> t) & 1) == 1
    assert np.array_equal(out[both], -psi[both])
    assert out[~both].tobytes() == psi[~both].tobytes()


@given(st.integers(1, 16).flatmap(lambda n: st.tuples(
    st.just(n), st.integers(0, n - 1)).flatmap(lambda p: st.tuples(
        st.just(p[0]), st.just(p[1]), st.integers(p[1], p[0] - 1),
        st.integers(0, (1 << (p[0] - p[1])) - 1)))))
@settings(max_examples=300)
def test_partner_algebra(args):
    n, s, t, j = args
    p = partner(j, t, s)
    assert partner(p, t, s) == j and p != j
    # The two slices hold exactly the global indices that differ only in bit t.
    idx_j = set(range(j << s, (j + 1) << s))
    idx_p = set(range(p << s, (p + 1) << s))
    assert {g ^ (1 << t) for g in idx_j} == idx_p


def test_partner_rejects_local_qubits():
    with pytest.raises(InvalidArgumentError):
        partner(0, 2, 3)


@pytest.mark.parametrize("gate,units,group", [
    (H(5), 4, (5,)),  # 8 slices paired on bit 5
    (H(1), 8, ()),
    (CZ(4, 5), 8, ()),  # diagonal: never paired
    (Gate("SWAP", (3, 5)), 2, (3, 5)),
    (CNOT(5, 4), 4, (4,)),
])
def test_plan_groups(gate, units, group):
    plan = plan_gate(gate, 6, 3)
    assert len(plan.units) == units
    assert plan.group_qubits == group
    covered = sorted(j for members, _ in plan.units for j in members)
    assert covered == list(range(8))


def test_unitarity_without_normalization():
    c = random_circuit(8, 200, seed=4)
    _, m = run(c, EngineConfig(slice_bits=3, compression_enabled=False, norm_every=0), random_state(8, 5))
    assert abs(m.final_norm - 1.0) <= 1e-10


@pytest.mark.parametrize("compression", [False, True])
def test_norm_restoration(compression):
    psi = random_state(5, 2) * math.sqrt(1.015)
    cfg = EngineConfig(slice_bits=2, compression_enabled=compression, codec=CodecConfig.lossless())
    state, _ = run(Circuit(5, [H(4)]), cfg, psi)
    assert abs(global_sq_norm(gather_state(state)) - 1.0) <= 1e-9


def test_norm_every_k():
    cfg = EngineConfig(norm_every=3)
    assert [cfg.normalizes_before(i) for i in range(6)] == [True, False, False, True, False, False]
    assert not EngineConfig(norm_every=0).normalizes_before(0)


def test_lossy_determinism_across_workers():
    c = build_qft(10)
    blobs = []
    for w in (1, 2, MAX_WORKERS):
        cfg = EngineConfig(slice_bits=4, workers=w, batch_amplitudes=64)
        state, _ = run(c, cfg, init_basis_state(10, 377, 4))
        blobs.append(b"".join(sl.payload.re.to_bytes() + sl.payload.im.to_bytes() for sl in state.slices))
    assert blobs[0] == blobs[1] == blobs[2]


def test_ratio_accounting_matches_shadow_log():
    cfg = EngineConfig(slice_bits=5, keep_ratio_log=True)
    _, m = run(build_qft(9), cfg, init_basis_state(9, 100, 5))
    ratios = [i / o for _, _, i, o in m.ratio_log]
    assert m.min_compression_ratio == min(ratios)
    assert m.mean_compression_ratio == pytest.approx(statistics.fmean(ratios))
    assert m.min_compression_ratio <= m.mean_compression_ratio
    # Initial compression is logged with gate index -1, one entry per slice.
    assert sum(1 for g, *_ in m.ratio_log if g == -1) == 16
    assert len(m.per_gate_min_ratio) == len(m.gate_seconds) == m.gate_count == 49


def test_metrics_fields_and_exports():
    _, m = run(build_qft(6), EngineConfig(slice_bits=3), init_basis_state(6, 9, 3))
    assert m.dense_bytes == 2 ** 10
    assert m.baseline_wall_seconds is None and m.overhead_factor is None
    d = m.to_dict()
    assert "ratio_log" not in d and d["num_qubits"] == 6
    lines = m.to_csv().splitlines()
    assert lines[0] == "gate_index,min_ratio,mean_ratio,seconds"
    assert len(lines) == 1 + m.gate_count


def test_gather_after_zero_gates_is_exact():
    psi = random_state(6, 8)
    state, _ = run(Circuit(6), LOSSLESS, psi)
    assert gather_state(state).to_array().tobytes() == psi.tobytes()


def test_gather_qft12_lossless_matches_reference():
    k = 1234
    state, _ = run(build_qft(12), EngineConfig(slice_bits=8, codec=CodecConfig.lossless()),
                   init_basis_state(12, k, 8))
    ref = ref_run(build_qft(12), DenseState.basis(12, k))
    assert np.max(np.abs(gather_state(state).to_array() - ref.amplitudes)) <= 1e-12


def test_gather_guard():
    state = init_basis_state(6)
    with pytest.raises(CapacityError):
        gather_state(state, max_qubits=5)


def test_qft16_lossy_fidelity_regression():
    n = 16
    k = int((math.sqrt(5) - 1) / 2 * (1 << n))
    state, m = run(build_qft(n), EngineConfig(), init_basis_state(n, k))
    f = fidelity(state, ref_run(build_qft(n), DenseState.basis(n, k)).amplitudes)
    assert f >= 0.95
    assert f == pytest.approx(QFT16_FIDELITY, abs=0.01)


def test_gather_grover14_success_probability():
    # Lossy 1% range-relative run compared with the exact oracle. The drift
    # guard is switched off so the measurement can complete.
    n, marked = 14, 9000
    c = build_grover(n, marked)
    state, _ = run(c, EngineConfig(norm_drift_tolerance=1e9))
    p = success_probability(gather_state(state), marked)
    p_ref = success_probability(ref_run(c), marked)
    assert abs(p - p_ref) <= 0.05, f"engine {p:.6g} vs reference {p_ref:.6g}"


def test_overhead_positive_and_reported():
    m = measure_overhead(build_qft(10), EngineConfig(slice_bits=6), init_basis_state(10, 3, 6))
    assert m.baseline_wall_seconds is not None
    assert m.overhead_factor == pytest.approx(m.wall_seconds / m.baseline_wall_seconds)
    assert m.overhead_factor > 0


def test_overhead_self_comparison_near_one():
    c = build_qft(14)
    factors = [measure_overhead(c, EngineConfig(compression_enabled=False), init_basis_state(14, 5)).overhead_factor
               for _ in range(3)]
    assert 0.7 <= statistics.median(factors) <= 1.3


def test_initial_state_checks():
    with pytest.raises(InvalidArgumentError):
        run(build_qft(3), OFF, init_basis_state(4))
    with pytest.raises(InvalidArgumentError):
        run(build_qft(2), EngineConfig(), [1, 1, 0, 0])
    with pytest.raises(InvalidArgumentError):
        run(build_qft(3), EngineConfig(slice_bits=4))
    with pytest.raises(InvalidArgumentError):
        EngineConfig(workers=0)


def test_drift_beyond_guard_raises():
    # A coarse codec without renormalization lets the norm wander far off.
    cfg = EngineConfig(codec=CodecConfig.relative(0.5), norm_every=0, slice_bits=4)
    with pytest.raises(NumericDegradationError):
        run(build_grover(8, 3), cfg)


def test_decode_failure_reports_gate_and_slice(monkeypatch):
    real = sv.decompress_plane
    calls = {"n": 0}

    def flaky(block):
        calls["n"] += 1
        if calls["n"] > 40:
            raise CodecDecodeError("injected")
        return real(block)

    monkeypatch.setattr(sv, "decompress_plane", flaky)
    with pytest.raises(EngineError) as info:
        run(build_qft(6), EngineConfig(slice_bits=3), init_basis_state(6, 1, 3))
    assert info.value.gate_index is not None and info.value.slice_index is not None
    assert isinstance(info.value.__cause__, CodecDecodeError)
