import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lossyqsim.codec import CodecConfig
from lossyqsim.errors import CodecDecodeError, InvalidArgumentError
from lossyqsim.statevec import (
    StateVector,
    dense_bytes,
    fidelity,
    global_index,
    global_sq_norm,
    init_basis_state,
    inner_product,
    locate,
    read_dump,
    write_dump,
)

R = 1 / math.sqrt(2)


def test_single_qubit_zero_state():
    st0 = init_basis_state(1, 0, 0)
    assert st0.num_slices == 2
    assert np.array_equal(st0.to_array(), [1, 0])


def test_basis_state_lands_in_expected_slice():
    st5 = init_basis_state(3, 5, 1)
    assert locate(5, 1) == (2, 1)
    re, _ = st5.slices[2].planes()
    assert re.tolist() == [0.0, 1.0]
    arr = st5.to_array()
    assert arr[5] == 1 and np.count_nonzero(arr) == 1


@pytest.mark.parametrize("n,k,s", [(2, 4, 1), (2, -1, 1), (3, 0, 4), (3, 0, -1), (0, 0, 0)])
def test_init_rejects_bad_arguments(n, k, s):
    with pytest.raises(InvalidArgumentError):
        init_basis_state(n, k, s)


@given(st.integers(1, 20).flatmap(lambda n: st.tuples(
    st.just(n), st.integers(0, (1 << n) - 1), st.integers(0, n))))
def test_locate_global_index_inverse(args):
    n, g, s = args
    j, off = locate(g, s)
    assert 0 <= off < (1 << s) and j < (1 << (n - s))
    assert global_index(j, off, s) == g


@pytest.mark.parametrize("amps", [[1, 0], [0.6, 0.8j], [0.5, 0.5, 0.5, 0.5]])
def test_global_sq_norm_examples(amps):
    assert global_sq_norm(StateVector.from_array(amps)) == pytest.approx(1.0, abs=1e-15)


def test_global_sq_norm_propagates_corruption():
    state = StateVector.from_array(np.full(64, 0.125), 6, CodecConfig.lossless())
    blk = state.slices[0].payload.re
    object.__setattr__(blk, "payload", blk.payload[:-3])
    with pytest.raises(CodecDecodeError):
        global_sq_norm(state)


def test_inner_product_examples():
    zero, one = init_basis_state(1, 0), init_basis_state(1, 1)
    assert inner_product(zero, zero) == 1 + 0j
    assert inner_product(zero, one) == 0j
    assert abs(inner_product([R, R], [R, -R])) < 1e-16


def test_inner_product_conjugates_first_argument():
    assert inner_product([1j, 0], [1, 0]) == -1j


def test_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        inner_product(init_basis_state(1), init_basis_state(2))
    with pytest.raises(InvalidArgumentError):
        fidelity(init_basis_state(1), init_basis_state(2))


def test_fidelity_examples():
    psi = np.random.default_rng(0).standard_normal(32) + 1j * np.random.default_rng(1).standard_normal(32)
    psi /= np.linalg.norm(psi)
    assert fidelity(psi, psi) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(init_basis_state(1, 0), init_basis_state(1, 1)) == 0.0
    assert fidelity(init_basis_state(1, 0), [R, R]) == pytest.approx(0.5)


def test_fidelity_ignores_global_phase():
    psi = np.array([0.6, 0.8j])
    assert fidelity(psi, np.exp(0.7j) * psi) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("n", [1, 5, 20, 30, 45])
def test_dense_bytes(n):
    assert dense_bytes(n) == 2 ** (n + 4)


def test_compressed_slices_report_stored_bytes():
    state = init_basis_state(12, 7, 8, CodecConfig())
    assert state.compressed
    assert 0 < state.stored_bytes < state.dense_bytes
    assert state.amplitude(7) == 1
    dense = init_basis_state(12, 7, 8)
    assert dense.stored_bytes == dense.dense_bytes


def test_sq_norm_matches_reconstruction():
    amps = np.random.default_rng(2).standard_normal(256) * (1 + 0j)
    state = StateVector.from_array(amps / np.linalg.norm(amps), 5, CodecConfig.relative(0.05))
    total = sum(sl.sq_norm for sl in state.slices)
    assert total == pytest.approx(global_sq_norm(state), rel=1e-14)


def test_dump_roundtrip():
    amps = np.random.default_rng(3).standard_normal(16) + 1j
    buf = io.BytesIO()
    write_dump(amps, buf)
    raw = buf.getvalue()
    assert raw[:4] == b"QSV1" and len(raw) == 16 + 16 * 16
    assert np.array_equal(read_dump(io.BytesIO(raw)), amps)
    with pytest.raises(CodecDecodeError):
        read_dump(io.BytesIO(raw[:-1]))
    with pytest.raises(CodecDecodeError):
        read_dump(io.BytesIO(b"NOPE" + raw[4:]))


def test_from_array_rejects_non_power_of_two():
    with pytest.raises(InvalidArgumentError):
        StateVector.from_array([1, 0, 0])
