"""Dense single-array simulator used as the correctness oracle.

Gates are applied by explicit index arithmetic over the full amplitude
array. No compression and no renormalization happen here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import Circuit, Gate
from .errors import CapacityError, InvalidArgumentError
from .statevec import read_dump, write_dump

DEFAULT_MAX_QUBITS = 24


@dataclass
class DenseState:
    num_qubits: int
    amplitudes: np.ndarray

    @classmethod
    def basis(cls, num_qubits: int, index: int = 0) -> DenseState:
        if not 0 <= index < (1 << num_qubits):
            raise InvalidArgumentError("basis index out of range")
        a = np.zeros(1 << num_qubits, dtype=np.complex128)
        a[index] = 1.0
        return cls(num_qubits, a)

    @classmethod
    def from_array(cls, amps) -> DenseState:
        a = np.array(amps, dtype=np.complex128).ravel()
        return cls(a.shape[0].bit_length() - 1, a)

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            write_dump(self.amplitudes, fh)

    @classmethod
    def load(cls, path) -> DenseState:
        with open(path, "rb") as fh:
            return cls.from_array(read_dump(fh))


def _mask(qubits) -> int:
    m = 0
    for q in qubits:
        m |= 1 << q
    return m


def apply_gate(psi: np.ndarray, gate: Gate) -> None:
    """Apply one gate in place to a full amplitude array."""
    idx = np.arange(psi.shape[0], dtype=np.int64)
    if gate.is_diagonal:
        m = _mask(gate.qubits)
        sel = idx[(idx & m) == m]
        psi[sel] *= gate.phase()
        return
    if gate.kind == "SWAP":
        a, b = gate.qubits
        sel = idx[((idx >> a) & 1 == 1) & ((idx >> b) & 1 == 0)]
        partner = sel ^ ((1 << a) | (1 << b))
        psi[sel], psi[partner] = psi[partner].copy(), psi[sel].copy()
        return
    t = gate.target
    cm = _mask(gate.controls)
    i0 = idx[((idx >> t) & 1 == 0) & ((idx & cm) == cm)]
    i1 = i0 | (1 << t)
    u = gate.matrix()
    a0 = psi[i0].copy()
    a1 = psi[i1].copy()
    psi[i0] = u[0, 0] * a0 + u[0, 1] * a1
    psi[i1] = u[1, 0] * a0 + u[1, 1] * a1


def ref_run(circuit: Circuit, initial: DenseState | None = None, max_qubits: int = DEFAULT_MAX_QUBITS) -> DenseState:
    n = circuit.num_qubits
    if n > max_qubits:
        raise CapacityError(f"{n} qubits exceeds reference guard of {max_qubits}")
    if initial is None:
        initial = DenseState.basis(n)
    if initial.num_qubits != n:
        raise InvalidArgumentError("initial state width does not match circuit")
    circuit.validate()
    psi = initial.amplitudes.astype(np.complex128, copy=True)
    for g in circuit.gates:
        apply_gate(psi, g)
    return DenseState(n, psi)


def success_probability(state, basis_index: int) -> float:
    amps = getattr(state, "amplitudes", None)
    if amps is None:
        amps = state.to_array() if hasattr(state, "to_array") else np.asarray(state)
    if not 0 <= basis_index < amps.shape[0]:
        raise InvalidArgumentError("basis index out of range")
    a = amps[basis_index]
    return float(a.real * a.real + a.imag * a.imag)
