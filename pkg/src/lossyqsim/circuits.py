"""Gates, circuits, the QFT and Grover builders, and a line-oriented text format.

Conventions: qubit 0 is the least-significant bit of a basis index, and
``CPhase(theta)`` multiplies the |11> component by ``exp(i*theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CircuitParseError, InvalidArgumentError

_SQ2 = 1.0 / math.sqrt(2.0)

ONE_QUBIT = ("H", "X", "Y", "Z", "S", "T")
DIAGONAL = frozenset({"Z", "S", "T", "P", "CP", "CZ", "MCZ"})


@dataclass(frozen=True)
class Gate:
    """One gate. ``qubits`` lists controls first and the target last.

    SWAP keeps both of its qubits in ``qubits`` and has no controls.
    """

    kind: str
    qubits: tuple[int, ...]
    theta: float | None = None

    @property
    def target(self) -> int:
        return self.qubits[-1]

    @property
    def controls(self) -> tuple[int, ...]:
        return () if self.kind == "SWAP" else self.qubits[:-1]

    @property
    def control(self) -> int | None:
        return self.controls[0] if len(self.controls) == 1 else None

    @property
    def is_diagonal(self) -> bool:
        return self.kind in DIAGONAL

    def matrix(self) -> np.ndarray:
        """The 2x2 unitary applied to the target (4x4 for SWAP)."""
        k = self.kind
        if k == "H":
            return np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=np.complex128)
        if k in ("X", "CNOT"):
            return np.array([[0, 1], [1, 0]], dtype=np.complex128)
        if k == "Y":
            return np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
        if k == "SWAP":
            return np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)
        return np.diag([1.0, self.phase()]).astype(np.complex128)

    def phase(self) -> complex:
        """Factor applied where every qubit of a diagonal gate is 1."""
        k = self.kind
        if k in ("Z", "CZ", "MCZ"):
            return -1.0 + 0j
        if k == "S":
            return 1j
        if k == "T":
            return complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
        if k in ("P", "CP"):
            return complex(math.cos(self.theta), math.sin(self.theta))
        raise ValueError(f"{k} is not diagonal")


def H(q: int) -> Gate:
    return Gate("H", (q,))


def X(q: int) -> Gate:
    return Gate("X", (q,))


def Y(q: int) -> Gate:
    return Gate("Y", (q,))


def Z(q: int) -> Gate:
    return Gate("Z", (q,))


def S(q: int) -> Gate:
    return Gate("S", (q,))


def T(q: int) -> Gate:
    return Gate("T", (q,))


def Phase(theta: float, q: int) -> Gate:
    return Gate("P", (q,), float(theta))


def CPhase(theta: float, control: int, target: int) -> Gate:
    return Gate("CP", (control, target), float(theta))


def CNOT(control: int, target: int) -> Gate:
    return Gate("CNOT", (control, target))


def CZ(control: int, target: int) -> Gate:
    return Gate("CZ", (control, target))


def SWAP(a: int, b: int) -> Gate:
    return Gate("SWAP", (a, b))


def MCZ(*qubits: int) -> Gate:
    return Gate("MCZ", tuple(qubits))


_ARITY = {"H": 1, "X": 1, "Y": 1, "Z": 1, "S": 1, "T": 1, "P": 1, "CP": 2, "CNOT": 2, "CZ": 2, "SWAP": 2}


@dataclass
class Circuit:
    num_qubits: int
    gates: list[Gate] = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        if self.num_qubits < 1:
            raise InvalidArgumentError("a circuit needs at least one qubit")

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def append(self, gate: Gate) -> Circuit:
        self.gates.append(gate)
        return self

    def validate(self) -> None:
        for pos, g in enumerate(self.gates):
            check_gate(g, self.num_qubits, pos)


def check_gate(g: Gate, num_qubits: int, pos: int = 0) -> None:
    if g.kind == "MCZ":
        if len(g.qubits) < 1:
            raise InvalidArgumentError(f"gate {pos}: MCZ needs at least one qubit")
    elif g.kind not in _ARITY:
        raise InvalidArgumentError(f"gate {pos}: unknown kind {g.kind!r}")
    elif len(g.qubits) != _ARITY[g.kind]:
        raise InvalidArgumentError(f"gate {pos}: {g.kind} takes {_ARITY[g.kind]} qubit(s)")
    if g.kind in ("P", "CP") and (g.theta is None or not math.isfinite(g.theta)):
        raise InvalidArgumentError(f"gate {pos}: {g.kind} needs a finite angle")
    if len(set(g.qubits)) != len(g.qubits):
        raise InvalidArgumentError(f"gate {pos}: repeated qubit in {g.qubits}")
    for q in g.qubits:
        if not 0 <= q < num_qubits:
            raise InvalidArgumentError(f"gate {pos}: qubit {q} outside width {num_qubits}")


def gate_count(circuit: Circuit) -> int:
    return len(circuit.gates)


def build_qft(n: int, include_swaps: bool = True) -> Circuit:
    """Textbook QFT: H on each qubit from high to low, then controlled phases
    from every lower qubit, optionally followed by the bit-reversal swaps.
    """
    if n < 1:
        raise InvalidArgumentError("QFT needs n >= 1")
    c = Circuit(n, name=f"qft{n}")
    for i in range(n - 1, -1, -1):
        c.append(H(i))
        for j in range(i - 1, -1, -1):
            c.append(CPhase(math.pi / (1 << (i - j)), j, i))
    if include_swaps:
        for i in range(n // 2):
            c.append(SWAP(i, n - 1 - i))
    return c


def grover_optimal_iterations(n: int) -> int:
    if n < 2:
        raise InvalidArgumentError("Grover needs n >= 2")
    return max(1, math.floor(math.pi / 4 * math.sqrt(2 ** n)))


def grover_oracle(n: int, marked: int) -> list[Gate]:
    """Phase oracle: flips the sign of |marked> via X-conjugated MCZ."""
    flips = [X(q) for q in range(n) if not (marked >> q) & 1]
    return flips + [MCZ(*range(n))] + flips


def grover_diffusion(n: int) -> list[Gate]:
    qs = range(n)
    return (
        [H(q) for q in qs]
        + [X(q) for q in qs]
        + [MCZ(*qs)]
        + [X(q) for q in qs]
        + [H(q) for q in qs]
    )


def build_grover(n: int, marked: int, iterations: int | None = None) -> Circuit:
    if n < 2:
        raise InvalidArgumentError("Grover needs n >= 2")
    if not 0 <= marked < (1 << n):
        raise InvalidArgumentError(f"marked index {marked} outside [0, 2^{n})")
    if iterations is None:
        iterations = grover_optimal_iterations(n)
    if iterations < 1:
        raise InvalidArgumentError("Grover needs at least one iteration")
    c = Circuit(n, [H(q) for q in range(n)], name=f"grover{n}")
    oracle, diffusion = grover_oracle(n, marked), grover_diffusion(n)
    for _ in range(iterations):
        c.gates.extend(oracle)
        c.gates.extend(diffusion)
    return c


_TEXT_NAME = {"H": "h", "X": "x", "Y": "y", "Z": "z", "S": "s", "T": "t", "P": "p",
              "CP": "cp", "CNOT": "cx", "CZ": "cz", "SWAP": "swap", "MCZ": "mcz"}
_TEXT_KIND = {v: k for k, v in _TEXT_NAME.items()}


def render(circuit: Circuit) -> str:
    """Inverse of :func:`parse_circuit`. Angles use repr() so they round-trip."""
    lines = [f"qubits {circuit.num_qubits}"]
    for g in circuit.gates:
        parts = [_TEXT_NAME[g.kind]]
        if g.theta is not None:
            parts.append(repr(float(g.theta)))
        parts.extend(str(q) for q in g.qubits)
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def parse_circuit(text: str, name: str = "") -> Circuit:
    circuit = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        op = tok[0].lower()
        if circuit is None:
            if op != "qubits" or len(tok) != 2:
                raise CircuitParseError("expected 'qubits <n>' header", lineno)
            n = _parse_int(tok[1], lineno)
            if n < 1:
                raise CircuitParseError("qubit count must be >= 1", lineno)
            circuit = Circuit(n, name=name)
            continue
        if op == "qubits":
            raise CircuitParseError("duplicate 'qubits' header", lineno)
        if op not in _TEXT_KIND:
            raise CircuitParseError(f"unknown gate {tok[0]!r}", lineno)
        kind = _TEXT_KIND[op]
        args = tok[1:]
        theta = None
        if kind in ("P", "CP"):
            if not args:
                raise CircuitParseError(f"{op} needs an angle", lineno)
            try:
                theta = float(args[0])
            except ValueError:
                raise CircuitParseError(f"malformed angle {args[0]!r}", lineno) from None
            if not math.isfinite(theta):
                raise CircuitParseError(f"non-finite angle {args[0]!r}", lineno)
            args = args[1:]
        if kind == "MCZ":
            if not args:
                raise CircuitParseError("mcz needs at least one qubit", lineno)
        elif len(args) != _ARITY[kind]:
            raise CircuitParseError(f"{op} takes {_ARITY[kind]} qubit(s), got {len(args)}", lineno)
        qubits = tuple(_parse_int(a, lineno) for a in args)
        for q in qubits:
            if not 0 <= q < circuit.num_qubits:
                raise CircuitParseError(f"qubit {q} outside declared width {circuit.num_qubits}", lineno)
        if len(set(qubits)) != len(qubits):
            raise CircuitParseError("repeated qubit index", lineno)
        circuit.append(Gate(kind, qubits, theta))
    if circuit is None:
        raise CircuitParseError("missing 'qubits <n>' header", 1)
    return circuit


def _parse_int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise CircuitParseError(f"malformed integer {tok!r}", lineno) from None
