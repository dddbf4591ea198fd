"""Sliced state vectors, norms, inner products and fidelity.

An n-qubit state holds 2**n complex amplitudes split into 2**(n - s)
contiguous slices of 2**s amplitudes each. Global index ``g`` lives in slice
``g >> s`` at offset ``g & (2**s - 1)``. Every slice is stored as two real
planes (real parts, imaginary parts), either dense or codec-compressed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Union

import numpy as np

from .codec import CodecConfig, CompressedBlock, decompress_plane, encode_plane
from .errors import CodecDecodeError, InvalidArgumentError

BYTES_PER_AMPLITUDE = 16
DEFAULT_MAX_SLICE_BITS = 20

DUMP_MAGIC = b"QSV1"
# magic, n, reserved, then 4 pad bytes to reach a 16-byte header.
_DUMP_HEADER = struct.Struct("<4sII4x")


def dense_bytes(num_qubits: int) -> int:
    """Uncompressed footprint of an n-qubit state: 2**(n + 4) bytes."""
    return 1 << (num_qubits + 4)


def default_slice_bits(num_qubits: int) -> int:
    return min(num_qubits, DEFAULT_MAX_SLICE_BITS)


def locate(index: int, slice_bits: int) -> tuple[int, int]:
    """Map a global amplitude index to (slice index, local offset)."""
    return index >> slice_bits, index & ((1 << slice_bits) - 1)


def global_index(slice_index: int, offset: int, slice_bits: int) -> int:
    return (slice_index << slice_bits) | offset


@dataclass
class DensePlanes:
    re: np.ndarray
    im: np.ndarray

    @property
    def nbytes(self) -> int:
        return self.re.nbytes + self.im.nbytes


@dataclass
class CompressedPlanes:
    re: CompressedBlock
    im: CompressedBlock

    @property
    def nbytes(self) -> int:
        return self.re.nbytes + self.im.nbytes


Payload = Union[DensePlanes, CompressedPlanes]


@dataclass
class Slice:
    index: int
    payload: Payload
    sq_norm: float = 0.0

    @property
    def compressed(self) -> bool:
        return isinstance(self.payload, CompressedPlanes)

    def planes(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense (re, im) planes, decompressing if needed."""
        p = self.payload
        if isinstance(p, DensePlanes):
            return p.re, p.im
        return decompress_plane(p.re), decompress_plane(p.im)

    def amplitudes(self) -> np.ndarray:
        re, im = self.planes()
        out = np.empty(re.shape[0], dtype=np.complex128)
        out.real = re
        out.imag = im
        return out

    @classmethod
    def from_amplitudes(cls, index: int, amps: np.ndarray, codec: CodecConfig | None = None) -> tuple[Slice, int]:
        """Build a slice; with a codec config the planes are compressed.

        Returns the slice and the number of compressed bytes (0 when dense).
        ``sq_norm`` is computed from the values that will actually be read
        back, so it stays exact under lossy compression.
        """
        re = np.array(amps.real, dtype=np.float64)
        im = np.array(amps.imag, dtype=np.float64)
        if codec is None:
            sq = float(np.dot(re, re) + np.dot(im, im))
            return cls(index, DensePlanes(re, im), sq), 0
        bre, _, rre = encode_plane(re, codec)
        bim, _, rim = encode_plane(im, codec)
        sq = float(np.dot(rre, rre) + np.dot(rim, rim))
        return cls(index, CompressedPlanes(bre, bim), sq), bre.nbytes + bim.nbytes


@dataclass
class StateVector:
    num_qubits: int
    slice_bits: int
    slices: list[Slice] = field(default_factory=list)

    def __post_init__(self):
        if self.num_qubits < 1:
            raise InvalidArgumentError("num_qubits must be >= 1")
        if not 0 <= self.slice_bits <= self.num_qubits:
            raise InvalidArgumentError("slice_bits must lie in [0, num_qubits]")

    @property
    def num_slices(self) -> int:
        return 1 << (self.num_qubits - self.slice_bits)

    @property
    def slice_len(self) -> int:
        return 1 << self.slice_bits

    @property
    def dense_bytes(self) -> int:
        return dense_bytes(self.num_qubits)

    @property
    def stored_bytes(self) -> int:
        return sum(s.payload.nbytes for s in self.slices)

    @property
    def compressed(self) -> bool:
        return any(s.compressed for s in self.slices)

    @classmethod
    def from_array(cls, amplitudes, slice_bits: int | None = None, codec: CodecConfig | None = None) -> StateVector:
        amps = np.asarray(amplitudes, dtype=np.complex128).ravel()
        size = amps.shape[0]
        n = size.bit_length() - 1
        if size < 2 or (1 << n) != size:
            raise InvalidArgumentError("amplitude count must be a power of two >= 2")
        if slice_bits is None:
            slice_bits = default_slice_bits(n)
        state = cls(n, slice_bits)
        step = 1 << slice_bits
        for j in range(state.num_slices):
            sl, _ = Slice.from_amplitudes(j, amps[j * step:(j + 1) * step], codec)
            state.slices.append(sl)
        return state

    def to_array(self) -> np.ndarray:
        out = np.empty(1 << self.num_qubits, dtype=np.complex128)
        step = self.slice_len
        for sl in self.slices:
            re, im = sl.planes()
            out.real[sl.index * step:(sl.index + 1) * step] = re
            out.imag[sl.index * step:(sl.index + 1) * step] = im
        return out

    def amplitude(self, index: int) -> complex:
        if not 0 <= index < (1 << self.num_qubits):
            raise InvalidArgumentError("basis index out of range")
        j, off = locate(index, self.slice_bits)
        re, im = self.slices[j].planes()
        return complex(re[off], im[off])

    def iter_planes(self):
        """Yield (slice index, re, im) in global order, one slice in memory at a time."""
        for sl in self.slices:
            re, im = sl.planes()
            yield sl.index, re, im


def init_basis_state(num_qubits: int, basis_index: int = 0, slice_bits: int | None = None,
                     codec: CodecConfig | None = None) -> StateVector:
    if num_qubits < 1:
        raise InvalidArgumentError("num_qubits must be >= 1")
    if slice_bits is None:
        slice_bits = default_slice_bits(num_qubits)
    if not 0 <= slice_bits <= num_qubits:
        raise InvalidArgumentError("slice_bits must lie in [0, num_qubits]")
    if not 0 <= basis_index < (1 << num_qubits):
        raise InvalidArgumentError("basis index out of range")
    state = StateVector(num_qubits, slice_bits)
    hot, off = locate(basis_index, slice_bits)
    zeros = np.zeros(1 << slice_bits, dtype=np.complex128)
    for j in range(state.num_slices):
        amps = zeros
        if j == hot:
            amps = zeros.copy()
            amps[off] = 1.0
        sl, _ = Slice.from_amplitudes(j, amps, codec)
        state.slices.append(sl)
    return state


def global_sq_norm(state: StateVector) -> float:
    """Sum of |a|^2 over all amplitudes, reading every slice."""
    total = 0.0
    for _, re, im in state.iter_planes():
        total += float(np.dot(re, re) + np.dot(im, im))
    return total


def _as_array(x) -> np.ndarray:
    if isinstance(x, StateVector):
        return x.to_array()
    return np.asarray(getattr(x, "amplitudes", x), dtype=np.complex128).ravel()


def inner_product(a, b) -> complex:
    """<a|b> = sum(conj(a_i) * b_i). Accepts StateVectors or dense arrays."""
    va, vb = _as_array(a), _as_array(b)
    if va.shape != vb.shape:
        raise InvalidArgumentError(f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]} amplitudes")
    return complex(np.vdot(va, vb))


def fidelity(a, b) -> float:
    """|<a|b>|^2 for pure states."""
    ip = inner_product(a, b)
    return ip.real * ip.real + ip.imag * ip.imag


def write_dump(amplitudes, fh: BinaryIO) -> None:
    """Write the QSV1 state dump: 16-byte header then (re, im) f64 pairs."""
    amps = _as_array(amplitudes)
    n = amps.shape[0].bit_length() - 1
    fh.write(_DUMP_HEADER.pack(DUMP_MAGIC, n, 0))
    fh.write(amps.astype("<c16").tobytes())


def read_dump(fh: BinaryIO) -> np.ndarray:
    head = fh.read(_DUMP_HEADER.size)
    if len(head) != _DUMP_HEADER.size:
        raise CodecDecodeError("truncated state dump header")
    magic, n, _ = _DUMP_HEADER.unpack(head)
    if magic != DUMP_MAGIC:
        raise CodecDecodeError(f"bad dump magic {magic!r}")
    body = fh.read()
    if len(body) != BYTES_PER_AMPLITUDE << n:
        raise CodecDecodeError("state dump length does not match header")
    return np.frombuffer(body, dtype="<c16").astype(np.complex128)
