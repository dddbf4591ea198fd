"""Error-bounded lossy compression of real-valued planes.

Each plane is scanned in index order. A value is predicted from already
*reconstructed* neighbours, the prediction residual is quantized on a grid
of width ``2 * eb``, and the integer codes are prefix coded. Values whose
code would not fit in ``quant_code_bits`` (or whose reconstruction would
miss the bound by rounding) are stored verbatim as outliers. The serialized
payload goes through a final deflate pass, which is what lets runs of
identical codes collapse far below one bit per element.
"""

from __future__ import annotations

import enum
import math
import struct
import zlib
from dataclasses import dataclass

import numba as nb
import numpy as np

from ..errors import CodecDecodeError, InvalidArgumentError
from . import huffman

MAGIC = b"QCB1"
VERSION = 1
# magic, version, mode, predictor, quant_code_bits, element_count,
# effective_abs_bound, outlier_count, payload_bytes
_HEADER = struct.Struct("<4sBBBBQdQQ")
HEADER_BYTES = _HEADER.size

_DEFLATE_LEVEL = 6


class Mode(enum.IntEnum):
    RANGE_RELATIVE = 0
    ABSOLUTE = 1
    LOSSLESS = 2


class Predictor(enum.IntEnum):
    PREVIOUS_VALUE = 0
    LINEAR_EXTRAPOLATION = 1


@dataclass(frozen=True)
class CodecConfig:
    mode: Mode = Mode.RANGE_RELATIVE
    bound: float = 0.01
    quant_code_bits: int = 16
    predictor: Predictor = Predictor.PREVIOUS_VALUE

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "predictor", Predictor(self.predictor))
        if not 4 <= self.quant_code_bits <= 24:
            raise InvalidArgumentError("quant_code_bits must be in [4, 24]")
        if self.mode != Mode.LOSSLESS:
            if not (self.bound > 0 and math.isfinite(self.bound)):
                raise InvalidArgumentError("error bound must be a positive finite number")
            if self.mode == Mode.RANGE_RELATIVE and self.bound > 1:
                raise InvalidArgumentError("range-relative bound must be <= 1")

    @classmethod
    def lossless(cls) -> CodecConfig:
        return cls(mode=Mode.LOSSLESS, bound=0.0)

    @classmethod
    def absolute(cls, bound: float, **kw) -> CodecConfig:
        return cls(mode=Mode.ABSOLUTE, bound=bound, **kw)

    @classmethod
    def relative(cls, bound: float = 0.01, **kw) -> CodecConfig:
        return cls(mode=Mode.RANGE_RELATIVE, bound=bound, **kw)


@dataclass(frozen=True)
class CompressedBlock:
    mode: Mode
    predictor: Predictor
    quant_code_bits: int
    element_count: int
    effective_abs_bound: float
    outlier_count: int
    payload: bytes

    @property
    def payload_bytes(self) -> int:
        return len(self.payload)

    @property
    def nbytes(self) -> int:
        return HEADER_BYTES + len(self.payload)

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(
            MAGIC,
            VERSION,
            int(self.mode),
            int(self.predictor),
            self.quant_code_bits,
            self.element_count,
            self.effective_abs_bound,
            self.outlier_count,
            len(self.payload),
        )
        return header + self.payload

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> tuple[CompressedBlock, int]:
        """Parse one block starting at ``offset``; returns it and the end offset."""
        if len(data) - offset < HEADER_BYTES:
            raise CodecDecodeError("truncated block header")
        magic, version, mode, pred, qbits, count, eb, n_out, n_payload = _HEADER.unpack_from(data, offset)
        if magic != MAGIC:
            raise CodecDecodeError(f"bad magic {magic!r}")
        if version != VERSION:
            raise CodecDecodeError(f"unsupported block version {version}")
        try:
            mode, pred = Mode(mode), Predictor(pred)
        except ValueError as exc:
            raise CodecDecodeError(str(exc)) from None
        start = offset + HEADER_BYTES
        end = start + n_payload
        if end > len(data):
            raise CodecDecodeError("payload shorter than header claims")
        block = cls(mode, pred, qbits, count, eb, n_out, bytes(data[start:end]))
        return block, end


@dataclass(frozen=True)
class CodecStats:
    input_bytes: int
    output_bytes: int
    outlier_fraction: float

    @property
    def ratio(self) -> float:
        return compression_ratio(self)


def compression_ratio(stats: CodecStats) -> float:
    return stats.input_bytes / stats.output_bytes


@nb.njit(cache=True, nogil=True)
def _quantize(values, step, eb, radius, linear, lossless):  # pragma: no cover - jitted
    n = values.shape[0]
    codes = np.empty(n, dtype=np.int64)
    recon = np.empty(n, dtype=np.float64)
    escape = -radius
    usable = not lossless and math.isfinite(step) and step > 0.0
    p1 = 0.0
    p2 = 0.0
    n_out = 0
    for i in range(n):
        x = values[i]
        if linear and i >= 2:
            pred = 2.0 * p1 - p2
        else:
            pred = p1
        ok = False
        m = 0
        xr = x
        if lossless:
            # Equal with equal sign bit means bit-identical for finite values.
            if x == pred and math.copysign(1.0, x) == math.copysign(1.0, pred):
                ok = True
                xr = pred
        elif usable and math.isfinite(pred):
            d = (x - pred) / step
            if abs(d) < radius - 1:
                m = int(np.rint(d))
                xr = pred + step * m
                if abs(xr - x) <= eb and abs(m) < radius:
                    ok = True
        if ok:
            codes[i] = m
            recon[i] = xr
        else:
            codes[i] = escape
            recon[i] = x
            n_out += 1
        p2 = p1
        p1 = recon[i]
    return codes, recon, n_out


@nb.njit(cache=True, nogil=True)
def _reconstruct(codes, outlier_pos, outlier_val, step, radius, linear):  # pragma: no cover - jitted
    n = codes.shape[0]
    out = np.empty(n, dtype=np.float64)
    escape = -radius
    j = 0
    p1 = 0.0
    p2 = 0.0
    for i in range(n):
        if linear and i >= 2:
            pred = 2.0 * p1 - p2
        else:
            pred = p1
        m = codes[i]
        if m == escape:
            if j >= outlier_pos.shape[0] or outlier_pos[j] != i:
                return out, -1
            out[i] = outlier_val[j]
            j += 1
        else:
            out[i] = pred + step * m
        p2 = p1
        p1 = out[i]
    if j != outlier_pos.shape[0]:
        return out, -2
    return out, 0


def effective_bound(values: np.ndarray, config: CodecConfig) -> float:
    if config.mode == Mode.LOSSLESS:
        return 0.0
    if config.mode == Mode.ABSOLUTE:
        return float(config.bound)
    with np.errstate(over="ignore"):
        return float(config.bound) * float(values.max() - values.min())


def _check_values(values) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.ravel()
    if arr.shape[0] == 0:
        raise InvalidArgumentError("cannot compress an empty plane")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("plane contains NaN or Inf")
    return arr


def encode_plane(values, config: CodecConfig) -> tuple[CompressedBlock, CodecStats, np.ndarray]:
    """Compress and also return the reconstruction the decoder will produce."""
    x = _check_values(values)
    n = x.shape[0]
    eb = effective_bound(x, config)
    radius = 1 << (config.quant_code_bits - 1)

    if x.min() == x.max() and np.all(x.view(np.int64) == x.view(np.int64)[0]):
        # Constant plane: empty code table followed by the single value.
        payload = struct.pack("<I", 0) + struct.pack("<d", x[0])
        recon = x.copy()
        n_out = 0
    else:
        step = 2.0 * eb
        codes, recon, n_out = _quantize(
            x, step, eb, radius,
            config.predictor == Predictor.LINEAR_EXTRAPOLATION, config.mode == Mode.LOSSLESS,
        )
        payload = _serialize_codes(codes, x, n_out, radius)
    payload = _deflate(payload)
    block = CompressedBlock(config.mode, config.predictor, config.quant_code_bits, n, eb, int(n_out), payload)
    stats = CodecStats(input_bytes=8 * n, output_bytes=block.nbytes, outlier_fraction=n_out / n)
    return block, stats, recon


def compress_plane(values, config: CodecConfig) -> tuple[CompressedBlock, CodecStats]:
    block, stats, _ = encode_plane(values, config)
    return block, stats


@nb.njit(cache=True, nogil=True)
def _histogram(codes, escape):  # pragma: no cover - jitted
    lo = 0
    hi = -1
    n_esc = 0
    for i in range(codes.shape[0]):
        c = codes[i]
        if c == escape:
            n_esc += 1
        elif hi < lo:
            lo = c
            hi = c
        elif c < lo:
            lo = c
        elif c > hi:
            hi = c
    counts = np.zeros(max(hi - lo + 1, 0), dtype=np.int64)
    for i in range(codes.shape[0]):
        c = codes[i]
        if c != escape:
            counts[c - lo] += 1
    return lo, counts, n_esc


@nb.njit(cache=True, nogil=True)
def _to_rank(codes, lookup, lo, escape, escape_rank):  # pragma: no cover - jitted
    out = np.empty(codes.shape[0], dtype=np.int64)
    for i in range(codes.shape[0]):
        c = codes[i]
        out[i] = escape_rank if c == escape else lookup[c - lo]
    return out


def _serialize_codes(codes: np.ndarray, x: np.ndarray, n_out: int, radius: int) -> bytes:
    escape = -radius
    lo, counts, n_esc = _histogram(codes, escape)
    present = np.flatnonzero(counts)
    symbols = present + lo
    freqs = counts[present]
    if n_esc:
        symbols = np.append(symbols, escape)
        freqs = np.append(freqs, n_esc)
    lengths = huffman.code_lengths(freqs)
    order = np.lexsort((symbols, lengths))
    rank = np.empty_like(order)
    rank[order] = np.arange(order.shape[0])
    lookup = np.zeros(counts.shape[0], dtype=np.int64)
    lookup[present] = rank[:present.shape[0]]
    escape_rank = int(rank[-1]) if n_esc else -1
    stream, nbits = huffman.encode(_to_rank(codes, lookup, lo, escape, escape_rank), lengths[order])
    parts = [
        struct.pack("<I", symbols.shape[0]),
        symbols[order].astype("<i4").tobytes(),
        lengths[order].astype(np.uint8).tobytes(),
        struct.pack("<Q", nbits),
        stream,
    ]
    if n_out:
        pos = np.flatnonzero(codes == escape)
        parts.append(pos.astype("<u8").tobytes())
        parts.append(x[pos].astype("<f8").tobytes())
    return b"".join(parts)


def _deflate(raw: bytes) -> bytes:
    c = zlib.compressobj(_DEFLATE_LEVEL, zlib.DEFLATED, -15)
    return c.compress(raw) + c.flush()


def _inflate(data: bytes) -> bytes:
    d = zlib.decompressobj(-15)
    try:
        raw = d.decompress(data)
    except zlib.error as exc:
        raise CodecDecodeError(f"payload inflate failed: {exc}") from None
    if not d.eof or d.unused_data:
        raise CodecDecodeError("payload is truncated or has trailing bytes")
    return raw


def decompress_plane(block: CompressedBlock) -> np.ndarray:
    n = block.element_count
    if n < 1:
        raise CodecDecodeError("element_count must be >= 1")
    if block.outlier_count > n:
        raise CodecDecodeError("outlier_count exceeds element_count")
    if not 4 <= block.quant_code_bits <= 24:
        raise CodecDecodeError("quant_code_bits out of range")
    raw = _inflate(block.payload)
    try:
        return _parse_payload(raw, block)
    except struct.error as exc:
        raise CodecDecodeError(f"truncated payload: {exc}") from None


def _parse_payload(raw: bytes, block: CompressedBlock) -> np.ndarray:
    n = block.element_count
    (n_sym,) = struct.unpack_from("<I", raw, 0)
    off = 4
    if n_sym == 0:
        if len(raw) != off + 8 or block.outlier_count:
            raise CodecDecodeError("malformed constant-plane payload")
        (value,) = struct.unpack_from("<d", raw, off)
        return np.full(n, value, dtype=np.float64)

    symbols = np.frombuffer(raw, dtype="<i4", count=n_sym, offset=off).astype(np.int64)
    off += 4 * n_sym
    lengths = np.frombuffer(raw, dtype=np.uint8, count=n_sym, offset=off).astype(np.int64)
    off += n_sym
    (nbits,) = struct.unpack_from("<Q", raw, off)
    off += 8
    nstream = (nbits + 7) // 8
    if off + nstream > len(raw):
        raise CodecDecodeError("code stream truncated")
    idx = huffman.decode(raw[off:off + nstream], nbits, n, lengths)
    off += nstream
    k = block.outlier_count
    if len(raw) != off + 16 * k:
        raise CodecDecodeError("outlier section length mismatch")
    pos = np.frombuffer(raw, dtype="<u8", count=k, offset=off).astype(np.int64)
    vals = np.frombuffer(raw, dtype="<f8", count=k, offset=off + 8 * k).astype(np.float64)

    radius = 1 << (block.quant_code_bits - 1)
    codes = symbols[idx]
    if np.any((codes <= -radius) & (codes != -radius)) or np.any(codes >= radius):
        raise CodecDecodeError("quantization code out of range")
    if block.mode == Mode.LOSSLESS:
        step = 0.0
    else:
        step = 2.0 * block.effective_abs_bound
    out, status = _reconstruct(
        codes, pos, vals, step, radius, block.predictor == Predictor.LINEAR_EXTRAPOLATION
    )
    if status != 0:
        raise CodecDecodeError("outlier list disagrees with code stream")
    return out
