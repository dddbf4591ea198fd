"""Canonical prefix coding of integer symbol streams.

Code lengths come from the in-place minimum-redundancy algorithm of Moffat
and Katajainen, which runs in linear time on frequencies sorted ascending.
Codes are then assigned canonically (by length, then symbol value) so only
the (symbol, length) table has to be stored. Bits are packed MSB first.
"""

from __future__ import annotations

import numba as nb
import numpy as np

from ..errors import CodecDecodeError

MAX_CODE_LENGTH = 58


@nb.njit(cache=True, nogil=True)
def _minimum_redundancy_lengths(freqs):  # pragma: no cover - jitted
    # freqs: int64, sorted ascending, len >= 2; overwritten with code lengths.
    a = freqs
    n = a.shape[0]
    a[0] += a[1]
    root = 0
    leaf = 2
    for nxt in range(1, n - 1):
        if leaf >= n or a[root] < a[leaf]:
            a[nxt] = a[root]
            a[root] = nxt
            root += 1
        else:
            a[nxt] = a[leaf]
            leaf += 1
        if leaf >= n or (root < nxt and a[root] < a[leaf]):
            a[nxt] += a[root]
            a[root] = nxt
            root += 1
        else:
            a[nxt] += a[leaf]
            leaf += 1
    a[n - 2] = 0
    for nxt in range(n - 3, -1, -1):
        a[nxt] = a[a[nxt]] + 1
    avail = 1
    used = 0
    depth = 0
    root = n - 2
    nxt = n - 1
    while avail > 0:
        while root >= 0 and a[root] == depth:
            used += 1
            root -= 1
        while avail > used:
            a[nxt] = depth
            nxt -= 1
            avail -= 1
        avail = 2 * used
        depth += 1
        used = 0
    return a


def code_lengths(freqs: np.ndarray) -> np.ndarray:
    """Optimal prefix-code lengths for positive frequencies (any order)."""
    freqs = np.asarray(freqs, dtype=np.int64)
    n = freqs.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if n == 1:
        return np.ones(1, dtype=np.int64)
    order = np.argsort(freqs, kind="stable")
    work = freqs[order].copy()
    _minimum_redundancy_lengths(work)
    lengths = np.empty(n, dtype=np.int64)
    lengths[order] = work
    return lengths


def canonical_order(symbols: np.ndarray, lengths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort a (symbol, length) table into canonical order: length, then symbol."""
    order = np.lexsort((symbols, lengths))
    return symbols[order], lengths[order]


def canonical_codes(lengths: np.ndarray) -> np.ndarray:
    """Codewords for a table already in canonical order."""
    codes = np.zeros(lengths.shape[0], dtype=np.uint64)
    code = 0
    prev = int(lengths[0]) if lengths.shape[0] else 0
    for i in range(lengths.shape[0]):
        ln = int(lengths[i])
        code <<= ln - prev
        codes[i] = code
        code += 1
        prev = ln
    return codes


@nb.njit(cache=True, nogil=True)
def _pack(sym_index, codes, lengths, total_bits):  # pragma: no cover - jitted
    out = np.zeros((total_bits + 7) // 8, dtype=np.uint8)
    acc = np.uint64(0)
    nacc = 0
    pos = 0
    for i in range(sym_index.shape[0]):
        k = sym_index[i]
        c = codes[k]
        ln = lengths[k]
        # Emit in chunks so the accumulator never holds more than 63 bits.
        while ln > 0:
            take = ln if ln <= 32 else 32
            ln -= take
            chunk = (c >> np.uint64(ln)) & np.uint64((1 << take) - 1)
            acc = (acc << np.uint64(take)) | chunk
            nacc += take
            while nacc >= 8:
                nacc -= 8
                out[pos] = np.uint8((acc >> np.uint64(nacc)) & np.uint64(0xFF))
                pos += 1
            acc &= np.uint64((1 << nacc) - 1)
    if nacc > 0:
        out[pos] = np.uint8((acc << np.uint64(8 - nacc)) & np.uint64(0xFF))
    return out


@nb.njit(cache=True, nogil=True)
def _unpack(data, nbits, count, first_code, first_index, per_length, max_len):  # pragma: no cover
    # Returns indices into the canonical table, or -1-status on failure.
    out = np.empty(count, dtype=np.int64)
    bitpos = 0
    for i in range(count):
        code = np.int64(0)
        ln = 0
        found = False
        while ln < max_len:
            if bitpos >= nbits:
                out[0] = -1
                return out, -1
            byte = data[bitpos >> 3]
            bit = (byte >> (7 - (bitpos & 7))) & 1
            bitpos += 1
            code = (code << 1) | bit
            ln += 1
            off = code - first_code[ln]
            if off >= 0 and off < per_length[ln]:
                out[i] = first_index[ln] + off
                found = True
                break
        if not found:
            return out, -2
    if bitpos != nbits:
        return out, -3
    return out, 0


def encode(sym_index: np.ndarray, lengths: np.ndarray) -> tuple[bytes, int]:
    """Pack a stream of canonical-table indices; returns (bytes, bit count)."""
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.shape[0] and lengths.max() > MAX_CODE_LENGTH:
        raise ValueError("prefix code too deep")
    codes = canonical_codes(lengths)
    sym_index = np.asarray(sym_index, dtype=np.int64)
    total_bits = int(lengths[sym_index].sum()) if sym_index.shape[0] else 0
    return _pack(sym_index, codes, lengths, total_bits).tobytes(), total_bits


def decode(data: bytes, nbits: int, count: int, lengths: np.ndarray) -> np.ndarray:
    """Inverse of :func:`encode`; returns canonical-table indices."""
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.shape[0] == 0:
        raise CodecDecodeError("empty prefix-code table")
    if len(data) * 8 < nbits or (nbits + 7) // 8 != len(data):
        raise CodecDecodeError("code stream length mismatch")
    if np.any(lengths < 1) or lengths.max() > MAX_CODE_LENGTH or np.any(np.diff(lengths) < 0):
        raise CodecDecodeError("malformed prefix-code table")
    max_len = int(lengths.max())
    per_length = np.bincount(lengths, minlength=max_len + 1).astype(np.int64)
    # Kraft inequality must hold for a decodable prefix code.
    if sum(int(c) << (max_len - ln) for ln, c in enumerate(per_length) if ln) > (1 << max_len):
        raise CodecDecodeError("prefix-code table violates Kraft inequality")
    first_code = np.zeros(max_len + 2, dtype=np.int64)
    first_index = np.zeros(max_len + 2, dtype=np.int64)
    code = 0
    idx = 0
    for ln in range(1, max_len + 1):
        first_code[ln] = code
        first_index[ln] = idx
        code = (code + int(per_length[ln])) << 1
        idx += int(per_length[ln])
    buf = np.frombuffer(data, dtype=np.uint8)
    out, status = _unpack(buf, nbits, count, first_code, first_index, per_length, max_len)
    if status != 0:
        raise CodecDecodeError(
            {-1: "code stream truncated", -2: "invalid codeword", -3: "trailing bits in code stream"}[status]
        )
    return out
