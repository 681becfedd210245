"""MurmurHash3, x86 32-bit variant.

Three entry points over the same algorithm:

* :func:`murmur3_32`: one byte string, one seed.  The reference path; the
  golden vectors in ``goldens/hash_vectors.tsv`` were produced with it.
* :func:`murmur3_32_seeds`: one byte string, a vector of seeds.  The block
  constants of the input are seed-independent, so they are mixed once and the
  seed-carrying state runs through numpy uint32 lanes.  Bit-identical to the
  scalar path.
* :func:`murmur3_32_rows`: many equal-length byte strings, one seed.

The batch paths exist because the verification harness evaluates millions of
(token, seed) pairs; a Python-level loop would dominate every experiment.
"""

from __future__ import annotations

import numpy as np

_C1 = 0xCC9E2D51
_C2 = 0x1B873593
_U32 = 0xFFFFFFFF


def _mix_block(k1: int) -> int:
    # Seed-independent premix of one 4-byte little-endian block.
    k1 = (k1 * _C1) & _U32
    k1 = ((k1 << 15) | (k1 >> 17)) & _U32
    return (k1 * _C2) & _U32


def murmur3_32(data: bytes, seed: int = 0) -> int:
    """Hash ``data`` with ``seed``, returning an unsigned 32-bit integer."""
    h1 = seed & _U32
    n = len(data)
    nblocks = n // 4

    for i in range(0, nblocks * 4, 4):
        k1 = data[i] | data[i + 1] << 8 | data[i + 2] << 16 | data[i + 3] << 24
        h1 ^= _mix_block(k1)
        h1 = ((h1 << 13) | (h1 >> 19)) & _U32
        h1 = (h1 * 5 + 0xE6546B64) & _U32

    # tail
    k1 = 0
    tail = nblocks * 4
    rem = n & 3
    if rem == 3:
        k1 ^= data[tail + 2] << 16
    if rem >= 2:
        k1 ^= data[tail + 1] << 8
    if rem >= 1:
        k1 ^= data[tail]
        h1 ^= _mix_block(k1)

    # finalization
    h1 ^= n
    h1 ^= h1 >> 16
    h1 = (h1 * 0x85EBCA6B) & _U32
    h1 ^= h1 >> 13
    h1 = (h1 * 0xC2B2AE35) & _U32
    h1 ^= h1 >> 16
    return h1


def _premixed(data: bytes) -> tuple[list[int], int | None]:
    """Seed-independent per-block constants of ``data`` plus the mixed tail."""
    n = len(data)
    nblocks = n // 4
    blocks = []
    for i in range(0, nblocks * 4, 4):
        k1 = data[i] | data[i + 1] << 8 | data[i + 2] << 16 | data[i + 3] << 24
        blocks.append(_mix_block(k1))
    k1 = 0
    tail = nblocks * 4
    rem = n & 3
    if rem == 3:
        k1 ^= data[tail + 2] << 16
    if rem >= 2:
        k1 ^= data[tail + 1] << 8
    if rem >= 1:
        k1 ^= data[tail]
        return blocks, _mix_block(k1)
    return blocks, None


def murmur3_32_seeds(data: bytes, seeds: np.ndarray) -> np.ndarray:
    """Hash one byte string under every seed in ``seeds`` (uint32 array)."""
    h1 = seeds.astype(np.uint32, copy=True)
    blocks, tail = _premixed(data)
    for kc in blocks:
        h1 ^= np.uint32(kc)
        h1 = (h1 << np.uint32(13)) | (h1 >> np.uint32(19))
        h1 = h1 * np.uint32(5) + np.uint32(0xE6546B64)
    if tail is not None:
        h1 ^= np.uint32(tail)
    h1 ^= np.uint32(len(data))
    h1 ^= h1 >> np.uint32(16)
    h1 *= np.uint32(0x85EBCA6B)
    h1 ^= h1 >> np.uint32(13)
    h1 *= np.uint32(0xC2B2AE35)
    h1 ^= h1 >> np.uint32(16)
    return h1


def murmur3_32_rows(data: np.ndarray, seed: int = 0) -> np.ndarray:
    """Hash every row of a (n, L) uint8 array under one seed.

    Rows are fixed-width byte strings; the result equals applying
    :func:`murmur3_32` to each row.
    """
    if data.ndim != 2 or data.dtype != np.uint8:
        raise ValueError("expected a 2-d uint8 array of equal-length rows")
    n_rows, length = data.shape
    h1 = np.full(n_rows, seed & _U32, dtype=np.uint32)
    d = data.astype(np.uint32)
    nblocks = length // 4
    c1 = np.uint32(_C1)
    c2 = np.uint32(_C2)
    for b in range(nblocks):
        o = 4 * b
        k1 = d[:, o] | d[:, o + 1] << np.uint32(8) | d[:, o + 2] << np.uint32(16) | d[:, o + 3] << np.uint32(24)
        k1 *= c1
        k1 = (k1 << np.uint32(15)) | (k1 >> np.uint32(17))
        k1 *= c2
        h1 ^= k1
        h1 = (h1 << np.uint32(13)) | (h1 >> np.uint32(19))
        h1 = h1 * np.uint32(5) + np.uint32(0xE6546B64)
    rem = length & 3
    if rem:
        o = 4 * nblocks
        k1 = np.zeros(n_rows, dtype=np.uint32)
        if rem == 3:
            k1 ^= d[:, o + 2] << np.uint32(16)
        if rem >= 2:
            k1 ^= d[:, o + 1] << np.uint32(8)
        k1 ^= d[:, o]
        k1 *= c1
        k1 = (k1 << np.uint32(15)) | (k1 >> np.uint32(17))
        k1 *= c2
        h1 ^= k1
    h1 ^= np.uint32(length)
    h1 ^= h1 >> np.uint32(16)
    h1 *= np.uint32(0x85EBCA6B)
    h1 ^= h1 >> np.uint32(13)
    h1 *= np.uint32(0xC2B2AE35)
    h1 ^= h1 >> np.uint32(16)
    return h1
