"""Deterministic hash embeddings.

The recipe is pinned so that independent implementations agree bit for bit:

1. grams: every character trigram text[i:i+3] for i in
   0..max(1, len(text) - 2) - 1; texts shorter than three characters yield
   a single gram (possibly empty).
2. Each gram is hashed with 64-bit FNV-1a over its UTF-8 bytes, the basis
   XORed with (seed * 0x9E3779B97F4A7C15 mod 2^64).
3. The bucket (hash mod dim) accumulates +1.0 when the hash's top bit is 0,
   otherwise -1.0.
4. The accumulator is divided by the L2 norm, computed as the square root
   of the in-order sum of squares. An all-zero accumulator gets bucket 0
   set to 1.0 first.

Plain Python floats throughout; no dependencies.
"""

from __future__ import annotations

import math

_FNV_BASIS = 14695981039346656037
_FNV_PRIME = 1099511628211
_SEED_MIX = 0x9E3779B97F4A7C15
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes, seed: int = 0) -> int:
    h = (_FNV_BASIS ^ ((seed * _SEED_MIX) & _MASK64)) & _MASK64
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def det_embed(text: str, seed: int, dim: int) -> list[float]:
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    acc = [0.0] * dim
    for i in range(max(1, len(text) - 2)):
        h = fnv1a64(text[i : i + 3].encode("utf-8"), seed)
        sign = 1.0 if (h >> 63) == 0 else -1.0
        acc[h % dim] += sign
    norm = math.sqrt(sum(x * x for x in acc))
    if norm == 0.0:
        acc[0] = 1.0
        norm = 1.0
    return [x / norm for x in acc]
