"""Labeled seed derivation and counter-based uniform streams.

Every random draw in the package flows from one integer seed. Sub-streams
are addressed by a tuple of labels, hashed into a Philox key, so that a
stream is a pure function of ``(seed, labels)`` and draw ``i`` of a stream
is a pure function of ``(seed, labels, i)``.
"""

from __future__ import annotations

import hashlib

import numpy as np

# Philox4x64 emits four 64-bit words per counter increment.
_WORDS_PER_BLOCK = 4


def derive_key(seed: int, *labels: object) -> int:
    """Hash ``seed`` and ``labels`` into a 128-bit Philox key."""
    payload = "\x1f".join([str(int(seed))] + [str(label) for label in labels])
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def generator(seed: int, *labels: object) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_key(seed, *labels)))


def uniforms(seed: int, *labels: object, start: int = 0, count: int) -> np.ndarray:
    """Doubles ``start .. start+count-1`` of the labeled stream.

    Slices are consistent: ``uniforms(s, l, start=k, count=m)`` equals
    ``uniforms(s, l, count=k+m)[k:]`` for every ``k``.
    """
    if start < 0 or count < 0:
        raise ValueError("start and count must be nonnegative")
    bitgen = np.random.Philox(key=derive_key(seed, *labels))
    block, offset = divmod(start, _WORDS_PER_BLOCK)
    if block:
        bitgen.advance(block)
    draws = np.random.Generator(bitgen).random(offset + count)
    return draws[offset:]


def integers(seed: int, *labels: object, high: int, count: int) -> np.ndarray:
    """``count`` integers uniform on ``0 .. high-1`` from the labeled stream."""
    if high < 1:
        raise ValueError("high must be >= 1")
    return generator(seed, *labels).integers(0, high, size=count)
