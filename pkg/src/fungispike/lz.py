"""Lempel-Ziv (1976) complexity and its shuffle-normalised multichannel form.

The LZ76 count is the number of phrases in the exhaustive-history parsing:
each new phrase is the shortest extension of the current position that has
not appeared before, where "before" may overlap the phrase itself. The count
is computed online with a suffix automaton over the binary alphabet, which
keeps it linear in the string length.
"""

from __future__ import annotations

import numba
import numpy as np

from .errors import SizeError

DEFAULT_SHUFFLES = 20


@numba.njit(cache=True)
def _lz76(bits):
    n = bits.shape[0]
    size = 2 * n + 2
    nxt = np.full((size, 2), -1, np.int64)
    link = np.full(size, -1, np.int64)
    length = np.zeros(size, np.int64)
    nstates = 1
    last = 0
    # state of the current phrase prefix in the automaton of the history
    cur = 0
    curlen = 0
    count = 0
    for j in range(n):
        ch = bits[j]
        t = nxt[cur, ch]
        ended = t == -1
        if ended:
            count += 1
        else:
            cur = t
            curlen += 1

        z = nstates
        nstates += 1
        length[z] = length[last] + 1
        p = last
        while p != -1 and nxt[p, ch] == -1:
            nxt[p, ch] = z
            p = link[p]
        if p == -1:
            link[z] = 0
        else:
            q = nxt[p, ch]
            if length[p] + 1 == length[q]:
                link[z] = q
            else:
                clone = nstates
                nstates += 1
                length[clone] = length[p] + 1
                nxt[clone, 0] = nxt[q, 0]
                nxt[clone, 1] = nxt[q, 1]
                link[clone] = link[q]
                while p != -1 and nxt[p, ch] == q:
                    nxt[p, ch] = clone
                    p = link[p]
                link[q] = clone
                link[z] = clone
        last = z

        if ended:
            cur = 0
            curlen = 0
        else:
            # a clone may have taken over the shorter strings of cur's class
            while link[cur] != -1 and length[link[cur]] >= curlen:
                cur = link[cur]
    if curlen > 0:
        count += 1
    return count


def as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits)
    if arr.dtype.kind in "US":
        arr = np.frombuffer("".join(arr.ravel()).encode("ascii"), dtype=np.uint8) - ord("0")
    arr = np.ascontiguousarray(arr, dtype=np.int8).ravel()
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ValueError("bit sequence must contain only 0 and 1")
    return arr


def lz76_complexity(bits) -> int:
    """Number of phrases in the LZ76 parsing of a binary sequence.

    Accepts an array of 0/1 values or a string such as ``"0110"``.
    """
    if isinstance(bits, str):
        bits = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
    arr = as_bits(bits)
    if arr.size == 0:
        raise SizeError("LZ76 complexity of an empty sequence")
    return int(_lz76(arr))


def normalized_lz(bits) -> float:
    """LZ76 count scaled by ``log2(n) / n``; close to 1 for a random
    sequence of equiprobable bits and small for sparse or regular ones."""
    arr = as_bits(bits)
    n = arr.size
    if n < 2:
        return 0.0
    return lz76_complexity(arr) * np.log2(n) / n


def pcipk(trains, shuffles: int = DEFAULT_SHUFFLES, seed: int = 0) -> float:
    """Shuffle-normalised LZ complexity of one or more spike trains.

    The trains are concatenated channel after channel; the LZ76 count of
    that string is divided by the mean count over ``shuffles`` seeded random
    permutations of the same string.
    """
    if shuffles < 1:
        raise ValueError("shuffles must be at least 1")
    if isinstance(trains, np.ndarray) and trains.ndim == 1:
        trains = [trains]
    parts = [as_bits(t) for t in trains]
    if not parts:
        raise SizeError("no spike trains")
    joined = np.concatenate(parts)
    if joined.size == 0:
        raise SizeError("empty concatenated spike train")
    raw = _lz76(joined)
    rng = np.random.default_rng(seed)
    n, ones = joined.size, int(joined.sum())
    total = 0
    for _ in range(shuffles):
        # a uniform permutation of a binary string is a uniform choice of
        # where its ones go
        shuffled = np.zeros(n, dtype=np.int8)
        shuffled[rng.choice(n, size=ones, replace=False)] = 1
        total += _lz76(shuffled)
    return raw / (total / shuffles)
