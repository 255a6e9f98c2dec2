"""Pure NumPy/Python implementations of the hot kernels.

This is the fallback lane for ``splicegan._kernels`` (the Cython build).
Both lanes implement the same functions with identical numerics, and the
simulation kernels consume random chunks in exactly the same order, so a
fixed seed gives bit-identical results on either lane.

A "chunk source" is a zero-argument callable returning a fresh 1-D
``uint64`` array; kernels pull a new chunk whenever the current one is
exhausted. One pair draw consumes two words, one coupon draw consumes one.
"""

from __future__ import annotations

import numpy as np


# ---------------------------------------------------------------------------
# elementwise network kernels


def leaky_relu_forward(x: np.ndarray, slope: float) -> np.ndarray:
    s = x.dtype.type(slope)
    return np.where(x > 0, x, s * x)


def leaky_relu_backward(x: np.ndarray, grad: np.ndarray, slope: float) -> np.ndarray:
    s = x.dtype.type(slope)
    return np.where(x > 0, grad, s * grad)


def rmsprop_update(
    param: np.ndarray,
    grad: np.ndarray,
    acc: np.ndarray,
    lr: float,
    decay: float,
    eps: float,
) -> None:
    """In-place update: acc <- decay*acc + (1-decay)*g^2; p <- p - lr*g/(sqrt(acc)+eps)."""
    t = param.dtype.type
    d, od, lr_, eps_ = t(decay), t(1.0) - t(decay), t(lr), t(eps)
    acc *= d
    acc += od * grad * grad
    param -= lr_ * grad / (np.sqrt(acc) + eps_)


# ---------------------------------------------------------------------------
# Monte Carlo collection loops


def coupon_collection_run(m: int, k: int, fill_chunk) -> int:
    """Draws uniformly from m ids until the first k ids have all appeared."""
    seen = bytearray(k)
    remaining = k
    draws = 0
    chunk = fill_chunk()
    clen = len(chunk)
    pos = 0
    while remaining:
        if pos == clen:
            chunk = fill_chunk()
            clen = len(chunk)
            pos = 0
        r = int(chunk[pos]) % m
        pos += 1
        draws += 1
        if r < k and not seen[r]:
            seen[r] = 1
            remaining -= 1
    return draws


def random_collection_run(labels: np.ndarray, target: int, fill_chunk) -> int:
    """Ordered pair draws with replacement until `target` distinct useful
    (different-label) ordered pairs have been seen."""
    m = len(labels)
    lab = [int(v) for v in labels]
    seen = bytearray(m * m)
    remaining = target
    draws = 0
    chunk = fill_chunk()
    clen = len(chunk)
    pos = 0
    while remaining:
        if pos + 2 > clen:
            chunk = fill_chunk()
            clen = len(chunk)
            pos = 0
        a = int(chunk[pos]) % m
        b = int(chunk[pos + 1]) % m
        pos += 2
        draws += 1
        if lab[a] != lab[b]:
            idx = a * m + b
            if not seen[idx]:
                seen[idx] = 1
                remaining -= 1
    return draws


def iterative_collection_run(
    pos_flat: np.ndarray,
    pos_off: np.ndarray,
    pos_len: np.ndarray,
    neg_flat: np.ndarray,
    neg_off: np.ndarray,
    neg_len: np.ndarray,
    m: int,
    target: int,
    fill_chunk,
) -> int:
    """Attribute-cycling pair draws until every ordered pair the schedule can
    produce has been seen.

    ``pos_flat``/``neg_flat`` concatenate, per active attribute, the image
    indices carrying / lacking that attribute; ``*_off``/``*_len`` index into
    them. Every draw counts, whichever attribute produced it.
    """
    n_active = len(pos_off)
    pflat = [int(v) for v in pos_flat]
    nflat = [int(v) for v in neg_flat]
    poff = [int(v) for v in pos_off]
    plen = [int(v) for v in pos_len]
    noff = [int(v) for v in neg_off]
    nlen = [int(v) for v in neg_len]
    seen = bytearray(m * m)
    remaining = target
    draws = 0
    s = 0
    chunk = fill_chunk()
    clen = len(chunk)
    pos = 0
    while remaining:
        if pos + 2 > clen:
            chunk = fill_chunk()
            clen = len(chunk)
            pos = 0
        a = pflat[poff[s] + int(chunk[pos]) % plen[s]]
        b = nflat[noff[s] + int(chunk[pos + 1]) % nlen[s]]
        pos += 2
        draws += 1
        s += 1
        if s == n_active:
            s = 0
        idx = a * m + b
        if not seen[idx]:
            seen[idx] = 1
            remaining -= 1
    return draws
