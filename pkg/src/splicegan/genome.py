"""Gene-like latent codes and the splice operations on them.

A latent vector is partitioned into ``n`` contiguous attribute pieces
followed by an attribute-neutral remainder ``z`` that carries identity and
everything not on the attribute list. Attributes are numbered 1..n, the
same way they appear in attribute files. All operations return new codes;
inputs are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LayoutError


@dataclass(frozen=True)
class GenomeLayout:
    """Split of a flat latent vector into attribute pieces plus z (z last)."""

    piece_sizes: tuple[int, ...]
    z_size: int

    def __post_init__(self):
        object.__setattr__(self, "piece_sizes", tuple(int(s) for s in self.piece_sizes))
        if any(s < 1 for s in self.piece_sizes):
            raise LayoutError(f"piece sizes must be positive, got {self.piece_sizes}")
        if self.z_size < 1:
            # z must exist: a code with no attribute-neutral part cannot keep
            # any image content once a piece is annihilated.
            raise LayoutError(f"z_size must be at least 1, got {self.z_size}")

    @property
    def n(self) -> int:
        return len(self.piece_sizes)

    @property
    def total_len(self) -> int:
        return sum(self.piece_sizes) + self.z_size

    def piece_slice(self, i: int) -> slice:
        """Slice of attribute piece ``i`` (1-based)."""
        if not 1 <= i <= self.n:
            raise IndexError(f"attribute index {i} out of range 1..{self.n}")
        start = sum(self.piece_sizes[: i - 1])
        return slice(start, start + self.piece_sizes[i - 1])

    def z_slice(self) -> slice:
        return slice(self.total_len - self.z_size, self.total_len)

    def keep_mask(self, i: int, dtype=np.float32) -> np.ndarray:
        """Vector of ones with zeros over piece ``i`` (the annihilation mask)."""
        mask = np.ones(self.total_len, dtype=dtype)
        mask[self.piece_slice(i)] = 0.0
        return mask


@dataclass
class LatentCode:
    """A flat real vector interpreted through a :class:`GenomeLayout`."""

    values: np.ndarray
    layout: GenomeLayout

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 1 or len(self.values) != self.layout.total_len:
            raise LayoutError(
                f"code of length {self.values.size} does not fit layout "
                f"total_len {self.layout.total_len}")

    def piece(self, i: int) -> np.ndarray:
        """View of attribute piece ``i``; pieces tile the vector with z last."""
        return self.values[self.layout.piece_slice(i)]

    @property
    def z(self) -> np.ndarray:
        return self.values[self.layout.z_slice()]

    def copy(self) -> "LatentCode":
        return LatentCode(self.values.copy(), self.layout)


@dataclass
class ChildQuad:
    """The four splice products of an encoded pair at one attribute.

    ``latent_A1`` is the untouched code of the attribute carrier,
    ``latent_B1`` the non-carrier with its piece annihilated, and
    ``latent_A2`` / ``latent_B2`` the two hybrids (piece removed from the
    carrier, piece transplanted into the non-carrier).
    """

    latent_A1: LatentCode
    latent_B1: LatentCode
    latent_A2: LatentCode
    latent_B2: LatentCode


def _check_same_layout(a: LatentCode, b: LatentCode) -> None:
    if a.layout != b.layout:
        raise LayoutError(f"layout mismatch: {a.layout} vs {b.layout}")


def annihilate(code: LatentCode, i: int) -> LatentCode:
    """Copy of ``code`` with attribute piece ``i`` replaced by zeros."""
    out = code.copy()
    out.piece(i)[:] = 0.0
    return out


def swap_piece(code_a: LatentCode, code_b: LatentCode, i: int) -> tuple[LatentCode, LatentCode]:
    """Exchange piece ``i`` between two codes; everything else is untouched."""
    _check_same_layout(code_a, code_b)
    out_a, out_b = code_a.copy(), code_b.copy()
    out_a.piece(i)[:] = code_b.piece(i)
    out_b.piece(i)[:] = code_a.piece(i)
    return out_a, out_b


def crossbreed(enc_a: LatentCode, enc_b: LatentCode, i: int) -> ChildQuad:
    """Build the four child latents from an encoded pair at attribute ``i``.

    ``enc_a`` must come from the image carrying the attribute; its piece is
    the one that survives. The non-carrier's piece is annihilated everywhere
    it would otherwise appear.
    """
    _check_same_layout(enc_a, enc_b)
    sl = enc_a.layout.piece_slice(i)
    b2 = enc_b.copy()
    b2.values[sl] = enc_a.values[sl]
    return ChildQuad(
        latent_A1=enc_a.copy(),
        latent_B1=annihilate(enc_b, i),
        latent_A2=annihilate(enc_a, i),
        latent_B2=b2,
    )


def interpolate_piece(base: LatentCode, i: int, direction: np.ndarray,
                      alpha: float) -> LatentCode:
    """Blend piece ``i`` toward ``direction``: piece <- (1-alpha)*piece + alpha*direction.

    ``alpha`` outside [0, 1] extrapolates; nothing outside the piece moves.
    """
    direction = np.asarray(direction)
    sl = base.layout.piece_slice(i)
    if direction.shape != (sl.stop - sl.start,):
        raise LayoutError(
            f"direction of shape {direction.shape} does not fit piece {i} "
            f"of size {sl.stop - sl.start}")
    out = base.copy()
    out.values[sl] = (1.0 - alpha) * base.values[sl] + alpha * direction
    return out
