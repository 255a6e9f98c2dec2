"""Pair scheduling and its expectation theory.

Covers the label census of a multi-attribute dataset, balancedness, the
closed-form expected draw counts for seeing every useful pair under random
pairing (exact) and under attribute-cycling scheduling (upper bound), the
criterion for when the cycling schedule wins, and Monte Carlo oracles for
all of it.

Conventions pinned here because they change the numbers:

* Pairs are ordered and drawn with replacement, so self-pairs count as
  draws and a census with m images has m*m possible pairs.
* The cycling scheduler draws directly from carriers x non-carriers of the
  current attribute and every draw counts toward the iteration total,
  whichever attribute produced it.
* For the cycling scheduler the collection target is every ordered pair it
  can produce, i.e. pairs (u, v) where u carries and v lacks some
  scheduled attribute. Pairs with no such orientation (e.g. u's label is
  all zeros) are unreachable by that schedule, so they are not waited on;
  the closed-form bound is validated as an upper bound on this quantity.
* Harmonic sums are accumulated smallest term first in double precision.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import kernels
from .errors import (
    DegenerateAttributeError,
    DegenerateBoundError,
    NoUsefulPairsError,
    SchedulerExhaustedError,
)

log = logging.getLogger(__name__)

CHUNK_WORDS = 4096


def canonical_patterns(n: int) -> list[tuple[int, ...]]:
    """All n-bit label patterns in binary order, first attribute most significant."""
    return [tuple(bits) for bits in product((0, 1), repeat=n)]


@dataclass(frozen=True)
class LabelCensus:
    """Image counts per label pattern: counts[l] = number of images labeled l."""

    n: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("census needs at least one attribute")
        if len(self.counts) != 2 ** self.n:
            raise ValueError(
                f"census for n={self.n} needs {2 ** self.n} counts, got {len(self.counts)}")
        if any(c < 0 for c in self.counts):
            raise ValueError("census counts must be non-negative")

    @classmethod
    def from_counts(cls, counts) -> "LabelCensus":
        counts = tuple(int(c) for c in counts)
        n = int(len(counts)).bit_length() - 1
        if 2 ** n != len(counts):
            raise ValueError(f"census length {len(counts)} is not a power of two")
        return cls(n=n, counts=counts)

    @classmethod
    def from_labels(cls, labels) -> "LabelCensus":
        labels = [tuple(int(b) for b in lab) for lab in labels]
        if not labels:
            raise ValueError("cannot build a census from an empty label list")
        n = len(labels[0])
        patterns = canonical_patterns(n)
        index = {p: k for k, p in enumerate(patterns)}
        counts = [0] * len(patterns)
        for lab in labels:
            if len(lab) != n or any(b not in (0, 1) for b in lab):
                raise ValueError(f"malformed label {lab}")
            counts[index[lab]] += 1
        return cls(n=n, counts=tuple(counts))

    @property
    def m(self) -> int:
        return sum(self.counts)

    @property
    def patterns(self) -> list[tuple[int, ...]]:
        return canonical_patterns(self.n)

    def count(self, pattern) -> int:
        return self.counts[self.patterns.index(tuple(pattern))]

    def as_dict(self) -> dict[tuple[int, ...], int]:
        return dict(zip(self.patterns, self.counts))

    def side_totals(self, s: int) -> tuple[int, int]:
        """(images carrying attribute s, images lacking it); s is 1-based."""
        if not 1 <= s <= self.n:
            raise IndexError(f"attribute index {s} out of range 1..{self.n}")
        pos = sum(c for p, c in zip(self.patterns, self.counts) if p[s - 1] == 1)
        return pos, self.m - pos

    def expand_labels(self) -> list[tuple[int, ...]]:
        """One label per image, pattern-major in canonical order."""
        out = []
        for p, c in zip(self.patterns, self.counts):
            out.extend([p] * c)
        return out


# -- closed forms ------------------------------------------------------------


def harmonic(k: int) -> float:
    """H_k = 1 + 1/2 + ... + 1/k, summed smallest term first. H_0 = 0."""
    if k < 0:
        raise ValueError("harmonic index must be non-negative")
    total = 0.0
    for i in range(k, 0, -1):
        total += 1.0 / i
    return total


def balancedness(census: LabelCensus, s: int) -> float:
    """Ratio of images carrying attribute s to images lacking it (rho_s)."""
    pos, neg = census.side_totals(s)
    if neg == 0:
        raise DegenerateAttributeError(
            f"attribute {s} is never 0; balancedness undefined")
    return pos / neg


def criterion_value(rho: float) -> float:
    """(rho+1)^2 / (2 rho): same value at rho and 1/rho, minimum 2 at rho=1."""
    return (rho + 1.0) ** 2 / (2.0 * rho)


def criterion_margin(census: LabelCensus) -> tuple[float, bool]:
    """Smallest per-attribute criterion value, and whether n clears it.

    When n does, the cycling schedule is expected to need no more draws
    than random pairing.
    """
    values = []
    for s in range(1, census.n + 1):
        rho = balancedness(census, s)
        if rho == 0.0:
            raise DegenerateAttributeError(
                f"attribute {s} is never 1; criterion undefined")
        values.append(criterion_value(rho))
    value = min(values)
    return value, census.n <= value


def coupon_expectation(m: int, k: int) -> float:
    """Expected uniform draws from m items to see a fixed k-subset: m * H_k."""
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= m, got k={k}, m={m}")
    return m * harmonic(k)


def useful_pair_count(census: LabelCensus) -> int:
    """Ordered pairs with different labels: m^2 - sum_i m_i^2."""
    return census.m ** 2 - sum(c * c for c in census.counts)


def expected_random_pairs(census: LabelCensus) -> float:
    """Expected random ordered draws to see every useful pair: m^2 * H_U."""
    useful = useful_pair_count(census)
    if useful == 0:
        raise NoUsefulPairsError("census has a single label pattern; no useful pairs")
    return census.m ** 2 * harmonic(useful)


def _merged_square_sum(census: LabelCensus, s: int) -> int:
    """sum over patterns-without-s of (m_with + m_without)^2."""
    counts = census.as_dict()
    total = 0
    for rest in product((0, 1), repeat=census.n - 1):
        with_s = rest[: s - 1] + (1,) + rest[s - 1:]
        without_s = rest[: s - 1] + (0,) + rest[s - 1:]
        total += (counts[with_s] + counts[without_s]) ** 2
    return total


def expected_iterative_bound(census: LabelCensus) -> float:
    """Upper bound on expected cycling-schedule draws to see every useful pair.

    n * max_s of 2 * (carriers_s * non_carriers_s) * H(m^2 - merged square
    sum at s). Empty merged classes contribute zero and are harmless; if
    every attribute's harmonic length vanishes (always the case for n=1)
    the bound carries no information and callers should simulate instead.
    """
    m2 = census.m ** 2
    best = 0.0
    informative = False
    for s in range(1, census.n + 1):
        pos, neg = census.side_totals(s)
        length = m2 - _merged_square_sum(census, s)
        if length > 0 and pos > 0 and neg > 0:
            informative = True
            best = max(best, 2.0 * pos * neg * harmonic(length))
    if not informative:
        raise DegenerateBoundError(
            "bound degenerates (harmonic length 0 for every attribute, e.g. n=1); "
            "use simulate_collection instead")
    return census.n * best


# -- pair sources ------------------------------------------------------------


@dataclass(frozen=True)
class UsefulPair:
    """Oriented pair: image at index_a carries the attribute, index_b lacks it."""

    index_a: int
    index_b: int
    attribute: int


@dataclass
class SamplerState:
    """Cycling scheduler state over a labeled dataset."""

    n: int
    pos_indices: list[np.ndarray]
    neg_indices: list[np.ndarray]
    rng: np.random.Generator
    next_attribute: int = 1
    _warned: set[int] = field(default_factory=set)

    @classmethod
    def from_labels(cls, labels, rng: np.random.Generator) -> "SamplerState":
        labels = np.asarray(list(labels), dtype=np.int64)
        if labels.ndim != 2:
            raise ValueError("labels must be a (images, attributes) table")
        n = labels.shape[1]
        pos = [np.flatnonzero(labels[:, s] == 1) for s in range(n)]
        neg = [np.flatnonzero(labels[:, s] == 0) for s in range(n)]
        return cls(n=n, pos_indices=pos, neg_indices=neg, rng=rng)


def next_pairs(state: SamplerState, count: int = 1) -> tuple[int, list[UsefulPair]]:
    """Draw ``count`` oriented pairs at the currently scheduled attribute.

    The attribute counter advances once per call; attributes with an empty
    side are skipped with a warning (logged once each). Raises
    :class:`SchedulerExhaustedError` when every attribute is degenerate.
    """
    for _ in range(state.n):
        s = state.next_attribute
        state.next_attribute = s % state.n + 1
        pos, neg = state.pos_indices[s - 1], state.neg_indices[s - 1]
        if len(pos) == 0 or len(neg) == 0:
            if s not in state._warned:
                state._warned.add(s)
                log.warning("attribute %d has an empty label side; skipping it", s)
            continue
        ia = state.rng.integers(0, len(pos), size=count)
        ib = state.rng.integers(0, len(neg), size=count)
        return s, [UsefulPair(int(pos[a]), int(neg[b]), s) for a, b in zip(ia, ib)]
    raise SchedulerExhaustedError("every attribute has an empty label side")


def next_pair(state: SamplerState) -> UsefulPair:
    """One oriented pair at the scheduled attribute; the schedule then advances."""
    _, pairs = next_pairs(state, 1)
    return pairs[0]


def random_pair(labels, rng: np.random.Generator) -> tuple[tuple[int, int], bool]:
    """Two independent uniform draws with replacement (ordered). The flag
    says whether the labels differ anywhere."""
    labels = np.asarray(list(labels), dtype=np.int64)
    m = labels.shape[0]
    if m == 0:
        raise ValueError("cannot draw from an empty dataset")
    a = int(rng.integers(0, m))
    b = int(rng.integers(0, m))
    return (a, b), bool((labels[a] != labels[b]).any())


def orient_random_pair(labels, a: int, b: int, rng: np.random.Generator) -> UsefulPair:
    """Turn a useful unordered draw into an oriented pair at one attribute.

    The attribute is chosen uniformly among the positions where the labels
    differ; the image with the 1 bit becomes the carrier side.
    """
    labels = np.asarray(list(labels), dtype=np.int64)
    diff = np.flatnonzero(labels[a] != labels[b])
    if len(diff) == 0:
        raise NoUsefulPairsError(f"images {a} and {b} share a label")
    s = int(diff[rng.integers(0, len(diff))]) + 1
    if labels[a][s - 1] == 1:
        return UsefulPair(a, b, s)
    return UsefulPair(b, a, s)


# -- Monte Carlo -------------------------------------------------------------


def _chunk_source(seed: int, run: int):
    gen = np.random.Generator(np.random.Philox(key=(seed << 64) + run))

    def fill() -> np.ndarray:
        return gen.integers(0, 2 ** 64, size=CHUNK_WORDS, dtype=np.uint64)

    return fill


def _mean_stderr(samples: np.ndarray) -> tuple[float, float]:
    mean = float(samples.mean())
    if len(samples) < 2:
        return mean, 0.0
    return mean, float(samples.std(ddof=1) / np.sqrt(len(samples)))


def simulate_collection(census: LabelCensus, strategy: str, runs: int,
                        seed: int = 0) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the draws needed to collect
    every ordered target pair under the given strategy.

    Runs use counter-based random streams keyed by (seed, run index), so
    the result is independent of execution order.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    if strategy not in ("random", "iterative"):
        raise ValueError(f"unknown strategy {strategy!r}")
    labels = np.asarray(census.expand_labels(), dtype=np.int64)
    m = len(labels)

    if strategy == "random":
        target = useful_pair_count(census)
        if target == 0:
            raise NoUsefulPairsError("census has a single label pattern; no useful pairs")
        ids = np.array([census.patterns.index(tuple(lab)) for lab in labels],
                       dtype=np.int64)
        samples = np.empty(runs, dtype=np.float64)
        for r in range(runs):
            samples[r] = kernels.random_collection_run(ids, target, _chunk_source(seed, r))
        return _mean_stderr(samples)

    pos_lists, neg_lists = [], []
    for s in range(census.n):
        pos = np.flatnonzero(labels[:, s] == 1).astype(np.int64)
        neg = np.flatnonzero(labels[:, s] == 0).astype(np.int64)
        if len(pos) and len(neg):
            pos_lists.append(pos)
            neg_lists.append(neg)
    if not pos_lists:
        raise SchedulerExhaustedError("every attribute has an empty label side")

    reachable = np.zeros((m, m), dtype=bool)
    for pos, neg in zip(pos_lists, neg_lists):
        reachable[np.ix_(pos, neg)] = True
    target = int(reachable.sum())

    pos_flat = np.concatenate(pos_lists)
    neg_flat = np.concatenate(neg_lists)
    pos_len = np.array([len(p) for p in pos_lists], dtype=np.int64)
    neg_len = np.array([len(p) for p in neg_lists], dtype=np.int64)
    pos_off = np.concatenate(([0], np.cumsum(pos_len)[:-1])).astype(np.int64)
    neg_off = np.concatenate(([0], np.cumsum(neg_len)[:-1])).astype(np.int64)

    samples = np.empty(runs, dtype=np.float64)
    for r in range(runs):
        samples[r] = kernels.iterative_collection_run(
            pos_flat, pos_off, pos_len, neg_flat, neg_off, neg_len, m, target,
            _chunk_source(seed, r))
    return _mean_stderr(samples)


def simulate_coupon(m: int, k: int, runs: int, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo oracle for :func:`coupon_expectation`."""
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= m, got k={k}, m={m}")
    if runs < 1:
        raise ValueError("runs must be at least 1")
    samples = np.empty(runs, dtype=np.float64)
    for r in range(runs):
        samples[r] = kernels.coupon_collection_run(m, k, _chunk_source(seed, r))
    return _mean_stderr(samples)
