"""Procedural multi-attribute images, analytic attribute detectors, and
dataset I/O.

Each attribute renders into its own pixel region so ground-truth
disentanglement exists and swap success is decidable by inspection of the
image alone:

* attribute 1: horizontal bar at fixed rows
* attribute 2: bright disc in the lower-right quadrant
* attribute 3: one-pixel border frame
* attribute 4: global brightness lift (deliberately overlaps everything,
  the hard case for correlated attributes)

Per-image nuisance variation (background level, bar thickness, disc
radius) plays the role of identity, and bounded uniform noise keeps the
detectors exact: at noise level <= 0.05 every regional mean stays on its
side of the threshold, so the detectors reproduce the generating labels
with certainty.

Datasets persist as a directory of binary portable graymaps plus an
attribute list file (line 1: image count, line 2: attribute names, then
one row per image: filename and +-1 per attribute).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetSpecError, ParseError
from .sampler import LabelCensus, canonical_patterns

MAX_ATTRIBUTES = 4
ATTR_NAMES = ("Bar", "Disc", "Frame", "Bright")

BG_LOW, BG_HIGH = 0.05, 0.20
BRIGHT_SHIFT = 0.3
MAX_NOISE_FOR_EXACT_ORACLE = 0.05

# Region geometry at the base 16x16 resolution; scaled linearly above it.
BAR_ROWS = (2, 4)            # always-lit rows when the bar is on
BAR_COLS = (2, 14)
BAR_EXTRA_ROWS = (4, 5)      # thickness jitter may extend into these
DISC_CENTER = (10.0, 10.0)
DISC_RADIUS = 2.0            # plus up to 1 pixel of jitter
DISC_CORE_RADIUS = 1.4       # detector probe, inside every jittered disc
PATCH_ROWS = (6, 10)         # background probe, clear of all structures
PATCH_COLS = (2, 6)

STRUCT_THRESHOLD = 0.75      # bar/disc/frame: on >= 0.95, off <= 0.55
BRIGHT_THRESHOLD = 0.275     # patch mean: lifted >= 0.30, plain <= 0.25


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic dataset: attribute count, resolution, census
    (images per label pattern), bounded noise level, and a seed."""

    census: LabelCensus
    resolution: int = 16
    noise_level: float = 0.02
    seed: int = 0

    @property
    def n(self) -> int:
        return self.census.n

    def __post_init__(self):
        if not 1 <= self.census.n <= MAX_ATTRIBUTES:
            raise DatasetSpecError(
                f"supported attribute counts are 1..{MAX_ATTRIBUTES}, got {self.census.n}")
        if self.resolution < 16 or self.resolution % 16 != 0:
            raise DatasetSpecError(
                f"resolution must be a positive multiple of 16, got {self.resolution}")
        if self.noise_level < 0:
            raise DatasetSpecError("noise level must be non-negative")


@dataclass
class LabeledImage:
    image: np.ndarray  # (1, h, w) float32 in [0, 1]
    label: tuple[int, ...]


@dataclass
class AttrDataset:
    images: list[LabeledImage]
    attr_names: tuple[str, ...]
    census: LabelCensus = field(init=False)

    def __post_init__(self):
        self.census = LabelCensus.from_labels([im.label for im in self.images])

    def __len__(self) -> int:
        return len(self.images)

    @property
    def n(self) -> int:
        return self.census.n

    def labels(self) -> np.ndarray:
        return np.array([im.label for im in self.images], dtype=np.int64)

    def image_array(self, indices) -> np.ndarray:
        return np.stack([self.images[i].image for i in indices])


def _scale(res: int) -> int:
    return res // 16


def _bar_mask(res: int) -> np.ndarray:
    k = _scale(res)
    mask = np.zeros((res, res), dtype=bool)
    mask[BAR_ROWS[0] * k:BAR_ROWS[1] * k, BAR_COLS[0] * k:BAR_COLS[1] * k] = True
    return mask


def _bar_extra_mask(res: int) -> np.ndarray:
    k = _scale(res)
    mask = np.zeros((res, res), dtype=bool)
    mask[BAR_EXTRA_ROWS[0] * k:BAR_EXTRA_ROWS[1] * k,
         BAR_COLS[0] * k:BAR_COLS[1] * k] = True
    return mask


def _disc_mask(res: int, radius: float) -> np.ndarray:
    k = _scale(res)
    rr, cc = np.mgrid[0:res, 0:res]
    cy, cx = DISC_CENTER[0] * k, DISC_CENTER[1] * k
    return (rr - cy) ** 2 + (cc - cx) ** 2 <= (radius * k) ** 2


def _frame_mask(res: int) -> np.ndarray:
    k = _scale(res)
    mask = np.zeros((res, res), dtype=bool)
    mask[:k, :] = mask[-k:, :] = True
    mask[:, :k] = mask[:, -k:] = True
    return mask


def _patch_mask(res: int) -> np.ndarray:
    k = _scale(res)
    mask = np.zeros((res, res), dtype=bool)
    mask[PATCH_ROWS[0] * k:PATCH_ROWS[1] * k, PATCH_COLS[0] * k:PATCH_COLS[1] * k] = True
    return mask


def render_image(label, res: int, noise_level: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Render one image for an n-bit label; nuisance variation and noise
    come from ``rng``. Returns (1, res, res) float32 in [0, 1]."""
    label = tuple(int(b) for b in label)
    # One draw per nuisance factor regardless of the label, so two images
    # with the same stream differ only through their labels.
    thickness_extra = rng.integers(0, 2)
    radius_jitter = rng.uniform(0.0, 1.0)
    bg = rng.uniform(BG_LOW, BG_HIGH)

    img = np.full((res, res), bg, dtype=np.float64)
    if len(label) >= 1 and label[0]:
        img[_bar_mask(res)] = 1.0
        if thickness_extra:
            img[_bar_extra_mask(res)] = 1.0
    if len(label) >= 2 and label[1]:
        img[_disc_mask(res, DISC_RADIUS + radius_jitter)] = 1.0
    if len(label) >= 3 and label[2]:
        img[_frame_mask(res)] = 1.0
    if len(label) >= 4 and label[3]:
        img += BRIGHT_SHIFT
    if noise_level > 0:
        img += rng.uniform(-noise_level, noise_level, size=img.shape)
    return np.clip(img, 0.0, 1.0)[None, :, :].astype(np.float32)


def synth_dataset(spec: SynthSpec) -> AttrDataset:
    """Generate the dataset the census asks for, pattern-major.

    Every image gets its own counter-based random stream keyed by
    (seed, image index), so regeneration is byte-identical and generation
    order does not matter.
    """
    images: list[LabeledImage] = []
    index = 0
    for pattern, count in zip(spec.census.patterns, spec.census.counts):
        for _ in range(count):
            rng = np.random.Generator(np.random.Philox(key=(spec.seed << 64) + index))
            images.append(LabeledImage(
                image=render_image(pattern, spec.resolution, spec.noise_level, rng),
                label=pattern))
            index += 1
    return AttrDataset(images=images, attr_names=ATTR_NAMES[:spec.n])


def _as_plane(img) -> np.ndarray:
    arr = img.image if isinstance(img, LabeledImage) else np.asarray(img)
    if arr.ndim == 3:
        arr = arr[0]
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DatasetSpecError(f"expected a square grayscale image, got shape {arr.shape}")
    return arr


def oracle_attr(img, s: int) -> int:
    """Analytic attribute detector: 1 if the region statistic clears the
    attribute's threshold. Exact on generated images at noise <= 0.05."""
    plane = _as_plane(img)
    res = plane.shape[0]
    if not 1 <= s <= MAX_ATTRIBUTES:
        raise IndexError(f"attribute index {s} out of range 1..{MAX_ATTRIBUTES}")
    if s == 1:
        return int(plane[_bar_mask(res)].mean() > STRUCT_THRESHOLD)
    if s == 2:
        return int(plane[_disc_mask(res, DISC_CORE_RADIUS)].mean() > STRUCT_THRESHOLD)
    if s == 3:
        return int(plane[_frame_mask(res)].mean() > STRUCT_THRESHOLD)
    return int(plane[_patch_mask(res)].mean() > BRIGHT_THRESHOLD)


def nuisance_features(img) -> np.ndarray:
    """Identity summary: the background level probe. Meaningful for
    datasets without the global-brightness attribute."""
    plane = _as_plane(img)
    return np.array([plane[_patch_mask(plane.shape[0])].mean()])


# -- portable graymaps -------------------------------------------------------


def write_pgm(path, img) -> None:
    """Write a [0, 1] grayscale image as an 8-bit binary graymap (P5)."""
    plane = _as_plane(img)
    quant = np.round(np.clip(plane, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = quant.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(quant.tobytes())


def _pgm_tokens(raw: bytes):
    """Header tokens of a graymap, skipping comments."""
    pos = 0
    while True:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos:pos + 1] == b"#":
            eol = raw.find(b"\n", pos)
            pos = len(raw) if eol < 0 else eol + 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("unexpected end of graymap header")
        yield raw[start:pos].decode("ascii"), pos


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) or ASCII (P2) 8-bit graymap to float32 in [0, 1]."""
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens = _pgm_tokens(raw)
    magic, _ = next(tokens)
    if magic not in ("P5", "P2"):
        raise ParseError(f"not a graymap (magic {magic!r}): {path}")
    (w, _), (h, _), (maxval, pos) = (next(tokens) for _ in range(3))
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise ParseError(f"unsupported graymap maxval {maxval} in {path}")
    if magic == "P5":
        start = pos + 1  # single whitespace byte after maxval
        pixels = np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=start)
        if pixels.size != w * h:
            raise ParseError(f"graymap payload truncated in {path}")
    else:
        values = raw[pos:].split()
        if len(values) != w * h:
            raise ParseError(f"expected {w * h} ASCII samples, got {len(values)} in {path}")
        pixels = np.array([int(v) for v in values], dtype=np.uint8)
    return (pixels.reshape(h, w).astype(np.float32) / 255.0)


def _resize_nearest(plane: np.ndarray, res: int) -> np.ndarray:
    h, w = plane.shape
    rows = (np.arange(res) * h // res).clip(0, h - 1)
    cols = (np.arange(res) * w // res).clip(0, w - 1)
    return plane[np.ix_(rows, cols)]


# -- attribute list format ---------------------------------------------------


def save_dataset(ds: AttrDataset, out_dir, attr_file_name: str = "attributes.txt",
                 stem: str = "img") -> str:
    """Persist images as graymaps plus an attribute list file; returns the
    attribute file path."""
    os.makedirs(out_dir, exist_ok=True)
    names = []
    for k, item in enumerate(ds.images):
        name = f"{stem}_{k:05d}.pgm"
        write_pgm(os.path.join(out_dir, name), item.image)
        names.append(name)
    attr_path = os.path.join(out_dir, attr_file_name)
    with open(attr_path, "w", encoding="ascii") as fh:
        fh.write(f"{len(ds.images)}\n")
        fh.write(" ".join(ds.attr_names) + "\n")
        for name, item in zip(names, ds.images):
            bits = " ".join("1" if b else "-1" for b in item.label)
            fh.write(f"{name} {bits}\n")
    return attr_path


def load_attr_list(image_dir, attr_file, resolution: int | None = None,
                   attributes: list[str] | None = None) -> AttrDataset:
    """Load a dataset from an attribute list file plus an image directory.

    Rows map -1 to label 0 and +1 to label 1. ``attributes`` selects a
    subset of columns by name, in the order given. Images are rescaled to
    ``resolution`` when requested. Malformed input raises
    :class:`ParseError` with the offending line number.
    """
    with open(attr_file, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("attribute file is empty", line=1)
    try:
        declared = int(lines[0].strip())
    except ValueError:
        raise ParseError(f"expected an image count, got {lines[0]!r}", line=1)
    if len(lines) < 2:
        raise ParseError("missing attribute name header", line=2)
    all_names = lines[1].split()
    if not all_names:
        raise ParseError("attribute name header is empty", line=2)

    if attributes:
        try:
            cols = [all_names.index(a) for a in attributes]
        except ValueError as exc:
            missing = next(a for a in attributes if a not in all_names)
            raise ParseError(f"unknown attribute name {missing!r}", line=2) from exc
        names = tuple(attributes)
    else:
        cols = list(range(len(all_names)))
        names = tuple(all_names)

    images: list[LabeledImage] = []
    row_lines = [(k + 3, ln) for k, ln in enumerate(lines[2:]) if ln.strip()]
    for lineno, ln in row_lines:
        parts = ln.split()
        if len(parts) != 1 + len(all_names):
            raise ParseError(
                f"expected a filename and {len(all_names)} attribute values, "
                f"got {len(parts)} fields", line=lineno)
        fname = parts[0]
        try:
            raw_bits = [int(v) for v in parts[1:]]
        except ValueError:
            raise ParseError(f"non-integer attribute value in row for {fname}", line=lineno)
        if any(v not in (-1, 1) for v in raw_bits):
            raise ParseError(f"attribute values must be +-1 in row for {fname}", line=lineno)
        label = tuple(1 if raw_bits[c] == 1 else 0 for c in cols)
        path = os.path.join(image_dir, fname)
        if not os.path.exists(path):
            raise ParseError(f"image file not found: {path}", line=lineno)
        if not fname.lower().endswith(".pgm"):
            raise ParseError(f"unsupported image format (need .pgm): {fname}", line=lineno)
        plane = read_pgm(path)
        if resolution is not None and plane.shape != (resolution, resolution):
            plane = _resize_nearest(plane, resolution)
        images.append(LabeledImage(image=plane[None, :, :], label=label))

    if len(images) != declared:
        raise ParseError(
            f"header declares {declared} images but {len(images)} rows were read",
            line=len(lines) + 1)
    return AttrDataset(images=images, attr_names=names)


def split_train_test(ds: AttrDataset, ratio: float = 0.9,
                     seed: int = 0) -> tuple[AttrDataset, AttrDataset]:
    """Deterministic shuffled split; the first ``ratio`` share trains."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    if len(ds) == 0:
        raise ValueError("cannot split an empty dataset")
    rng = np.random.Generator(np.random.Philox(key=seed))
    order = rng.permutation(len(ds))
    cut = int(len(ds) * ratio)
    train = AttrDataset(images=[ds.images[i] for i in order[:cut]],
                        attr_names=ds.attr_names)
    test = AttrDataset(images=[ds.images[i] for i in order[cut:]],
                       attr_names=ds.attr_names)
    return train, test
