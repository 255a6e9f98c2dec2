"""Single-file checkpoint container.

Layout: an ASCII header (format version, genome layout, free-form metadata,
then a named array directory of name/shape/byte-offset triples) terminated
by an ``end`` line, followed by the concatenated little-endian float32
array payloads. Saving what :func:`load` returned reproduces the file byte
for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError
from .genome import GenomeLayout

MAGIC = "SPLICEGAN-CKPT 1"


@dataclass
class Checkpoint:
    layout: GenomeLayout
    meta: dict[str, str] = field(default_factory=dict)
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def require(self, name: str) -> np.ndarray:
        if name not in self.arrays:
            raise CheckpointError(f"checkpoint is missing array '{name}'")
        return self.arrays[name]


def _check_token(token: str, what: str) -> str:
    if not token or any(c.isspace() for c in token):
        raise CheckpointError(f"{what} must be a non-empty token, got {token!r}")
    return token


def save(path, ckpt: Checkpoint) -> None:
    lines = [MAGIC]
    sizes = ",".join(str(s) for s in ckpt.layout.piece_sizes)
    lines.append(f"layout {ckpt.layout.n} {sizes} {ckpt.layout.z_size}")
    for key, value in ckpt.meta.items():
        _check_token(key, "meta key")
        _check_token(value, f"meta value for '{key}'")
        lines.append(f"meta {key} {value}")
    offset = 0
    payloads = []
    for name, arr in ckpt.arrays.items():
        _check_token(name, "array name")
        if arr.ndim < 1:
            raise CheckpointError(f"array '{name}' must be at least 1-D")
        data = np.ascontiguousarray(arr, dtype="<f4")
        shape = ",".join(str(s) for s in data.shape)
        lines.append(f"array {name} {shape} {offset}")
        payloads.append(data.tobytes())
        offset += len(payloads[-1])
    lines.append("end")
    header = "\n".join(lines) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for blob in payloads:
            fh.write(blob)


def load(path) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0 or raw[:nl].decode("ascii", "replace") != MAGIC:
        raise CheckpointError(f"not a checkpoint file: {path}")

    meta: dict[str, str] = {}
    directory: list[tuple[str, tuple[int, ...], int]] = []
    layout: GenomeLayout | None = None
    pos = nl + 1
    while True:
        nl = raw.find(b"\n", pos)
        if nl < 0:
            raise CheckpointError("header not terminated by 'end'")
        line = raw[pos:nl].decode("ascii")
        pos = nl + 1
        if line == "end":
            break
        parts = line.split(" ")
        if parts[0] == "layout" and len(parts) == 4:
            sizes = tuple(int(s) for s in parts[2].split(","))
            if len(sizes) != int(parts[1]):
                raise CheckpointError(f"layout declares {parts[1]} pieces, lists {len(sizes)}")
            layout = GenomeLayout(piece_sizes=sizes, z_size=int(parts[3]))
        elif parts[0] == "meta" and len(parts) == 3:
            meta[parts[1]] = parts[2]
        elif parts[0] == "array" and len(parts) == 4:
            shape = tuple(int(s) for s in parts[2].split(","))
            directory.append((parts[1], shape, int(parts[3])))
        else:
            raise CheckpointError(f"malformed header line: {line!r}")
    if layout is None:
        raise CheckpointError("header has no layout line")

    payload = raw[pos:]
    arrays: dict[str, np.ndarray] = {}
    for name, shape, offset in directory:
        count = int(np.prod(shape))
        nbytes = count * 4
        if offset + nbytes > len(payload):
            raise CheckpointError(f"array '{name}' payload is truncated")
        flat = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        arrays[name] = flat.reshape(shape).copy()
    return Checkpoint(layout=layout, meta=meta, arrays=arrays)
