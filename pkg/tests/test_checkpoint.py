import numpy as np
import pytest

from splicegan import checkpoint as C
from splicegan.errors import CheckpointError
from splicegan.genome import GenomeLayout


def _sample_checkpoint():
    layout = GenomeLayout(piece_sizes=(8, 8), z_size=32)
    rng = np.random.default_rng(0)
    return C.Checkpoint(
        layout=layout,
        meta={"step": "500", "gan_mode": "probability"},
        arrays={
            "enc.w0": rng.normal(size=(6, 4)).astype(np.float32),
            "enc.b0": rng.normal(size=4).astype(np.float32),
            "opt.acc.enc.w0": np.abs(rng.normal(size=(6, 4))).astype(np.float32),
        },
    )


def test_roundtrip_preserves_values(tmp_path):
    path = tmp_path / "m.ckpt"
    ck = _sample_checkpoint()
    C.save(path, ck)
    back = C.load(path)
    assert back.layout == ck.layout
    assert back.meta == ck.meta
    assert set(back.arrays) == set(ck.arrays)
    for name in ck.arrays:
        assert np.array_equal(back.arrays[name], ck.arrays[name])
        assert back.arrays[name].dtype == np.float32


def test_save_load_save_is_byte_identical(tmp_path):
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    C.save(p1, _sample_checkpoint())
    C.save(p2, C.load(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_header_is_text(tmp_path):
    path = tmp_path / "m.ckpt"
    C.save(path, _sample_checkpoint())
    head = path.read_bytes().split(b"end\n")[0].decode("ascii")
    assert head.startswith("SPLICEGAN-CKPT 1\n")
    assert "layout 2 8,8 32" in head
    assert "array enc.w0 6,4 0" in head


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "m.ckpt"
    C.save(path, _sample_checkpoint())
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(CheckpointError, match="truncated"):
        C.load(path)


def test_wrong_magic_rejected(tmp_path):
    path = tmp_path / "m.ckpt"
    path.write_bytes(b"NOT-A-CHECKPOINT\nend\n")
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        C.load(path)


def test_missing_array_lookup():
    ck = _sample_checkpoint()
    with pytest.raises(CheckpointError, match="dec.w0"):
        ck.require("dec.w0")


def test_payloads_are_little_endian_float32(tmp_path):
    path = tmp_path / "m.ckpt"
    arr = np.array([[1.0, -2.0]], dtype=np.float32)
    layout = GenomeLayout(piece_sizes=(1,), z_size=1)
    C.save(path, C.Checkpoint(layout=layout, meta={}, arrays={"x": arr}))
    raw = path.read_bytes()
    payload = raw.split(b"end\n", 1)[1]
    assert payload == arr.astype("<f4").tobytes()
