import json
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from becotto.checkpoint import (HEADER_SIZE, MAGIC, CheckpointError, CheckpointMeta, load_checkpoint,
                                save_checkpoint)


def _state(N, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((N, N, N)) + 1j * rng.standard_normal((N, N, N))


@given(st.integers(0, 1000), st.floats(-1e3, 1e3), st.floats(0, 1))
def test_roundtrip_bit_exact(tmp_path_factory, seed, t, mu):
    path = tmp_path_factory.mktemp("ck") / "s.bin"
    psi = _state(16, seed)
    meta = CheckpointMeta(N=16, L=1.0, t=t, omega=0.3, alpha=0.5, mu=mu, T=1e-6)
    save_checkpoint(psi, meta, path)
    out, m2 = load_checkpoint(path)
    assert out.tobytes() == psi.tobytes()
    assert m2 == meta


def test_layout(tmp_path):
    N = 8
    psi = _state(N)
    path = tmp_path / "s.bin"
    save_checkpoint(psi, CheckpointMeta(N=N, L=2.0, t=1.5, omega=0.3, alpha=1.0, mu=0.2, T=3e-6), path)
    data = path.read_bytes()
    assert data[:8] == MAGIC == b"BECOTTO1"
    assert struct.unpack_from("<II", data, 8) == (1, N)
    assert struct.unpack_from("<6d", data, 16) == (2.0, 1.5, 0.3, 1.0, 0.2, 3e-6)
    assert len(data) == HEADER_SIZE + 16 * N**3 == 64 + 16 * N**3
    # x index fastest: second stored value is psi[1, 0, 0]
    re, im = struct.unpack_from("<2d", data, HEADER_SIZE + 16)
    assert complex(re, im) == psi[1, 0, 0]
    re, im = struct.unpack_from("<2d", data, HEADER_SIZE + 16 * N)
    assert complex(re, im) == psi[0, 1, 0]
    side = json.loads((tmp_path / "s.bin.json").read_text())
    assert side["N"] == N and side["mu"] == 0.2 and side["version"] == 1


def test_truncated_file(tmp_path):
    path = tmp_path / "s.bin"
    save_checkpoint(_state(8), CheckpointMeta(N=8), path)
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(CheckpointError, match="length mismatch"):
        load_checkpoint(path)
    path.write_bytes(MAGIC + b"\x01\x00")
    with pytest.raises(CheckpointError, match="offset"):
        load_checkpoint(path)


def test_wrong_magic_and_version(tmp_path):
    path = tmp_path / "s.bin"
    save_checkpoint(_state(8), CheckpointMeta(N=8), path)
    raw = bytearray(path.read_bytes())
    bad = bytearray(raw)
    bad[:8] = b"NOTBEC01"
    path.write_bytes(bytes(bad))
    with pytest.raises(CheckpointError, match="magic at offset 0"):
        load_checkpoint(path)
    bad = bytearray(raw)
    struct.pack_into("<I", bad, 8, 9)
    path.write_bytes(bytes(bad))
    with pytest.raises(CheckpointError, match="offset 8"):
        load_checkpoint(path)


def test_shape_mismatch_rejected(tmp_path):
    with pytest.raises(ValueError):
        save_checkpoint(_state(8), CheckpointMeta(N=16), tmp_path / "x.bin")
