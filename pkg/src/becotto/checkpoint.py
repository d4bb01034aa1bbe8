"""Binary checkpoints of a wave function with a JSON sidecar.

Layout (little-endian)::

    offset  size  field
    0       8     magic b"BECOTTO1"
    8       4     u32 version
    12      4     u32 N
    16      8     f64 L
    24      8     f64 t
    32      8     f64 omega
    40      8     f64 alpha
    48      8     f64 mu
    56      8     f64 T
    64      16N^3 (re, im) f64 pairs, x index fastest

The sidecar ``<path>.json`` repeats the header fields in readable form.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

__all__ = ["CheckpointError", "CheckpointMeta", "save_checkpoint", "load_checkpoint",
           "MAGIC", "VERSION", "HEADER_SIZE"]

MAGIC = b"BECOTTO1"
VERSION = 1
_HEADER = struct.Struct("<8sII6d")
HEADER_SIZE = _HEADER.size


class CheckpointError(ValueError):
    """Malformed checkpoint file; the message names the byte offset."""


@dataclass
class CheckpointMeta:
    N: int
    L: float = 1.0
    t: float = 0.0
    omega: float = 0.0
    alpha: float = 1.0
    mu: float = 0.0
    T: float = 0.0
    version: int = VERSION


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def save_checkpoint(psi: np.ndarray, meta: CheckpointMeta, path) -> None:
    """Write ``psi`` (shape (N, N, N), index order [ix, iy, iz]) and its sidecar.

    The file is written to a temporary name and renamed, so readers never
    see a partial checkpoint.
    """
    path = Path(path)
    psi = np.asarray(psi)
    N = meta.N
    if psi.shape != (N, N, N):
        raise ValueError(f"field shape {psi.shape} does not match N={N}")
    header = _HEADER.pack(MAGIC, meta.version, N, meta.L, meta.t, meta.omega, meta.alpha, meta.mu, meta.T)
    payload = np.asarray(psi, dtype="<c16").ravel(order="F").tobytes()
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    os.replace(tmp, path)
    with open(_sidecar(path), "w") as fh:
        json.dump(asdict(meta), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> tuple[np.ndarray, CheckpointMeta]:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:8] != MAGIC:
        raise CheckpointError(f"bad magic at offset 0: expected {MAGIC!r}, found {data[:8]!r}")
    if len(data) < HEADER_SIZE:
        raise CheckpointError(f"length mismatch at offset {len(data)}: header needs {HEADER_SIZE} bytes")
    _, version, N, L, t, omega, alpha, mu, T = _HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version} at offset 8 (expected {VERSION})")
    if N == 0:
        raise CheckpointError("invalid grid size 0 at offset 12")
    expected = HEADER_SIZE + 16 * N**3
    if len(data) != expected:
        raise CheckpointError(f"length mismatch at offset {min(len(data), expected)}: "
                              f"expected {expected} bytes for N={N}, found {len(data)}")
    flat = np.frombuffer(data, dtype="<c16", offset=HEADER_SIZE, count=N**3)
    psi = flat.reshape((N, N, N), order="F").astype(np.complex128, order="C")
    return psi, CheckpointMeta(N=N, L=L, t=t, omega=omega, alpha=alpha, mu=mu, T=T, version=version)
