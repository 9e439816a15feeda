"""Binary checkpoint files for a single real field on a periodic grid.

Layout (all little-endian, no padding): the 6-byte magic ``SEMZK1``, a u32
format version, u32 grid dimensions nx and ny, f64 domain sizes lx and ly,
the f64 simulation time, a u8 equation tag, then nx*ny f64 field values in
row-major order.  Round trips are bit-exact, which is what makes restart
equivalence checks meaningful.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .spectral import Grid2D, RealField

__all__ = [
    "MAGIC",
    "VERSION",
    "EQUATION_TAGS",
    "Snapshot",
    "write_snapshot",
    "read_snapshot",
]

MAGIC = b"SEMZK1"
VERSION = 1

#: stable on-disk codes for the equation kinds
EQUATION_TAGS = {"linear": 0, "zk": 1, "sem": 2, "sem_on_soliton": 3}
_TAG_NAMES = {v: k for k, v in EQUATION_TAGS.items()}

_HEADER = struct.Struct("<6sIIIdddB")


@dataclass(frozen=True)
class Snapshot:
    """A decoded checkpoint: grid geometry, time stamp, equation, field values."""

    grid: Grid2D
    time: float
    equation: str
    values: np.ndarray

    def field(self) -> RealField:
        """The payload as a live field on the reconstructed grid."""
        return RealField(self.grid, self.values.copy())


def write_snapshot(path, field: RealField, *, time: float,
                   equation: str = "zk") -> None:
    """Write one field to `path` in the checkpoint format.

    `equation` must be one of the known kind names; it is stored as a tag so
    a restarted run can verify it resumes the same dynamics.
    """
    if equation not in EQUATION_TAGS:
        raise ValueError(f"unknown equation kind {equation!r}")
    if not np.isfinite(time):
        raise ValueError("snapshot time must be finite")
    grid = field.grid
    header = _HEADER.pack(MAGIC, VERSION, grid.nx, grid.ny,
                          grid.lx, grid.ly, float(time),
                          EQUATION_TAGS[equation])
    payload = np.ascontiguousarray(field.values, dtype="<f8")
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(payload.tobytes())


def read_snapshot(path) -> Snapshot:
    """Read and validate a checkpoint written by :func:`write_snapshot`."""
    with open(path, "rb") as handle:
        raw = handle.read()
    if len(raw) < _HEADER.size:
        raise ValueError("bad snapshot magic/version: header incomplete")
    magic, version, nx, ny, lx, ly, time, tag = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != VERSION:
        raise ValueError(
            f"bad snapshot magic/version: got {magic!r} v{version}, "
            f"expected {MAGIC!r} v{VERSION}")
    if tag not in _TAG_NAMES:
        raise ValueError(f"unknown equation tag {tag} in snapshot")
    expected = _HEADER.size + 8 * nx * ny
    if len(raw) < expected:
        raise ValueError(
            f"snapshot truncated: expected {expected} bytes, got {len(raw)}")
    if len(raw) > expected:
        raise ValueError(
            f"snapshot has trailing data: expected {expected} bytes, "
            f"got {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8", count=nx * ny,
                           offset=_HEADER.size).reshape(nx, ny).copy()
    grid = Grid2D(nx, ny, lx, ly)
    return Snapshot(grid, time, _TAG_NAMES[tag], values)
