"""Binary trajectory dumps: 8-byte header + packed 2-bit step codes.

Layout (all little-endian, documented bit-exactly; see README for the same
table):

    bytes 0-1   magic 0x52 0x57 ("RW")
    byte  2     format version, currently 1
    byte  3     bits 0-5: topology kind (0 torus, 1 tree, 2 lattice)
                bits 6-7: number of unused 2-bit slots in the final byte
    bytes 4-7   topology params: torus -> n as uint32; tree -> b, k as
                uint16 pairs; lattice -> zero
    bytes 8-    step codes, 4 per byte, step i in bits (2*(i%4)) .. (2*(i%4)+1)

Step codes: torus/lattice moves are 0:+x 1:-x 2:+y 3:-y; tree moves index
the deterministic neighbor order of the current vertex (root: children
ascending; otherwise parent first, then children).  Tree dumps therefore
require b <= 3 so codes fit in 2 bits.

Dumps hold steps only; replay supplies the start position (this package
always starts tree walks at the root and torus/lattice walks at the origin).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from . import _kernels, rng
from .errors import CapacityError, UsageError
from .graphs import TorusTopology, TreeTopology
from .walker import Lattice2D

MAGIC = b"RW"
VERSION = 1
_KIND_TORUS = 0
_KIND_TREE = 1
_KIND_LATTICE = 2


def _kind_and_params(topology) -> tuple[int, bytes]:
    if isinstance(topology, TorusTopology):
        return _KIND_TORUS, struct.pack("<I", topology.n)
    if isinstance(topology, TreeTopology):
        if topology.b > 3:
            raise CapacityError("2-bit tree step codes require branching factor <= 3")
        return _KIND_TREE, struct.pack("<HH", topology.b, topology.k)
    if isinstance(topology, Lattice2D):
        return _KIND_LATTICE, b"\x00\x00\x00\x00"
    raise UsageError(f"cannot dump trajectories for {type(topology).__name__}")


def pack_codes(codes: np.ndarray) -> tuple[bytes, int]:
    """Pack 2-bit codes four to a byte; returns (payload, unused trailing slots)."""
    codes = np.asarray(codes, dtype=np.uint8)
    if codes.size and int(codes.max()) > 3:
        raise UsageError("step codes must fit in 2 bits")
    pad = (-len(codes)) % 4
    padded = np.concatenate([codes, np.zeros(pad, dtype=np.uint8)]).reshape(-1, 4)
    shifts = np.array([0, 2, 4, 6], dtype=np.uint8)
    payload = (padded << shifts).sum(axis=1).astype(np.uint8)
    return payload.tobytes(), pad


def unpack_codes(payload: bytes, pad: int) -> np.ndarray:
    raw = np.frombuffer(payload, dtype=np.uint8)
    shifts = np.array([0, 2, 4, 6], dtype=np.uint8)
    codes = ((raw[:, None] >> shifts) & 3).reshape(-1).astype(np.uint8)
    return codes[: len(codes) - pad] if pad else codes


def write_trajectory(path, topology, codes: np.ndarray) -> None:
    """Write one trajectory dump; overwrites ``path``."""
    kind, params = _kind_and_params(topology)
    payload, pad = pack_codes(codes)
    header = MAGIC + bytes([VERSION, kind | (pad << 6)]) + params
    assert len(header) == 8
    Path(path).write_bytes(header + payload)


def read_trajectory(path):
    """Read a dump; returns (topology, codes)."""
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:2] != MAGIC:
        raise UsageError(f"{path}: not a trajectory dump")
    if blob[2] != VERSION:
        raise UsageError(f"{path}: unsupported dump version {blob[2]}")
    kind = blob[3] & 0x3F
    pad = blob[3] >> 6
    if kind == _KIND_TORUS:
        (n,) = struct.unpack("<I", blob[4:8])
        topology = TorusTopology(int(n))
    elif kind == _KIND_TREE:
        b, k = struct.unpack("<HH", blob[4:8])
        topology = TreeTopology(int(b), int(k))
    elif kind == _KIND_LATTICE:
        topology = Lattice2D()
    else:
        raise UsageError(f"{path}: unknown topology kind {kind}")
    return topology, unpack_codes(blob[8:], pad)


def replay_positions(topology, codes: np.ndarray, start=None) -> list:
    """Positions at times 0..len(codes) reached by applying the codes."""
    if isinstance(topology, TreeTopology):
        v = 0 if start is None else int(start)
        out = [v]
        b, first_leaf = topology.b, topology.first_leaf
        for c in codes:
            c = int(c)
            if v == 0:
                if c >= b:
                    raise UsageError(f"code {c} invalid at the root")
                v = 1 + c
            elif c == 0:
                v = (v - 1) // b
            else:
                if v >= first_leaf or c > b:
                    raise UsageError(f"code {c} invalid at vertex {v}")
                v = b * v + c
            out.append(v)
        return out
    wrap = isinstance(topology, TorusTopology)
    n = topology.n if wrap else 0
    x, y = (0, 0) if start is None else start
    out = [(x, y)]
    for c in codes:
        c = int(c)
        if c == 0:
            x += 1
        elif c == 1:
            x -= 1
        elif c == 2:
            y += 1
        else:
            y -= 1
        if wrap:
            x %= n
            y %= n
        out.append((x, y))
    return out


def tree_walk_codes(topology: TreeTopology, seed: int, n_steps: int) -> np.ndarray:
    """Neighbor-order codes of the first ``n_steps`` steps of a tree walk."""
    if topology.b > 3:
        raise CapacityError("2-bit tree step codes require branching factor <= 3")
    out = np.empty(n_steps, dtype=np.uint8)
    _kernels.tree_walk_codes_kernel(
        topology.b,
        topology.k,
        topology.n_k,
        topology.first_leaf,
        np.uint64(seed & rng.MASK64),
        n_steps,
        out,
    )
    return out


def move_codes(seed: int, n_steps: int) -> np.ndarray:
    """Direction codes of a torus/lattice walk (pure function of the stream)."""
    return (rng.outputs(seed, 0, n_steps) >> np.uint64(62)).astype(np.uint8)
