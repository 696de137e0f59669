"""Counter-based random streams and reduction helpers.

Every random draw in the package flows through a Philox generator whose
128-bit key is derived from a tuple of seeds, purpose tags and indices.
Trial k therefore never depends on how many trials were drawn before it,
which makes results identical under any execution order or worker count.

The ``det_*`` helpers compute dot products through ``np.einsum`` with
optimization disabled: a fixed-order reduction that does not change with
BLAS threading, so benchmark outputs stay byte-reproducible.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np


def derive_key(*parts) -> int:
    """Hash a tuple of ints / floats / strings into a 128-bit stream key."""
    h = hashlib.blake2b(digest_size=16)
    for p in parts:
        if isinstance(p, str):
            raw = p.encode("utf-8")
            h.update(b"s" + len(raw).to_bytes(4, "little") + raw)
        elif isinstance(p, (bool, np.bool_)):
            h.update(b"b" + bytes([int(p)]))
        elif isinstance(p, (int, np.integer)):
            v = int(p)
            raw = v.to_bytes(max(1, (v.bit_length() + 8) // 8), "little", signed=True)
            h.update(b"i" + len(raw).to_bytes(4, "little") + raw)
        elif isinstance(p, (float, np.floating)):
            h.update(b"f" + struct.pack("<d", float(p)))
        else:
            raise TypeError(f"cannot derive a stream key from {type(p).__name__}")
    return int.from_bytes(h.digest(), "little")


def stream(*parts) -> np.random.Generator:
    """Fresh counter-based generator keyed by the given parts."""
    return np.random.Generator(np.random.Philox(key=derive_key(*parts)))


def det_dot(a: np.ndarray, b: np.ndarray) -> float:
    """Fixed-order inner product of two 1-D arrays."""
    return float(np.einsum("i,i->", a, b, optimize=False))


def det_matvec(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Fixed-order (n, d) @ (d,) product."""
    return np.einsum("ij,j->i", mat, vec, optimize=False)


def det_matmat(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Fixed-order (n, d) @ (d, k) product."""
    return np.einsum("ij,jk->ik", a, b, optimize=False)
