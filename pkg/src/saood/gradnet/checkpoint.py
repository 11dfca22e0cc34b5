"""Binary checkpoint format.

Layout (all integers and reals little-endian)::

    offset  size        field
    0       8           magic b"SAOODCK\\x00"
    8       4           uint32 format version (currently 1)
    12      4           uint32 L, number of entries in layer_sizes
    16      8*L         uint64 layer_sizes
    16+8L   8*P         float64 flat parameters, P = total_dim

The flat vector lists, layer by layer, the weight matrix in row-major
``(out, in)`` order followed by its bias.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .net import ParameterSet

MAGIC = b"SAOODCK\x00"
VERSION = 1


def dumps(params):
    sizes = params.layer_sizes
    head = MAGIC + struct.pack("<II", VERSION, len(sizes)) + struct.pack(f"<{len(sizes)}Q", *sizes)
    return head + params.flat().astype("<f8").tobytes()


def loads(blob):
    if blob[:8] != MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    version, n = struct.unpack_from("<II", blob, 8)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    sizes = list(struct.unpack_from(f"<{n}Q", blob, 16))
    vec = np.frombuffer(blob, dtype="<f8", offset=16 + 8 * n)
    return ParameterSet.from_flat(sizes, vec.astype(np.float64))


def save(path, params):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(dumps(params))
    os.replace(tmp, path)


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
