"""Binary containers, text exports and atomic file writes.

Binary files start with an 8-byte header: a 4-byte magic (``LUKA``,
``LABL`` or ``PMAP``) followed by a little-endian 32-bit word packing the
format version (high 4 bits), a kind code (next 4 bits) and a length
(low 24 bits).  The payload is little-endian int32.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .labels import LabelProcess
from .maps import PointedMap
from .paths import LukasiewiczPath

__all__ = [
    "VERSION",
    "pack_header",
    "unpack_header",
    "atomic_write",
    "write_path",
    "read_path",
    "path_to_ndjson",
    "path_from_ndjson",
    "write_labels",
    "read_labels",
    "write_map",
    "read_map",
    "looptree_edges_csv",
    "map_edges_csv",
    "process_csv",
    "covering_csv",
    "dump_json",
    "table_csv",
    "path_bytes",
    "path_from_bytes",
]

VERSION = 1
_HEADER = struct.Struct("<4sI")
_KINDS = {"bridge": 0, "excursion": 1}
_MAX_LEN = (1 << 24) - 1
_INT32 = np.dtype("<i4")


def pack_header(magic, kind, length, version=VERSION):
    if not 0 <= length <= _MAX_LEN:
        raise ValidationError(f"length {length} does not fit the 24-bit header field")
    return _HEADER.pack(magic, (version << 28) | (kind << 24) | length)


def unpack_header(buf, magic):
    if len(buf) < _HEADER.size:
        raise ValidationError("truncated header")
    got, word = _HEADER.unpack_from(buf)
    if got != magic:
        raise ValidationError(f"bad magic {got!r}, expected {magic!r}")
    version, kind, length = word >> 28, (word >> 24) & 0xF, word & _MAX_LEN
    if version != VERSION:
        raise ValidationError(f"unsupported format version {version}")
    return kind, length


def atomic_write(path, data):
    """Write bytes or text to ``path`` through a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _payload(buf, count):
    data = np.frombuffer(buf, dtype=_INT32, offset=_HEADER.size)
    if data.size != count:
        raise ValidationError(f"payload has {data.size} integers, expected {count}")
    return data.astype(np.int64)


# paths ---------------------------------------------------------------


def path_bytes(path):
    x = np.asarray(path.increments, dtype=_INT32)
    return pack_header(b"LUKA", _KINDS[path.kind], path.n) + x.tobytes()


def path_from_bytes(buf):
    kind, n = unpack_header(buf, b"LUKA")
    names = {v: k for k, v in _KINDS.items()}
    if kind not in names:
        raise ValidationError(f"unknown path kind code {kind}")
    return LukasiewiczPath(_payload(buf, n + 1), names[kind])


def write_path(fname, path):
    return atomic_write(fname, path_bytes(path))


def read_path(fname):
    return path_from_bytes(Path(fname).read_bytes())


def path_to_ndjson(paths):
    return "".join(json.dumps(p.to_dict(), separators=(",", ":")) + "\n" for p in paths)


def path_from_ndjson(text):
    return [LukasiewiczPath.from_dict(json.loads(line)) for line in text.splitlines() if line]


# labels --------------------------------------------------------------


def write_labels(fname, Z):
    """Integer contour label process ``Z_0..Z_n``."""
    z = np.asarray(getattr(Z, "values", Z))
    if z.ndim != 1 or not np.array_equal(z, np.round(z)):
        raise ValidationError("only integer label processes fit the LABL container")
    buf = pack_header(b"LABL", 0, z.size - 1) + z.astype(_INT32).tobytes()
    return atomic_write(fname, buf)


def read_labels(fname):
    buf = Path(fname).read_bytes()
    _, n = unpack_header(buf, b"LABL")
    return LabelProcess.discrete(_payload(buf, n + 1))


# maps ----------------------------------------------------------------


def write_map(fname, m):
    """Vertex count, root edge, edges, rotation and labels of a pointed map."""
    head = np.array([m.V, *m.root_edge], dtype=_INT32)
    body = np.concatenate((head, m.edges.ravel(), m.sigma, m.labels)).astype(_INT32)
    return atomic_write(fname, pack_header(b"PMAP", 0, m.E) + body.tobytes())


def read_map(fname):
    buf = Path(fname).read_bytes()
    _, E = unpack_header(buf, b"PMAP")
    data = np.frombuffer(buf, dtype=_INT32, offset=_HEADER.size).astype(np.int64)
    V = int(data[0])
    if data.size != 3 + 4 * E + V:
        raise ValidationError("PMAP payload size does not match its header")
    edges = data[3: 3 + 2 * E].reshape(E, 2)
    sigma = data[3 + 2 * E: 3 + 4 * E]
    labels = data[3 + 4 * E:]
    return PointedMap(V, edges, sigma, labels, (int(data[1]), int(data[2])))


# text exports ----------------------------------------------------------


def table_csv(header, rows):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return out.getvalue()


def looptree_edges_csv(lt):
    e = lt.edges
    return table_csv(("vertex_u", "vertex_v", "cycle_id"),
                     zip(e[:, 0].tolist(), e[:, 1].tolist(), lt.edge_cycle.tolist()))


def map_edges_csv(m):
    left, right = m.faces_of_edges()
    return table_csv(("u", "v", "face_left", "face_right"),
                     zip(m.edges[:, 0].tolist(), m.edges[:, 1].tolist(), left.tolist(),
                         right.tolist()))


def process_csv(Z):
    return table_csv(("time", "value"), zip(Z.times.tolist(), np.asarray(Z.values).tolist()))


def covering_csv(eps, counts):
    eps = np.asarray(eps, dtype=float)
    counts = np.asarray(counts, dtype=float)
    return table_csv(("log_inv_eps", "log_N"),
                     zip(np.log(1.0 / eps).tolist(), np.log(counts).tolist()))


def dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
