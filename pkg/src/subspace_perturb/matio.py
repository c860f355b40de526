"""Matrix file formats used by the command-line interface.

Two formats are supported:

* CSV: the first line holds the shape ``n,k``; each following line is one
  row of the matrix, written with ``repr`` so values round-trip exactly.
* SPB1 binary: the 4-byte magic ``SPB1``, a little-endian ``uint32`` kind
  flag (0 real, 1 complex), two little-endian ``uint64`` dimensions, then the
  entries in row-major order as little-endian ``float64``. Complex entries are
  stored as interleaved real/imaginary pairs.

The file kind is chosen from the extension: ``.spb`` selects the binary
format, anything else CSV.
"""

import os
import struct
import tempfile

import numpy as np

from .exceptions import FormatError

__all__ = [
    "read_matrix",
    "write_matrix",
    "read_matrix_csv",
    "write_matrix_csv",
    "read_matrix_binary",
    "write_matrix_binary",
    "atomic_write_bytes",
]

MAGIC = b"SPB1"
_HEADER = struct.Struct("<4sIQQ")


def atomic_write_bytes(path, data):
    """Write ``data`` to ``path`` via a temporary file and an atomic rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_value(x):
    return repr(float(x))


def matrix_to_csv(a):
    """Serialize a real matrix to the CSV text format."""
    a = np.asarray(a)
    if np.iscomplexobj(a):
        raise FormatError("complex matrices can only be stored in the binary format")
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise FormatError("only two-dimensional arrays can be written")
    lines = [f"{a.shape[0]},{a.shape[1]}"]
    lines.extend(",".join(_format_value(x) for x in row) for row in a)
    return "\n".join(lines) + "\n"


def csv_to_matrix(text):
    """Parse the CSV text format."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty matrix file")
    try:
        n, k = (int(tok) for tok in lines[0].split(","))
    except ValueError as exc:
        raise FormatError(f"bad shape header {lines[0]!r}; expected 'n,k'") from exc
    if n < 1 or k < 1:
        raise FormatError(f"invalid shape {n}x{k}")
    rows = lines[1:]
    if len(rows) != n:
        raise FormatError(f"header declares {n} rows, found {len(rows)}")
    out = np.empty((n, k))
    for i, row in enumerate(rows):
        toks = row.split(",")
        if len(toks) != k:
            raise FormatError(f"row {i} has {len(toks)} entries, expected {k}")
        try:
            out[i] = [float(t) for t in toks]
        except ValueError as exc:
            raise FormatError(f"non-numeric entry in row {i}") from exc
    if not np.all(np.isfinite(out)):
        raise FormatError("matrix has non-finite entries")
    return out


def matrix_to_binary(a):
    """Serialize a real or complex matrix to the SPB1 binary format."""
    a = np.asarray(a)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise FormatError("only two-dimensional arrays can be written")
    if np.iscomplexobj(a):
        kind = 1
        payload = np.ascontiguousarray(a, dtype="<c16").view("<f8")
    else:
        kind = 0
        payload = np.ascontiguousarray(a, dtype="<f8")
    return _HEADER.pack(MAGIC, kind, a.shape[0], a.shape[1]) + payload.tobytes()


def binary_to_matrix(data, allow_complex=False):
    """Parse the SPB1 binary format.

    Parameters
    ----------
    data : bytes
    allow_complex : bool
        Complex payloads are rejected unless this is set.
    """
    if len(data) < _HEADER.size:
        raise FormatError("truncated binary matrix header")
    magic, kind, n, k = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError("bad magic bytes; not an SPB1 file")
    if kind not in (0, 1):
        raise FormatError(f"unknown kind flag {kind}")
    if kind == 1 and not allow_complex:
        raise FormatError("complex matrix given where a real matrix is required")
    if n < 1 or k < 1:
        raise FormatError(f"invalid shape {n}x{k}")
    width = 2 if kind == 1 else 1
    expected = _HEADER.size + 8 * n * k * width
    if len(data) != expected:
        raise FormatError(f"payload size {len(data)} does not match shape {n}x{k}")
    vals = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if kind == 1:
        out = vals.view("<c16").reshape(n, k).astype(np.complex128)
    else:
        out = vals.reshape(n, k).astype(np.float64)
    if not np.all(np.isfinite(out)):
        raise FormatError("matrix has non-finite entries")
    return out


def _is_binary(path):
    return os.fspath(path).lower().endswith(".spb")


def read_matrix_csv(path):
    try:
        with open(path, encoding="ascii") as fh:
            return csv_to_matrix(fh.read())
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not a text matrix file") from exc


def write_matrix_csv(path, a):
    atomic_write_bytes(path, matrix_to_csv(a).encode("ascii"))


def read_matrix_binary(path, allow_complex=False):
    with open(path, "rb") as fh:
        return binary_to_matrix(fh.read(), allow_complex=allow_complex)


def write_matrix_binary(path, a):
    atomic_write_bytes(path, matrix_to_binary(a))


def read_matrix(path, allow_complex=False):
    """Read a matrix, choosing the format from the file extension."""
    if _is_binary(path):
        return read_matrix_binary(path, allow_complex=allow_complex)
    return read_matrix_csv(path)


def write_matrix(path, a):
    """Write a matrix, choosing the format from the file extension."""
    if _is_binary(path):
        write_matrix_binary(path, a)
    else:
        write_matrix_csv(path, a)
