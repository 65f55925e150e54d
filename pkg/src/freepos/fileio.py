"""Reading and writing operators in the FPRM binary format and as CSV.

FPRM layout (little-endian): the 4-byte magic ``b"FPRM"``, then ``version``,
``dim``, ``n``, ``d`` as ``uint32``, then ``dim * dim`` complex128 entries in
row-major order. The CSV form has a ``row,col,re,im`` header and one line per
entry; entries that are exactly zero may be omitted.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import ShapeMismatch
from .rmt import BipartiteOperator

MAGIC = b"FPRM"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


class FormatError(ValueError):
    """Raised when a matrix file cannot be parsed."""


def write_fprm(path, op: BipartiteOperator) -> None:
    dim = op.dim
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dim, op.n, op.d))
        fh.write(np.ascontiguousarray(op.matrix, dtype="<c16").tobytes())


def read_fprm(path) -> BipartiteOperator:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError("file too short for an FPRM header")
    magic, version, dim, n, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported FPRM version {version}")
    if n * d != dim:
        raise ShapeMismatch(f"header dim {dim} != n*d = {n * d}")
    body = raw[_HEADER.size:]
    if len(body) != 16 * dim * dim:
        raise FormatError(f"expected {16 * dim * dim} payload bytes, got {len(body)}")
    m = np.frombuffer(body, dtype="<c16").reshape(dim, dim).astype(np.complex128)
    return BipartiteOperator(n, d, m)


def write_csv(path, op: BipartiteOperator) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "re", "im"])
        for (r, c), v in np.ndenumerate(op.matrix):
            w.writerow([r, c, repr(float(v.real)), repr(float(v.imag))])


def read_csv(path, n: int, d: int) -> BipartiteOperator:
    dim = n * d
    m = np.zeros((dim, dim), dtype=np.complex128)
    seen = np.zeros((dim, dim), dtype=bool)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["row", "col", "re", "im"]:
            raise FormatError(f"CSV header must be row,col,re,im, got {reader.fieldnames}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                r, c = int(rec["row"]), int(rec["col"])
                v = complex(float(rec["re"]), float(rec["im"]))
            except (TypeError, ValueError) as exc:
                raise FormatError(f"line {lineno}: {exc}") from exc
            if not (0 <= r < dim and 0 <= c < dim):
                raise ShapeMismatch(f"line {lineno}: index ({r}, {c}) outside {dim}x{dim}")
            if seen[r, c]:
                raise FormatError(f"line {lineno}: entry ({r}, {c}) given twice")
            seen[r, c] = True
            m[r, c] = v
    if not seen.all():
        raise FormatError(f"{int((~seen).sum())} of {dim * dim} entries missing")
    return BipartiteOperator(n, d, m)


def read_matrix(path, n: int = None, d: int = None) -> BipartiteOperator:
    """Load by extension: ``.csv`` needs ``n`` and ``d``; anything else is FPRM."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if n is None or d is None:
            raise FormatError("CSV matrices need n and d")
        return read_csv(path, n, d)
    op = read_fprm(path)
    if (n is not None and op.n != n) or (d is not None and op.d != d):
        raise ShapeMismatch(f"file holds n={op.n}, d={op.d}; requested n={n}, d={d}")
    return op


def write_matrix(path, op: BipartiteOperator) -> None:
    if Path(path).suffix.lower() == ".csv":
        write_csv(path, op)
    else:
        write_fprm(path, op)
