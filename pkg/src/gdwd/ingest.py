"""LIBSVM text ingestion, label binarization and ``Z = X diag(y)``.

Matrices are ``scipy.sparse.csc_matrix`` of shape ``(d, n)``: one column
per sample, sorted row indices, explicit zeros removed.
"""

from __future__ import annotations

import bz2
import gzip
import io
import lzma
import os
from typing import IO, Iterable, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError, ParseError

_OPENERS = {".gz": gzip.open, ".bz2": bz2.open, ".xz": lzma.open}


def open_text(path: str | os.PathLike) -> IO[str]:
    """Open a dataset for reading, decompressing by file suffix."""
    suffix = os.path.splitext(os.fspath(path))[1].lower()
    opener = _OPENERS.get(suffix)
    if opener is not None:
        return opener(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def parse_libsvm(lines: Iterable[str] | str, d: Optional[int] = None
                 ) -> Tuple[sp.csc_matrix, np.ndarray]:
    """Parse ``label idx:val ...`` lines into a ``(d, n)`` CSC matrix.

    Indices are 1-based and must strictly increase within a line.  Blank
    lines and ``#`` comments are skipped.  ``d`` defaults to the largest
    index seen; a smaller explicit ``d`` is an error.

    Returns the matrix and the raw (float) labels in file order.
    """
    if isinstance(lines, str):
        lines = io.StringIO(lines)
    labels = []
    indptr = [0]
    indices = []
    data = []
    max_idx = 0
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"expected idx:val, got {tok!r}", lineno)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"non-numeric token {tok!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"index {idx} < 1", lineno)
            if idx <= prev:
                raise ParseError(f"index {idx} not increasing (after {prev})", lineno)
            prev = idx
            if val != 0.0:
                indices.append(idx - 1)
                data.append(val)
        max_idx = max(max_idx, prev)
        indptr.append(len(indices))
    n = len(labels)
    if n == 0:
        raise InvalidInputError("no samples in input")
    if d is None:
        d = max(max_idx, 1)
    elif max_idx > d:
        raise InvalidInputError(f"feature index {max_idx} exceeds d = {d}")
    X = sp.csc_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64),
         np.asarray(indptr, dtype=np.int64)),
        shape=(d, n),
    )
    return X, np.asarray(labels, dtype=float)


def load_libsvm(path, d: Optional[int] = None):
    with open_text(path) as fh:
        return parse_libsvm(fh, d=d)


def _fmt(v: float) -> str:
    return repr(float(v)) if v != int(v) or abs(v) >= 1e16 else str(int(v))


def write_libsvm(X, labels, stream: IO[str]) -> None:
    """Serialize in canonical form: shortest round-trip decimals, no zeros."""
    X = sp.csc_matrix(X)
    X.eliminate_zeros()
    X.sort_indices()
    for j, lab in enumerate(np.asarray(labels).ravel()):
        lo, hi = X.indptr[j], X.indptr[j + 1]
        parts = [_fmt(lab)]
        parts.extend(f"{i + 1}:{_fmt(v)}" for i, v in zip(X.indices[lo:hi], X.data[lo:hi]))
        stream.write(" ".join(parts) + "\n")


def binarize_labels(raw) -> Tuple[np.ndarray, dict]:
    """Map two distinct raw labels to -1/+1, the larger value becoming +1.

    Returns ``(y, mapping)`` with ``mapping = {raw_value: +-1}``.
    """
    raw = np.asarray(raw, dtype=float).ravel()
    values = np.unique(raw)
    if values.size != 2:
        raise InvalidInputError(f"expected exactly 2 distinct labels, got {values.size}")
    lo, hi = values
    y = np.where(raw == hi, 1.0, -1.0)
    return y, {float(lo): -1, float(hi): 1}


def build_Z(X, y) -> sp.csc_matrix:
    """Column-scale ``X`` by the labels; the sparsity pattern is unchanged."""
    X = sp.csc_matrix(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != X.shape[1]:
        raise InvalidInputError(f"label length {y.size} != n = {X.shape[1]}")
    counts = np.diff(X.indptr)
    Z = X.copy()
    Z.data = X.data * np.repeat(y, counts)
    return Z
