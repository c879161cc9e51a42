"""Exact integer sparse matrices on top of scipy.sparse.

Every operator in the engine has integer entries in the canonical basis, so
int64 CSR storage is exact as long as nothing overflows.  Each arithmetic
helper checks a worst-case bound with Python integers first and raises
instead of wrapping around.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

LIMIT = 2**62


class ExactnessError(ArithmeticError):
    """An int64 operation could overflow."""


def zeros(rows: int, cols: int) -> sp.csr_matrix:
    return sp.csr_matrix((rows, cols), dtype=np.int64)


def identity(n: int) -> sp.csr_matrix:
    return sp.identity(n, dtype=np.int64, format="csr")


def from_entries(rows: int, cols: int, entries: Mapping[tuple[int, int], int]) -> sp.csr_matrix:
    if not entries:
        return zeros(rows, cols)
    for v in entries.values():
        if abs(v) >= LIMIT:
            raise ExactnessError(f"entry {v} does not fit in int64")
    keys = list(entries)
    data = np.array([entries[k] for k in keys], dtype=np.int64)
    r = np.array([k[0] for k in keys], dtype=np.int64)
    c = np.array([k[1] for k in keys], dtype=np.int64)
    m = sp.csr_matrix((data, (r, c)), shape=(rows, cols), dtype=np.int64)
    m.eliminate_zeros()
    return m


def max_abs(m: sp.spmatrix) -> int:
    return int(np.abs(m.data).max()) if m.nnz else 0


def matmul(a: sp.csr_matrix, b: sp.csr_matrix) -> sp.csr_matrix:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch {a.shape} @ {b.shape}")
    if not a.nnz or not b.nnz:
        return zeros(a.shape[0], b.shape[1])
    if max_abs(a) * max_abs(b) * a.shape[1] >= LIMIT:
        raise ExactnessError("matrix product could overflow int64")
    out = (a @ b).tocsr()
    out.eliminate_zeros()
    return out


def combine(terms: Iterable[tuple[int, sp.csr_matrix]], rows: int, cols: int) -> sp.csr_matrix:
    """sum coeff * matrix, with an overflow check."""
    out = zeros(rows, cols)
    bound = 0
    for coeff, m in terms:
        if not coeff or not m.nnz:
            continue
        if m.shape != (rows, cols):
            raise ValueError(f"shape mismatch {m.shape} vs {(rows, cols)}")
        bound += abs(coeff) * max_abs(m)
        if bound >= LIMIT:
            raise ExactnessError("matrix sum could overflow int64")
        out = out + (m if coeff == 1 else m * int(coeff))
    out = out.tocsr()
    out.eliminate_zeros()
    return out


def is_zero(m: sp.spmatrix) -> bool:
    m = m.tocsr()
    m.eliminate_zeros()
    return m.nnz == 0


def equal(a: sp.spmatrix, b: sp.spmatrix) -> bool:
    return a.shape == b.shape and is_zero(a - b)


def apply(m: sp.csr_matrix, vec: Mapping[int, Fraction]) -> dict[int, Fraction]:
    """Exact product of an integer matrix with a sparse rational column vector."""
    out: dict[int, Fraction] = {}
    csc = m.tocsc()
    for j, c in vec.items():
        start, end = csc.indptr[j], csc.indptr[j + 1]
        for i, v in zip(csc.indices[start:end], csc.data[start:end]):
            i = int(i)
            out[i] = out.get(i, 0) + c * int(v)
    return {i: c for i, c in out.items() if c}


def entries(m: sp.spmatrix) -> list[tuple[int, int, int]]:
    coo = m.tocoo()
    return sorted((int(i), int(j), int(v)) for i, j, v in zip(coo.row, coo.col, coo.data) if v)


def first_difference(a: sp.spmatrix, b: sp.spmatrix) -> tuple[int, int, int, int] | None:
    """(row, col, a_value, b_value) of the first differing entry, column-major."""
    diff = (a - b).tocsc()
    diff.eliminate_zeros()
    if not diff.nnz:
        return None
    coo = diff.tocoo()
    row, col = min(zip(coo.col.tolist(), coo.row.tolist()))[::-1]
    return row, col, int(a.tocsr()[row, col]), int(b.tocsr()[row, col])
