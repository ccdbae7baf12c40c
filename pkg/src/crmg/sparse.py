"""Sparse and dense linear algebra kernels.

CSR storage is :class:`scipy.sparse.csr_matrix` kept in canonical form
(sorted, duplicate-free column indices).  The relaxation sweeps and the
cyclic Jacobi eigensolver are compiled with numba; everything else is a
thin, validated wrapper.
"""

from dataclasses import dataclass

import numba
import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp

CsrMatrix = sp.csr_matrix


class NotSPDError(np.linalg.LinAlgError):
    """Raised when a matrix expected to be SPD has a non-positive pivot."""


class ZeroDiagonalError(ValueError):
    """Raised when a relaxation sweep meets a zero diagonal entry."""


def as_csr(A, shape=None):
    """Return ``A`` as a canonical CSR matrix of float64.

    Duplicate entries are summed and column indices sorted within each row.
    """
    A = sp.csr_matrix(A, shape=shape, dtype=np.float64)
    A.sum_duplicates()
    A.sort_indices()
    return A


def csr_from_triplets(rows, cols, vals, shape):
    """Build a canonical CSR matrix, summing duplicates in insertion order.

    Entries sharing ``(row, col)`` are accumulated in the order they were
    given, so the result does not depend on how scipy orders duplicates.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=np.float64).ravel()
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if len(rows) == 0:
        return sp.csr_matrix(shape, dtype=np.float64)
    start = np.flatnonzero(np.r_[True, (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])])
    data = np.add.reduceat(vals, start)
    indptr = np.searchsorted(rows[start], np.arange(shape[0] + 1))
    return sp.csr_matrix((data, cols[start], indptr), shape=shape)


def check_csr(A):
    """Raise ``ValueError`` if ``A`` violates the CSR invariants."""
    n_rows, n_cols = A.shape
    indptr, indices = A.indptr, A.indices
    if len(indptr) != n_rows + 1 or indptr[0] != 0:
        raise ValueError("row_offsets must have length n_rows + 1 and start at 0")
    if np.any(np.diff(indptr) < 0):
        raise ValueError("row_offsets must be nondecreasing")
    if len(indices) and (indices.min() < 0 or indices.max() >= n_cols):
        raise ValueError("column index out of range")
    for i in range(n_rows):
        row = indices[indptr[i]:indptr[i + 1]]
        if np.any(np.diff(row) <= 0):
            raise ValueError(f"row {i}: column indices not sorted and unique")


def spmv(A, x):
    """Return ``A @ x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, x has {x.shape[0]} rows")
    return A @ x


def spmv_transpose(A, x):
    """Return ``A.T @ x`` by scattering the rows of ``A``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, x has {x.shape[0]} rows")
    return A.T @ x


def transpose(A):
    """Explicit CSR transpose."""
    return as_csr(A.T)


# --------------------------------------------------------------------------
# relaxation


@numba.njit(cache=True)
def _gs_kernel(indptr, indices, data, x, b, start, stop, step):
    # x, b are (n, k); columns are independent right-hand sides
    k = x.shape[1]
    for i in range(start, stop, step):
        diag = 0.0
        for c in range(k):
            s = b[i, c]
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j == i:
                    diag = data[p]
                else:
                    s -= data[p] * x[j, c]
            if diag == 0.0:
                return i
            x[i, c] = s / diag
    return -1


def _as_columns(v, n, name):
    if v.shape[0] != n:
        raise ValueError(f"{name} has {v.shape[0]} rows, expected {n}")
    return v.reshape(n, -1)


def gauss_seidel_sweep(A, x, b, direction="forward"):
    """One in-place Gauss-Seidel sweep on ``A x = b``.

    Parameters
    ----------
    A : csr_matrix
        Square matrix with nonzero diagonal.
    x : ndarray, shape (n,) or (n, k)
        Current iterate, overwritten.  Must be C-contiguous float64.
    b : ndarray
        Right-hand side with the same shape as ``x``.
    direction : {'forward', 'backward'}
        Ascending or descending row order.  A forward sweep applies
        ``(D + L)^{-1}``, a backward sweep its transpose.
    """
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("expected a square matrix")
    if not (isinstance(x, np.ndarray) and x.dtype == np.float64 and x.flags.c_contiguous):
        raise ValueError("x must be a C-contiguous float64 array")
    X = _as_columns(x, n, "x")
    B = _as_columns(np.ascontiguousarray(b, dtype=np.float64), n, "b")
    if B.shape != X.shape:
        raise ValueError("x and b shapes differ")
    if direction == "forward":
        bad = _gs_kernel(A.indptr, A.indices, A.data, X, B, 0, n, 1)
    elif direction == "backward":
        bad = _gs_kernel(A.indptr, A.indices, A.data, X, B, n - 1, -1, -1)
    else:
        raise ValueError(f"unknown sweep direction {direction!r}")
    if bad >= 0:
        raise ZeroDiagonalError(f"zero diagonal entry in row {bad}")


def jacobi_sweep(A, x, b, omega=0.7):
    """One in-place damped Jacobi sweep ``x += omega * D^{-1} (b - A x)``."""
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("expected a square matrix")
    X = _as_columns(x, n, "x")
    B = _as_columns(np.asarray(b, dtype=np.float64), n, "b")
    d = A.diagonal()
    zero = np.flatnonzero(d == 0.0)
    if len(zero):
        raise ZeroDiagonalError(f"zero diagonal entry in row {zero[0]}")
    X += omega * (B - A @ X) / d[:, None]


# --------------------------------------------------------------------------
# dense kernels


@dataclass(frozen=True)
class DenseFactor:
    """Cholesky factor ``L`` with ``A = L L^T``."""

    L: np.ndarray

    @property
    def n(self):
        return self.L.shape[0]


def cholesky_factor(A):
    """Factor a dense SPD matrix.

    Raises
    ------
    NotSPDError
        If a non-positive pivot is met.
    """
    A = np.asarray(A.toarray() if sp.issparse(A) else A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError(f"matrix is not SPD: {exc}") from None
    if not np.all(np.isfinite(L)) or np.any(np.diag(L) <= 0.0):
        raise NotSPDError("matrix is not SPD: non-positive pivot")
    return DenseFactor(L)


def cholesky_solve(F, b):
    """Solve ``A x = b`` given ``F = cholesky_factor(A)``; ``b`` may have columns."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != F.n:
        raise ValueError(f"b has {b.shape[0]} rows, expected {F.n}")
    y = scipy.linalg.solve_triangular(F.L, b, lower=True)
    return scipy.linalg.solve_triangular(F.L, y, lower=True, trans="T")


@numba.njit(cache=True)
def _jacobi_eig_kernel(S, V, tol, floor, max_sweeps):
    n = S.shape[0]
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = S[p, q]
                if abs(apq) <= floor or abs(apq) <= tol * np.sqrt(abs(S[p, p] * S[q, q])):
                    continue
                rotated = True
                theta = (S[q, q] - S[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # S <- J^T S J with J the (p, q) rotation
                for k in range(n):
                    skp = S[k, p]
                    skq = S[k, q]
                    S[k, p] = c * skp - s * skq
                    S[k, q] = s * skp + c * skq
                for k in range(n):
                    spk = S[p, k]
                    sqk = S[q, k]
                    S[p, k] = c * spk - s * sqk
                    S[q, k] = s * spk + c * sqk
                S[p, q] = 0.0
                S[q, p] = 0.0
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
        if not rotated:
            return sweep
    return -1


def dense_sym_eig(S, vectors=False, tol=1e-15, max_sweeps=100):
    """Eigen-decomposition of a dense symmetric matrix by cyclic Jacobi rotations.

    Returns ascending eigenvalues, and the matching orthonormal eigenvectors
    as columns when ``vectors`` is true.
    """
    S = np.array(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(np.abs(S).max(initial=0.0), np.finfo(float).tiny)
    if np.abs(S - S.T).max(initial=0.0) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    S = 0.5 * (S + S.T)
    V = np.eye(S.shape[0])
    floor = 1e-3 * np.finfo(float).eps * np.linalg.norm(S)
    if _jacobi_eig_kernel(S, V, tol, floor, max_sweeps) < 0:
        raise np.linalg.LinAlgError("Jacobi eigensolver did not converge")
    w = np.diag(S).copy()
    order = np.argsort(w, kind="stable")
    if vectors:
        return w[order], V[:, order]
    return w[order]


# --------------------------------------------------------------------------
# I/O


def write_matrix_market(path, A, symmetric=None):
    """Write ``A`` in Matrix Market coordinate format.

    Symmetric storage (lower triangle) is used when ``A`` is exactly
    symmetric, unless ``symmetric`` says otherwise.
    """
    A = as_csr(A)
    if symmetric is None:
        symmetric = A.shape[0] == A.shape[1] and (A != A.T).nnz == 0
    scipy.io.mmwrite(path, A, symmetry="symmetric" if symmetric else "general")


def read_matrix_market(path):
    return as_csr(scipy.io.mmread(path))


def write_vector(path, v):
    """One value per line, full round-trip precision."""
    np.savetxt(path, np.asarray(v, dtype=np.float64).ravel(), fmt="%.17g")
