"""Preconditioned CG and spectral estimates for the preconditioned operator ``BA``."""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import sparse

log = logging.getLogger(__name__)

# dense eigenproblems above this size go to LAPACK instead of cyclic Jacobi
JACOBI_LIMIT = 800


class NotSPDPreconditionerError(ArithmeticError):
    pass


def _apply(op, x):
    if callable(op) and not hasattr(op, "shape"):
        return op(x)
    if hasattr(op, "apply"):
        return op.apply(x)
    return op @ x


@dataclass
class PcgResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residual_history: list
    alphas: list
    betas: list

    def tridiagonal(self):
        """Lanczos matrix implied by the CG coefficients, as (diagonal, off-diagonal)."""
        a = np.asarray(self.alphas)
        b = np.asarray(self.betas)
        k = len(a)
        diag = 1.0 / a
        diag[1:] += b[: k - 1] / a[:-1]
        off = np.sqrt(b[: k - 1]) / a[:-1]
        return diag, off

    def ritz_values(self):
        diag, off = self.tridiagonal()
        return scipy.linalg.eigvalsh_tridiagonal(diag, off)


def pcg(A, B, b, tol=1e-7, maxit=500, x0=None, callback=None):
    """Preconditioned conjugate gradients with ``||r_k|| / ||r_0|| < tol``.

    ``A`` and ``B`` may be matrices, objects with ``apply``, or callables.
    Reaching ``maxit`` is reported through ``converged`` and a warning, not
    an exception.
    """
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - _apply(A, x)
    r0 = np.linalg.norm(r)
    history, alphas, betas = [], [], []
    if r0 == 0.0:
        return PcgResult(x, 0, True, history, alphas, betas)
    z = _apply(B, r)
    rz = r @ z
    if not rz > 0:
        raise NotSPDPreconditionerError(f"<Br, r> = {rz} is not positive")
    p = z.copy()
    converged = False
    for k in range(1, maxit + 1):
        Ap = _apply(A, p)
        pAp = p @ Ap
        if not pAp > 0:
            raise ArithmeticError(f"<Ap, p> = {pAp} is not positive; A is not SPD")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        alphas.append(alpha)
        history.append(np.linalg.norm(r) / r0)
        if callback is not None:
            callback(k, x)
        if history[-1] < tol:
            converged = True
            break
        z = _apply(B, r)
        rz_new = r @ z
        if not rz_new > 0:
            raise NotSPDPreconditionerError(f"<Br, r> = {rz_new} is not positive")
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = z + beta * p
    if not converged:
        log.warning("pcg: no convergence after %d iterations (relative residual %.3e)", maxit, history[-1])
    return PcgResult(x, len(alphas), converged, history, alphas, betas)


def effective_condition(eigs, m=1):
    """``lambda_N / lambda_{m+1}`` for ascending positive ``eigs``; ``m=0`` is the usual K."""
    eigs = np.asarray(eigs, dtype=np.float64)
    if m < 0 or m + 1 > len(eigs):
        raise ValueError(f"m={m} needs at least {m + 1} eigenvalues, got {len(eigs)}")
    return eigs[-1] / eigs[m]


def count_small(eigs, gap=0.1):
    """Number of eigenvalues below the largest multiplicative gap of at least ``1/gap``.

    Only the lower half of the spectrum is searched, so an isolated group
    of outliers at the bottom is counted as a whole.
    """
    eigs = np.asarray(eigs)
    half = len(eigs) // 2
    small = [i + 1 for i in range(half) if eigs[i] < gap * eigs[i + 1]]
    return max(small, default=0)


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    m: int = 1
    method: str = ""
    steps: int = 0
    converged: bool = True
    m0_detected: int = field(init=False)

    def __post_init__(self):
        self.eigenvalues = np.sort(np.asarray(self.eigenvalues, dtype=np.float64))
        if np.any(self.eigenvalues <= 0):
            raise NotSPDPreconditionerError("BA has a non-positive eigenvalue estimate")
        self.m0_detected = count_small(self.eigenvalues)

    @property
    def lambda_min(self):
        return self.eigenvalues[0]

    @property
    def lambda_2(self):
        return self.eigenvalues[1] if len(self.eigenvalues) > 1 else self.eigenvalues[0]

    @property
    def lambda_max(self):
        return self.eigenvalues[-1]

    @property
    def K(self):
        return effective_condition(self.eigenvalues, 0)

    @property
    def K_m(self):
        return self.effective(self.m)

    @property
    def K_1(self):
        return self.effective(1)

    def effective(self, m):
        if m + 1 > len(self.eigenvalues):
            return self.K
        return effective_condition(self.eigenvalues, m)


def lanczos_spectrum(A, B, steps=300, probes=3, seed=0, stab_tol=1e-3, res_tol=1e-3, min_steps=10, m=1):
    """Ritz values of ``BA`` by Lanczos with full reorthogonalization.

    The recurrence runs on residual-space vectors ``q`` with ``z = B q`` and
    the inner product ``<q, q'>_B = q . B q'``, in which ``AB`` (similar to
    ``BA``) is self-adjoint.  Iteration stops once the smallest, second
    smallest and largest Ritz values change by less than ``stab_tol``
    (relative) from one step to the next and their residual bounds are below
    ``res_tol`` times their value.  A breakdown (invariant subspace) is
    continued from a fresh random vector, at most ``probes`` times in all.
    """
    n = A.shape[0]
    steps = min(steps, n)
    rng = np.random.default_rng(seed)
    # basis storage grows in blocks; steps may be far above what is used
    block = 32
    Q = np.zeros((n, min(block, steps)))
    Z = np.zeros_like(Q)
    alphas, betas = [], []
    used_probes = 0

    def start():
        nonlocal used_probes
        used_probes += 1
        q = rng.standard_normal(n)
        return q

    def normalize(q, k):
        # B-orthogonalize against the current basis, twice
        for _ in range(2):
            if k:
                q = q - Q[:, :k] @ (Z[:, :k].T @ q)
        z = _apply(B, q)
        qz = q @ z
        return q, z, qz

    q, z, qz = normalize(start(), 0)
    if not qz > 0:
        raise NotSPDPreconditionerError("<Bq, q> is not positive")
    s = np.sqrt(qz)
    Q[:, 0], Z[:, 0] = q / s, z / s
    previous = None
    converged = False
    k = 0
    while True:
        w = A @ Z[:, k]
        alpha = Z[:, k] @ w
        alphas.append(alpha)
        k += 1
        ritz, vecs = _tridiag_eig(alphas, betas)
        extremes = np.array([ritz[0], ritz[min(1, len(ritz) - 1)], ritz[-1]])
        if k >= steps:
            break
        w, z, wz = normalize(w, k)
        if not wz >= 0:
            raise NotSPDPreconditionerError("<Bw, w> is negative")
        beta = np.sqrt(wz)
        if beta <= 1e-12 * max(abs(alpha), abs(ritz[-1])):
            if used_probes >= probes:
                log.info("lanczos: invariant subspace of dimension %d, probes exhausted", k)
                converged = True
                break
            w, z, wz = normalize(start(), k)
            beta = 0.0
            s = np.sqrt(wz)
        else:
            s = beta
            if k >= min_steps and previous is not None:
                idx = [0, min(1, len(ritz) - 1), len(ritz) - 1]
                bounds = beta * np.abs(vecs[-1, idx])
                change = np.abs(extremes - previous) / extremes
                if np.all(change < stab_tol) and np.all(bounds < res_tol * extremes):
                    converged = True
                    break
        betas.append(beta)
        if k == Q.shape[1]:
            extra = min(block, steps - k)
            Q = np.hstack([Q, np.zeros((n, extra))])
            Z = np.hstack([Z, np.zeros((n, extra))])
        Q[:, k], Z[:, k] = w / s, z / s
        previous = extremes
    if not converged and k < n:
        log.warning("lanczos: extreme Ritz values not converged after %d steps", k)
    return SpectrumReport(ritz, m=m, method="lanczos", steps=k, converged=converged or k == n)


def _tridiag_eig(alphas, betas):
    if len(alphas) == 1:
        return np.array(alphas), np.ones((1, 1))
    return scipy.linalg.eigh_tridiagonal(np.asarray(alphas), np.asarray(betas))


def dense_ba_spectrum(A, B, dense_limit=3000, m=1, jacobi_limit=JACOBI_LIMIT):
    """Full spectrum of ``BA`` through the symmetric matrix ``L^T B L`` with ``A = L L^T``.

    ``B`` is formed explicitly column by column, so this is an oracle for
    small problems only.
    """
    n = A.shape[0]
    if n > dense_limit:
        raise ValueError(f"n={n} exceeds the dense oracle limit {dense_limit}")
    F = sparse.cholesky_factor(A.toarray() if hasattr(A, "toarray") else A)
    if hasattr(B, "to_dense"):
        Bm = B.to_dense()
    else:
        Bm = np.column_stack([_apply(B, e) for e in np.eye(n)])
    S = F.L.T @ Bm @ F.L
    S = 0.5 * (S + S.T)
    if n <= jacobi_limit:
        eigs = sparse.dense_sym_eig(S)
        method = "dense-jacobi"
    else:
        eigs = np.linalg.eigvalsh(S)
        method = "dense-lapack"
    return SpectrumReport(eigs, m=m, method=method, steps=n)


def export_eigenvalues(path, eigs):
    """Ascending eigenvalues, one per line."""
    sparse.write_vector(path, np.sort(np.asarray(eigs)))
