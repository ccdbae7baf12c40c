"""V-cycle preconditioner over nested conforming spaces topped by the CR space.

The level chain is ``V_0 < V_1 < ... < V_J < V_{J+1}`` where ``V_0..V_J``
are conforming P1 spaces on the refined meshes and ``V_{J+1}`` is the
Crouzeix-Raviart space on the finest mesh.  The cycle itself only sees a
list of SPD operators and the prolongations between consecutive levels.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import assembly, mesh as meshes, sparse, transfer
from .assembly import CR, P1


class HierarchyError(ValueError):
    pass


def galerkin_error(A_fine, P, A_coarse):
    """Relative Frobenius error of ``P^T A_fine P`` against ``A_coarse``."""
    G = (P.T @ A_fine @ P).tocsr()
    diff = G - A_coarse
    return np.sqrt(diff.multiply(diff).sum()) / np.sqrt(A_coarse.multiply(A_coarse).sum())


@dataclass(eq=False)
class Hierarchy:
    """Operators ``A_0..A_L`` and prolongations ``P_1..P_L`` (``P_j``: level j-1 -> j).

    For the CR problem ``L = J + 1``; ``meshes``, ``dofs`` and ``rhs`` are
    filled in by :func:`build_hierarchy` and may be empty for hand-built
    hierarchies.
    """

    operators: list
    prolongations: list
    meshes: list = field(default_factory=list)
    dofs: list = field(default_factory=list)
    rhs: np.ndarray = None

    def __post_init__(self):
        if len(self.prolongations) != len(self.operators) - 1:
            raise HierarchyError("need exactly one prolongation per level above 0")
        for j, P in enumerate(self.prolongations, start=1):
            if P.shape != (self.operators[j].shape[0], self.operators[j - 1].shape[0]):
                raise HierarchyError(f"prolongation {j} has shape {P.shape}, incompatible with the operators")

    @property
    def n_levels(self):
        return len(self.operators)

    @property
    def finest(self):
        return self.operators[-1]

    def galerkin_errors(self):
        return [galerkin_error(self.operators[j], P, self.operators[j - 1])
                for j, P in enumerate(self.prolongations, start=1)]

    def check(self, tol=1e-12):
        errors = self.galerkin_errors()
        bad = [j for j, e in enumerate(errors, start=1) if not e <= tol]
        if bad:
            raise HierarchyError(f"variational identity violated on levels {bad}: {errors}")
        return errors


def build_hierarchy(dim, level, eps, f=1.0, check=True):
    """Hierarchy for the 2D square or 3D cube jump-coefficient problem.

    ``level`` is the finest conforming level J; the CR space lives on the
    level-J mesh.  2D uses h0 = 1/2 on (-1,1)^2, 3D uses h0 = 1/4 on (0,1)^3.
    """
    if dim == 2:
        domain, h0 = "square2d", 0.5
    elif dim == 3:
        domain, h0 = "cube3d", 0.25
    else:
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    coefficient = meshes.jump_field(dim, eps)
    mesh_list = meshes.build_hierarchy_meshes(domain, h0, level, coefficient)

    operators, dof_list, prolongations = [], [], []
    for j, m in enumerate(mesh_list):
        A, dofs = assembly.assemble_operator(m, m.kappa, P1)
        operators.append(A)
        dof_list.append(dofs)
        if j > 0:
            prolongations.append(transfer.p1_prolongation(mesh_list[j - 1], dof_list[j - 1], m, dofs))
    fine = mesh_list[-1]
    A_cr, cr_dofs = assembly.assemble_operator(fine, fine.kappa, CR)
    prolongations.append(transfer.cr_inclusion(fine, dof_list[-1], cr_dofs))
    operators.append(A_cr)
    dof_list.append(cr_dofs)
    rhs = assembly.assemble_load(fine, f, CR, cr_dofs)

    H = Hierarchy(operators, prolongations, mesh_list + [fine], dof_list, rhs)
    if check:
        H.check()
    return H


@dataclass(frozen=True)
class MgConfig:
    """Smoother settings; ``sweeps`` pre-smoothing and as many post-smoothing steps.

    ``smoother`` is ``'gauss-seidel'`` (forward before, backward after the
    coarse correction), ``'jacobi'`` (damped by ``omega``), or ``'exact'``
    (direct solve on every level, for testing).
    """

    smoother: str = "gauss-seidel"
    sweeps: int = 1
    omega: float = 0.7

    def __post_init__(self):
        if self.smoother not in ("gauss-seidel", "jacobi", "exact"):
            raise ValueError(f"unknown smoother {self.smoother!r}")
        if int(self.sweeps) != self.sweeps or self.sweeps < 1:
            raise ValueError("sweeps must be a positive integer")
        if not 0 < self.omega <= 1:
            raise ValueError("omega must lie in (0, 1]")


class MgPreconditioner:
    """Symmetric V-cycle ``B`` acting on vectors of the finest level.

    ``B(g)`` and ``B @ g`` accept a vector or an ``(n, k)`` block.
    """

    def __init__(self, hierarchy, config=None):
        self.hierarchy = hierarchy
        self.config = MgConfig() if config is None else config
        self.coarse = sparse.cholesky_factor(hierarchy.operators[0].toarray())
        self._exact = None
        if self.config.smoother == "exact":
            self._exact = [None] + [spla.factorized(A.tocsc()) for A in hierarchy.operators[1:]]

    @property
    def shape(self):
        n = self.hierarchy.finest.shape[0]
        return (n, n)

    def _pre(self, j, w, g):
        A, cfg = self.hierarchy.operators[j], self.config
        if cfg.smoother == "gauss-seidel":
            for _ in range(cfg.sweeps):
                sparse.gauss_seidel_sweep(A, w, g, "forward")
        elif cfg.smoother == "jacobi":
            for _ in range(cfg.sweeps):
                sparse.jacobi_sweep(A, w, g, cfg.omega)
        else:
            w += _solve_columns(self._exact[j], g - A @ w)

    def _post(self, j, w, g):
        A, cfg = self.hierarchy.operators[j], self.config
        if cfg.smoother == "gauss-seidel":
            for _ in range(cfg.sweeps):
                sparse.gauss_seidel_sweep(A, w, g, "backward")
        else:
            self._pre(j, w, g)

    def _cycle(self, j, g):
        if j == 0:
            return sparse.cholesky_solve(self.coarse, g)
        A = self.hierarchy.operators[j]
        P = self.hierarchy.prolongations[j - 1]
        w = np.zeros(g.shape)
        self._pre(j, w, g)
        w += P @ self._cycle(j - 1, P.T @ (g - A @ w))
        self._post(j, w, g)
        return w

    def apply(self, g):
        g = np.array(g, dtype=np.float64, order="C")
        n = self.shape[0]
        if g.shape[0] != n:
            raise ValueError(f"vector has {g.shape[0]} rows, preconditioner acts on {n}")
        return self._cycle(self.hierarchy.n_levels - 1, g)

    __call__ = apply

    def __matmul__(self, g):
        return self.apply(g)

    def as_linear_operator(self):
        return spla.LinearOperator(self.shape, matvec=self.apply, matmat=self.apply, dtype=np.float64)

    def to_dense(self, block=256):
        """Explicit matrix of ``B``, formed column block by column block."""
        n = self.shape[0]
        M = np.empty((n, n))
        for start in range(0, n, block):
            stop = min(n, start + block)
            E = np.zeros((n, stop - start))
            E[np.arange(start, stop), np.arange(stop - start)] = 1.0
            M[:, start:stop] = self.apply(E)
        return M


def _solve_columns(solve, R):
    if R.ndim == 1:
        return solve(R)
    return np.column_stack([solve(r) for r in R.T])


def build(hierarchy, config=None):
    return MgPreconditioner(hierarchy, config)


def apply_error_propagation(B, A, x):
    """Return ``(I - B A) x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != A.shape[1]:
        raise ValueError("dimension mismatch")
    return x - B.apply(A @ x)
