"""Stiffness and load assembly for conforming P1 and Crouzeix-Raviart elements.

Both spaces share the same element kernel: with barycentric coordinates
``lambda_i`` the CR basis function attached to the facet opposite vertex
``i`` is ``1 - d * lambda_i``, so the CR element matrix is ``d**2`` times
the P1 one and only the scatter map differs (vertices vs. facets).
Homogeneous Dirichlet conditions are imposed by dropping boundary rows and
columns.
"""

import math
from dataclasses import dataclass

import numpy as np
from .sparse import as_csr, csr_from_triplets

P1 = "p1"
CR = "cr"


class DegenerateElementError(ValueError):
    pass


@dataclass(frozen=True)
class DofMap:
    """Free degrees of freedom of a space on one mesh.

    ``free`` lists the mesh entities (vertices for P1, facets for CR) that
    carry unknowns, in ascending order; ``index[e]`` is the position of
    entity ``e`` in ``free`` or -1 for a Dirichlet entity.
    """

    kind: str
    free: np.ndarray
    index: np.ndarray
    mesh_id: int

    @property
    def n(self):
        return len(self.free)

    @property
    def n_entities(self):
        return len(self.index)


def dof_map(mesh, kind):
    if kind == P1:
        fixed = mesh.on_boundary()
    elif kind == CR:
        fixed = mesh.facet_boundary
    else:
        raise ValueError(f"unknown space {kind!r}")
    free = np.flatnonzero(~fixed)
    index = np.full(len(fixed), -1, dtype=np.int64)
    index[free] = np.arange(len(free))
    return DofMap(kind, free, index, id(mesh))


def _gradients(X):
    """Barycentric gradients and volumes for a batch of simplices ``X`` (m, d+1, d)."""
    m, n, d = X.shape
    M = np.concatenate([np.ones((m, n, 1)), X], axis=2)
    det = np.linalg.det(M)
    vol = np.abs(det) / math.factorial(d)
    scale = np.ptp(X, axis=1).max(axis=1)
    if np.any(vol <= 1e-14 * scale**d):
        raise DegenerateElementError("zero-volume simplex")
    # rows of inv(M) are the barycentric coefficients: lambda_i = C[0, i] + C[1:, i] . x
    grads = np.transpose(np.linalg.inv(M)[:, 1:, :], (0, 2, 1))
    return grads, vol


def local_stiffness_p1_batch(X, kappa):
    grads, vol = _gradients(np.asarray(X, dtype=np.float64))
    # fixed summation order over coordinates keeps K[i, j] == K[j, i] bitwise
    K = sum(grads[:, :, None, k] * grads[:, None, :, k] for k in range(grads.shape[2]))
    return K * (np.asarray(kappa, dtype=np.float64) * vol)[:, None, None]


def local_stiffness_p1(vertices, kappa=1.0):
    """Element matrix ``kappa |T| grad(lambda_i) . grad(lambda_j)`` of one simplex."""
    return local_stiffness_p1_batch(np.asarray(vertices, dtype=np.float64)[None], [kappa])[0]


def local_stiffness_cr(vertices, kappa=1.0):
    """CR element matrix; row ``i`` belongs to the facet opposite vertex ``i``."""
    d = np.asarray(vertices).shape[1]
    return d * d * local_stiffness_p1(vertices, kappa)


def _entities(mesh, kind):
    return mesh.simplices if kind == P1 else mesh.simplex_to_facet


def assemble_full(mesh, kappa, kind):
    """Stiffness matrix over all entities, boundary included."""
    kappa = np.asarray(kappa, dtype=np.float64)
    if kappa.shape != (mesh.n_simplices,):
        raise ValueError(f"need one coefficient per element, got shape {kappa.shape}")
    K = local_stiffness_p1_batch(mesh.vertices[mesh.simplices], kappa)
    if kind == CR:
        K *= mesh.dim**2
    E = _entities(mesh, kind)
    n = mesh.n_vertices if kind == P1 else mesh.n_facets
    rows = np.repeat(E, mesh.dim + 1, axis=1).ravel()
    cols = np.tile(E, (1, mesh.dim + 1)).ravel()
    return csr_from_triplets(rows, cols, K.ravel(), (n, n))


def assemble_operator(mesh, kappa, kind):
    """Assemble the Dirichlet-reduced stiffness matrix.

    Returns
    -------
    A : csr_matrix
        SPD matrix over the free degrees of freedom.
    dofs : DofMap
    """
    dofs = dof_map(mesh, kind)
    if dofs.n == 0:
        raise ValueError("mesh has no interior degrees of freedom")
    A = assemble_full(mesh, kappa, kind)
    return as_csr(A[dofs.free][:, dofs.free]), dofs


def assemble_load(mesh, f, kind, dofs=None):
    """Load vector for a constant source ``f``.

    Both ``lambda_i`` and ``1 - d lambda_i`` integrate to ``|T| / (d+1)``.
    """
    dofs = dof_map(mesh, kind) if dofs is None else dofs
    E = _entities(mesh, kind)
    n = dofs.n_entities
    share = np.repeat(f * mesh.volumes() / (mesh.dim + 1), mesh.dim + 1)
    full = np.bincount(E.ravel(), weights=share, minlength=n)
    return full[dofs.free]
