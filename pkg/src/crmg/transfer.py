"""Prolongation matrices over free degrees of freedom.

Restriction is always the transpose of a prolongation; no separate
restriction matrix is ever assembled.
"""

import numpy as np
import scipy.sparse as sp

from .assembly import CR, P1
from .sparse import as_csr


class TransferError(ValueError):
    pass


def _locate(points, table):
    try:
        return np.array([table[tuple(p)] for p in points], dtype=np.int64)
    except KeyError as exc:
        raise TransferError(f"point {exc.args[0]} is not a vertex of the fine mesh") from None


def p1_prolongation(coarse, coarse_dofs, fine, fine_dofs):
    """Nested P1 interpolation from ``coarse`` to ``fine = refine_uniform(coarse)``.

    Coarse vertices carry their value over; the midpoint of a coarse edge
    ``(a, b)`` receives the average of the values at ``a`` and ``b``.
    Dirichlet vertices carry zero and have no column.
    """
    if coarse_dofs.kind != P1 or fine_dofs.kind != P1:
        raise TransferError("both DofMaps must be conforming P1")
    if coarse_dofs.mesh_id != id(coarse) or fine_dofs.mesh_id != id(fine):
        raise TransferError("DofMap does not belong to the given mesh")
    edges = coarse.edges()
    if fine.n_vertices != coarse.n_vertices + len(edges) or fine.dim != coarse.dim:
        raise TransferError("fine mesh is not the uniform refinement of the coarse mesh")

    table = {tuple(x): i for i, x in enumerate(fine.vertices)}
    at_vertex = _locate(coarse.vertices, table)
    at_midpoint = _locate(coarse.vertices[edges].mean(axis=1), table)

    rows = np.concatenate([at_vertex, at_midpoint, at_midpoint])
    cols = np.concatenate([np.arange(coarse.n_vertices), edges[:, 0], edges[:, 1]])
    vals = np.concatenate([np.ones(coarse.n_vertices), np.full(2 * len(edges), 0.5)])
    r = fine_dofs.index[rows]
    c = coarse_dofs.index[cols]
    keep = (r >= 0) & (c >= 0)
    P = sp.coo_matrix((vals[keep], (r[keep], c[keep])), shape=(fine_dofs.n, coarse_dofs.n))
    return as_csr(P)


def cr_inclusion(mesh, p1_dofs, cr_dofs):
    """Matrix of the embedding of conforming P1 into CR on the same mesh.

    Row ``e`` evaluates the conforming function at the barycenter of facet
    ``e``: weight ``1/d`` on each free vertex of the facet.
    """
    if p1_dofs.kind != P1 or cr_dofs.kind != CR:
        raise TransferError("expected a P1 DofMap and a CR DofMap")
    if p1_dofs.mesh_id != id(mesh) or cr_dofs.mesh_id != id(mesh):
        raise TransferError("DofMaps refer to different meshes")
    d = mesh.dim
    facets = mesh.facets[cr_dofs.free]
    rows = np.repeat(np.arange(cr_dofs.n), d)
    cols = p1_dofs.index[facets.ravel()]
    keep = cols >= 0
    vals = np.full(keep.sum(), 1.0 / d)
    P = sp.coo_matrix((vals, (rows[keep], cols[keep])), shape=(cr_dofs.n, p1_dofs.n))
    return as_csr(P)
