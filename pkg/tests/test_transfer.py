import numpy as np
import pytest

from crmg import assembly, mesh as M, transfer
from crmg.assembly import CR, P1
from conftest import hierarchy


def affine(x):
    return 2 * x[:, 0] - x[:, 1] + (0.5 * x[:, 2] if x.shape[1] == 3 else 0) + 0.25


@pytest.fixture(scope="module", params=[2, 3])
def pair(request):
    if request.param == 2:
        coarse = M.refine_uniform(M.build_initial_mesh("square2d", 0.5))
    else:
        coarse = M.build_initial_mesh("cube3d", 0.25)
    fine = M.refine_uniform(coarse)
    cd, fd = assembly.dof_map(coarse, P1), assembly.dof_map(fine, P1)
    return coarse, cd, fine, fd, transfer.p1_prolongation(coarse, cd, fine, fd)


def _full_prolongation(coarse, fine):
    """Prolongation over all vertices (no Dirichlet elimination)."""
    cd = assembly.DofMap(P1, np.arange(coarse.n_vertices), np.arange(coarse.n_vertices), id(coarse))
    fd = assembly.DofMap(P1, np.arange(fine.n_vertices), np.arange(fine.n_vertices), id(fine))
    return transfer.p1_prolongation(coarse, cd, fine, fd)


def test_reproduces_affine_functions(pair):
    coarse, _, fine, _, _ = pair
    P = _full_prolongation(coarse, fine)
    np.testing.assert_allclose(P @ affine(coarse.vertices), affine(fine.vertices), atol=1e-14)


def test_row_structure(pair):
    coarse, cd, fine, fd, P = pair
    nnz = np.diff(P.indptr)
    assert nnz.max() <= 2
    coarse_set = {tuple(x): i for i, x in enumerate(coarse.vertices)}
    for row in range(P.shape[0]):
        vals = P.data[P.indptr[row]:P.indptr[row + 1]]
        if tuple(fine.vertices[fd.free[row]]) in coarse_set:
            assert vals.tolist() == [1.0]
        else:
            # both endpoints on the boundary (corner diagonals) leaves an empty row
            assert np.all(vals == 0.5) and len(vals) in (0, 1, 2)
    # some midpoint rows have a single 1/2: one endpoint on the boundary
    assert np.any((nnz == 1) & (P.max(axis=1).toarray().ravel() == 0.5))


def test_mismatched_meshes_rejected(pair):
    coarse, cd, fine, fd, _ = pair
    other = M.refine_uniform(fine)
    with pytest.raises(transfer.TransferError):
        transfer.p1_prolongation(coarse, cd, other, assembly.dof_map(other, P1))
    with pytest.raises(transfer.TransferError):
        transfer.p1_prolongation(coarse, cd, fine, cd)


@pytest.mark.parametrize("dim", [2, 3])
def test_cr_inclusion_entries(dim):
    m = M.build_initial_mesh("square2d", 0.5) if dim == 2 else M.build_initial_mesh("cube3d", 0.25)
    pd, cd = assembly.dof_map(m, P1), assembly.dof_map(m, CR)
    P = transfer.cr_inclusion(m, pd, cd)
    assert P.shape == (cd.n, pd.n)
    assert np.all(P.data == 1.0 / dim)
    assert np.diff(P.indptr).max() <= dim
    # all-ones vector: k/d where k = number of interior vertices of the facet
    k = (~m.on_boundary())[m.facets[cd.free]].sum(axis=1)
    np.testing.assert_allclose(P @ np.ones(pd.n), k / dim, rtol=1e-15)
    # sparsity = facet-to-vertex incidence restricted to free entities
    for row in range(0, cd.n, 5):
        cols = P.indices[P.indptr[row]:P.indptr[row + 1]]
        expect = sorted(pd.index[v] for v in m.facets[cd.free[row]] if pd.index[v] >= 0)
        assert cols.tolist() == expect


@pytest.mark.parametrize("dim", [2, 3])
def test_cr_inclusion_evaluates_affine_at_barycenters(dim):
    m = M.build_initial_mesh("square2d", 0.5) if dim == 2 else M.build_initial_mesh("cube3d", 0.25)
    pd, cd = assembly.dof_map(m, P1), assembly.dof_map(m, CR)
    full_p = assembly.DofMap(P1, np.arange(m.n_vertices), np.arange(m.n_vertices), id(m))
    P = transfer.cr_inclusion(m, full_p, cd)
    u = affine(m.vertices)
    np.testing.assert_allclose(P @ u, affine(m.facet_barycenters()[cd.free]), atol=1e-14)


def test_cr_inclusion_rejects_foreign_dofmaps():
    a = M.build_initial_mesh("square2d", 0.5)
    b = M.refine_uniform(a)
    with pytest.raises(transfer.TransferError):
        transfer.cr_inclusion(a, assembly.dof_map(b, P1), assembly.dof_map(a, CR))
    with pytest.raises(transfer.TransferError):
        transfer.cr_inclusion(a, assembly.dof_map(a, CR), assembly.dof_map(a, CR))


@pytest.mark.parametrize("dim,level", [(2, 3), (3, 1)])
def test_composite_chain_exact_on_affine(dim, level):
    """Coarsest-level nodal values pushed through every prolongation land on
    the affine function's values at the fine facet barycenters."""
    field = M.jump_field(dim, 1.0)
    domain, h0 = ("square2d", 0.5) if dim == 2 else ("cube3d", 0.25)
    meshes = M.build_hierarchy_meshes(domain, h0, level, field)
    full = [assembly.DofMap(P1, np.arange(m.n_vertices), np.arange(m.n_vertices), id(m)) for m in meshes]
    v = affine(meshes[0].vertices)
    for j in range(1, len(meshes)):
        v = transfer.p1_prolongation(meshes[j - 1], full[j - 1], meshes[j], full[j]) @ v
    fine = meshes[-1]
    cd = assembly.dof_map(fine, CR)
    w = transfer.cr_inclusion(fine, full[-1], cd) @ v
    np.testing.assert_allclose(w, affine(fine.facet_barycenters()[cd.free]), atol=1e-14)


@pytest.mark.parametrize("dim,level", [(2, 0), (2, 1), (2, 2), (2, 3), (2, 4), (3, 0), (3, 1), (3, 2)])
@pytest.mark.parametrize("eps", [1.0, 1e-5])
def test_galerkin_identities(dim, level, eps):
    H = hierarchy(dim, level, eps)
    errors = H.galerkin_errors()
    assert len(errors) == level + 1
    assert max(errors) <= 1e-12
