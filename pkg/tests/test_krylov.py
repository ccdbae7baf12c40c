import numpy as np
import pytest
import scipy.sparse as sp

from crmg import krylov, sparse
from crmg.krylov import dense_ba_spectrum, effective_condition, lanczos_spectrum, pcg
from crmg.mgcycle import MgConfig, MgPreconditioner
from conftest import hierarchy, preconditioner, random_spd

def test_pcg_identity_one_iteration(rng):
    A = sparse.as_csr(sp.identity(7))
    r = pcg(A, lambda x: x, rng.standard_normal(7), tol=1e-12)
    assert r.iterations == 1 and r.converged


def test_pcg_finite_termination(rng):
    A = sparse.as_csr(sp.diags([1.0, 2.0]))
    r = pcg(A, lambda x: x, rng.standard_normal(2), tol=1e-12)
    assert r.iterations <= 2 and r.converged


def test_pcg_result_invariants(rng):
    M = random_spd(rng, 30)
    r = pcg(M, lambda x: x / np.diag(M), rng.standard_normal(30), tol=1e-10)
    assert r.converged and r.residual_history[-1] < 1e-10
    diag, off = r.tridiagonal()
    assert len(diag) == r.iterations and len(off) == r.iterations - 1
    r = pcg(M, lambda x: x, rng.standard_normal(30), tol=1e-14, maxit=3)
    assert not r.converged and r.iterations == 3


def test_pcg_energy_error_monotone(rng):
    for _ in range(10):
        n = int(rng.integers(5, 40))
        M = random_spd(rng, n)
        u = rng.standard_normal(n)
        Dinv = 1 / np.diag(M)
        errors = []
        pcg(M, lambda x: Dinv * x, M @ u, tol=1e-12,
            callback=lambda k, x: errors.append(np.sqrt((x - u) @ M @ (x - u))))
        assert np.all(np.diff(errors) <= 1e-12 * errors[0])


def test_pcg_rejects_indefinite_preconditioner(rng):
    M = random_spd(rng, 5)
    with pytest.raises(krylov.NotSPDPreconditionerError):
        pcg(M, lambda x: -x, rng.standard_normal(5))


def test_pcg_zero_rhs():
    r = pcg(np.eye(3), lambda x: x, np.zeros(3))
    assert r.iterations == 0 and np.all(r.x == 0)


def test_pcg_ritz_values_match_dense(rng):
    B = preconditioner(2, 1, 1e-3)
    A = B.hierarchy.finest
    r = pcg(A, B, rng.standard_normal(A.shape[0]), tol=1e-14, maxit=300)
    ritz = r.ritz_values()
    dense = dense_ba_spectrum(A, B)
    assert ritz[0] == pytest.approx(dense.lambda_min, rel=1e-6)
    assert ritz[-1] == pytest.approx(dense.lambda_max, rel=1e-4)
    assert ritz[-1] <= dense.lambda_max * (1 + 1e-10)


def test_pcg_iterations_2d_level0_eps1():
    B = preconditioner(2, 0, 1.0)
    r = pcg(B.hierarchy.finest, B, B.hierarchy.rhs, tol=1e-7)
    assert r.iterations == 8


@pytest.mark.parametrize("eigs,m,expected", [
    ([1e-5, 0.5, 0.7, 1.0], 1, 2.0),
    ([1e-5, 0.5, 0.7, 1.0], 0, 1e5),
    ([3.0, 3.0, 3.0], 2, 1.0),
    ([3.0, 3.0, 3.0], 0, 1.0),
])
def test_effective_condition(eigs, m, expected):
    assert effective_condition(eigs, m) == pytest.approx(expected, rel=1e-15)


def test_effective_condition_range():
    with pytest.raises(ValueError):
        effective_condition([1.0, 2.0], 2)


def test_count_small():
    assert krylov.count_small([1e-5, 0.5, 0.7, 1.0]) == 1
    assert krylov.count_small([1e-5, 2e-5, 0.5, 0.7, 0.9, 1.0]) == 2
    assert krylov.count_small([0.5, 0.6, 0.7, 1.0]) == 0


def test_spectrum_report_invariants():
    rep = krylov.SpectrumReport([0.7, 1e-5, 1.0, 0.5])
    assert rep.lambda_min == 1e-5 and rep.lambda_2 == 0.5 and rep.lambda_max == 1.0
    assert rep.K >= rep.K_1 >= 1
    assert rep.m0_detected == 1
    with pytest.raises(krylov.NotSPDPreconditionerError):
        krylov.SpectrumReport([-1.0, 1.0])


def test_lanczos_exact_preconditioner(rng):
    H = hierarchy(2, 1, 1e-3)
    B = MgPreconditioner(H, MgConfig("exact"))
    rep = lanczos_spectrum(H.finest, B, seed=3)
    np.testing.assert_allclose(rep.eigenvalues, 1.0, rtol=1e-8)
    assert rep.K == pytest.approx(1.0, rel=1e-8) and rep.K_1 == pytest.approx(1.0, rel=1e-8)


def test_lanczos_full_spectrum_small_matrix(rng):
    M = random_spd(rng, 12)
    rep = lanczos_spectrum(sparse.as_csr(M), lambda x: x, steps=12)
    np.testing.assert_allclose(rep.eigenvalues, np.linalg.eigvalsh(M), rtol=1e-10)


def test_lanczos_reproducible():
    B = preconditioner(2, 1, 1e-4)
    a = lanczos_spectrum(B.hierarchy.finest, B, seed=7)
    b = lanczos_spectrum(B.hierarchy.finest, B, seed=7)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)


@pytest.mark.parametrize("dim,level,eps", [(2, 0, 1e-5), (2, 1, 1.0), (2, 1, 1e-2), (3, 0, 1e-7)])
def test_lanczos_against_dense_oracle(dim, level, eps):
    B = preconditioner(dim, level, eps)
    A = B.hierarchy.finest
    lz, dn = lanczos_spectrum(A, B), dense_ba_spectrum(A, B)
    for name in ("lambda_min", "lambda_2", "lambda_max", "K"):
        assert getattr(lz, name) == pytest.approx(getattr(dn, name), rel=1e-2)


def test_dense_identity_preconditioner_gives_spectrum_of_a(rng):
    M = random_spd(rng, 15)
    rep = dense_ba_spectrum(sparse.as_csr(M), lambda x: x)
    np.testing.assert_allclose(rep.eigenvalues, np.linalg.eigvalsh(M), rtol=1e-12)
    with pytest.raises(ValueError):
        dense_ba_spectrum(sparse.as_csr(M), lambda x: x, dense_limit=10)


def test_dense_jacobi_and_lapack_paths_agree():
    B = preconditioner(2, 1, 1e-3)
    A = B.hierarchy.finest
    a = dense_ba_spectrum(A, B)
    b = dense_ba_spectrum(A, B, jacobi_limit=0)
    assert a.method == "dense-jacobi" and b.method == "dense-lapack"
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, rtol=1e-9)


def test_one_small_eigenvalue_at_high_contrast():
    rep = dense_ba_spectrum(*_ab(2, 1, 1e-5))
    assert rep.m0_detected == 1
    assert np.sum(rep.eigenvalues < 0.1 * rep.lambda_2) == 1


def test_no_outlier_without_jump():
    rep = dense_ba_spectrum(*_ab(2, 1, 1.0))
    assert rep.m0_detected == 0
    assert rep.lambda_2 / rep.lambda_min < 2
    assert rep.K_1 == pytest.approx(rep.K, rel=0.5)


def test_spectrum_2d_level4_eps_1e5():
    rep = lanczos_spectrum(*_ab(2, 4, 1e-5))
    assert 2.76e4 / 2 <= rep.K <= 2.76e4 * 2
    assert abs(rep.K_1 - 2.64) <= 0.7


def test_export_eigenvalues(tmp_path):
    krylov.export_eigenvalues(tmp_path / "e.txt", [3.0, 1.0, 2.0])
    np.testing.assert_array_equal(np.loadtxt(tmp_path / "e.txt"), [1.0, 2.0, 3.0])


def _ab(dim, level, eps):
    B = preconditioner(dim, level, eps)
    return B.hierarchy.finest, B
