"""Filter application, Rayleigh-Ritz and the FEAST drivers."""
import numpy as np
import pytest

from rafeast.contour import SpectralInterval, build_contour, rational_filter_value
from rafeast.errors import DimensionMismatch, EmptySelection
from rafeast.feast import (
    FeastConfig,
    apply_filter,
    containment_error,
    feast_standard,
    filter_ritz_pairs,
    ra_feast,
    rayleigh_ritz,
    subspace_error,
)
from rafeast.oracle import ground_truth_in_interval, max_error_metric
from rafeast.problems import laplacian, path_graph, random_geometric_graph, synthetic_diagonal
from rafeast.shifted import SolverConfig
from rafeast.warmstart import WarmstartConfig

from conftest import as_sparse, random_symmetric

IV05 = SpectralInterval(0.0, 5.0)


def result_fingerprint(r):
    """Every non-timing output of a solver run."""
    trace = [
        (t.iteration, t.max_residual, t.n_in_window, t.solver_perturbation,
         t.quadrature_perturbation, t.subspace_error)
        for t in r.trace
    ]
    return (r.eigenvalues.tobytes(), r.eigenvectors.tobytes(), r.residual_norms.tobytes(),
            r.iterations_used, r.converged, r.saturated, trace)


class TestApplyFilter:
    def test_diagonal_columns(self):
        A = synthetic_diagonal([1.0, 10.0])
        c = build_contour(IV05, 16)
        Qf, eps = apply_filter(A, c, np.eye(2), SolverConfig())
        h1, h10 = rational_filter_value(c, 1.0), rational_filter_value(c, 10.0)
        assert 0.99 <= h1 <= 1.01 and abs(h10) <= 0.05
        np.testing.assert_allclose(Qf, np.diag([h1, h10]), atol=1e-10)
        assert eps <= 1e-12

    @pytest.mark.parametrize("n_c", [2, 4, 8, 16])
    def test_filter_consistency(self, n_c):
        lam = np.array([-1.0, 0.2, 2.5, 4.9, 5.3, 9.0])
        A = synthetic_diagonal(lam)
        c = build_contour(IV05, n_c)
        Qf, _ = apply_filter(A, c, np.eye(6), SolverConfig())
        np.testing.assert_allclose(Qf, np.diag(rational_filter_value(c, lam)), atol=1e-10)

    def test_zero_block(self):
        A = synthetic_diagonal([1.0, 10.0, 3.0])
        Qf, _ = apply_filter(A, build_contour(IV05, 8), np.zeros((3, 2)), SolverConfig())
        assert np.all(Qf == 0)

    def test_refinement(self):
        A = synthetic_diagonal(np.linspace(-3, 9, 25))
        Q = np.random.default_rng(0).standard_normal((25, 4))
        F16, _ = apply_filter(A, build_contour(IV05, 16), Q, SolverConfig())
        F32, _ = apply_filter(A, build_contour(IV05, 32), Q, SolverConfig())
        F64, _ = apply_filter(A, build_contour(IV05, 64), Q, SolverConfig())
        assert np.linalg.norm(F32 - F64) < np.linalg.norm(F16 - F64)

    def test_projector_on_small_matrix(self):
        M = random_symmetric(40, 2)
        w, V = np.linalg.eigh(M)
        iv = SpectralInterval(0.5 * (w[9] + w[10]), 0.5 * (w[19] + w[20]))
        Qf, _ = apply_filter(as_sparse(M), build_contour(iv, 64), np.eye(40), SolverConfig())
        P = V[:, 10:20] @ V[:, 10:20].T
        assert np.linalg.norm(Qf - P, 2) <= 1e-6

    def test_parallel_bitwise(self):
        A = laplacian(random_geometric_graph(200, 0))
        Q = np.random.default_rng(1).standard_normal((200, 6))
        c = build_contour(SpectralInterval(0.001, 5.0), 8)
        a = apply_filter(A, c, Q, SolverConfig(), parallel=False)
        b = apply_filter(A, c, Q, SolverConfig(), parallel=True)
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]

    def test_iterative_perturbation_reported(self):
        A = laplacian(random_geometric_graph(150, 2))
        Q = np.linalg.qr(np.random.default_rng(2).standard_normal((150, 4)))[0]
        c = build_contour(SpectralInterval(0.001, 5.0), 4)
        exact, e0 = apply_filter(A, c, Q, SolverConfig())
        loose, e1 = apply_filter(A, c, Q, SolverConfig("iterative", 1e-3, 40))
        assert e1 > e0
        assert np.linalg.norm(loose - exact) <= e1

    def test_shape(self):
        with pytest.raises(DimensionMismatch):
            apply_filter(synthetic_diagonal([1.0]), build_contour(IV05, 2), np.ones((2, 1)),
                         SolverConfig())


class TestRayleighRitz:
    def test_invariant_subspace(self):
        theta, _ = rayleigh_ritz(synthetic_diagonal([1.0, 2.0, 3.0]), np.eye(3)[:, :2])
        np.testing.assert_array_equal(theta, [1.0, 2.0])

    def test_rotation_invariance(self):
        A = as_sparse(random_symmetric(30, 3))
        rng = np.random.default_rng(0)
        Q = np.linalg.qr(rng.standard_normal((30, 5)))[0]
        R = np.linalg.qr(rng.standard_normal((5, 5)))[0]
        np.testing.assert_allclose(rayleigh_ritz(A, Q)[0], rayleigh_ritz(A, Q @ R)[0], atol=1e-12)

    def test_interlacing(self):
        M = random_symmetric(30, 4)
        w = np.linalg.eigvalsh(M)
        Q = np.linalg.qr(np.random.default_rng(5).standard_normal((30, 5)))[0]
        theta, Y = rayleigh_ritz(as_sparse(M), Q)
        assert w[0] <= theta[0] and theta[-1] <= w[-1]
        for i in range(5):
            assert w[i] - 1e-12 <= theta[i] <= w[30 - 5 + i] + 1e-12
        np.testing.assert_allclose(Y.T @ Y, np.eye(5), atol=1e-12)


class TestFilterRitzPairs:
    def test_window(self):
        vals, vecs = filter_ritz_pairs(np.array([0.5, 3.0, 7.0]), np.eye(3), IV05)
        np.testing.assert_array_equal(vals, [0.5, 3.0])
        assert vecs.shape == (3, 2)

    def test_empty(self):
        with pytest.raises(EmptySelection):
            filter_ritz_pairs(np.array([6.0, 7.0]), np.eye(2), IV05)

    def test_closed_endpoint(self):
        vals, _ = filter_ritz_pairs(np.array([5.0]), np.eye(1), IV05, slack=0.0)
        assert vals.tolist() == [5.0]


class TestSubspaceError:
    def test_identical(self):
        Q = np.linalg.qr(np.random.default_rng(0).standard_normal((12, 3)))[0]
        assert subspace_error(Q, Q) <= 1e-7

    @pytest.mark.parametrize("theta", [1e-6, 0.3, np.pi / 2])
    def test_two_vectors(self, theta):
        u = np.array([[1.0], [0.0]])
        v = np.array([[np.cos(theta)], [np.sin(theta)]])
        assert subspace_error(u, v) == pytest.approx(np.sqrt(2) * np.sin(theta), rel=1e-9)

    def test_explicit_projectors(self):
        rng = np.random.default_rng(3)
        Q1 = np.linalg.qr(rng.standard_normal((20, 4)))[0]
        Q2 = np.linalg.qr(Q1 + 0.2 * rng.standard_normal((20, 4)))[0]
        ref = np.linalg.norm(Q1 @ Q1.T - Q2 @ Q2.T)
        assert abs(subspace_error(Q1, Q2) - ref) <= 1e-12

    def test_shape(self):
        with pytest.raises(DimensionMismatch):
            subspace_error(np.eye(4)[:, :2], np.eye(4)[:, :3])

    def test_containment(self):
        Q = np.eye(6)[:, :4]
        assert containment_error(Q, np.eye(6)[:, :2]) == 0.0
        assert containment_error(Q, np.eye(6)[:, [4]]) == pytest.approx(np.sqrt(2))


class TestFeastStandard:
    def test_diagonal(self):
        A = synthetic_diagonal([1.0, 2.0, 50.0])
        r = feast_standard(A, FeastConfig(IV05, m0=2))
        np.testing.assert_allclose(r.eigenvalues, [1.0, 2.0], atol=1e-12)
        assert r.converged and r.iterations_used <= 5
        assert np.all(r.residual_norms <= 1e-10)

    def test_path_p3(self):
        A = laplacian(path_graph(3))
        r = feast_standard(A, FeastConfig(SpectralInterval(0.5, 3.5), m0=2))
        np.testing.assert_allclose(r.eigenvalues, [1.0, 3.0], atol=1e-12)

    def test_undersized_subspace_is_flagged(self):
        A = synthetic_diagonal([1.0, 2.0, 50.0])
        r = feast_standard(A, FeastConfig(IV05, m0=1, max_iter=5))
        assert not r.converged or r.saturated

    def test_rgg_against_oracle(self):
        A = laplacian(random_geometric_graph(400, 1))
        iv = SpectralInterval(0.001, 5.0)
        truth, V, count = ground_truth_in_interval(A, iv)
        r = feast_standard(A, FeastConfig(iv, m0=count + 5), reference_basis=V)
        assert r.converged and r.eigenvalues.size == count
        assert max_error_metric(r.eigenvalues, truth) <= 1e-10
        errs = [t.subspace_error for t in r.trace]
        assert errs[-1] <= 1e-8

    def test_sparse_backend_and_iterative(self):
        A = laplacian(random_geometric_graph(200, 5))
        iv = SpectralInterval(0.001, 5.0)
        truth, _, count = ground_truth_in_interval(A, iv, vectors=False)
        for solver in (SolverConfig(backend="sparse"), SolverConfig("iterative", 1e-12, 200)):
            r = feast_standard(A, FeastConfig(iv, m0=count + 4, solver=solver))
            assert max_error_metric(r.eigenvalues, truth) <= 1e-9

    def test_warmstart_shape(self):
        A = synthetic_diagonal([1.0, 2.0, 50.0])
        with pytest.raises(DimensionMismatch):
            feast_standard(A, FeastConfig(IV05, m0=2, warmstart=np.eye(3)))

    def test_fixed_point(self):
        A = synthetic_diagonal([1.0, 2.0, 50.0, 60.0])
        V1 = np.eye(4)[:, :2]
        r = feast_standard(A, FeastConfig(IV05, m0=2, max_iter=1, warmstart=V1),
                           reference_basis=V1)
        assert r.trace[0].subspace_error <= 1e-10


class TestRAFeast:
    def test_diagonal(self):
        A = synthetic_diagonal([1.0, 2.0, 50.0] + list(np.linspace(60, 90, 20)))
        cfg = FeastConfig(IV05, m0=2, n_c=4, max_iter=2)
        wcfg = WarmstartConfig(m0=2, p=4, q=None, epsilon=0.1, transform="chebyshev")
        r = ra_feast(A, cfg, wcfg)
        np.testing.assert_allclose(r.eigenvalues, [1.0, 2.0], atol=1e-10)
        assert np.all(r.residual_norms <= 1e-8)
        assert r.time_phase1 > 0 and r.warmstart_info is not None

    def test_scaled_transform_top_window(self):
        # plain power steps suit a window at the top of the spectrum
        A = synthetic_diagonal(list(np.linspace(0.0, 0.4, 30)) + [3.0, 4.0])
        cfg = FeastConfig(SpectralInterval(0.5, 5.0), m0=2, n_c=4, max_iter=2)
        r = ra_feast(A, cfg, WarmstartConfig(m0=2, p=4, q=None))
        np.testing.assert_allclose(r.eigenvalues, [3.0, 4.0], atol=1e-10)

    def test_exact_warmstart(self):
        A = synthetic_diagonal([1.0, 2.0, 50.0, 60.0])
        cfg = FeastConfig(IV05, m0=2, max_iter=1, warmstart=np.eye(4)[:, :2])
        r = feast_standard(A, cfg)
        assert np.all(r.residual_norms <= 1e-12)

    def test_m0_mismatch(self):
        A = synthetic_diagonal(np.arange(1.0, 20.0))
        with pytest.raises(ValueError):
            ra_feast(A, FeastConfig(IV05, m0=5), WarmstartConfig(m0=4))

    @pytest.mark.parametrize("parallel", [False, True])
    def test_deterministic(self, parallel):
        A = laplacian(random_geometric_graph(300, 7))
        iv = SpectralInterval(0.001, 5.0)
        truth, V, count = ground_truth_in_interval(A, iv)
        m0 = count + 5
        wcfg = WarmstartConfig(m0=m0, q=None, seed=3, transform="chebyshev")
        runs = [
            ra_feast(A, FeastConfig(iv, m0=m0, n_c=2, max_iter=2, seed=3,
                                    parallel_quadrature=p), wcfg, reference_basis=V)
            for p in (parallel, parallel, not parallel)
        ]
        fp = [result_fingerprint(r) for r in runs]
        assert fp[0] == fp[1] == fp[2]
        assert max_error_metric(runs[0].eigenvalues, truth) <= 1e-8

    def test_timing_accounting(self):
        A = laplacian(random_geometric_graph(300, 1))
        iv = SpectralInterval(0.001, 5.0)
        wcfg = WarmstartConfig(m0=10, q=None, transform="chebyshev")
        r = ra_feast(A, FeastConfig(iv, m0=10, n_c=2, max_iter=2), wcfg)
        assert r.time_phase1 + r.time_phase2 <= r.time_total + 1e-9
        assert r.time_factor <= r.time_phase2
