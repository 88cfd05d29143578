"""Randomized range finder and the warmstart bounds."""
import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rafeast.contour import SpectralInterval
from rafeast.errors import (
    DegenerateGap,
    DimensionMismatch,
    InvalidOversampling,
    InvalidSpectrum,
    RankDeficientSketch,
)
from rafeast.oracle import canonical_angles
from rafeast.problems import laplacian, random_geometric_graph, synthetic_diagonal
from rafeast.warmstart import (
    ScaledOperator,
    WarmstartConfig,
    bound_report,
    c1_delta,
    default_oversampling,
    gaussian_test_matrix,
    halko_residual_bound,
    lanczos_upper_bound,
    randomized_subspace,
    select_power_iterations,
    verify_warmstart_bound,
)

mp.mp.dps = 50


def mp_halko(m0, p, delta, b0, b1, q):
    c1 = 1 + mp.mpf(p) / 2 * mp.log(2 * mp.mpf(m0) / mp.mpf(delta))
    return c1 * mp.sqrt(1 + mp.mpf(m0) / (p - 1)) * mp.mpf(b1) * (mp.mpf(b1) / mp.mpf(b0)) ** (2 * q)


def mp_q(m0, p, delta, b0, b1, eps, gap):
    c1 = 1 + mp.mpf(p) / 2 * mp.log(2 * mp.mpf(m0) / mp.mpf(delta))
    arg = c1 * mp.sqrt(1 + mp.mpf(m0) / (p - 1)) * mp.mpf(b1) / (mp.mpf(eps) * mp.mpf(gap))
    rhs = mp.log(arg) / (2 * mp.log(mp.mpf(b0) / mp.mpf(b1)))
    return rhs, max(0, int(mp.ceil(rhs)))


class TestScaledOperator:
    def test_maps_window_to_unit_interval(self):
        B = ScaledOperator(synthetic_diagonal([1.0, 3.0, 5.0]), 1.0, 5.0)
        np.testing.assert_allclose(B.dense(), np.diag([0.0, 0.5, 1.0]))
        np.testing.assert_allclose(B.to_scaled([1.0, 5.0]), [0.0, 1.0])
        np.testing.assert_allclose(B.to_original(B.to_scaled(2.7)), 2.7)

    def test_apply_matches_dense(self):
        A = laplacian(random_geometric_graph(80, 1))
        B = ScaledOperator.from_interval(A, SpectralInterval(0.5, 4.0))
        X = np.random.default_rng(0).standard_normal((80, 3))
        np.testing.assert_allclose(B @ X, B.dense() @ X, atol=1e-13)


class TestGaussian:
    def test_deterministic(self):
        assert np.array_equal(gaussian_test_matrix(50, 4, 7), gaussian_test_matrix(50, 4, 7))

    def test_moments(self):
        G = gaussian_test_matrix(2000, 50, 0)
        assert abs(G.mean()) <= 0.02
        assert 0.95 <= G.var() <= 1.05

    def test_seed_sensitivity(self):
        assert not np.array_equal(gaussian_test_matrix(10, 2, 0), gaussian_test_matrix(10, 2, 1))


class TestConfig:
    def test_oversampling_floor(self):
        with pytest.raises(InvalidOversampling):
            WarmstartConfig(m0=5, p=3)

    def test_default_oversampling(self):
        assert default_oversampling(10) == 10 and WarmstartConfig(m0=10).p == 10
        assert default_oversampling(70) == 20

    @pytest.mark.parametrize("kw", [dict(m0=0), dict(m0=2, q=-1), dict(m0=2, delta=1.0),
                                    dict(m0=2, transform="x"), dict(m0=2, q_boundary="x")])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            WarmstartConfig(**kw)


def _diag_problem(beta):
    A = synthetic_diagonal(beta)
    return ScaledOperator(A, 0.0, 1.0)


class TestRandomizedSubspace:
    def test_captures_dominant_directions(self):
        beta = np.array([1.0, 0.5] + [0.1] * 10)
        Q0 = randomized_subspace(_diag_problem(beta), WarmstartConfig(m0=2, p=4, q=4))
        assert canonical_angles(Q0, np.eye(12)[:, :2]).max() <= 1e-3

    @pytest.mark.parametrize("transform", ["scaled", "chebyshev"])
    @pytest.mark.parametrize("q", [0, 2, None])
    def test_orthonormal(self, transform, q):
        A = laplacian(random_geometric_graph(300, 2))
        B = ScaledOperator.from_interval(A, SpectralInterval(0.001, 5.0))
        Q0 = randomized_subspace(B, WarmstartConfig(m0=12, q=q, transform=transform))
        assert Q0.shape == (300, 12)
        assert np.linalg.norm(Q0.T @ Q0 - np.eye(12)) <= 1e-12 * np.sqrt(12)

    def test_power_iterations_help(self):
        n = 200
        beta = 0.97 ** np.arange(n)
        B = _diag_problem(beta)
        V1 = np.eye(n)[:, :5]

        def mean_err(q):
            errs = []
            for s in range(20):
                Q0 = randomized_subspace(B, WarmstartConfig(m0=5, p=5, q=q, seed=s))
                errs.append(np.sin(canonical_angles(Q0, V1)[0]))
            return np.mean(errs)

        assert mean_err(3) < mean_err(0)

    def test_ordering_by_rayleigh_quotient(self):
        beta = np.linspace(1.0, 0.0, 40)
        B = _diag_problem(beta)
        Q0 = randomized_subspace(B, WarmstartConfig(m0=6, p=6, q=2))
        rq = np.einsum("ij,ij->j", Q0, B @ Q0)
        assert np.all(np.diff(rq) <= 1e-14)

    def test_rank_deficient(self):
        beta = np.zeros(30)
        beta[:2] = [1.0, 0.5]
        with pytest.raises(RankDeficientSketch):
            randomized_subspace(_diag_problem(beta), WarmstartConfig(m0=5, p=4, q=1))

    def test_too_wide(self):
        with pytest.raises(ValueError):
            randomized_subspace(_diag_problem(np.ones(8)), WarmstartConfig(m0=5, p=4))

    def test_info_and_determinism(self):
        A = laplacian(random_geometric_graph(400, 3))
        B = ScaledOperator.from_interval(A, SpectralInterval(0.001, 5.0))
        cfg = WarmstartConfig(m0=10, q=None, transform="chebyshev", seed=9)
        Q1, info = randomized_subspace(B, cfg, return_info=True)
        Q2 = randomized_subspace(B, cfg)
        assert np.array_equal(Q1, Q2)
        assert 0 <= info.q <= cfg.max_q
        assert info.operator_applications == 1 + 2 * info.q
        assert info.degree >= 1

    def test_lanczos_upper_bound(self):
        A = laplacian(random_geometric_graph(500, 0))
        lmax = np.linalg.eigvalsh(A.toarray())[-1]
        ub = lanczos_upper_bound(lambda v: A @ v, A.n)
        assert lmax <= ub <= 1.1 * lmax


class TestClosedForms:
    def test_halko_example(self):
        cfg = WarmstartConfig(m0=10, p=10, q=1, delta=0.05)
        got = halko_residual_bound(cfg, 0.5, 0.25)
        ref = mp_halko(10, 10, 0.05, 0.5, 0.25, 1)
        assert abs(got - float(ref)) <= 1e-12 * float(ref)
        assert abs(float(ref) - 2.8112) < 1e-4
        assert abs(c1_delta(10, 10, 0.05) - 30.9573) < 1e-4

    def test_halko_zero_tail(self):
        for q in range(4):
            assert halko_residual_bound(WarmstartConfig(m0=3, q=q), 0.7, 0.0) == 0.0

    def test_halko_bad_ordering(self):
        with pytest.raises(InvalidSpectrum):
            halko_residual_bound(WarmstartConfig(m0=3), 0.2, 0.3)

    @settings(max_examples=60, deadline=None)
    @given(
        st.integers(1, 60), st.integers(4, 30), st.floats(0.001, 0.5),
        st.floats(0.05, 1.0), st.floats(0.01, 0.99), st.integers(0, 6),
    )
    def test_halko_matches_high_precision(self, m0, p, delta, b0, frac, q):
        b1 = b0 * frac
        got = halko_residual_bound(WarmstartConfig(m0=m0, p=p, q=q, delta=delta), b0, b1)
        ref = float(mp_halko(m0, p, delta, b0, b1, q))
        assert abs(got - ref) <= 1e-12 * ref
        nxt = halko_residual_bound(WarmstartConfig(m0=m0, p=p, q=q + 1, delta=delta), b0, b1)
        assert nxt < got

    def test_select_q_example(self):
        cfg = WarmstartConfig(m0=10, p=10, delta=0.05)
        rhs, q = mp_q(10, 10, 0.05, 0.5, 0.25, 0.1, 0.25)
        assert abs(float(rhs) - 4.406) < 1e-3 and q == 5
        assert select_power_iterations(cfg, 0.5, 0.25, 0.1, 0.25) == 5

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 40), st.integers(4, 20), st.floats(0.05, 1.0),
           st.floats(0.01, 0.95), st.floats(1e-4, 1.0))
    def test_select_q_matches_high_precision(self, m0, p, b0, frac, eps):
        b1 = b0 * frac
        cfg = WarmstartConfig(m0=m0, p=p)
        gap = b0 - b1
        rhs, q = mp_q(m0, p, 0.05, b0, b1, eps, gap)
        if abs(rhs - mp.nint(rhs)) < 1e-9:
            return  # integer boundary: rounding direction is not meaningful
        assert select_power_iterations(cfg, b0, b1, eps, gap) == q

    def test_select_q_easy(self):
        cfg = WarmstartConfig(m0=2, p=4)
        assert select_power_iterations(cfg, 1.0, 1e-6, 1.0, 0.9) == 0
        assert select_power_iterations(cfg, 1.0, 0.0, 0.1, 1.0) == 0

    def test_select_q_degenerate(self):
        with pytest.raises(DegenerateGap):
            select_power_iterations(WarmstartConfig(m0=2), 0.5, 0.5, 0.1, 0.1)

    def test_bound_report(self):
        cfg = WarmstartConfig(m0=10, p=10, q=1)
        rep = bound_report(cfg, 0.5, 0.25, 0.1)
        assert rep.delta_gap == 0.25 and rep.recommended_q == 5
        assert rep.warmstart_bound == pytest.approx(rep.r_halko / 0.25, rel=1e-15)


class TestVerifyBound:
    def _report(self):
        return bound_report(WarmstartConfig(m0=2, p=4, q=1), 1.0, 0.5, 0.1)

    def test_identical(self):
        V = np.eye(6)[:, :2]
        obs, bd, holds = verify_warmstart_bound(V, V, self._report())
        assert obs == 0.0 and holds

    def test_complement(self):
        obs, _, _ = verify_warmstart_bound(np.eye(6)[:, 2:4], np.eye(6)[:, :2], self._report())
        assert obs == pytest.approx(1.0, abs=1e-15)

    def test_shape(self):
        with pytest.raises(DimensionMismatch):
            verify_warmstart_bound(np.eye(6)[:, :3], np.eye(6)[:, :2], self._report())

    def test_monte_carlo_and_davis_kahan(self):
        n, m0 = 200, 10
        beta = np.concatenate([np.linspace(1.0, 0.5, m0), 0.25 * 0.97 ** np.arange(n - m0)])
        B = _diag_problem(beta)
        Bd = np.diag(beta)
        V1 = np.eye(n)[:, :m0]
        held = chain = 0
        for s in range(100):
            cfg = WarmstartConfig(m0=m0, p=10, q=2, seed=s, delta=0.05)
            rep = bound_report(cfg, beta[m0 - 1], beta[m0], 0.1)
            Q0 = randomized_subspace(B, cfg)
            obs, _, holds = verify_warmstart_bound(Q0, V1, rep)
            held += holds
            lhs = np.linalg.norm(Bd - Q0 @ (Q0.T @ Bd), 2) / rep.delta_gap
            chain += lhs + 1e-10 >= obs
        assert held >= 95 and chain == 100
