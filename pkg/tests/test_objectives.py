import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfpower.model import build_coefficients, spectral_efficiency
from cfpower.objectives import (
    Kind,
    UnboundedGradientError,
    UtilityKind,
    default_tau,
    evaluate,
    gradient,
    se_partials,
    smoothed_min,
    softmin_weights,
    utility_from_se,
    value_and_gradient,
)
from cfpower.scenario import Scenario

from conftest import central_fd, make_drop, random_feasible

KINDS = list(Kind)


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def test_kind_parse():
    assert Kind.parse("mrmax") is Kind.MRMAX
    assert UtilityKind("PFmax").kind is Kind.PFMAX
    with pytest.raises(ValueError):
        Kind.parse("maxmin")
    with pytest.raises(ValueError):
        UtilityKind(Kind.MRMAX, tau=0.0)
    with pytest.raises(ValueError):
        UtilityKind(Kind.PFMAX, epsilon=-1.0)


class TestScalarUtilities:
    def test_smoothed_min_value(self):
        # -(1/10) log((e^-10 + e^-20)/2) = 1 + (log 2 - log(1 + e^-10))/10
        want = 1.0 + (math.log(2.0) - math.log1p(math.exp(-10.0))) / 10.0
        got = smoothed_min([1.0, 2.0], 10.0)
        assert got == pytest.approx(want, rel=1e-15)
        assert got == pytest.approx(1.069310, abs=1e-6)
        assert 1.0 <= got <= 1.0 + math.log(2) / 10

    def test_single_user_means_coincide(self):
        se = np.array([0.7])
        for kind in (Kind.SEMAX, Kind.HRMAX, Kind.MRMAX):
            f, _ = utility_from_se(UtilityKind(kind, tau=3.0, epsilon=0.0), se)
            assert f == pytest.approx(0.7, rel=1e-15)
        f, _ = utility_from_se(UtilityKind(Kind.PFMAX, epsilon=0.0), se)
        assert f == pytest.approx(math.log(0.7), rel=1e-15)

    def test_harmonic_of_equals(self):
        f, _ = utility_from_se(UtilityKind(Kind.HRMAX, epsilon=0.0), np.full(6, 1.3))
        assert f == pytest.approx(1.3, rel=1e-15)

    def test_softmin_uniform_when_equal(self):
        np.testing.assert_allclose(softmin_weights(np.full(5, 2.0), 50.0), 0.2)

    def test_softmin_concentrates(self):
        se = np.array([1.0, 1.5, 2.5, 3.0])
        w = [softmin_weights(se, tau)[0] for tau in (1.0, 10.0, 100.0)]
        assert w[0] < w[1] < w[2]
        assert w[2] == pytest.approx(1.0, abs=1e-12)

    def test_no_overflow(self):
        f = smoothed_min([1000.0, 1000.5], 1e4)
        assert f == pytest.approx(1000.0, abs=1e-3)

    @given(st.lists(st.floats(0.0, 20.0), min_size=1, max_size=50), st.floats(0.1, 1e6))
    def test_sandwich(self, se, tau):
        se = np.array(se)
        f = smoothed_min(se, tau)
        assert se.min() <= f <= se.min() + math.log(se.size) / tau
        w = softmin_weights(se, tau)
        assert np.all(w >= 0) and w.sum() == pytest.approx(1.0)

    def test_default_tau_gap(self):
        for K in (1, 2, 20, 100):
            assert math.log(max(K, 2)) / default_tau(K) == pytest.approx(0.01)

    def test_zero_rate_epsilon_zero(self, coeffs):
        mu = np.zeros((coeffs.M, coeffs.K))
        for kind in (Kind.PFMAX, Kind.HRMAX):
            u = UtilityKind(kind, epsilon=0.0)
            with pytest.raises(UnboundedGradientError):
                gradient(u, coeffs, mu)
        assert evaluate(UtilityKind(Kind.PFMAX, epsilon=0.0), coeffs, mu) == -math.inf
        assert evaluate(UtilityKind(Kind.HRMAX, epsilon=0.0), coeffs, mu) == 0.0


class TestPartials:
    def test_zero_at_origin(self, coeffs):
        J = se_partials(coeffs, np.zeros((coeffs.M, coeffs.K)))
        assert np.all(J == 0)

    def test_orthogonal_cross_term_is_beamforming_uncertainty(self):
        s = Scenario(M=1, K=2, N=1, D_km=1.0, beta=np.array([[1.0, 0.5]]), pilot_gram=np.eye(2),
                     nu=np.array([[0.8, 0.3]]), zeta_d=10.0, zeta_p=1.0, prelog=0.9)
        c = build_coefficients(s)
        mu = np.array([[0.6, 0.5]])
        J = se_partials(c, mu)
        b = 10.0 * 0.8 * 0.36
        q = 10.0 * 1.0 * (0.36 + 0.25)
        dq = 2.0 * 10.0 * 1.0 * 0.5
        want = 0.9 * (dq / (b + q + 1.0) - dq / (q + 1.0))
        assert J[0, 1, 0] == pytest.approx(want, rel=1e-14)

    def test_matches_fd(self, coeffs):
        rng = np.random.default_rng(3)
        mu = random_feasible(rng, coeffs.M, coeffs.K, coeffs.N)
        J = se_partials(coeffs, mu)
        for k in range(coeffs.K):
            fd = central_fd(lambda x: spectral_efficiency(coeffs, x)[k], mu)
            assert rel_err(J[k].T, fd) <= 1e-6

    @pytest.mark.parametrize("kind", KINDS)
    def test_fast_contraction_matches_dense(self, kind, coeffs):
        rng = np.random.default_rng(4)
        mu = random_feasible(rng, coeffs.M, coeffs.K, coeffs.N)
        u = UtilityKind(kind, tau=20.0)
        se = spectral_efficiency(coeffs, mu)
        _, w = utility_from_se(u, se, coeffs.K)
        dense = np.einsum("k,kim->mi", w, se_partials(coeffs, mu))
        np.testing.assert_allclose(gradient(u, coeffs, mu), dense, rtol=1e-10, atol=1e-14 * np.abs(dense).max())


class TestGradient:
    @pytest.mark.parametrize("kind", KINDS)
    def test_fd_small_instance(self, kind):
        s = make_drop(seed=5, M=8, K=3, N=1, T_p=2)
        c = build_coefficients(s)
        u = UtilityKind(kind, tau=30.0)
        mu = random_feasible(np.random.default_rng(8), 8, 3, 1)
        fd = central_fd(lambda x: evaluate(u, c, x), mu)
        assert rel_err(gradient(u, c, mu), fd) <= 1e-5

    def test_semax_zero_at_origin(self, coeffs):
        g = gradient(Kind.SEMAX, coeffs, np.zeros((coeffs.M, coeffs.K)))
        assert np.all(g == 0)

    @pytest.mark.parametrize("kind", [Kind.PFMAX, Kind.HRMAX, Kind.MRMAX])
    def test_finite_at_origin(self, kind, coeffs):
        g = gradient(kind, coeffs, np.zeros((coeffs.M, coeffs.K)))
        assert np.all(np.isfinite(g))

    @pytest.mark.parametrize("kind", KINDS)
    def test_user_permutation(self, kind, drop, coeffs):
        rng = np.random.default_rng(9)
        mu = random_feasible(rng, drop.M, drop.K, drop.N)
        p = rng.permutation(drop.K)
        s2 = Scenario(M=drop.M, K=drop.K, N=drop.N, D_km=drop.D_km, beta=drop.beta[:, p],
                      pilot_gram=drop.pilot_gram[np.ix_(p, p)], nu=drop.nu[:, p], zeta_d=drop.zeta_d,
                      zeta_p=drop.zeta_p, prelog=drop.prelog)
        c2 = build_coefficients(s2)
        f1, g1 = value_and_gradient(kind, coeffs, mu)
        f2, g2 = value_and_gradient(kind, c2, mu[:, p])
        assert f2 == pytest.approx(f1, rel=1e-12)
        np.testing.assert_allclose(g2, g1[:, p], rtol=1e-10, atol=1e-14 * np.abs(g1).max())

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10**6), st.sampled_from(KINDS))
    def test_fd_property(self, seed, kind):
        rng = np.random.default_rng(seed)
        M, K, N = int(rng.integers(2, 10)), int(rng.integers(1, 5)), int(rng.choice([1, 2, 4]))
        s = make_drop(seed=seed, M=M, K=K, N=N, T_p=int(rng.integers(1, 4)))
        c = build_coefficients(s)
        mu = random_feasible(rng, M, K, N)
        u = UtilityKind(kind)
        fd = central_fd(lambda x: evaluate(u, c, x), mu)
        assert rel_err(gradient(u, c, mu), fd) <= 1e-5
