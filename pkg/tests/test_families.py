import numpy as np
import pytest

from crossover_design import DomainError, Family, NonFiniteInput, mean, mean_derivative, variance_fn


class TestMean:
    def test_binary_at_zero(self):
        assert mean(Family.BINARY, 0.0) == pytest.approx(0.5)

    def test_poisson_at_zero(self):
        assert mean(Family.POISSON, 0.0) == pytest.approx(1.0)

    def test_binary_reference_value(self):
        assert mean(Family.BINARY, 0.534) == pytest.approx(0.6304156, abs=1e-7)

    def test_overflow_safe(self):
        assert 0.0 < mean(Family.BINARY, -800.0) < mean(Family.BINARY, 800.0) <= 1.0

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteInput):
            mean(Family.BINARY, float("nan"))
        with pytest.raises(NonFiniteInput):
            mean(Family.POISSON, float("inf"))

    def test_vectorized(self):
        out = mean(Family.POISSON, np.array([0.0, 1.0]))
        np.testing.assert_allclose(out, [1.0, np.e])

    @pytest.mark.parametrize("family", list(Family))
    def test_monotone(self, family):
        etas = np.sort(np.random.default_rng(3).uniform(-8, 8, size=50))
        values = [mean(family, e) for e in etas]
        assert all(a < b for a, b in zip(values, values[1:]))


class TestVarianceFn:
    def test_binary_peak(self):
        assert variance_fn(Family.BINARY, 0.5) == pytest.approx(0.25)

    def test_poisson_identity(self):
        assert variance_fn(Family.POISSON, 3.0) == pytest.approx(3.0)

    def test_binary_at_reference_mean(self):
        # direct arithmetic: 0.6304156 * (1 - 0.6304156)
        assert variance_fn(Family.BINARY, 0.6304156) == pytest.approx(0.2329918, abs=1e-6)

    def test_domain_enforced(self):
        with pytest.raises(DomainError):
            variance_fn(Family.BINARY, 1.2)
        with pytest.raises(DomainError):
            variance_fn(Family.POISSON, -0.5)


class TestCanonicalIdentity:
    @pytest.mark.parametrize("family", list(Family))
    def test_derivative_equals_variance_at_mean(self, family):
        # canonical link: d mean / d eta == V(mean(eta)); checked against
        # central finite differences
        rng = np.random.default_rng(11)
        h = 1e-6
        for eta in rng.uniform(-4, 4, size=20):
            analytic = mean_derivative(family, eta)
            fd = (mean(family, eta + h) - mean(family, eta - h)) / (2 * h)
            assert analytic == pytest.approx(fd, rel=1e-6)
