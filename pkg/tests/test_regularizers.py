import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diverse_dqn import regularizers as R
import oracles

norm_lists = st.lists(st.floats(0.05, 500.0), min_size=2, max_size=8)
KINDS = ["atkinson", "gini", "theil", "vol", "meanvector"]


class TestWorkedExamples:
    def test_atkinson(self):
        assert R.atkinson([1, 3], 0.5) == pytest.approx(1 - 0.5 * ((1 + math.sqrt(3)) / 2) ** 2, abs=1e-12)
        assert R.atkinson([1, 3], 0.5) == pytest.approx(0.0670, abs=5e-5)
        assert R.atkinson([1, 3], 1) == pytest.approx(1 - math.sqrt(3) / 2, abs=1e-12)
        assert R.atkinson([2, 2, 2], 0.7) == pytest.approx(0.0, abs=1e-15)

    def test_atkinson_negative_epsilon(self):
        with pytest.raises(ValueError):
            R.atkinson([1, 2], -0.1)
        with pytest.raises(ValueError):
            R.Regularizer("atkinson", -1.0)

    def test_atkinson_literal_branch(self):
        # extra 1/N inside the product: (1/2 * 3)^(1/2) / 2
        assert R.atkinson([1, 3], 1, literal_unit_branch=True) == pytest.approx(1 - math.sqrt(1.5) / 2)

    def test_gini(self):
        assert R.gini([1, 3]) == pytest.approx(0.25, abs=1e-15)
        assert R.gini([1, 1, 4]) == pytest.approx(1 / 3, abs=1e-15)
        assert R.gini([5, 5]) == 0.0

    def test_theil(self):
        assert R.theil([1, 3]) == pytest.approx(0.5 * (0.5 * math.log(0.5) + 1.5 * math.log(1.5)), abs=1e-15)
        assert R.theil([1, 3]) == pytest.approx(0.13081, abs=5e-6)
        assert R.theil([4, 4, 4]) == 0.0

    def test_vol(self):
        assert R.variance_of_logarithms([1, 3]) == pytest.approx(math.log(math.sqrt(3)) ** 2, abs=1e-15)
        assert R.variance_of_logarithms([1, 3]) == pytest.approx(0.30175, abs=2e-5)
        assert R.variance_of_logarithms([2, 2]) == 0.0

    def test_mean_vector(self):
        assert R.mean_vector([1, 3], 0) == 1.0
        assert R.mean_vector([1, 3], 1) == 1.0
        assert R.mean_vector([2, 2, 2], 1) == 0.0
        with pytest.raises(IndexError):
            R.mean_vector([1, 3], 2)

    def test_mean_vector_grad(self):
        assert R.mean_vector_grad([1, 3], 0) == pytest.approx(-1.0)

    def test_gini_grad_at_tie(self):
        assert R.gini_grad([2.0, 2.0, 2.0], 1) == 0.0

    def test_invalid_lists(self):
        with pytest.raises(ValueError):
            R.gini([1.0])
        with pytest.raises(ValueError):
            R.theil([1.0, -2.0])
        with pytest.raises(ValueError):
            R.Regularizer("entropy")


def test_random_lists_match_oracle():
    rng = np.random.default_rng(123)
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        norms = list(rng.uniform(0.1, 100.0, size=n))
        eps = float(rng.choice([0.0, 0.25, 0.5, 1.0, 1.5, 2.0]))
        i = int(rng.integers(n))
        assert R.atkinson(norms, eps) == pytest.approx(oracles.atkinson(norms, eps), abs=1e-10)
        assert R.gini(norms) == pytest.approx(oracles.gini(norms), abs=1e-10)
        assert R.theil(norms) == pytest.approx(oracles.theil(norms), abs=1e-10)
        assert R.variance_of_logarithms(norms) == pytest.approx(oracles.variance_of_logarithms(norms), abs=1e-10)
        assert R.mean_vector(norms, i) == pytest.approx(oracles.mean_vector(norms, i), abs=1e-10)


def _fd(kind, norms, i, eps=0.5, h=1e-5):
    reg = R.Regularizer(kind, eps)

    def f(x):
        shifted = list(norms)
        shifted[i] = x
        return reg.value(shifted, i)

    return oracles.central_difference(f, norms[i], h)


GRAD_CASES = [("atkinson", e) for e in (0.0, 0.5, 1.0, 2.0)] + [(k, 0.5) for k in KINDS[1:]]


@pytest.mark.parametrize("kind,eps", GRAD_CASES)
def test_gradients_match_finite_differences(kind, eps):
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 6))
        norms = list(rng.uniform(0.5, 20.0, size=n))
        i = int(rng.integers(n))
        analytic = R.Regularizer(kind, eps).grad(norms, i)
        numeric = _fd(kind, norms, i, eps)
        assert abs(analytic - numeric) <= 1e-6 * max(abs(numeric), 1e-3)


def test_regularizer_grad_function():
    assert R.regularizer_grad("meanvector", [1, 3], 0) == pytest.approx(-1.0)


@pytest.mark.parametrize("kind", KINDS)
def test_equal_norms_give_zero_value_and_gradient(kind):
    reg = R.Regularizer(kind)
    assert reg.value([3.0, 3.0, 3.0], 0) == pytest.approx(0.0, abs=1e-15)
    assert reg.grad([3.0, 3.0, 3.0], 0) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(norm_lists, st.floats(0.1, 10.0), st.randoms(use_true_random=False))
def test_properties(norms, c, rnd):
    scaled = [c * x for x in norms]
    perm = list(norms)
    rnd.shuffle(perm)
    for name in ("atkinson", "gini", "theil", "vol"):
        reg = R.Regularizer(name)
        v = reg.value(norms, 0)
        assert v >= -1e-12
        assert reg.value(scaled, 0) == pytest.approx(v, abs=1e-9)
        assert reg.value(perm, 0) == pytest.approx(v, abs=1e-9)
    for v in (R.atkinson(norms, 0.5), R.gini(norms)):
        assert -1e-12 <= v < 1
    mv = R.mean_vector(norms, 0)
    assert mv >= 0
    assert R.mean_vector(scaled, 0) == pytest.approx(c * c * mv, rel=1e-9, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(norm_lists)
def test_atkinson_unit_limit(norms):
    assert R.atkinson(norms, 1 - 1e-6) == pytest.approx(R.atkinson(norms, 1.0), abs=1e-4)


def test_floor_protects_logs():
    assert np.isfinite(R.theil([0.0, 1.0]))
    assert np.isfinite(R.variance_of_logarithms([0.0, 1.0]))
    assert np.isfinite(R.atkinson([0.0, 1.0], 1.0))
