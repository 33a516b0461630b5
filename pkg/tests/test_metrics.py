"""Unit and property tests for pearson, jsd, and k-agreement."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from rsa_metaphor.errors import ZeroVarianceError
from rsa_metaphor.metrics import jsd, k_agreement, pearson, top_k_indices


def distributions(min_size=2, max_size=12):
    """Strategy: normalized probability vectors with strictly positive mass."""
    return st.lists(
        st.floats(min_value=1e-3, max_value=1.0), min_size=min_size, max_size=max_size
    ).map(lambda xs: np.array(xs) / np.sum(xs))


class TestPearson:
    def test_self_correlation_is_one(self):
        assert pearson([0.5, 0.3, 0.2], [0.5, 0.3, 0.2]) == pytest.approx(1.0)

    def test_reversed_simplex_vector(self):
        # hand computation: centered products give -39/900 over 42/900 -> -13/14
        r = pearson([0.5, 0.3, 0.2], [0.2, 0.3, 0.5])
        assert r == pytest.approx(-13 / 14, abs=1e-12)

    def test_zero_variance_raises(self):
        with pytest.raises(ZeroVarianceError):
            pearson([0.5, 0.5], [0.9, 0.1])
        with pytest.raises(ZeroVarianceError):
            pearson([0.9, 0.1], [0.5, 0.5])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pearson([0.5, 0.5], [0.5, 0.3, 0.2])

    @given(distributions(min_size=3), st.floats(0.1, 10.0), st.floats(-5.0, 5.0))
    def test_affine_invariance(self, q, a, b):
        assume(float(np.ptp(q)) > 1e-9)
        p = np.linspace(0.0, 1.0, q.size)
        assert pearson(a * p + b, q) == pytest.approx(pearson(p, q), abs=1e-12)

    def test_bounded(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            p = rng.dirichlet(np.ones(6))
            q = rng.dirichlet(np.ones(6))
            assert -1.0 <= pearson(p, q) <= 1.0


class TestJsd:
    def test_identical_is_zero(self):
        assert jsd([0.3, 0.7], [0.3, 0.7]) == pytest.approx(0.0, abs=1e-15)

    def test_disjoint_is_one(self):
        assert jsd([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0, abs=1e-12)

    def test_half_vs_point_mass(self):
        # hand computation: 1 - (3/4) log2 3 + (1/2) log2 2 ... = 0.311278124459133
        assert jsd([0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.311278124459133, abs=1e-12)

    def test_natural_log_base(self):
        value = jsd([0.5, 0.5], [1.0, 0.0], base=np.e)
        assert value == pytest.approx(0.311278124459133 * np.log(2.0), abs=1e-12)

    def test_rejects_non_distribution(self):
        with pytest.raises(ValueError):
            jsd([0.5, 0.6], [0.5, 0.5])

    @settings(max_examples=200)
    @given(distributions(), distributions())
    def test_symmetric_and_bounded(self, p, q):
        if p.size != q.size:
            q = np.full(p.size, 1.0 / p.size)
        left = jsd(p, q)
        right = jsd(q, p)
        assert left == pytest.approx(right, abs=1e-12)
        assert 0.0 <= left <= 1.0

    @given(distributions())
    def test_self_divergence_zero(self, p):
        assert jsd(p, p) == pytest.approx(0.0, abs=1e-12)


class TestKAgreement:
    def test_identical_gives_k(self):
        p = [0.4, 0.3, 0.2, 0.1]
        for k in range(1, 5):
            assert k_agreement(p, p, k) == k

    def test_full_k_equals_n(self):
        rng = np.random.default_rng(0)
        p = rng.dirichlet(np.ones(7))
        q = rng.dirichlet(np.ones(7))
        assert k_agreement(p, q, 7) == 7

    def test_disjoint_top_sets(self):
        p = [0.5, 0.3, 0.2, 0.0, 0.0, 0.0]
        q = [0.0, 0.0, 0.0, 0.5, 0.3, 0.2]
        assert k_agreement(p, q, 3) == 0

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            p = rng.dirichlet(np.ones(8))
            q = rng.dirichlet(np.ones(8))
            for k in (1, 3, 5):
                assert k_agreement(p, q, k) == k_agreement(q, p, k)

    def test_tie_break_prefers_lower_index(self):
        # indices 1 and 2 tie; the lower index enters the top-1 set
        p = [0.2, 0.4, 0.4]
        assert top_k_indices(p, 1).tolist() == [1]
        assert top_k_indices(p, 2).tolist() == [1, 2]
        # ties make agreement deterministic as well
        q = [0.4, 0.4, 0.2]
        assert k_agreement(p, q, 1) == 0  # top-1: index 1 vs index 0

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            k_agreement([0.5, 0.5], [0.5, 0.5], 3)
        with pytest.raises(ValueError):
            k_agreement([0.5, 0.5], [0.5, 0.5], 0)
