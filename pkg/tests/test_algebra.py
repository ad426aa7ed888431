import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from offres.algebra import (AlternatingSchedule, alternating_search, constraint_count, lie_closure,
                            project_simplex)
from offres.errors import BadDimension, DimensionOverflow, SearchFailed
from offres.model import LevelSystem
from offres.seeding import named_rng, random_hermitian, random_unitary


def random_pair(seed, n, name="closure"):
    rng = named_rng(seed, f"{name}/{n}")
    e = np.concatenate([[0.0], np.sort(rng.uniform(0.5, 10, n - 1))])
    return np.diag(e).astype(complex), random_hermitian(rng, n)


class TestClosure:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_generic_is_full(self, n):
        h0, hi = random_pair(0, n)
        res = lie_closure(h0, hi)
        assert res.is_full and res.dimension == n * n

    def test_basis_antihermitian_and_orthonormal(self):
        res = lie_closure(*random_pair(1, 3))
        vecs = np.array([np.concatenate([m.real.ravel(), m.imag.ravel()]) for m in res.basis_matrices])
        for m in res.basis_matrices:
            assert np.abs(m + m.conj().T).max() < 1e-12
        assert np.allclose(vecs @ vecs.T, np.eye(len(vecs)), atol=1e-10)

    def test_block_diagonal_not_full(self):
        rng = named_rng(2, "block")
        h0 = np.diag([0.0, 1.0, 3.0, 7.0]).astype(complex)
        hi = np.zeros((4, 4), dtype=complex)
        hi[:2, :2] = random_hermitian(rng, 2)
        hi[2:, 2:] = random_hermitian(rng, 2)
        res = lie_closure(h0, hi)
        assert not res.is_full
        assert res.dimension < 16

    def test_block_diagonal_survives_conjugation(self):
        # vanishing commutators come back as rounding noise in a rotated basis
        rng = named_rng(2, "block")
        h0 = np.diag([0.0, 1.0, 3.0, 7.0]).astype(complex)
        hi = np.zeros((4, 4), dtype=complex)
        hi[:2, :2] = random_hermitian(rng, 2)
        hi[2:, 2:] = random_hermitian(rng, 2)
        v = random_unitary(rng, 4)
        rotated = lie_closure(v @ h0 @ v.conj().T, v @ hi @ v.conj().T)
        assert rotated.dimension == lie_closure(h0, hi).dimension

    def test_commuting_generators(self):
        res = lie_closure(np.diag([0, 1, 2]), np.diag([1, 0, 5]))
        assert res.dimension == 2 and res.generations <= 1

    def test_rank_tolerance_matters_for_near_degenerate(self):
        h0 = np.diag([0, 1, 2.0])
        hi = np.diag([0, 0, 0]).astype(complex)
        hi[0, 1] = hi[1, 0] = 1
        hi[1, 2] = hi[2, 1] = 1e-12
        loose = lie_closure(h0, hi, rank_tol=1e-3)
        tight = lie_closure(h0, hi, rank_tol=1e-14)
        assert loose.dimension < tight.dimension

    def test_dimension_overflow(self):
        with pytest.raises(DimensionOverflow):
            lie_closure(np.eye(17), np.eye(17))

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError):
            lie_closure(np.diag([0, 1]), np.array([[0, 1], [0, 0]]))

    @given(st.integers(0, 10**6), st.integers(2, 4), st.floats(0.05, 20))
    @settings(max_examples=25, deadline=None)
    def test_invariant_under_conjugation_and_scaling(self, seed, n, scale):
        h0, hi = random_pair(seed, n, "prop")
        v = random_unitary(named_rng(seed, "conj"), n)
        base = lie_closure(h0, hi).dimension
        conj = lie_closure(v @ h0 @ v.conj().T, v @ hi @ v.conj().T).dimension
        scaled = lie_closure(scale * h0, scale * hi).dimension
        assert base == conj == scaled


class TestConstraints:
    @pytest.mark.parametrize("n,want", [(3, 4), (4, 8), (10, 32)])
    def test_count(self, n, want):
        assert constraint_count(n) == want

    def test_too_small(self):
        with pytest.raises(BadDimension):
            constraint_count(2)


class TestSimplex:
    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=20), st.floats(0.1, 100))
    def test_projection_lands_on_simplex(self, xs, total):
        t = project_simplex(np.array(xs), total)
        assert np.all(t >= 0)
        assert t.sum() == pytest.approx(total)

    def test_identity_on_simplex(self):
        x = np.array([0.2, 0.3, 0.5])
        assert np.allclose(project_simplex(x, 1.0), x)


class TestAlternatingSearch:
    def instance(self, seed):
        rng = named_rng(seed, "search-instance")
        s = LevelSystem([0.0, 1.0, rng.uniform(2, 5)], np.zeros((3, 3)))
        return s, random_hermitian(rng, 3, 0.5)

    def test_finds_leakage_free_unitary(self):
        s, hi = self.instance(0)
        sched, leak = alternating_search(s, hi, 10 * 2 * math.pi, seed=0)
        assert leak.residual_norm < 1e-6
        assert len(sched.durations) == 10
        assert sched.which_generator[:3] == ("H0", "HI", "H0")
        assert sum(sched.durations) == pytest.approx(10 * 2 * math.pi)
        u = sched.unitary(s.h0(), hi)
        assert np.abs(u[:2, 2:]).max() < 1e-6

    def test_deterministic(self):
        s, hi = self.instance(1)
        a, _ = alternating_search(s, hi, 10 * 2 * math.pi, seed=7)
        b, _ = alternating_search(s, hi, 10 * 2 * math.pi, seed=7)
        assert a == b

    def test_failure_carries_best(self):
        s, hi = self.instance(2)
        with pytest.raises(SearchFailed) as info:
            alternating_search(s, hi, 10 * 2 * math.pi, budget=5, restarts=1)
        assert isinstance(info.value.schedule, AlternatingSchedule)
        sched, leak = alternating_search(s, hi, 10 * 2 * math.pi, budget=5, restarts=1,
                                         raise_on_failure=False)
        assert leak.residual_norm >= 1e-6

    def test_dimension_limits(self):
        s = LevelSystem([0, 1, 3, 7, 12], np.zeros((5, 5)))
        with pytest.raises(BadDimension):
            alternating_search(s, random_hermitian(named_rng(0, "x"), 5), 10.0)
