import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import kron_loop, walk_step_explicit
from qmcverify import linalg, models
from qmcverify.linalg import (
    SuperOperator,
    apply,
    devectorize,
    hs_norm,
    ket,
    matrix_rep,
    max_entangled,
    partial_trace_2,
    projector,
    random_channel,
    random_density,
    validate,
    vectorize,
)

seeds = st.integers(0, 2**32 - 1)
H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def rng_of(seed):
    return np.random.default_rng(seed)


def random_matrix(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


class TestApply:
    def test_identity_channel(self):
        rho = random_density(3, rng_of(1))
        assert np.allclose(apply(SuperOperator([np.eye(3)]), rho), rho)

    def test_swap_chain(self):
        g = models.classical_mc_to_qmc([[0, 1], [1, 0]], [1, 0])
        assert np.allclose(g.transition(g.initial), np.diag([0, 1]))

    def test_walk_step_against_explicit_products(self):
        spec = models.WalkSpec(2, 1, "R")
        g = models.quantum_walk(spec)
        out = g.transition(g.initial)
        ref = walk_step_explicit(2, g.initial.real)
        assert np.allclose(out, ref, atol=1e-14)
        m_yes = models.position_projector(2, 0) + models.position_projector(2, 2)
        assert np.trace(m_yes @ out).real == pytest.approx(np.trace(m_yes @ ref).real)

    def test_dimension_mismatch(self):
        with pytest.raises(linalg.DimensionError):
            apply(SuperOperator([np.eye(2)]), np.eye(3) / 3)

    @settings(max_examples=200, deadline=None)
    @given(seeds, st.integers(1, 4), st.integers(1, 4))
    def test_trace_preserved(self, seed, d, n):
        rng = rng_of(seed)
        rho = random_density(d, rng)
        out = apply(random_channel(d, n, rng), rho)
        assert abs(np.trace(out) - np.trace(rho)) <= 1e-10


class TestMatrixRep:
    def test_identity(self):
        assert np.allclose(matrix_rep(SuperOperator([np.eye(2)])), np.eye(4))

    def test_hadamard_unitary(self):
        assert np.allclose(matrix_rep(SuperOperator([H])), kron_loop(H, H))

    def test_swap_encoding_brute_force(self):
        g = models.classical_mc_to_qmc([[0, 1], [1, 0]], [1, 0])
        ref = np.zeros((4, 4), dtype=complex)
        for e in g.transition.kraus:
            ref += kron_loop(e, e.conj())
        assert np.allclose(matrix_rep(g.transition), ref)
        # Populations swap; the classical encoding kills coherences.
        expected = np.zeros((4, 4))
        expected[3, 0] = expected[0, 3] = 1
        assert np.allclose(matrix_rep(g.transition), expected)

    @settings(max_examples=200, deadline=None)
    @given(seeds, st.integers(1, 4), st.integers(1, 3))
    def test_vectorized_action(self, seed, d, n):
        rng = rng_of(seed)
        e = random_channel(d, n, rng)
        a = random_matrix(rng, d)
        assert np.linalg.norm(e.matrix @ vectorize(a) - vectorize(e(a))) <= 1e-10


class TestVectorize:
    def test_identity(self):
        assert np.array_equal(vectorize(np.eye(2)), [1, 0, 0, 1])

    def test_single_entry(self):
        assert np.array_equal(vectorize(np.outer(ket(2, 0), ket(2, 1))), [0, 1, 0, 0])

    @given(seeds, st.integers(1, 5))
    def test_inverse(self, seed, d):
        a = random_matrix(rng_of(seed), d)
        assert np.array_equal(devectorize(vectorize(a)), a)
        v = vectorize(a)
        assert np.array_equal(vectorize(devectorize(v)), v)

    def test_bad_length(self):
        with pytest.raises(linalg.DimensionError):
            devectorize(np.ones(3))


class TestPartialTrace:
    def test_identities(self):
        assert np.allclose(partial_trace_2(np.kron(np.eye(2), np.eye(2))), 2 * np.eye(2))

    @given(seeds)
    def test_product(self, seed):
        rng = rng_of(seed)
        a, b = random_matrix(rng, 2), random_matrix(rng, 2)
        assert np.allclose(partial_trace_2(kron_loop(a, b)), a * np.trace(b))

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.integers(1, 3))
    def test_choi_recovers_action(self, seed, d):
        rng = rng_of(seed)
        e = random_channel(d, 2, rng)
        a = random_matrix(rng, d)
        omega = max_entangled(d)
        op = e.matrix @ np.kron(a, np.eye(d)) @ np.outer(omega, omega.conj())
        assert np.allclose(partial_trace_2(op), e(a))


class TestHsNorm:
    def test_examples(self):
        assert hs_norm(np.zeros((3, 3))) == 0
        assert hs_norm(np.eye(5)) == pytest.approx(np.sqrt(5))
        assert hs_norm([[1, 1], [0, 0]]) == pytest.approx(np.sqrt(2))

    @given(seeds, st.integers(1, 4))
    def test_triangle_and_tensor(self, seed, d):
        rng = rng_of(seed)
        a, b = random_matrix(rng, d), random_matrix(rng, d)
        assert hs_norm(a + b) <= hs_norm(a) + hs_norm(b) + 1e-12
        assert hs_norm(np.kron(a, b)) == pytest.approx(hs_norm(a) * hs_norm(b))


class TestValidate:
    def test_state_ok(self):
        assert validate(np.diag([0.5, 0.5])).ok

    def test_trace_violation(self):
        rep = validate(np.diag([0.6, 0.6]))
        assert not rep
        assert [v.invariant for v in rep.violations] == ["unit trace (tr = 1.2)"]
        assert rep.violations[0].magnitude == pytest.approx(0.2)

    def test_incomplete_kraus(self):
        rep = validate(SuperOperator([np.eye(2) / 2]))
        assert not rep.ok and "completeness" in str(rep)
        with pytest.raises(linalg.ValidationError):
            rep.raise_if_invalid()

    def test_non_psd_and_non_hermitian(self):
        assert "positive" in str(validate(np.diag([1.5, -0.5])))
        assert "hermitian" in str(validate(np.array([[0.5, 1], [0, 0.5]])))

    def test_measurement(self):
        assert validate(np.diag([1, 0]), kind="measurement").ok
        assert "M <= I" in str(validate(2 * np.eye(2), kind="measurement"))

    def test_too_many_kraus(self):
        assert "Kraus count" in str(validate(SuperOperator([np.eye(1) / np.sqrt(2)] * 2)))

    def test_qmc(self):
        g = models.quantum_walk(models.WalkSpec(3, 1))
        assert validate(g).ok

    @settings(max_examples=100, deadline=None)
    @given(seeds, st.integers(1, 5), st.integers(1, 4))
    def test_random_objects_valid(self, seed, d, n):
        rng = rng_of(seed)
        n = min(n, d * d)
        assert validate(random_density(d, rng)).ok
        assert validate(random_channel(d, n, rng)).ok
        assert validate(projector(ket(d, 0)), kind="measurement").ok

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            linalg.as_matrix([[np.nan]])
