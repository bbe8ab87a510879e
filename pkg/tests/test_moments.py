import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fluctlim import dynamics as dy
from fluctlim import fock, qubits, states
from fluctlim.moments import (CanonicalPolynomial, LadderPolynomial, OperatorWord,
                              commutator_residual, expectation_finite, expectation_limit,
                              fluctuation_operator_full, observable_matrix, parse_observable,
                              polynomial_matrix, tensor_expectation, tensor_observable,
                              word_matrix)
from fluctlim.spin import deformed_ladder
from fluctlim.tolerances import TIGHT

NUMBER = OperatorWord((1, -1))


def all_words(max_degree):
    for d in range(max_degree + 1):
        for letters in itertools.product((-1, 1), repeat=d):
            yield OperatorWord(letters)


class TestWords:
    def test_parse_and_fields(self):
        w = OperatorWord.parse("ad a ad a")
        assert w.letters == (1, -1, 1, -1)
        assert w.degree == 4 and w.weight == 0
        assert str(w) == "ad a ad a"

    def test_rejects_bad_letters(self):
        with pytest.raises(ValueError):
            OperatorWord((2,))
        with pytest.raises(ValueError):
            OperatorWord.parse("a b")

    def test_empty_word_is_identity(self):
        ops = fock.canonical_operators(4)
        assert_allclose(word_matrix(OperatorWord(()), ops.annihilator, ops.creator), np.eye(4))

    def test_number_word(self):
        ops = fock.canonical_operators(6)
        N = word_matrix(NUMBER, ops.annihilator, ops.creator)
        assert_allclose(N, ops.number, atol=TIGHT)

    def test_ccr_word_difference(self):
        D = 7
        ops = fock.canonical_operators(D)
        diff = (word_matrix(OperatorWord((-1, 1)), ops.annihilator, ops.creator)
                - word_matrix(NUMBER, ops.annihilator, ops.creator))
        assert_allclose(diff[:D - 1, :D - 1], np.eye(D - 1), atol=TIGHT)


class TestPolynomials:
    def test_commutator(self):
        D = 8
        ops = fock.canonical_operators(D)
        f = CanonicalPolynomial(((1, ("q", "p")), (-1, ("p", "q"))))
        assert_allclose(polynomial_matrix(f, ops.position, ops.momentum)[:D - 1, :D - 1],
                        1j * np.eye(D - 1), atol=TIGHT)

    def test_q_squared_vacuum(self):
        ops = fock.canonical_operators(4)
        m = polynomial_matrix(CanonicalPolynomial.parse("q q"), ops.position, ops.momentum)
        assert m[0, 0] == pytest.approx(0.5)

    def test_scaled_position(self):
        ops = fock.canonical_operators(5)
        m = polynomial_matrix(CanonicalPolynomial.parse("q"), 0.5 * ops.position, ops.momentum)
        assert_allclose(m, 0.5 * ops.position)

    def test_parse_observable_kinds(self):
        assert isinstance(parse_observable("ad a"), OperatorWord)
        assert isinstance(parse_observable([{"word": "q p"}]), CanonicalPolynomial)
        obs = parse_observable([{"coef": [2, 0], "word": "a"}, {"coef": [0, 1], "word": "ad"}])
        assert isinstance(obs, LadderPolynomial) and obs.degree == 1
        with pytest.raises(ValueError):
            parse_observable("q a")


class TestExpectationFinite:
    def test_vacuum_number(self):
        for M in (1, 7, 64):
            s = states.single_block_sequence(fock.projector(0, 1), 1.0, M)
            assert expectation_finite(s, NUMBER) == 0

    def test_fock_two(self):
        s = states.single_block_sequence(fock.projector(2, 3), 1.0, 100)
        assert expectation_finite(s, NUMBER) == pytest.approx(1.98, abs=TIGHT)

    def test_all_up_q_squared(self):
        up = np.array([1, 0, 0, 0], dtype=complex)
        rho = np.outer(up, up)
        s = states.brute_force_decompose(rho, 2)
        q2 = CanonicalPolynomial.parse("q q")
        assert s.blocks[0].two_j == 2
        assert expectation_finite(s, q2) == pytest.approx(0.5, abs=TIGHT)
        assert tensor_expectation(rho, q2, 1.0, 2) == pytest.approx(0.5, abs=TIGHT)

    def test_time_needs_hamiltonian(self):
        s = states.single_block_sequence(fock.projector(0, 1), 1.0, 4)
        with pytest.raises(ValueError):
            expectation_finite(s, NUMBER, t=0.01)

    @pytest.mark.parametrize("t", [0.01, -0.02])
    def test_cyclicity_bridge(self, t, rng):
        c = dy.QuadraticHamiltonian(0.3 + 0.2j, 0.5, -0.2, 0.3 - 0.2j)
        s = states.random_symmetric_state(4, 0.5, rng)
        state = states.brute_force_decompose(s, 4)
        for obs in (OperatorWord((-1,)), OperatorWord((1, 1, -1)), CanonicalPolynomial.parse("q p q")):
            heis = 0j
            for b in state.blocks:
                D = b.capped_dim
                lad = deformed_ladder(state.M, b.x, D + obs.degree)
                H = dy.block_hamiltonian(c, state.M, b.x, D + obs.degree)
                U = fock.hermitian_evolve(H, t)
                O = observable_matrix(obs, lad.annihilator, lad.creator)
                heis += b.weight * np.trace(U.conj().T @ O @ U @ fock.pad(b.rho, D + obs.degree))
            assert expectation_finite(state, obs, c, t) == pytest.approx(heis, abs=1e-10)

    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 6))
    def test_selfadjoint_polynomial_is_real(self, seed, M):
        rng = np.random.default_rng(seed)
        state = states.brute_force_decompose(states.random_symmetric_state(M, 0.3, rng), M)
        f = CanonicalPolynomial(((1, ("q", "p")), (1, ("p", "q")), (0.5, ("q", "q", "p", "p")),
                                 (0.5, ("p", "p", "q", "q"))))
        assert abs(expectation_finite(state, f).imag) <= 1e-10


class TestExpectationLimit:
    def test_eigenstate(self):
        assert expectation_limit(fock.projector(2, 3), 1.0, NUMBER) == pytest.approx(2.0)

    def test_lambda_scaling(self):
        assert expectation_limit(fock.projector(2, 3), 0.5, NUMBER) == pytest.approx(1.0)

    @pytest.mark.parametrize("t", [0.0, 0.02, -0.01])
    def test_phase(self, t):
        rho = np.full((2, 2), 0.5, dtype=complex)
        got = expectation_limit(rho, 1.0, OperatorWord((-1,)), dy.HARMONIC, t)
        assert got == pytest.approx(0.5 * np.exp(-1j * t), abs=1e-12)

    def test_rejects_lambda_zero(self):
        with pytest.raises(ValueError):
            expectation_limit(fock.projector(0, 1), 0.0, NUMBER)


class TestFluctuationOperator:
    @pytest.mark.parametrize("lam", [0.0, 0.3, 1.0])
    def test_single_site(self, lam):
        assert_allclose(fluctuation_operator_full(qubits.SIGMA[3], lam, 1),
                        qubits.SIGMA[3] - lam * np.eye(2))

    def test_two_site_position(self):
        Q2 = fluctuation_operator_full(qubits.SIGMA[1] / np.sqrt(2), 0.4, 2)
        expected = (np.kron(qubits.SIGMA[1], np.eye(2)) + np.kron(np.eye(2), qubits.SIGMA[1])) / 2
        assert_allclose(Q2, expected, atol=TIGHT)

    @pytest.mark.parametrize("M", [1, 3, 6])
    def test_all_up_expectation(self, M):
        lam = 0.35
        F = fluctuation_operator_full(qubits.SIGMA[3], lam, M)
        assert F[0, 0].real == pytest.approx(np.sqrt(M) * (1 - lam))


class TestCommutatorResidual:
    @pytest.mark.parametrize("lam,M", [(0.5, 20), (0.25, 64), (1.0, 7)])
    def test_highest_weight(self, lam, M):
        s = states.single_block_sequence(fock.projector(0, 1), lam, M)
        assert commutator_residual(s, lam) == 0

    def test_first_excited(self):
        for M in (8, 40, 200):
            s = states.single_block_sequence(fock.projector(1, 2), 0.5, M)
            assert commutator_residual(s, 0.5) == pytest.approx(-2j / M, abs=TIGHT)

    def test_fully_polarized(self):
        s = states.single_block_sequence(fock.projector(0, 1), 1.0, 4)
        assert commutator_residual(s, 1.0) == 0

    def test_matches_tensor_commutator(self, rng):
        M, lam = 5, 0.6
        rho = states.random_symmetric_state(M, lam, rng)
        s = states.brute_force_decompose(rho, M)
        Q = fluctuation_operator_full(qubits.SIGMA[1] / np.sqrt(2), lam, M)
        P = fluctuation_operator_full(qubits.SIGMA[2] / np.sqrt(2), lam, M)
        direct = np.trace(rho @ (Q @ P - P @ Q)) - 1j * lam
        assert commutator_residual(s, lam) == pytest.approx(direct, abs=1e-10)


class TestOracleEquivalence:
    @pytest.mark.parametrize("M", range(1, 9))
    def test_words_up_to_degree_four(self, M, rng):
        words = list(all_words(4))
        for lam in (0.0, 0.5, 1.0):
            ops = [tensor_observable(w, lam, M) for w in words]
            for _ in range(3):
                rho = states.random_symmetric_state(M, lam, rng)
                s = states.brute_force_decompose(rho, M)
                for w, op in zip(words, ops):
                    assert expectation_finite(s, w) == pytest.approx(
                        np.trace(rho @ op), abs=1e-9)

    def test_polynomials(self, rng):
        M = 4
        rho = states.random_symmetric_state(M, 0.5, rng)
        s = states.brute_force_decompose(rho, M)
        for letters in itertools.product("qp", repeat=3):
            f = CanonicalPolynomial(((1.5 - 0.5j, letters),))
            assert expectation_finite(s, f) == pytest.approx(
                tensor_expectation(rho, f, 0.5, M), abs=1e-9)
