import math

import numpy as np
import pytest

from otlab import cheat, otcore, qlin
from otlab.cheat import (MeasurementPair, PreconditionError, helstrom,
                         lis_compose, nayak_bound, optimal_discrimination,
                         purification_equivalence_check, qutrit_reduced_states,
                         random_lis_instance)
from otlab.qlin import DensityMatrix, PureState, SubsystemLayout


class TestHelstrom:
    def test_qutrit_pair(self):
        prob, (p0, p1) = helstrom(*qutrit_reduced_states())
        assert abs(prob - 0.75) < 1e-12
        np.testing.assert_allclose(p0 + p1, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(p0 @ p0, p0, atol=1e-12)

    def test_identical_states(self):
        rho = DensityMatrix(np.eye(3) / 3)
        prob, _ = helstrom(rho, rho)
        assert abs(prob - 0.5) < 1e-12

    def test_orthogonal_pure_states(self):
        s0 = DensityMatrix(np.diag([1.0, 0.0]))
        s1 = DensityMatrix(np.diag([0.0, 1.0]))
        prob, _ = helstrom(s0, s1)
        assert abs(prob - 1.0) < 1e-12

    def test_ties_assigned_to_outcome_zero(self):
        s0 = DensityMatrix(np.diag([0.5, 0.5, 0.0]))
        s1 = DensityMatrix(np.diag([0.0, 0.5, 0.5]))
        _, (p0, _) = helstrom(s0, s1)
        assert abs(p0[1, 1] - 1.0) < 1e-12  # zero eigenvalue goes to outcome 0

    def test_dominates_random_measurements(self):
        rng = np.random.default_rng(20)
        s0, s1 = qutrit_reduced_states()
        best, _ = helstrom(s0, s1)
        for _ in range(10_000):
            u = qlin.haar_unitary(3, rng)
            k = int(rng.integers(1, 3))
            p0 = u[:, :k] @ u[:, :k].conj().T
            success = 0.5 * float(np.trace(p0 @ s0.matrix).real) \
                + 0.5 * float(np.trace((np.eye(3) - p0) @ s1.matrix).real)
            assert success <= best + 1e-9


class TestNamedAttacks:
    def test_basis_attack_exact(self):
        strat = cheat.alice_basis_attack()
        assert abs(strat.exact_value - 0.75) < 1e-12
        assert strat.extras["bob_abort_probability"] == 0.0

    def test_basis_attack_uninformative_branch(self):
        # conditioned on the third outcome the guess is a fresh coin
        strat = cheat.alice_basis_attack()
        dist = otcore.exact_distribution(
            otcore.qutrit_ot(), alice=strat.program,
            key=lambda r: (r.outputs["alice"].guess["branch"],
                           r.outputs["alice"].guess["b"] == r.outputs["bob"][0]))
        p2 = dist.get((2, True), 0.0) + dist.get((2, False), 0.0)
        assert abs(dist.get((2, True), 0.0) / p2 - 0.5) < 1e-12

    def test_superposition_attack_exact(self):
        strat = cheat.bob_superposition_attack()
        assert abs(strat.exact_value - 0.75) < 1e-12
        for pair, rate in strat.extras["per_pair_success"].items():
            assert abs(rate - 0.75) < 1e-12, pair
        assert strat.extras["alice_abort_probability"] == 0.0

    def test_parity_attack_exact(self):
        strat = cheat.bob_parity_attack()
        assert abs(strat.exact_value - 1.0) < 1e-12
        assert abs(strat.extras["single_bit_success"] - 0.5) < 1e-12
        assert strat.extras["alice_abort_probability"] == 0.0

    def test_parity_states_orthogonal(self):
        plus = np.zeros(9, dtype=complex)
        plus[0] = plus[4] = 1 / math.sqrt(2)
        phased = plus.copy()
        phased[0] *= -1.0  # phases for (x0, x1) = (1, 0)
        assert abs(np.vdot(plus, phased)) < 1e-12

    def test_attacks_reproduce_exact_values_montecarlo(self):
        # module invariant: 3 sigma agreement at 1e5 trials
        rng = np.random.default_rng(99)
        trials = 100_000
        jobs = [
            (cheat.alice_basis_attack(), "alice",
             lambda run: run.adversary.guess["b"] == run.honest_output[0]),
            (cheat.bob_superposition_attack(), "bob",
             lambda run: (run.adversary.guess["x0"], run.adversary.guess["x1"])
             == run.honest_output),
            (cheat.bob_parity_attack(), "bob",
             lambda run: run.adversary.guess["parity"]
             == (run.honest_output[0] ^ run.honest_output[1])),
        ]
        for strat, side, event in jobs:
            proto = otcore.qutrit_ot()
            hits = 0
            for _ in range(trials):
                run = otcore.scripted_adversary_run(proto, strat.program, side, rng)
                if run.honest_output != otcore.ABORT and event(run):
                    hits += 1
            p = strat.exact_value
            sigma = math.sqrt(max(p * (1 - p), 1e-6) / trials)
            assert abs(hits / trials - p) <= 3 * sigma, strat.name


class TestNayak:
    def test_values(self):
        assert nayak_bound(3, 4) == 0.75
        assert nayak_bound(5, 5) == 1.0
        assert nayak_bound(1, 2) == 0.5

    def test_domain(self):
        with pytest.raises(PreconditionError):
            nayak_bound(0, 3)


class TestOptimalDiscrimination:
    def test_four_post_phase_states(self):
        value, povm = optimal_discrimination(cheat.post_phase_states())
        assert abs(value - 0.75) < 1e-6
        total = sum(povm)
        assert np.max(np.abs(total - np.eye(3))) < 1e-6
        assert min(qlin.min_eig(e) for e in povm) > -1e-8

    def test_matches_explicit_basis_and_encoding_cap(self):
        value, _ = optimal_discrimination(cheat.post_phase_states())
        explicit = cheat.bob_superposition_attack().exact_value
        assert abs(value - explicit) < 1e-8
        assert abs(value - nayak_bound(3, 4)) < 1e-6

    def test_orthogonal_states(self):
        value, _ = optimal_discrimination([qlin.basis_state(2, 0),
                                           qlin.basis_state(2, 1)])
        assert abs(value - 1.0) < 1e-7

    def test_identical_states(self):
        v = qlin.basis_state(2, 0)
        value, _ = optimal_discrimination([v, v, v, v])
        assert abs(value - 0.25) < 1e-7


class TestLearningInSequence:
    def test_perfectly_correlated(self):
        # P, Q read off dedicated copies of Alice's bits: p = q = 1
        m_ops = tuple(np.diag([1.0 if i == j else 0.0 for i in range(4)])
                      for j in range(4))
        p_ops = (np.kron(np.diag([1.0, 0.0]), np.eye(2)),
                 np.kron(np.diag([0.0, 1.0]), np.eye(2)))
        q_ops = (np.kron(np.eye(2), np.diag([1.0, 0.0])),
                 np.kron(np.eye(2), np.diag([0.0, 1.0])))
        meas = MeasurementPair(m_ops=m_ops, p_ops=p_ops, q_ops=q_ops)
        amps = np.zeros(16, dtype=complex)
        for x0 in (0, 1):
            for x1 in (0, 1):
                amps[(2 * x0 + x1) * 4 + 2 * x0 + x1] = 0.5
        res = lis_compose(PureState(amps), meas, SubsystemLayout((4, 4)))
        assert abs(res.success - 1.0) < 1e-12
        assert abs(res.bound - 1.0) < 1e-12

    def test_uninformative_measurements_give_vacuous_bound(self):
        m_ops = tuple(np.diag([1.0 if i == j else 0.0 for i in range(4)])
                      for j in range(4))
        h = np.array([1.0, 1.0]) / math.sqrt(2)
        pp = np.outer(h, h)
        p_ops = (pp, np.eye(2) - pp)
        q_ops = (np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
        meas = MeasurementPair(m_ops=m_ops, p_ops=p_ops, q_ops=q_ops)
        amps = np.zeros(8, dtype=complex)
        for x in range(4):
            amps[x * 2] = 0.5  # Bob's qubit in |0>: p = 1/2 exactly, q = 1/2
        res = lis_compose(PureState(amps), meas, SubsystemLayout((4, 2)))
        assert abs(res.p - 0.5) < 1e-12
        assert res.bound < 1e-12
        assert res.success >= -1e-12

    def test_precondition_enforced(self):
        m_ops = tuple(np.diag([1.0 if i == j else 0.0 for i in range(4)])
                      for j in range(4))
        p_ops = (np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
        meas = MeasurementPair(m_ops=m_ops, p_ops=p_ops, q_ops=p_ops)
        amps = np.zeros(8, dtype=complex)
        amps[0 * 2 + 1] = 1.0  # P guesses x0 = 0 while the state says x0 = 0... p = 0
        with pytest.raises(PreconditionError):
            lis_compose(PureState(amps), meas, SubsystemLayout((4, 2)))

    def test_randomized_suite(self):
        rng = np.random.default_rng(55)
        for _ in range(300):
            omega, meas, layout = random_lis_instance(rng)
            res = lis_compose(omega, meas, layout)
            assert res.success >= res.bound - 1e-10
            # two-projection geometry: |DC psi|^2 >= cos^2(t) cos^2(t + t')
            geo = res.p * math.cos(res.theta + res.theta_prime) ** 2
            assert res.dc_norm2 >= geo - 1e-10
            # cosine sum bound on this instance's angles
            assert math.cos(res.theta + res.theta_prime) >= \
                math.cos(res.theta) ** 2 + math.cos(res.theta_prime) ** 2 - 1 - 1e-12


class TestPurification:
    def _random_projective_4(self, dim, rng):
        u = qlin.haar_unitary(dim, rng)
        sizes = [dim // 4] * 3 + [dim - 3 * (dim // 4)]
        povm, col = [], 0
        for s in sizes:
            block = u[:, col:col + s]
            povm.append(block @ block.conj().T)
            col += s
        return povm

    def test_uniform_orthogonal_ancillas(self):
        rng = np.random.default_rng(60)
        alphas = np.ones(3) / math.sqrt(3)
        es = [qlin.basis_state(3, i) for i in range(3)]
        meas = self._random_projective_4(9, rng)
        pe, pp = purification_equivalence_check(alphas, es, meas)
        assert abs(pe - pp) < 1e-10

    def test_identical_ancillas(self):
        rng = np.random.default_rng(61)
        alphas = np.array([0.5, 0.5, 1 / math.sqrt(2)])
        es = [qlin.basis_state(2, 0)] * 3
        meas = self._random_projective_4(6, rng)
        pe, pp = purification_equivalence_check(alphas, es, meas)
        assert abs(pe - pp) < 1e-10

    def test_random_instances(self):
        rng = np.random.default_rng(62)
        for _ in range(50):
            alphas = qlin.haar_state(3, rng)
            es = [qlin.haar_state(2, rng) for _ in range(3)]
            meas = self._random_projective_4(6, rng)
            pe, pp = purification_equivalence_check(alphas, es, meas)
            assert abs(pe - pp) < 1e-10

    def test_validation(self):
        with pytest.raises(PreconditionError):
            purification_equivalence_check([1.0, 1.0, 1.0],
                                           [qlin.basis_state(2, 0)] * 3,
                                           [np.eye(6) / 4] * 4)
