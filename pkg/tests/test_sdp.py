import math

import numpy as np
import pytest

from otlab import cheat, model, protocols, qlin, sdp
from otlab.sdp import (Constraint, LinearTerm, SdpProblem, SolverError,
                       brute_force_cheat, build_cheating_sdp,
                       discrimination_sdp, solve_sdp, trivial_sdp,
                       verify_dual_certificate)


class TestTrivialProgram:
    def test_solve(self):
        prob = trivial_sdp(2)
        sol = solve_sdp(prob, tol=1e-6)
        assert abs(sol.primal_value - 1.0) < 1e-6
        assert abs(sol.dual_value - 1.0) < 1e-6
        assert verify_dual_certificate(prob, sol).passed

    def test_hand_built_dual_certificate(self):
        prob = trivial_sdp(2)
        sol = solve_sdp(prob, tol=1e-6)
        # dual: one scalar multiplier z with z*I >= |0><0|, value z; z = 1 works
        hand = sdp.SdpSolution(
            primal_value=sol.primal_value, dual_value=1.0,
            primal_vars=sol.primal_vars, dual_vars=[np.array([[1.0 + 0j]])],
            residuals={}, solver="hand", status="optimal")
        check = verify_dual_certificate(prob, hand)
        assert check.passed and abs(check.dual_value - 1.0) < 1e-12

    def test_perturbed_certificate_fails_with_matching_residual(self):
        prob = trivial_sdp(2)
        sol = solve_sdp(prob, tol=1e-6)
        bad = sdp.SdpSolution(
            primal_value=sol.primal_value, dual_value=sol.dual_value,
            primal_vars=sol.primal_vars,
            dual_vars=[sol.dual_vars[0] - 1e-3 * np.eye(1)],
            residuals={}, solver="hand", status="optimal")
        check = verify_dual_certificate(prob, bad)
        assert not check.passed
        assert 3e-4 < check.max_residual < 3e-3


class TestDiscriminationProgram:
    def test_four_states(self):
        prob = discrimination_sdp(cheat.post_phase_states(), [0.25] * 4)
        sol = solve_sdp(prob, tol=1e-6)
        assert abs(sol.primal_value - 0.75) < 1e-6
        assert verify_dual_certificate(prob, sol).passed

    def test_deterministic_resolve(self):
        prob = discrimination_sdp(cheat.post_phase_states(), [0.25] * 4)
        a = solve_sdp(prob, tol=1e-6)
        b = solve_sdp(prob, tol=1e-6)
        assert a.primal_value == b.primal_value
        assert a.dual_value == b.dual_value


class TestCheatingChains:
    def test_announce_coin_values(self):
        spec = protocols.build_spec("announce-coin")
        cases = [("bob", "0", 0.5), ("bob", "1", 0.5),
                 ("alice", "b={1};xb=0", 1.0)]
        for party, target, expect in cases:
            prob = build_cheating_sdp(spec, party, target)
            sol = solve_sdp(prob, tol=1e-6)
            assert abs(sol.primal_value - expect) < 1e-6, (party, target)
            check = verify_dual_certificate(prob, sol, atol=1e-6)
            assert check.passed

    def test_qutrit_ot_forcing_values(self):
        spec = protocols.build_spec("qutrit-ot")
        prob_b = build_cheating_sdp(spec, "bob", "00")
        sol_b = solve_sdp(prob_b, tol=1e-6)
        assert abs(sol_b.primal_value - 0.25) < 1e-6
        prob_a = build_cheating_sdp(spec, "alice", "b={1};xb=0")
        sol_a = solve_sdp(prob_a, tol=1e-6)
        assert abs(sol_a.primal_value - 0.5) < 1e-6
        # product floor from the forcing lower bound at (n, k) = (2, 1)
        assert sol_b.primal_value * sol_a.primal_value >= 1.0 / 8.0 - 1e-6

    def test_unknown_target(self):
        spec = protocols.build_spec("announce-coin")
        with pytest.raises(KeyError):
            build_cheating_sdp(spec, "bob", "7")

    def test_meta_counts(self):
        spec = protocols.build_spec("qutrit-commitment-cf")
        prob = build_cheating_sdp(spec, "bob", "0")
        assert prob.meta["n_honest_segments"] == 2
        assert prob.meta["n_messages_from_cheater"] == 2
        assert prob.meta["n_rounds"] == 4

    def test_chain_and_generic_paths_agree(self):
        spec = protocols.build_spec("qutrit-ot")
        for party, target in [("bob", "00"), ("alice", "b={1};xb=0")]:
            prob = build_cheating_sdp(spec, party, target)
            gen = solve_sdp(prob, tol=1e-6, method="generic")
            chain = solve_sdp(prob, tol=1e-3, method="chain")
            assert abs(gen.primal_value - chain.primal_value) < 1e-5
            assert verify_dual_certificate(prob, chain, atol=1e-6).passed

    def test_commitment_reference_instance(self):
        spec = protocols.build_spec("qutrit-commitment-cf")
        values = {}
        for party, target in [("bob", "0"), ("alice", "b={1};xb=0")]:
            prob = build_cheating_sdp(spec, party, target)
            sol = solve_sdp(prob, tol=1e-4)
            assert verify_dual_certificate(prob, sol, atol=1e-6).passed
            values[party] = sol
        assert abs(values["bob"].primal_value - 0.75) < 1e-4
        assert abs(values["alice"].primal_value - 0.75) < 1e-4
        product = values["bob"].primal_value * values["alice"].primal_value
        assert product >= 0.5 - 1e-6  # the coin-flipping product floor

    def test_basis_change_invariance(self):
        rng = np.random.default_rng(77)
        spec = protocols.build_spec("announce-coin")

        def fix_zero_unitary(d):
            u = np.eye(d, dtype=complex)
            u[1:, 1:] = qlin.haar_unitary(d - 1, rng)
            return u

        wa = fix_zero_unitary(spec.dim_a)
        wm = fix_zero_unitary(spec.dim_m)
        wb = fix_zero_unitary(spec.dim_b)
        rounds = []
        for actor, u in spec.rounds:
            if actor == "alice":
                w = np.kron(wa, wm)
            else:
                w = np.kron(wm, wb)
            rounds.append((actor, w @ u @ w.conj().T))
        twisted = model.ProtocolSpec(
            dim_a=spec.dim_a, dim_m=spec.dim_m, dim_b=spec.dim_b,
            rounds=rounds,
            alice_povm={k: wa @ v @ wa.conj().T for k, v in spec.alice_povm.items()},
            bob_povm={k: wb @ v @ wb.conj().T for k, v in spec.bob_povm.items()},
            n=spec.n, k=spec.k, name="twisted")
        assert model.validate(twisted) == []
        for party, target in [("bob", "0"), ("alice", "b={1};xb=0")]:
            base = solve_sdp(build_cheating_sdp(spec, party, target), tol=1e-6)
            tw = solve_sdp(build_cheating_sdp(twisted, party, target), tol=1e-6)
            assert abs(base.primal_value - tw.primal_value) < 1e-6

    def test_relaxing_a_constraint_never_decreases_value(self):
        spec = protocols.build_spec("announce-coin")
        prob = build_cheating_sdp(spec, "bob", "0")
        base = solve_sdp(prob, tol=1e-6).primal_value
        # weaken the round constraint to its trace consequence
        old = prob.constraints[1]
        weak_terms = tuple(
            LinearTerm(var=t.var, coeff=t.coeff, kind="ptrace",
                       layout=t.layout, keep=(), pre=t.pre)
            for t in old.terms)
        relaxed = SdpProblem(
            var_dims=prob.var_dims,
            objective=prob.objective,
            constraints=[prob.constraints[0],
                         Constraint(dim=1, rhs=np.zeros((1, 1), dtype=complex),
                                    terms=weak_terms, label="trace-only")],
            meta={})
        val = solve_sdp(relaxed, tol=1e-6).primal_value
        assert val >= base - 1e-6


class TestBruteForce:
    def test_commitment_reference_values(self):
        spec = protocols.build_spec("qutrit-commitment-cf")
        vb = brute_force_cheat(spec, "bob", "0", restarts=8, seed=3)
        va = brute_force_cheat(spec, "alice", "b={1};xb=0", restarts=8, seed=3)
        assert abs(vb - 0.75) < 1e-3
        assert abs(va - 0.75) < 1e-3

    def test_honest_start_at_least_honest_probability(self):
        spec = protocols.build_spec("qutrit-ot")
        val = brute_force_cheat(spec, "bob", "00", restarts=0, seed=0,
                                include_honest_start=True)
        assert val >= 0.125 - 1e-9  # the honest joint probability of that outcome

    def test_alice_forcing_announce_coin(self):
        spec = protocols.build_spec("announce-coin")
        val = brute_force_cheat(spec, "alice", "b={1};xb=0", restarts=5, seed=0)
        assert abs(val - 1.0) < 1e-6

    def test_sandwich_on_solved_instances(self):
        for name, cases in [
            ("announce-coin", [("bob", "0"), ("alice", "b={1};xb=0")]),
            ("qutrit-ot", [("bob", "00"), ("alice", "b={1};xb=0")]),
        ]:
            spec = protocols.build_spec(name)
            for party, target in cases:
                prob = build_cheating_sdp(spec, party, target)
                sol = solve_sdp(prob, tol=1e-6)
                brute = brute_force_cheat(spec, party, target, restarts=8, seed=5)
                assert brute <= sol.primal_value + 1e-6
                assert sol.primal_value <= sol.dual_value + 1e-6
                assert sol.dual_value <= brute + 2e-3

    def test_ancilla_cap(self):
        spec = protocols.build_spec("announce-coin")
        with pytest.raises(qlin.DimensionError):
            brute_force_cheat(spec, "bob", "0", ancilla_dim=128)


class TestSolverContract:
    def test_variable_dimension_cap(self):
        prob = trivial_sdp(2)
        prob.var_dims = (300,)
        with pytest.raises(qlin.DimensionError):
            prob.validate()

    def test_nonconvergence_reports_residuals(self):
        spec = protocols.build_spec("qutrit-commitment-cf")
        prob = build_cheating_sdp(spec, "bob", "0")
        with pytest.raises(SolverError) as err:
            solve_sdp(prob, tol=1e-9)
        assert err.value.residuals

    def test_objective_validation(self):
        prob = trivial_sdp(2)
        prob.objective = {0: np.diag([2.0, 0.0])}
        with pytest.raises(qlin.QlinValidationError):
            prob.validate()
