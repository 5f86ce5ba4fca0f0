import math

import numpy as np
import pytest

from otlab import qlin
from otlab.qlin import (DimensionError, PureState, RankError, SubsystemLayout,
                        apply_unitary, partial_trace, projector_span, tensor,
                        trace_norm)


def phi(b, sign=+1):
    v = np.zeros(9, dtype=complex)
    v[b * 3 + b] = 1 / math.sqrt(2)
    v[8] = sign / math.sqrt(2)
    return v


class TestTensor:
    def test_identity(self):
        np.testing.assert_allclose(tensor(np.eye(2), np.eye(2)), np.eye(4))

    def test_basis_projectors(self):
        p0 = np.diag([1.0, 0.0])
        p1 = np.diag([0.0, 1.0])
        out = tensor(p0, p1)
        expected = np.zeros((4, 4))
        expected[1, 1] = 1.0
        np.testing.assert_allclose(out, expected)

    def test_qutrit_pair_amplitudes(self):
        # (|bb> + |22>)/sqrt(2) for b=0 via tensor basis states
        v = (tensor(qlin.basis_state(3, 0), qlin.basis_state(3, 0))
             + tensor(qlin.basis_state(3, 2), qlin.basis_state(3, 2))) / math.sqrt(2)
        nonzero = np.nonzero(np.abs(v) > 1e-12)[0]
        assert list(nonzero) == [0, 8]
        np.testing.assert_allclose(v[nonzero], [1 / math.sqrt(2)] * 2)

    def test_mixed_product_property(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a, b, c, d = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
                          for _ in range(4))
            lhs = tensor(a, b) @ tensor(c, d)
            rhs = tensor(a @ c, b @ d)
            np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_associativity_up_to_reordering(self):
        rng = np.random.default_rng(4)
        a, b, c = (rng.standard_normal((2, 2)) for _ in range(3))
        np.testing.assert_allclose(tensor(tensor(a, b), c), tensor(a, tensor(b, c)),
                                   atol=1e-10)


class TestPartialTrace:
    def test_reduced_state_of_entangled_pair(self):
        rho = np.outer(phi(0), phi(0).conj())
        out = partial_trace(rho, (3, 3), keep=(0,))
        np.testing.assert_allclose(out, np.diag([0.5, 0.0, 0.5]), atol=1e-12)

    def test_product_state(self):
        rng = np.random.default_rng(5)
        v = qlin.haar_state(3, rng)
        w = qlin.haar_state(4, rng)
        rho = np.outer(v, v.conj())
        tau = np.outer(w, w.conj())
        joint = tensor(rho, tau)
        np.testing.assert_allclose(partial_trace(joint, (3, 4), keep=(0,)), rho,
                                   atol=1e-12)
        np.testing.assert_allclose(partial_trace(joint, (3, 4), keep=(1,)), tau,
                                   atol=1e-12)

    def test_bell_pair(self):
        bell = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
        rho = np.outer(bell, bell.conj())
        np.testing.assert_allclose(partial_trace(rho, (2, 2), keep=(0,)),
                                   np.eye(2) / 2, atol=1e-12)

    def test_trace_preserved_random(self):
        rng = np.random.default_rng(6)
        for dims in [(2, 3), (2, 2, 2), (3, 2, 4)]:
            d = int(np.prod(dims))
            v = qlin.haar_state(d, rng)
            rho = np.outer(v, v.conj())
            for keep in [(0,), (len(dims) - 1,), tuple(range(len(dims) - 1))]:
                out = partial_trace(rho, dims, keep)
                assert abs(np.trace(out) - np.trace(rho)) < 1e-10

    def test_bad_layout(self):
        with pytest.raises(DimensionError):
            partial_trace(np.eye(6), (2, 2), keep=(0,))


class TestTraceNorm:
    def test_sigma_difference(self):
        s0 = np.diag([0.5, 0.0, 0.5])
        s1 = np.diag([0.0, 0.5, 0.5])
        assert abs(trace_norm(s0 - s1) - 1.0) < 1e-12

    def test_zero_and_identity(self):
        assert trace_norm(np.zeros((3, 3))) == 0.0
        for d in (2, 5):
            assert abs(trace_norm(np.eye(d)) - d) < 1e-12

    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            trace_norm(np.ones((2, 3)))

    def test_unitary_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            u = qlin.haar_unitary(4, rng)
            v = qlin.haar_unitary(4, rng)
            assert abs(trace_norm(u @ m @ v) - trace_norm(m)) < 1e-9


class TestApplyUnitary:
    def test_phase_on_one_factor(self):
        state = PureState(phi(0))
        u = np.diag([-1.0, 1.0, 1.0])  # phases for x0=1, x1=0, x2:=0
        out = apply_unitary(state, u, SubsystemLayout((3, 3)), on=(1,))
        np.testing.assert_allclose(out.amplitudes, phi(0, sign=+1) * 0 + (
            -tensor(qlin.basis_state(3, 0), qlin.basis_state(3, 0))
            + tensor(qlin.basis_state(3, 2), qlin.basis_state(3, 2))) / math.sqrt(2),
            atol=1e-12)

    def test_identity(self):
        rng = np.random.default_rng(8)
        state = PureState(qlin.haar_state(6, rng))
        out = apply_unitary(state, np.eye(2), SubsystemLayout((2, 3)), on=(0,))
        np.testing.assert_allclose(out.amplitudes, state.amplitudes, atol=1e-12)

    def test_bit_flip_on_first_factor(self):
        rng = np.random.default_rng(9)
        psi = qlin.haar_state(3, rng)
        state = PureState(tensor(qlin.basis_state(2, 0), psi))
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        out = apply_unitary(state, x, SubsystemLayout((2, 3)), on=(0,))
        np.testing.assert_allclose(out.amplitudes, tensor(qlin.basis_state(2, 1), psi),
                                   atol=1e-12)

    def test_norm_preserved(self):
        rng = np.random.default_rng(10)
        state = PureState(qlin.haar_state(12, rng))
        u = qlin.haar_unitary(4, rng)
        out = apply_unitary(state, u, SubsystemLayout((3, 4)), on=(1,))
        assert abs(np.vdot(out.amplitudes, out.amplitudes).real - 1.0) < 1e-12

    def test_non_unitary_rejected(self):
        state = PureState(qlin.basis_state(2, 0))
        with pytest.raises(qlin.QlinValidationError):
            apply_unitary(state, np.array([[1, 1], [0, 1]]), SubsystemLayout((2,)), (0,))


class TestProjectorSpan:
    def test_single_basis_vector(self):
        p = projector_span([PureState(qlin.basis_state(2, 0))])
        np.testing.assert_allclose(p, np.diag([1.0, 0.0]), atol=1e-12)

    def test_rank_two_fixes_members(self):
        p = projector_span([PureState(phi(0, +1)), PureState(phi(0, -1))])
        np.testing.assert_allclose(p @ phi(0), phi(0), atol=1e-10)
        np.testing.assert_allclose(p @ p, p, atol=1e-10)
        assert abs(np.trace(p).real - 2.0) < 1e-10

    def test_four_state_basis_spans_everything(self):
        vecs = []
        for x0 in (0, 1):
            for x1 in (0, 1):
                v = np.array([(-1.0) ** x0, (-1.0) ** x1, 1.0,
                              (-1.0) ** (x0 ^ x1)], dtype=complex) / 2.0
                vecs.append(PureState(v))
        gram = np.array([[u.overlap(v) for v in vecs] for u in vecs])
        np.testing.assert_allclose(gram, np.eye(4), atol=1e-12)
        np.testing.assert_allclose(projector_span(vecs), np.eye(4), atol=1e-10)

    def test_dependent_vectors_rejected(self):
        v = PureState(qlin.basis_state(3, 1))
        with pytest.raises(RankError):
            projector_span([v, v])


class TestStateTypes:
    def test_pure_state_norm_enforced(self):
        with pytest.raises(qlin.QlinValidationError):
            PureState(np.array([1.0, 1.0]))

    def test_density_matrix_invariants(self):
        qlin.DensityMatrix(np.eye(2) / 2)
        with pytest.raises(qlin.QlinValidationError):
            qlin.DensityMatrix(np.diag([0.7, 0.7]))
        qlin.DensityMatrix(np.diag([0.3, 0.3]), subnormalized=True)
        with pytest.raises(qlin.QlinValidationError):
            qlin.DensityMatrix(np.diag([0.9, -0.1]))

    def test_layout_checks(self):
        layout = SubsystemLayout((2, 3))
        assert layout.total == 6
        with pytest.raises(DimensionError):
            layout.check(7)


class TestGeometricClaims:
    """Projection overlap, angle triangle inequality, and the cosine sum bound."""

    def test_projection_overlap_bound(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            dim = int(rng.integers(2, 7))
            x = qlin.haar_state(dim, rng)
            y = qlin.haar_state(dim, rng)
            extra = [qlin.haar_state(dim, rng) for _ in range(int(rng.integers(0, dim - 1)))]
            try:
                q = projector_span([y] + extra)
            except RankError:
                continue
            lhs = float(np.vdot(q @ x, q @ x).real)
            rhs = abs(np.vdot(x, y)) ** 2
            assert lhs >= rhs - 1e-10

    def test_angle_triangle_inequality(self):
        rng = np.random.default_rng(12)
        for _ in range(1000):
            dim = int(rng.integers(2, 6))
            mid = qlin.haar_state(dim, rng)
            theta = rng.uniform(0, math.pi / 4)
            theta_p = rng.uniform(0, math.pi / 4)

            def tilt(vec, angle):
                perp = qlin.haar_state(dim, rng)
                perp = perp - np.vdot(vec, perp) * vec
                nrm = np.linalg.norm(perp)
                if nrm < 1e-9:
                    return vec
                perp = perp / nrm
                return math.cos(angle) * vec + math.sin(angle) * perp

            psi = tilt(mid, theta)
            xi = tilt(mid, theta_p)
            t1 = math.acos(min(1.0, abs(np.vdot(psi, mid))))
            t2 = math.acos(min(1.0, abs(np.vdot(mid, xi))))
            assert abs(np.vdot(psi, xi)) >= math.cos(t1 + t2) - 1e-10

    def test_cosine_sum_inequality_grid(self):
        grid = np.linspace(0.0, math.pi / 4, 200)
        t, r = np.meshgrid(grid, grid)
        lhs = np.cos(t + r)
        rhs = np.cos(t) ** 2 + np.cos(r) ** 2 - 1.0
        assert np.all(lhs >= rhs - 1e-12)


def test_embed_operator_matches_apply():
    rng = np.random.default_rng(13)
    dims = (2, 3, 2)
    u = qlin.haar_unitary(6, rng)
    vec = qlin.haar_state(12, rng)
    emb = qlin.embed_operator(u, dims, on=(2, 1))
    direct = qlin.apply_on_factors(vec, dims, u, on=(2, 1))
    np.testing.assert_allclose(emb @ vec, direct, atol=1e-12)
    assert qlin.is_unitary(emb)
