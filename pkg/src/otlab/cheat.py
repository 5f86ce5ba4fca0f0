"""Cheating strategies and their exact values: Helstrom discrimination, the
computational-basis attack, the superposition and parity attacks, the encoding
decoding cap, optimal state discrimination, sequential-measurement composition
and the purification reduction for entangled senders.

Every named attack pairs an executable adversary program (for the Monte-Carlo
harness) with an exact probability computed by the branching executor, so the
reported values carry no sampling error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import otcore, qlin, sdp
from .otcore import (ABORT, AdversaryReport, Message, exact_distribution,
                     exact_event_probability, phase_unitary, phi_vec, qutrit_ot)
from .qlin import (ATOL_OPERATOR, DensityMatrix, DimensionError, PureState,
                   SubsystemLayout, as_complex, dagger, trace_norm)


class PreconditionError(ValueError):
    """An operation's mathematical precondition is violated."""


# ---------------------------------------------------------------------------
# Helstrom discrimination
# ---------------------------------------------------------------------------

def _mat(x) -> np.ndarray:
    return x.matrix if isinstance(x, DensityMatrix) else as_complex(x)


def helstrom(s0: DensityMatrix, s1: DensityMatrix) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Optimal two-outcome discrimination of two equiprobable states.

    Returns the success probability 1/2 + ||s0 - s1||_tr / 4 and the measuring
    projectors; the zero eigenspace of the difference goes to outcome 0.
    """
    m0, m1 = _mat(s0), _mat(s1)
    if m0.shape != m1.shape:
        raise DimensionError(f"state dims differ: {m0.shape} vs {m1.shape}")
    diff = m0 - m1
    prob = 0.5 + 0.25 * trace_norm(diff)
    w, v = np.linalg.eigh(diff)
    keep = w >= 0
    v0 = v[:, keep]
    p0 = v0 @ dagger(v0)
    p1 = np.eye(m0.shape[0]) - p0
    return prob, (p0, p1)


def qutrit_reduced_states() -> tuple[DensityMatrix, DensityMatrix]:
    """The two states the receiver of the first qutrit message must tell apart."""
    out = []
    for b in (0, 1):
        rho = np.outer(phi_vec(b), phi_vec(b).conj())
        out.append(DensityMatrix(qlin.partial_trace(rho, (3, 3), (0,))))
    return out[0], out[1]


def nayak_bound(d: int, n: int) -> float:
    """Best average decoding probability of n equiprobable values from d dims."""
    if d < 1 or n < 1:
        raise PreconditionError("dimensions must be positive")
    return min(1.0, d / n)


# ---------------------------------------------------------------------------
# named attacks on the qutrit protocol
# ---------------------------------------------------------------------------

@dataclass
class Strategy:
    """A named attack: an adversary program plus its exact success probability."""

    name: str
    party: str
    target: str
    program: Callable
    exact_value: float
    extras: dict = field(default_factory=dict)


def _success_and(extras_events: dict[str, Callable] | None = None):
    return extras_events or {}


def alice_basis_attack() -> Strategy:
    """Measure the received qutrit in the computational basis and guess the index.

    Outcomes 0/1 identify the index; outcome 2 carries no information and the
    guess is a fresh coin.  The measured qutrit goes back with honest phases,
    so the sender's final check always passes.
    """

    def program(arena, ch):
        msg = yield None
        outcome, _ = arena.measure((msg.reg,))
        guess = outcome if outcome < 2 else ch.bit()
        x0, x1 = ch.bit(), ch.bit()
        arena.apply(phase_unitary(x0, x1), (msg.reg,))
        yield Message.quantum(msg.reg)
        return AdversaryReport(guess={"b": guess, "branch": outcome},
                               output=(x0, x1))

    def correct(res) -> bool:
        return (res.outputs["bob"] != ABORT
                and res.outputs["alice"].guess["b"] == res.outputs["bob"][0])

    proto = qutrit_ot()
    value = exact_event_probability(proto, correct, alice=program)
    abort = exact_event_probability(proto, lambda r: r.outputs["bob"] == ABORT,
                                    alice=program)
    return Strategy(name="computational-basis", party="alice", target="guess-b",
                    program=program, exact_value=value,
                    extras={"bob_abort_probability": abort})


def superposition_povm() -> list[np.ndarray]:
    """Four-outcome POVM on a qutrit from the four-dimensional guessing basis."""
    povm = []
    for x0 in (0, 1):
        for x1 in (0, 1):
            u = np.array([(-1.0) ** x0, (-1.0) ** x1, 1.0], dtype=complex) / 2.0
            povm.append(np.outer(u, u.conj()))
    return povm


def post_phase_states() -> list[PureState]:
    """The four equally likely states the superposition attacker receives."""
    out = []
    for x0 in (0, 1):
        for x1 in (0, 1):
            v = np.array([(-1.0) ** x0, (-1.0) ** x1, 1.0], dtype=complex) / math.sqrt(3.0)
            out.append(PureState(v))
    return out


def bob_superposition_attack() -> Strategy:
    """Send the uniform qutrit superposition and decode both bits at once."""

    povm = superposition_povm()
    uniform = np.ones(3, dtype=complex) / math.sqrt(3.0)

    def program(arena, ch):
        q = arena.alloc(3, uniform)
        yield Message.quantum(q)
        msg = yield None
        outcome, _ = arena.measure((msg.reg,), povm)
        x0, x1 = divmod(outcome % 4, 2)
        return AdversaryReport(guess={"x0": x0, "x1": x1})

    def correct(res) -> bool:
        g = res.outputs["bob"].guess
        return (res.outputs["alice"] != ABORT
                and (g["x0"], g["x1"]) == res.outputs["alice"])

    proto = qutrit_ot()
    value = exact_event_probability(proto, correct, bob=program)
    per_pair = exact_distribution(
        proto, bob=program,
        key=lambda r: (r.outputs["alice"],
                       (r.outputs["bob"].guess["x0"], r.outputs["bob"].guess["x1"])
                       == r.outputs["alice"]))
    conditioned = {
        pair: per_pair.get((pair, True), 0.0) * 4.0
        for pair in [(a, b) for a in (0, 1) for b in (0, 1)]
    }
    abort = exact_event_probability(proto, lambda r: r.outputs["alice"] == ABORT,
                                    bob=program)
    return Strategy(name="uniform-superposition", party="bob", target="guess-both-bits",
                    program=program, exact_value=value,
                    extras={"per_pair_success": conditioned,
                            "alice_abort_probability": abort})


def bob_parity_attack() -> Strategy:
    """Send half of a two-qubit maximally entangled pair and read the parity."""

    half = np.zeros(9, dtype=complex)
    half[qlin.basis_index((0, 0), (3, 3))] = 1.0 / math.sqrt(2.0)
    half[qlin.basis_index((1, 1), (3, 3))] = 1.0 / math.sqrt(2.0)

    minus = np.zeros(9, dtype=complex)
    minus[qlin.basis_index((0, 0), (3, 3))] = 1.0 / math.sqrt(2.0)
    minus[qlin.basis_index((1, 1), (3, 3))] = -1.0 / math.sqrt(2.0)
    parity_projectors = [np.outer(half, half.conj()), np.outer(minus, minus.conj())]

    def program(arena, ch):
        q1, q2 = arena.alloc_joint((3, 3), half)
        yield Message.quantum(q1)
        msg = yield None
        outcome, _ = arena.measure((msg.reg, q2), parity_projectors)
        parity = min(outcome, 1)
        x0 = ch.bit()
        return AdversaryReport(guess={"parity": parity, "x0": x0, "x1": x0 ^ parity})

    proto = qutrit_ot()
    parity_ok = exact_event_probability(
        proto,
        lambda r: (r.outputs["alice"] != ABORT
                   and r.outputs["bob"].guess["parity"]
                   == (r.outputs["alice"][0] ^ r.outputs["alice"][1])),
        bob=program)
    bit_ok = exact_event_probability(
        proto,
        lambda r: (r.outputs["alice"] != ABORT
                   and r.outputs["bob"].guess["x0"] == r.outputs["alice"][0]),
        bob=program)
    abort = exact_event_probability(proto, lambda r: r.outputs["alice"] == ABORT,
                                    bob=program)
    return Strategy(name="entangled-parity", party="bob", target="guess-parity",
                    program=program, exact_value=parity_ok,
                    extras={"single_bit_success": bit_ok,
                            "alice_abort_probability": abort})


# ---------------------------------------------------------------------------
# optimal discrimination (SDP-backed oracle)
# ---------------------------------------------------------------------------

def optimal_discrimination(states: Sequence[PureState | np.ndarray],
                           priors: Sequence[float] | None = None,
                           tol: float = 1e-8) -> tuple[float, list[np.ndarray]]:
    """Optimal success probability and POVM for distinguishing pure states."""
    n = len(states)
    if priors is None:
        priors = [1.0 / n] * n
    problem = sdp.discrimination_sdp(states, priors)
    solution = sdp.solve_sdp(problem, tol=max(tol, 1e-8))
    return solution.primal_value, solution.primal_vars


# ---------------------------------------------------------------------------
# Learning-In-Sequence composition
# ---------------------------------------------------------------------------

def _check_projective(ops: Sequence[np.ndarray], who: str) -> None:
    total = None
    for i, op in enumerate(ops):
        op = as_complex(op)
        if np.max(np.abs(op - dagger(op))) > ATOL_OPERATOR:
            raise PreconditionError(f"{who}[{i}] is not Hermitian")
        if np.max(np.abs(op @ op - op)) > ATOL_OPERATOR:
            raise PreconditionError(f"{who}[{i}] is not idempotent")
        total = op if total is None else total + op
        for other in ops[:i]:
            if np.max(np.abs(op @ other)) > ATOL_OPERATOR:
                raise PreconditionError(f"{who} elements are not orthogonal")
    if np.max(np.abs(total - np.eye(total.shape[0]))) > ATOL_OPERATOR:
        raise PreconditionError(f"{who} does not sum to identity")


@dataclass
class MeasurementPair:
    """Alice's four-outcome projective measurement plus Bob's two guessing ones."""

    m_ops: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    p_ops: tuple[np.ndarray, np.ndarray]
    q_ops: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        _check_projective(self.m_ops, "M")
        _check_projective(self.p_ops, "P")
        _check_projective(self.q_ops, "Q")


@dataclass
class LisResult:
    success: float
    p: float
    q: float
    a: float
    bound: float
    dc_norm2: float
    cd_norm2: float
    theta: float
    theta_prime: float


def lis_compose(omega: PureState, meas: MeasurementPair,
                layout: SubsystemLayout) -> LisResult:
    """Apply the two guessing measurements in sequence (uniformly ordered) and
    compare the both-bits success against a(2a - 1)^2 with a = (p + q)/2.

    Requires each single-bit success probability to be at least 1/2.
    """
    layout.check(omega.dim)
    c = sum(np.kron(m, p) for m, p in zip(meas.m_ops, (meas.p_ops[0], meas.p_ops[0],
                                                       meas.p_ops[1], meas.p_ops[1])))
    d = sum(np.kron(m, q) for m, q in zip(meas.m_ops, (meas.q_ops[0], meas.q_ops[1],
                                                       meas.q_ops[0], meas.q_ops[1])))
    vec = omega.amplitudes
    cv = c @ vec
    dv = d @ vec
    p = float(np.vdot(cv, cv).real)
    q = float(np.vdot(dv, dv).real)
    if p < 0.5 - 1e-12 or q < 0.5 - 1e-12:
        raise PreconditionError(
            f"single-bit success below 1/2 (p={p:.6f}, q={q:.6f})")
    dcv = d @ cv
    cdv = c @ dv
    dc2 = float(np.vdot(dcv, dcv).real)
    cd2 = float(np.vdot(cdv, cdv).real)
    success = 0.5 * (dc2 + cd2)
    a = 0.5 * (p + q)
    bound = a * (2.0 * a - 1.0) ** 2
    if success < bound - 1e-10:
        raise RuntimeError(
            f"sequential-learning bound violated: success={success}, bound={bound}")
    return LisResult(success=success, p=p, q=q, a=a, bound=bound,
                     dc_norm2=dc2, cd_norm2=cd2,
                     theta=math.acos(min(1.0, math.sqrt(p))),
                     theta_prime=math.acos(min(1.0, math.sqrt(q))))


def random_lis_instance(rng: np.random.Generator, dim_a: int = 4, dim_b: int = 8,
                        max_tries: int = 400) -> tuple[PureState, MeasurementPair, SubsystemLayout]:
    """Haar-random instance meeting the p, q >= 1/2 preconditions.

    Alice's measurement is the computational basis grouped into four blocks;
    Bob's measurements project onto random half-dimensional subspaces.
    Instances failing the precondition are rejected and redrawn.
    """
    if dim_a % 4 != 0 or dim_b % 2 != 0:
        raise PreconditionError("need dim_a divisible by 4 and dim_b even")
    block = dim_a // 4
    m_ops = []
    for i in range(4):
        m = np.zeros((dim_a, dim_a), dtype=complex)
        for j in range(i * block, (i + 1) * block):
            m[j, j] = 1.0
        m_ops.append(m)
    layout = SubsystemLayout((dim_a, dim_b))
    for _ in range(max_tries):
        up = qlin.haar_unitary(dim_b, rng)[:, :dim_b // 2]
        uq = qlin.haar_unitary(dim_b, rng)[:, :dim_b // 2]
        p0 = up @ dagger(up)
        q0 = uq @ dagger(uq)
        meas = MeasurementPair(
            m_ops=tuple(m_ops),
            p_ops=(p0, np.eye(dim_b) - p0),
            q_ops=(q0, np.eye(dim_b) - q0),
        )
        omega = PureState(qlin.haar_state(dim_a * dim_b, rng))
        c = sum(np.kron(m, p) for m, p in zip(meas.m_ops, (p0, p0, meas.p_ops[1], meas.p_ops[1])))
        d = sum(np.kron(m, q) for m, q in zip(meas.m_ops, (q0, meas.q_ops[1], q0, meas.q_ops[1])))
        pv = float(np.vdot(c @ omega.amplitudes, c @ omega.amplitudes).real)
        qv = float(np.vdot(d @ omega.amplitudes, d @ omega.amplitudes).real)
        if pv >= 0.5 and qv >= 0.5:
            return omega, meas, layout
    raise RuntimeError("failed to draw an instance meeting the preconditions")


# ---------------------------------------------------------------------------
# purification reduction for entangled senders
# ---------------------------------------------------------------------------

def purification_equivalence_check(alphas: Sequence[complex],
                                   ancillas: Sequence[np.ndarray],
                                   measurement: Sequence[np.ndarray]) -> tuple[float, float]:
    """Success of an entangled sender versus its purified counterpart.

    The entangled strategy keeps ancilla states |e_i> alongside the qutrit; the
    purified one sends the bare superposition and attaches the ancillas by a
    local unitary afterwards.  Both probabilities are computed exactly.
    """
    alphas = as_complex(np.asarray(alphas)).reshape(3)
    norm = float(np.vdot(alphas, alphas).real)
    if abs(norm - 1.0) > 1e-9:
        raise PreconditionError("amplitudes must be normalized")
    es = [as_complex(e).reshape(-1) for e in ancillas]
    de = es[0].shape[0]
    if any(e.shape[0] != de for e in es):
        raise DimensionError("ancilla states must share one dimension")
    for e in es:
        if abs(np.linalg.norm(e) - 1.0) > 1e-9:
            raise PreconditionError("ancilla states must be normalized")
    meas = [as_complex(m) for m in measurement]
    if len(meas) != 4 or any(m.shape != (3 * de, 3 * de) for m in meas):
        raise DimensionError("measurement must have four elements on the joint space")

    def signed(x0, x1, i):
        return (-1.0) ** ((x0, x1, 0)[i])

    # entangled: the ancillas ride along from the start
    prob_e = 0.0
    pairs = [(x0, x1) for x0 in (0, 1) for x1 in (0, 1)]
    for idx, (x0, x1) in enumerate(pairs):
        psi = np.zeros(3 * de, dtype=complex)
        for i in range(3):
            psi[i * de:(i + 1) * de] = alphas[i] * signed(x0, x1, i) * es[i]
        prob_e += 0.25 * float(np.vdot(psi, meas[idx] @ psi).real)

    # purified: bare qutrit out, ancillas attached afterwards by |i>|0> -> |i>|e_i>
    cols = {i * de: np.kron(qlin.basis_state(3, i), es[i]) for i in range(3)}
    from .circuit import unitary_with_columns
    u = unitary_with_columns(cols, 3 * de)
    prob_p = 0.0
    for idx, (x0, x1) in enumerate(pairs):
        bare = np.array([alphas[i] * signed(x0, x1, i) for i in range(3)])
        joint = u @ np.kron(bare, qlin.basis_state(de, 0))
        prob_p += 0.25 * float(np.vdot(joint, meas[idx] @ joint).real)
    return prob_e, prob_p


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------

@dataclass
class CheatReport:
    party: str
    target: str
    lower_bound: dict
    upper_bound: dict | None
    seed: int | None = None
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"party": self.party, "target": self.target,
               "lower_bound": self.lower_bound, "upper_bound": self.upper_bound}
        if self.seed is not None:
            out["seed"] = self.seed
        if self.extras:
            out.update(self.extras)
        return out
