"""Round-structured two-party protocol model: alternating local unitaries on
private-plus-message spaces with final POVMs, honest execution and validation.

A protocol is parameterized by spaces A (Alice), M (shared message) and B
(Bob).  Each round is one unitary applied by one actor to their side (A x M or
M x B).  Outcomes are labeled: Alice's outcome is an n-bit string, Bob's is a
k-subset plus the corresponding bits, and either side may carry an "abort"
element.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import qlin
from .circuit import Circuit
from .qlin import (ATOL_DERIVED, ATOL_OPERATOR, DimensionError, PureState,
                   as_complex, basis_index, dagger, embed_operator,
                   index_digits, is_unitary)

ABORT = "abort"


class SpecValidationError(ValueError):
    """A protocol spec violates a structural invariant."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class UnsupportedProtocolError(ValueError):
    """The interactive protocol cannot be compiled into the unitary model."""


# ---------------------------------------------------------------------------
# outcome labels
# ---------------------------------------------------------------------------

def format_x_label(bits: Iterable[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def format_bob_label(subset: Iterable[int], bits: Iterable[int]) -> str:
    idx = ",".join(str(int(i)) for i in subset)
    return "b={%s};xb=%s" % (idx, format_x_label(bits))


_BOB_RE = re.compile(r"^b=\{(?P<idx>[0-9,]+)\};xb=(?P<bits>[01]+)$")


def parse_bob_label(label: str) -> tuple[tuple[int, ...], tuple[int, ...]]:
    m = _BOB_RE.match(label)
    if not m:
        raise ValueError(f"malformed Bob outcome label {label!r}")
    subset = tuple(int(s) for s in m.group("idx").split(","))
    bits = tuple(int(c) for c in m.group("bits"))
    if len(subset) != len(bits):
        raise ValueError(f"subset/bits length mismatch in {label!r}")
    return subset, bits


def consistent(x_label: str, bob_label: str) -> bool:
    """Whether Bob's (subset, bits) agrees with Alice's bit string."""
    if x_label == ABORT or bob_label == ABORT:
        return False
    subset, bits = parse_bob_label(bob_label)
    return all(int(x_label[i - 1]) == b for i, b in zip(subset, bits))


# ---------------------------------------------------------------------------
# the spec
# ---------------------------------------------------------------------------

@dataclass
class ProtocolSpec:
    """Kitaev-model protocol: alternating side-local unitaries plus final POVMs."""

    dim_a: int
    dim_m: int
    dim_b: int
    rounds: list[tuple[str, np.ndarray]]       # (actor, unitary on A x M or M x B)
    alice_povm: dict[str, np.ndarray]          # outcome label -> operator on A
    bob_povm: dict[str, np.ndarray]            # outcome label -> operator on B
    n: int
    k: int
    name: str = ""

    @property
    def honest_joint_probability(self) -> float:
        return 1.0 / (math.comb(self.n, self.k) * 2 ** self.n)

    def side_dim(self, actor: str) -> int:
        return self.dim_a * self.dim_m if actor == "alice" else self.dim_m * self.dim_b

    def message_count(self, sender: str) -> int:
        """Number of maximal runs of the sender's rounds (message opportunities)."""
        count = 0
        prev = None
        for actor, _ in self.rounds:
            if actor == sender and prev != sender:
                count += 1
            prev = actor
        return count


@dataclass
class HonestRun:
    final_state: PureState
    outcome_distribution: dict[tuple[str, str], float]
    norm_drift: float


def _embed_round(spec: ProtocolSpec, actor: str, u: np.ndarray) -> np.ndarray:
    dims = (spec.dim_a, spec.dim_m, spec.dim_b)
    on = (0, 1) if actor == "alice" else (1, 2)
    return embed_operator(u, dims, on)


def _apply_round(spec: ProtocolSpec, actor: str, u: np.ndarray, vec: np.ndarray) -> np.ndarray:
    dims = (spec.dim_a, spec.dim_m, spec.dim_b)
    on = (0, 1) if actor == "alice" else (1, 2)
    return qlin.apply_on_factors(vec, dims, u, on)


def honest_final_state(spec: ProtocolSpec) -> tuple[np.ndarray, float]:
    """Final state vector of the honest run and the worst norm drift seen."""
    total = spec.dim_a * spec.dim_m * spec.dim_b
    vec = np.zeros(total, dtype=complex)
    vec[0] = 1.0
    drift = 0.0
    for actor, u in spec.rounds:
        vec = _apply_round(spec, actor, as_complex(u), vec)
        drift = max(drift, abs(float(np.vdot(vec, vec).real) - 1.0))
    return vec, drift


def joint_outcome_probability(spec: ProtocolSpec, vec: np.ndarray,
                              la: str, lb: str) -> float:
    dims = (spec.dim_a, spec.dim_m, spec.dim_b)
    ea = qlin.apply_on_factors(vec, dims, as_complex(spec.alice_povm[la]), (0,))
    eab = qlin.apply_on_factors(ea, dims, as_complex(spec.bob_povm[lb]), (2,))
    return float(np.vdot(vec, eab).real)


def run_honest(spec: ProtocolSpec) -> HonestRun:
    """Execute the honest protocol exactly and tabulate the joint outcome law."""
    violations = validate(spec)
    if violations:
        raise SpecValidationError(violations)
    vec, drift = honest_final_state(spec)
    dist = {}
    for la in spec.alice_povm:
        for lb in spec.bob_povm:
            p = joint_outcome_probability(spec, vec, la, lb)
            if p > 1e-15:
                dist[(la, lb)] = p
    return HonestRun(final_state=PureState(vec), outcome_distribution=dist,
                     norm_drift=drift)


def _check_povm(povm: dict[str, np.ndarray], dim: int, who: str) -> list[str]:
    out = []
    total = np.zeros((dim, dim), dtype=complex)
    for label, op in povm.items():
        op = as_complex(op)
        if op.shape != (dim, dim):
            out.append(f"{who} POVM element {label!r} has shape {op.shape}, expected {(dim, dim)}")
            continue
        if np.max(np.abs(op - dagger(op))) > ATOL_OPERATOR:
            out.append(f"{who} POVM element {label!r} is not Hermitian")
            continue
        lo = qlin.min_eig(op)
        if lo < -ATOL_OPERATOR:
            out.append(f"{who} POVM element {label!r} has min eigenvalue {lo:.3e}")
        total = total + op
    if np.max(np.abs(total - np.eye(dim))) > ATOL_OPERATOR:
        out.append(f"{who} POVM does not sum to identity")
    return out


def validate(spec: ProtocolSpec) -> list[str]:
    """All invariant violations, as human-readable strings; empty means valid."""
    out: list[str] = []
    for d, name in ((spec.dim_a, "dim_a"), (spec.dim_m, "dim_m"), (spec.dim_b, "dim_b")):
        if d < 1:
            out.append(f"{name} must be positive")
    if not 1 <= spec.k <= spec.n:
        out.append(f"need 1 <= k <= n, got k={spec.k}, n={spec.n}")
    for i, (actor, u) in enumerate(spec.rounds):
        if actor not in ("alice", "bob"):
            out.append(f"round {i}: unknown actor {actor!r}")
            continue
        u = as_complex(u)
        d = spec.side_dim(actor)
        if u.shape != (d, d):
            out.append(f"round {i}: unitary shape {u.shape}, expected {(d, d)}")
        elif not is_unitary(u, ATOL_OPERATOR):
            out.append(f"round {i}: not unitary within {ATOL_OPERATOR}")
    out += _check_povm(spec.alice_povm, spec.dim_a, "alice")
    out += _check_povm(spec.bob_povm, spec.dim_b, "bob")
    if out:
        return out

    # honest-outcome condition
    vec, drift = honest_final_state(spec)
    if drift > 1e-10:
        out.append(f"honest run norm drift {drift:.3e}")
    target = spec.honest_joint_probability
    for la in spec.alice_povm:
        for lb in spec.bob_povm:
            p = joint_outcome_probability(spec, vec, la, lb)
            if la != ABORT and lb != ABORT and consistent(la, lb):
                if abs(p - target) > ATOL_DERIVED:
                    out.append(
                        f"honest outcome ({la!r}, {lb!r}) has probability {p:.12f},"
                        f" expected {target:.12f}")
            elif p > ATOL_DERIVED:
                out.append(
                    f"inconsistent outcome ({la!r}, {lb!r}) has probability {p:.3e}")
    return out


# ---------------------------------------------------------------------------
# circuit compilation (deferred measurement)
# ---------------------------------------------------------------------------

def compile_circuit(circuit: Circuit) -> ProtocolSpec:
    """Compile a register circuit into a round-structured spec.

    Consecutive gates by the same party merge into one round; final POVMs are
    the diagonal projectors induced by the outcome maps.
    """
    circuit.validate()
    alice_regs = circuit.owned("alice")
    msg_regs = circuit.owned("msg")
    bob_regs = circuit.owned("bob")
    dim_a = int(np.prod([r.dim for r in alice_regs])) if alice_regs else 1
    dim_m = int(np.prod([r.dim for r in msg_regs])) if msg_regs else 1
    dim_b = int(np.prod([r.dim for r in bob_regs])) if bob_regs else 1

    side_layouts = {
        "alice": [r.name for r in alice_regs] + [r.name for r in msg_regs],
        "bob": [r.name for r in msg_regs] + [r.name for r in bob_regs],
    }

    rounds: list[tuple[str, np.ndarray]] = []
    for gate in circuit.gates:
        names = side_layouts[gate.party]
        dims = [circuit.reg(n).dim for n in names]
        on = [names.index(rn) for rn in gate.regs]
        emb = embed_operator(as_complex(gate.matrix), dims, on)
        if rounds and rounds[-1][0] == gate.party:
            actor, prev = rounds[-1]
            rounds[-1] = (actor, emb @ prev)
        else:
            rounds.append((gate.party, emb))

    def povm_from_map(regs, outcome_map, dim):
        ops: dict[str, np.ndarray] = {}
        dims = [r.dim for r in regs]
        for i in range(dim):
            digits = index_digits(i, dims) if regs else ()
            label = outcome_map(digits)
            ops.setdefault(label, np.zeros((dim, dim), dtype=complex))[i, i] = 1.0
        return ops

    spec = ProtocolSpec(
        dim_a=dim_a, dim_m=dim_m, dim_b=dim_b,
        rounds=rounds,
        alice_povm=povm_from_map(alice_regs, circuit.alice_outcome, dim_a),
        bob_povm=povm_from_map(bob_regs, circuit.bob_outcome, dim_b),
        n=circuit.n, k=circuit.k, name=circuit.name,
    )
    return spec


def compile_with_deferred_measurement(interactive) -> ProtocolSpec:
    """Compile an interactive protocol into the unitary-rounds model.

    Requires the protocol to carry a circuit description with bounded message
    alphabets; mid-protocol measurements and abort checks become final POVM
    structure via deferred measurement.
    """
    dims = getattr(interactive, "message_dims", ())
    if any(d is None for d in dims):
        raise UnsupportedProtocolError(
            f"protocol {interactive.name!r} branches on an unbounded message alphabet")
    circuit = getattr(interactive, "circuit", None)
    if circuit is None:
        raise UnsupportedProtocolError(
            f"protocol {interactive.name!r} has no circuit description to compile")
    return compile_circuit(circuit)


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------

def _matrix_to_json(m: np.ndarray) -> list:
    m = as_complex(m)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _matrix_from_json(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def spec_to_json(spec: ProtocolSpec) -> dict:
    return {
        "name": spec.name,
        "dim_a": spec.dim_a,
        "dim_m": spec.dim_m,
        "dim_b": spec.dim_b,
        "rounds": [{"actor": actor, "unitary": _matrix_to_json(u)}
                   for actor, u in spec.rounds],
        "alice_povm": {label: _matrix_to_json(op) for label, op in spec.alice_povm.items()},
        "bob_povm": {label: _matrix_to_json(op) for label, op in spec.bob_povm.items()},
        "n": spec.n,
        "k": spec.k,
    }


def spec_from_json(data: dict) -> ProtocolSpec:
    try:
        return ProtocolSpec(
            dim_a=int(data["dim_a"]), dim_m=int(data["dim_m"]), dim_b=int(data["dim_b"]),
            rounds=[(r["actor"], _matrix_from_json(r["unitary"])) for r in data["rounds"]],
            alice_povm={k: _matrix_from_json(v) for k, v in data["alice_povm"].items()},
            bob_povm={k: _matrix_from_json(v) for k, v in data["bob_povm"].items()},
            n=int(data["n"]), k=int(data["k"]), name=data.get("name", ""),
        )
    except (KeyError, TypeError) as exc:
        raise SpecValidationError([f"malformed spec JSON: {exc}"]) from exc


def load_spec(path) -> ProtocolSpec:
    with open(path) as fh:
        return spec_from_json(json.load(fh))


def save_spec(spec: ProtocolSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec_to_json(spec), fh, separators=(",", ":"))
