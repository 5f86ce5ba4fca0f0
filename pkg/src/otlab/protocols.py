"""Named protocol registry: interactive programs, circuit descriptions, and
bundled compiled specs.

Four protocols ship with the package:

* ``announce-coin``   - Alice flips a coin and announces it (trivial 1-of-1).
* ``qutrit-ot``       - the two-message qutrit random-OT protocol (2-of-1 labels).
* ``cf-from-ot``      - coin flipping built on the qutrit random-OT.
* ``qutrit-commitment-cf`` - commitment-based coin flipping from the qutrit
  state family; the reference instance for the cheating SDPs.

Bundled spec JSON files are regenerated from these circuits by
``python -m otlab.protocols`` and are never hand-edited.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import numpy as np

from . import model, otcore
from .circuit import (HADAMARD, Circuit, Gate, Reg, controlled_gate, move_gate,
                      permutation_gate, rotation_to_basis_states,
                      unitary_with_columns, xor_gate)
from .model import ABORT, format_bob_label, format_x_label
from .otcore import (InteractiveProtocol, Message, phase_unitary, phi_vec)

NAMES = ("announce-coin", "qutrit-ot", "cf-from-ot", "qutrit-commitment-cf")

# Maximum per-party forcing probability of the commitment CF below; certified
# by the SDP/brute-force sandwich in the test suite.
COMMITMENT_CF_MAX_CHEAT = 0.75


# ---------------------------------------------------------------------------
# announce-coin
# ---------------------------------------------------------------------------

def announce_coin_circuit() -> Circuit:
    regs = [Reg("CA", 2, "alice"), Reg("M", 2, "msg"), Reg("CB", 2, "bob")]
    gates = [
        Gate("alice", ("CA",), HADAMARD),
        Gate("alice", ("CA", "M"), xor_gate(2)),
        Gate("bob", ("M", "CB"), move_gate(2, 2)),
    ]
    return Circuit(
        name="announce-coin", regs=regs, gates=gates,
        alice_outcome=lambda d: format_x_label((d[0],)),
        bob_outcome=lambda d: format_bob_label((1,), (d[0],)),
        n=1, k=1,
    )


def announce_coin() -> InteractiveProtocol:
    def alice(arena, ch):
        c = ch.bit()
        yield Message.classical(c)
        return c

    def bob(arena, ch):
        msg = yield None
        if msg is None or msg.kind != "c":
            return ABORT
        return msg.value

    return InteractiveProtocol(name="announce-coin", alice=alice, bob=bob,
                               first="alice", message_dims=(2,),
                               circuit=announce_coin_circuit())


# ---------------------------------------------------------------------------
# qutrit-ot
# ---------------------------------------------------------------------------

def _pair_prep_branch(b):
    """9x9 unitary sending |00> to (|bb> + |22>)/sqrt(2)."""
    return unitary_with_columns({0: phi_vec(b[0])}, 9)


def _pair_verify_branch(b):
    """9x9 rotation sending phi_b, phi'_b to the first two basis states."""
    return rotation_to_basis_states({0: phi_vec(b[0], +1), 1: phi_vec(b[0], -1)}, 9)


def qutrit_ot_circuit() -> Circuit:
    regs = [
        Reg("X0", 2, "alice"), Reg("X1", 2, "alice"),
        Reg("MQ", 3, "msg"),
        Reg("BB", 2, "bob"), Reg("Q1B", 3, "bob"), Reg("Q2B", 3, "bob"),
    ]
    phase = controlled_gate((2, 2), lambda d: phase_unitary(d[0], d[1]), 3)
    gates = [
        Gate("bob", ("BB",), HADAMARD),
        Gate("bob", ("BB", "Q1B", "Q2B"), controlled_gate((2,), _pair_prep_branch, 9)),
        Gate("bob", ("Q1B", "MQ"), move_gate(3, 3)),
        Gate("alice", ("X0",), HADAMARD),
        Gate("alice", ("X1",), HADAMARD),
        Gate("alice", ("X0", "X1", "MQ"), phase),
        Gate("bob", ("MQ", "Q1B"), move_gate(3, 3)),
        Gate("bob", ("BB", "Q1B", "Q2B"), controlled_gate((2,), _pair_verify_branch, 9)),
    ]

    def bob_outcome(d):
        b, q1, q2 = d
        j = 3 * q1 + q2
        if j > 1:
            return ABORT
        return format_bob_label((b + 1,), (j,))

    return Circuit(
        name="qutrit-ot", regs=regs, gates=gates,
        alice_outcome=lambda d: format_x_label(d),
        bob_outcome=bob_outcome,
        n=2, k=1,
    )


def qutrit_ot() -> InteractiveProtocol:
    proto = otcore.qutrit_ot()
    proto.circuit = qutrit_ot_circuit()
    return proto


# ---------------------------------------------------------------------------
# cf-from-ot (compiled on the qutrit protocol)
# ---------------------------------------------------------------------------

def cf_from_ot_circuit() -> Circuit:
    regs = [
        Reg("X0", 2, "alice"), Reg("X1", 2, "alice"), Reg("C", 2, "alice"),
        Reg("RB", 2, "alice"), Reg("RY", 2, "alice"),
        Reg("M4", 4, "msg"),
        Reg("BB", 2, "bob"), Reg("Q1B", 3, "bob"), Reg("Q2B", 3, "bob"),
        Reg("RC", 2, "bob"),
    ]
    phase4 = controlled_gate(
        (2, 2), lambda d: np.diag([(-1.0) ** d[0], (-1.0) ** d[1], 1.0, 1.0]).astype(complex), 4)
    xor_lo_from = permutation_gate((2, 4), lambda d: (d[0], d[1] ^ d[0]))       # (ctl, M)
    xor_lo_into = permutation_gate((4, 2), lambda d: (d[0], d[1] ^ (d[0] & 1)))  # (M, tgt)
    xor_hi_from = permutation_gate((2, 4), lambda d: (d[0], d[1] ^ (2 * d[0])))
    xor_hi_into = permutation_gate((4, 2), lambda d: (d[0], d[1] ^ (d[0] >> 1)))
    announce_y = controlled_gate(
        (3, 3), lambda d: (permutation_gate((4,), lambda m: (m[0] ^ 1,))
                           if 3 * d[0] + d[1] == 1 else np.eye(4, dtype=complex)), 4)
    gates = [
        Gate("bob", ("BB",), HADAMARD),
        Gate("bob", ("BB", "Q1B", "Q2B"), controlled_gate((2,), _pair_prep_branch, 9)),
        Gate("bob", ("Q1B", "M4"), move_gate(3, 4)),
        Gate("alice", ("X0",), HADAMARD),
        Gate("alice", ("X1",), HADAMARD),
        Gate("alice", ("X0", "X1", "M4"), phase4),
        Gate("bob", ("M4", "Q1B"), move_gate(4, 3)),
        Gate("bob", ("BB", "Q1B", "Q2B"), controlled_gate((2,), _pair_verify_branch, 9)),
        Gate("alice", ("C",), HADAMARD),
        Gate("alice", ("C", "M4"), xor_lo_from),
        Gate("bob", ("M4", "RC"), xor_lo_into),
        Gate("bob", ("RC", "M4"), xor_lo_from),
        Gate("bob", ("BB", "M4"), xor_hi_from),
        Gate("bob", ("Q1B", "Q2B", "M4"), announce_y),
        Gate("alice", ("M4", "RB"), xor_hi_into),
        Gate("alice", ("M4", "RY"), xor_lo_into),
    ]

    def alice_outcome(d):
        x0, x1, c, rb, ry = d
        if ry != (x1 if rb else x0):
            return ABORT
        return format_x_label((c ^ rb,))

    def bob_outcome(d):
        b, q1, q2, rc = d
        j = 3 * q1 + q2
        if j > 1:
            return ABORT
        return format_bob_label((1,), (rc ^ b,))

    return Circuit(
        name="cf-from-ot", regs=regs, gates=gates,
        alice_outcome=alice_outcome, bob_outcome=bob_outcome,
        n=1, k=1,
    )


def cf_from_ot() -> InteractiveProtocol:
    proto = otcore.cf_from_ot_protocol(otcore.qutrit_ot())
    proto.name = "cf-from-ot"
    proto.circuit = cf_from_ot_circuit()
    return proto


# ---------------------------------------------------------------------------
# qutrit-commitment-cf
# ---------------------------------------------------------------------------

def _commit_verify_branch(d):
    """Send phi_a to the pass state; all eight orthogonal directions abort."""
    return rotation_to_basis_states({0: phi_vec(d[0])}, 9)


def qutrit_commitment_cf_circuit() -> Circuit:
    regs = [
        Reg("CA", 2, "alice"), Reg("Q1A", 3, "alice"), Reg("Q2A", 3, "alice"),
        Reg("MQ", 3, "msg"), Reg("MB", 2, "msg"),
        Reg("CB", 2, "bob"), Reg("Q1B", 3, "bob"), Reg("Q2B", 3, "bob"),
        Reg("RA", 2, "bob"),
    ]
    gates = [
        Gate("alice", ("CA",), HADAMARD),
        Gate("alice", ("CA", "Q1A", "Q2A"), controlled_gate((2,), _pair_prep_branch, 9)),
        Gate("alice", ("Q1A", "MQ"), move_gate(3, 3)),
        Gate("bob", ("MQ", "Q1B"), move_gate(3, 3)),
        Gate("bob", ("CB",), HADAMARD),
        Gate("bob", ("CB", "MB"), xor_gate(2)),
        Gate("alice", ("MB", "CA"), xor_gate(2)),   # CA := a xor b'  (the coin)
        Gate("alice", ("CA", "MB"), xor_gate(2)),   # MB := a         (the reveal)
        Gate("alice", ("Q2A", "MQ"), move_gate(3, 3)),
        Gate("bob", ("MQ", "Q2B"), move_gate(3, 3)),
        Gate("bob", ("MB", "RA"), move_gate(2, 2)),
        Gate("bob", ("RA", "Q1B", "Q2B"),
             controlled_gate((2,), _commit_verify_branch, 9)),
    ]

    def bob_outcome(d):
        cb, q1, q2, ra = d
        if 3 * q1 + q2 != 0:
            return ABORT
        return format_bob_label((1,), (ra ^ cb,))

    return Circuit(
        name="qutrit-commitment-cf", regs=regs, gates=gates,
        alice_outcome=lambda d: format_x_label((d[0],)),
        bob_outcome=bob_outcome,
        n=1, k=1,
    )


def qutrit_commitment_cf() -> InteractiveProtocol:
    def alice(arena, ch):
        a = ch.bit()
        q1, q2 = arena.alloc_joint((3, 3), phi_vec(a))
        yield Message.quantum(q1)
        msg = yield None
        if msg is None or msg.kind != "c":
            return ABORT
        bp = msg.value
        yield Message.classical(a)
        yield Message.quantum(q2)
        return a ^ bp

    def bob(arena, ch):
        msg = yield None
        if msg is None or msg.kind != "q":
            return ABORT
        q1 = msg.reg
        bp = ch.bit()
        yield Message.classical(bp)
        msg_a = yield None
        if msg_a is None or msg_a.kind != "c":
            return ABORT
        a = msg_a.value
        msg_q = yield None
        if msg_q is None or msg_q.kind != "q":
            return ABORT
        proj = np.outer(phi_vec(a), phi_vec(a).conj())
        outcome, _ = arena.measure((q1, msg_q.reg), [proj])
        if outcome != 0:
            return ABORT
        return a ^ bp

    return InteractiveProtocol(name="qutrit-commitment-cf", alice=alice, bob=bob,
                               first="alice", message_dims=(3, 2, 2, 3),
                               circuit=qutrit_commitment_cf_circuit())


# ---------------------------------------------------------------------------
# registry, outcome labeling, bundled data
# ---------------------------------------------------------------------------

_BUILDERS = {
    "announce-coin": announce_coin,
    "qutrit-ot": qutrit_ot,
    "cf-from-ot": cf_from_ot,
    "qutrit-commitment-cf": qutrit_commitment_cf,
}


def build(name: str) -> InteractiveProtocol:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown protocol {name!r}; choose from {NAMES}") from None


def build_spec(name: str) -> model.ProtocolSpec:
    return model.compile_with_deferred_measurement(build(name))


def outcome_labels(name: str, result) -> tuple[str, str]:
    """Map an interactive run's raw outputs to spec outcome labels."""
    a, b = result.outputs["alice"], result.outputs["bob"]
    if name == "qutrit-ot":
        la = ABORT if a == ABORT else format_x_label(a)
        lb = ABORT if b == ABORT else format_bob_label((b[0] + 1,), (b[1],))
    elif name in ("announce-coin", "cf-from-ot", "qutrit-commitment-cf"):
        la = ABORT if a == ABORT else format_x_label((a,))
        lb = ABORT if b == ABORT else format_bob_label((1,), (b,))
    else:
        raise KeyError(name)
    return la, lb


def interactive_label_distribution(name: str) -> dict[tuple[str, str], float]:
    """Exact outcome-label law of the interactive protocol (branching executor)."""
    proto = build(name)
    return otcore.exact_distribution(proto, key=lambda res: outcome_labels(name, res))


def data_dir() -> Path:
    override = os.environ.get("OTLAB_DATA_DIR")
    if override:
        return Path(override)
    return Path(__file__).parent / "data"


def load_bundled(name: str) -> model.ProtocolSpec:
    path = data_dir() / f"{name}.json"
    if not path.exists():
        raise FileNotFoundError(f"no bundled spec {name!r} under {data_dir()}")
    return model.load_spec(path)


def write_bundled_specs(directory: Path | str | None = None) -> list[Path]:
    directory = Path(directory) if directory else Path(__file__).parent / "data"
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name in NAMES:
        spec = build_spec(name)
        path = directory / f"{name}.json"
        model.save_spec(spec, path)
        written.append(path)
    return written


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else None
    for path in write_bundled_specs(target):
        print(path)
