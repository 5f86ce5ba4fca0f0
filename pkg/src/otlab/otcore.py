"""Interactive protocol execution: the qutrit oblivious-transfer protocol, the
classical OT reductions, coin flipping from OT, and the adversary harness.

Party programs are generators over a shared quantum ``Arena``.  A program
sends with ``yield Message...`` (acked with None) and receives with
``msg = yield None``.  All randomness flows through a ``ChoiceSource`` so a
run can be sampled (numpy RNG) or branched exhaustively with exact
probabilities (scripted choices), removing sampling noise from exactness
claims.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Generator, Iterable, Sequence

import numpy as np

from . import qlin
from .circuit import Circuit
from .qlin import as_complex, basis_index, dagger

ABORT = "abort"


class ProtocolError(RuntimeError):
    """The message schedule deadlocked or a program misbehaved."""


class ProtocolAbort(Exception):
    """Raised by a program to abort the run (recorded, not propagated)."""


# ---------------------------------------------------------------------------
# choice sources
# ---------------------------------------------------------------------------

class NeedBranch(Exception):
    def __init__(self, n_options: int):
        self.n_options = n_options
        super().__init__(f"script exhausted with {n_options} options pending")


class DeadBranch(Exception):
    """The scripted branch has probability (numerically) zero."""


class RandomChoices:
    """Samples choices from a numpy Generator."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def bit(self) -> int:
        return 1 if self.rng.random() < 0.5 else 0

    def select(self, probs: Sequence[float]) -> int:
        total = 0.0
        for p in probs:
            if p > 0.0:
                total += p
        r = self.rng.random() * total
        acc = 0.0
        for i, p in enumerate(probs):
            if p > 0.0:
                acc += p
                if r < acc:
                    return i
        return len(probs) - 1


class ScriptedChoices:
    """Replays a fixed decision tape, accumulating the branch probability."""

    def __init__(self, script: Sequence[int], prob_floor: float = 1e-15):
        self.script = tuple(script)
        self.pos = 0
        self.weight = 1.0
        self.prob_floor = prob_floor

    def select(self, probs: Sequence[float]) -> int:
        if self.pos >= len(self.script):
            raise NeedBranch(len(probs))
        i = self.script[self.pos]
        self.pos += 1
        p = float(probs[i])
        if p < self.prob_floor:
            raise DeadBranch
        self.weight *= p
        return i

    def bit(self) -> int:
        return self.select((0.5, 0.5))


# ---------------------------------------------------------------------------
# the quantum arena
# ---------------------------------------------------------------------------

class Arena:
    """Joint state vector over dynamically allocated registers."""

    def __init__(self, choices):
        self.choices = choices
        self.dims: list[int] = []
        self.state = np.ones(1, dtype=complex)

    def alloc(self, dim: int, amplitudes=None) -> int:
        return self.alloc_joint((dim,), amplitudes)[0]

    def alloc_joint(self, dims: Sequence[int], amplitudes=None) -> tuple[int, ...]:
        dims = tuple(int(d) for d in dims)
        total = int(np.prod(dims))
        if amplitudes is None:
            vec = np.zeros(total, dtype=complex)
            vec[0] = 1.0
        else:
            vec = as_complex(amplitudes).reshape(-1)
            if vec.shape[0] != total:
                raise qlin.DimensionError("amplitudes do not match register dims")
        first = len(self.dims)
        self.dims.extend(dims)
        self.state = np.kron(self.state, vec)
        return tuple(range(first, first + len(dims)))

    def apply(self, op: np.ndarray, regs: Sequence[int]) -> None:
        self.state = qlin.apply_on_factors(self.state, self.dims, as_complex(op), regs)

    def _joint_probs_computational(self, regs: Sequence[int]) -> np.ndarray:
        regs = list(regs)
        rest = [i for i in range(len(self.dims)) if i not in regs]
        t = self.state.reshape(self.dims).transpose(regs + rest)
        head = int(np.prod([self.dims[r] for r in regs]))
        t = t.reshape(head, -1)
        return np.sum(np.abs(t) ** 2, axis=1)

    def distribution(self, regs: Sequence[int], operators=None) -> list[float]:
        """Exact outcome probabilities without collapsing or consuming choices."""
        regs = list(regs)
        if operators is None:
            return [float(p) for p in self._joint_probs_computational(regs)]
        probs = []
        for op in operators:
            w = qlin.apply_on_factors(self.state, self.dims, as_complex(op), regs)
            probs.append(float(np.vdot(self.state, w).real))
        probs.append(max(0.0, 1.0 - sum(probs)))
        return probs

    def measure(self, regs: Sequence[int], operators=None) -> tuple[int, float]:
        """Measure the listed registers; returns (outcome index, probability).

        With ``operators`` (a POVM prefix), the leftover weight is one extra
        outcome with index ``len(operators)``.  Without, measures the
        computational basis of the joint register.  The state collapses.
        """
        regs = list(regs)
        if operators is None:
            probs = self._joint_probs_computational(regs)
            outcome = self.choices.select(probs)
            rest = [i for i in range(len(self.dims)) if i not in regs]
            perm = regs + rest
            head_dims = [self.dims[r] for r in regs]
            t = self.state.reshape(self.dims).transpose(perm)
            flat = t.reshape(int(np.prod(head_dims)), -1)
            new = np.zeros_like(flat)
            new[outcome] = flat[outcome] / np.sqrt(probs[outcome])
            inv = [0] * len(perm)
            for pos, axis in enumerate(perm):
                inv[axis] = pos
            t = new.reshape([self.dims[i] for i in perm]).transpose(inv)
            self.state = np.ascontiguousarray(t).reshape(-1)
            return outcome, float(probs[outcome])

        probs = self.distribution(regs, operators)
        outcome = self.choices.select(probs)
        if outcome < len(operators):
            kraus = _operator_sqrt(as_complex(operators[outcome]))
        else:
            rest_op = np.eye(operators[0].shape[0], dtype=complex) - sum(
                as_complex(op) for op in operators)
            kraus = _operator_sqrt(rest_op)
        post = qlin.apply_on_factors(self.state, self.dims, kraus, regs)
        self.state = post / np.sqrt(probs[outcome])
        return outcome, float(probs[outcome])

    def reduced_density(self, regs: Sequence[int]) -> np.ndarray:
        rho = np.outer(self.state, self.state.conj())
        return qlin.partial_trace(rho, self.dims, regs)

    def snapshot(self) -> np.ndarray:
        return self.state.copy()


_SQRT_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _operator_sqrt(op: np.ndarray) -> np.ndarray:
    cached = _SQRT_CACHE.get(id(op))
    if cached is not None and cached[0] is op:
        return cached[1]
    if np.max(np.abs(op @ op - op)) < 1e-12:
        root = op  # projectors are their own square root
    else:
        w, v = np.linalg.eigh(op)
        w = np.clip(w, 0.0, None)
        root = (v * np.sqrt(w)) @ dagger(v)
    if len(_SQRT_CACHE) > 256:
        _SQRT_CACHE.clear()
    _SQRT_CACHE[id(op)] = (op, root)  # keep a reference so the id stays valid
    return root


# ---------------------------------------------------------------------------
# messages, protocols, runner
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Message:
    kind: str              # "c" (classical) or "q" (quantum)
    value: int | None = None
    reg: int | None = None

    @classmethod
    def classical(cls, value: int) -> "Message":
        return cls(kind="c", value=int(value))

    @classmethod
    def quantum(cls, reg: int) -> "Message":
        return cls(kind="q", reg=reg)


Program = Callable[[Arena, object], Generator]


@dataclass
class InteractiveProtocol:
    """Two honest party programs plus scheduling and compilation metadata."""

    name: str
    alice: Program
    bob: Program
    first: str
    message_dims: tuple[int | None, ...]  # alphabet size per message; None = unbounded
    circuit: Circuit | None = None


@dataclass
class InputOt:
    """Oblivious transfer with inputs: program factories keyed by the inputs."""

    name: str
    alice: Callable[[int, int], Program]
    bob: Callable[[int], Program]
    first: str
    message_dims: tuple[int | None, ...]


@dataclass
class RunResult:
    outputs: dict[str, object]
    transcript: list[dict]
    arena: Arena

    @property
    def alice(self):
        return self.outputs["alice"]

    @property
    def bob(self):
        return self.outputs["bob"]

    def aborted(self, party: str) -> bool:
        return self.outputs[party] == ABORT


def _other(name: str) -> str:
    return "bob" if name == "alice" else "alice"


def run_protocol(protocol, choices, alice: Program | None = None,
                 bob: Program | None = None, record_states: bool = False,
                 max_turns: int = 200) -> RunResult:
    """Drive both party programs to completion under strict turn alternation."""
    arena = Arena(choices)
    programs = {"alice": alice or protocol.alice, "bob": bob or protocol.bob}
    gens = {name: prog(arena, choices) for name, prog in programs.items()}
    outputs: dict[str, object] = {}
    inbox: dict[str, deque] = {"alice": deque(), "bob": deque()}
    mode: dict[str, str] = {}
    transcript: list[dict] = []

    def record(actor: str, msg: Message) -> None:
        entry: dict = {"actor": actor, "kind": msg.kind}
        if msg.kind == "c":
            entry["value"] = msg.value
        else:
            entry["dim"] = arena.dims[msg.reg]
        if record_states:
            entry["state_after"] = arena.snapshot()
        transcript.append(entry)

    def absorb(name: str, out, done: bool) -> None:
        if done:
            outputs[name] = out
            mode[name] = "done"
        elif isinstance(out, Message):
            inbox[_other(name)].append(out)
            record(name, out)
            mode[name] = "sent"
        elif out is None:
            mode[name] = "recv"
        else:
            raise ProtocolError(f"{name} yielded {out!r}, expected Message or None")

    def step(name: str, value) -> None:
        try:
            out = gens[name].send(value)
            absorb(name, out, False)
        except StopIteration as stop:
            absorb(name, stop.value, True)
        except ProtocolAbort:
            absorb(name, ABORT, True)

    order = [protocol.first, _other(protocol.first)]
    for name in order:
        step(name, None)

    for _ in range(max_turns):
        if len(outputs) == 2:
            break
        progressed = False
        for name in order:
            if mode[name] == "done":
                continue
            if mode[name] == "sent":
                step(name, None)  # ack the send
                progressed = True
            elif mode[name] == "recv":
                if inbox[name]:
                    step(name, inbox[name].popleft())
                    progressed = True
                elif mode[_other(name)] == "done":
                    step(name, None)  # final tick: peer is gone
                    progressed = True
        if not progressed:
            raise ProtocolError(f"protocol {protocol.name!r} deadlocked")
    else:
        raise ProtocolError(f"protocol {protocol.name!r} exceeded {max_turns} turns")

    return RunResult(outputs=outputs, transcript=transcript, arena=arena)


def exact_distribution(protocol, alice: Program | None = None,
                       bob: Program | None = None,
                       key: Callable[[RunResult], object] | None = None) -> dict:
    """Exact outcome law by branching over every random choice in the run.

    Each path is re-executed with a scripted decision tape; probabilities are
    exact products of branch probabilities (coin weights and Born weights).
    """
    if key is None:
        key = lambda res: (res.outputs["alice"], res.outputs["bob"])
    totals: dict = {}
    stack: list[tuple[int, ...]] = [()]
    while stack:
        script = stack.pop()
        choices = ScriptedChoices(script)
        try:
            res = run_protocol(protocol, choices, alice=alice, bob=bob)
        except NeedBranch as nb:
            stack.extend(script + (i,) for i in range(nb.n_options))
            continue
        except DeadBranch:
            continue
        k = key(res)
        totals[k] = totals.get(k, 0.0) + choices.weight
    return totals


def exact_event_probability(protocol, event: Callable[[RunResult], bool],
                            alice: Program | None = None,
                            bob: Program | None = None) -> float:
    dist = exact_distribution(protocol, alice=alice, bob=bob,
                              key=lambda res: bool(event(res)))
    return dist.get(True, 0.0)


# ---------------------------------------------------------------------------
# outcomes
# ---------------------------------------------------------------------------

@dataclass
class OtOutcome:
    alice_out: tuple[int, int] | str   # (x0, x1) or "abort"
    bob_out: tuple[int, int] | str     # (b, y) or "abort"
    transcript: list = field(default_factory=list)


@dataclass
class CfOutcome:
    alice_coin: int | str   # bit or "abort"
    bob_coin: int | str


# ---------------------------------------------------------------------------
# the qutrit random-OT protocol
# ---------------------------------------------------------------------------

def phi_vec(b: int, sign: int = +1) -> np.ndarray:
    """(|bb> + sign |22>)/sqrt(2) on two qutrits."""
    v = np.zeros(9, dtype=complex)
    v[basis_index((b, b), (3, 3))] = 1.0 / math.sqrt(2.0)
    v[basis_index((2, 2), (3, 3))] = sign / math.sqrt(2.0)
    return v


def _freeze(m: np.ndarray) -> np.ndarray:
    m.flags.writeable = False
    return m


_PHASE = {(x0, x1): _freeze(np.diag([(-1.0) ** x0, (-1.0) ** x1, 1.0]).astype(complex))
          for x0 in (0, 1) for x1 in (0, 1)}
_BOB_MEAS = {b: [_freeze(np.outer(phi_vec(b, s), phi_vec(b, s).conj()))
                 for s in (+1, -1)] for b in (0, 1)}


def phase_unitary(x0: int, x1: int) -> np.ndarray:
    """|a> -> (-1)^{x_a} |a> on a qutrit, with the third phase fixed to +1."""
    return _PHASE[(x0, x1)]


def qutrit_bob_measurement(b: int) -> list[np.ndarray]:
    """Projectors onto phi_b and phi'_b; the leftover is the abort outcome."""
    return _BOB_MEAS[b]


def qutrit_ot(pin_b: int | None = None, pin_x0: int | None = None,
              pin_x1: int | None = None) -> InteractiveProtocol:
    """The two-message qutrit random-OT protocol, with optionally pinned coins."""

    def bob(arena, ch):
        b = pin_b if pin_b is not None else ch.bit()
        q1, q2 = arena.alloc_joint((3, 3), phi_vec(b))
        yield Message.quantum(q1)
        msg = yield None
        if msg is None or msg.kind != "q":
            return ABORT
        outcome, _ = arena.measure((msg.reg, q2), qutrit_bob_measurement(b))
        if outcome == 2:
            return ABORT
        return (b, outcome)

    def alice(arena, ch):
        msg = yield None
        if msg is None or msg.kind != "q":
            return ABORT
        x0 = pin_x0 if pin_x0 is not None else ch.bit()
        x1 = pin_x1 if pin_x1 is not None else ch.bit()
        arena.apply(phase_unitary(x0, x1), (msg.reg,))
        yield Message.quantum(msg.reg)
        return (x0, x1)

    return InteractiveProtocol(name="qutrit-ot", alice=alice, bob=bob,
                               first="bob", message_dims=(3, 3))


def qutrit_ot_run(b: int, x0: int, x1: int, rng: np.random.Generator,
                  record_states: bool = True) -> OtOutcome:
    """One exact-probability run of the qutrit protocol with pinned inputs."""
    proto = qutrit_ot(pin_b=b, pin_x0=x0, pin_x1=x1)
    res = run_protocol(proto, RandomChoices(rng), record_states=record_states)
    return OtOutcome(alice_out=res.alice, bob_out=res.bob, transcript=res.transcript)


def qutrit_ot_as_input_ot() -> InputOt:
    """The qutrit protocol viewed as OT with inputs (coins pinned to inputs)."""
    return InputOt(
        name="qutrit-ot-inputs",
        alice=lambda x0, x1: qutrit_ot(pin_x0=x0, pin_x1=x1).alice,
        bob=lambda b: qutrit_ot(pin_b=b).bob,
        first="bob",
        message_dims=(3, 3),
    )


def dealer_random_ot() -> InteractiveProtocol:
    """Classical random-OT used for exhaustive reduction checks.

    Bob announces his index and Alice answers with that bit, so it offers no
    privacy; the reduction algebra only needs honest correctness.
    """

    def bob(arena, ch):
        b = ch.bit()
        yield Message.classical(b)
        msg = yield None
        if msg is None or msg.kind != "c":
            return ABORT
        return (b, msg.value)

    def alice(arena, ch):
        msg = yield None
        if msg is None or msg.kind != "c":
            return ABORT
        b = msg.value
        x0, x1 = ch.bit(), ch.bit()
        yield Message.classical(x1 if b else x0)
        return (x0, x1)

    return InteractiveProtocol(name="dealer-random-ot", alice=alice, bob=bob,
                               first="bob", message_dims=(2, 2))


# ---------------------------------------------------------------------------
# classical reductions between OT flavors
# ---------------------------------------------------------------------------

def random_ot_from_ot(ot: InputOt) -> InteractiveProtocol:
    """Random-OT from input-OT: both parties pick their inputs uniformly."""

    def alice(arena, ch):
        x0, x1 = ch.bit(), ch.bit()
        out = yield from ot.alice(x0, x1)(arena, ch)
        if out == ABORT:
            return ABORT
        return (x0, x1)

    def bob(arena, ch):
        b = ch.bit()
        out = yield from ot.bob(b)(arena, ch)
        if out == ABORT:
            return ABORT
        _, y = out
        return (b, y)

    return InteractiveProtocol(name=f"random-ot[{ot.name}]", alice=alice, bob=bob,
                               first=ot.first, message_dims=ot.message_dims)


def ot_protocol_from_random_ot(rot: InteractiveProtocol) -> InputOt:
    """Input-OT from random-OT via the index-flip and masking construction."""

    def alice_factory(x0_in: int, x1_in: int) -> Program:
        def prog(arena, ch):
            out = yield from rot.alice(arena, ch)
            if out == ABORT:
                return ABORT
            x0, x1 = out
            msg = yield None
            if msg is None or msg.kind != "c":
                return ABORT
            r = msg.value
            xp = (x0, x1) if r == 0 else (x1, x0)   # x'_c = x_{c xor r}
            s0, s1 = xp[0] ^ x0_in, xp[1] ^ x1_in
            yield Message.classical(2 * s0 + s1)
            return (x0_in, x1_in)
        return prog

    def bob_factory(b_in: int) -> Program:
        def prog(arena, ch):
            out = yield from rot.bob(arena, ch)
            if out == ABORT:
                return ABORT
            b, y = out
            yield Message.classical(b ^ b_in)
            msg = yield None
            if msg is None or msg.kind != "c":
                return ABORT
            s0, s1 = divmod(msg.value, 2)
            return (b_in, y ^ (s1 if b_in else s0))
        return prog

    return InputOt(name=f"input-ot[{rot.name}]", alice=alice_factory,
                   bob=bob_factory, first=rot.first,
                   message_dims=rot.message_dims + (2, 4))


def input_ot_protocol(ot: InputOt, x0: int, x1: int, b: int) -> InteractiveProtocol:
    return InteractiveProtocol(name=ot.name, alice=ot.alice(x0, x1), bob=ot.bob(b),
                               first=ot.first, message_dims=ot.message_dims)


def ot_from_random_ot(rot: InteractiveProtocol, x0: int, x1: int, b: int,
                      rng: np.random.Generator) -> OtOutcome:
    """One run of the input-OT built on a random-OT subroutine."""
    ot = ot_protocol_from_random_ot(rot)
    res = run_protocol(input_ot_protocol(ot, x0, x1, b), RandomChoices(rng))
    return OtOutcome(alice_out=res.alice, bob_out=res.bob, transcript=res.transcript)


# ---------------------------------------------------------------------------
# coin flipping from random-OT
# ---------------------------------------------------------------------------

def cf_from_ot_protocol(rot: InteractiveProtocol) -> InteractiveProtocol:
    """Coin flipping on top of random-OT: coin = c xor b, checked against x_b."""

    def alice(arena, ch):
        out = yield from rot.alice(arena, ch)
        if out == ABORT:
            return ABORT
        x0, x1 = out
        c = ch.bit()
        yield Message.classical(c)
        msg = yield None
        if msg is None or msg.kind != "c":
            return ABORT
        b, y = divmod(msg.value, 2)
        if y != (x1 if b else x0):
            return ABORT
        return c ^ b

    def bob(arena, ch):
        out = yield from rot.bob(arena, ch)
        if out == ABORT:
            return ABORT
        b, y = out
        msg = yield None
        if msg is None or msg.kind != "c":
            return ABORT
        c = msg.value
        yield Message.classical(2 * b + y)
        return c ^ b

    return InteractiveProtocol(name=f"cf-from-ot[{rot.name}]", alice=alice, bob=bob,
                               first=rot.first, message_dims=rot.message_dims + (2, 4))


def cf_from_ot(rot: InteractiveProtocol, rng: np.random.Generator) -> CfOutcome:
    """One run of the CF-from-OT construction."""
    res = run_protocol(cf_from_ot_protocol(rot), RandomChoices(rng))
    return CfOutcome(alice_coin=res.alice, bob_coin=res.bob)


# ---------------------------------------------------------------------------
# adversary harness
# ---------------------------------------------------------------------------

@dataclass
class AdversaryReport:
    """What a scripted adversary declares at the end of a run."""

    guess: dict = field(default_factory=dict)
    output: object = None


@dataclass
class AdversaryRun:
    honest_output: object
    adversary: AdversaryReport | str
    aborted: dict[str, bool]
    transcript: list


def scripted_adversary_run(protocol: InteractiveProtocol, adversary: Program,
                           side: str, choices) -> AdversaryRun:
    """Run the protocol with one side replaced by an adversary program.

    The adversary returns an ``AdversaryReport``; the result carries the
    honest party's output, per-party abort flags, and the declared guesses.
    """
    if side not in ("alice", "bob"):
        raise ValueError(f"unknown side {side!r}")
    if not hasattr(choices, "select"):
        choices = RandomChoices(choices)
    kwargs = {side: adversary}
    res = run_protocol(protocol, choices, **kwargs)
    honest = _other(side)
    adv_out = res.outputs[side]
    aborted = {
        honest: res.outputs[honest] == ABORT,
        side: adv_out == ABORT,
    }
    return AdversaryRun(honest_output=res.outputs[honest], adversary=adv_out,
                        aborted=aborted, transcript=res.transcript)
