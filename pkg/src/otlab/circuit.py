"""Register-level circuit descriptions of two-party protocols.

A ``Circuit`` lists owned registers (alice / bob / msg), a gate sequence where
each gate is applied by one party to registers that party may touch (own plus
message), and final classical outcome maps reading each party's registers in
the computational basis.  Measurements are deferred: any mid-protocol readout
is realized by a basis-rotation gate plus the final outcome map, with abort
encoded as designated basis states.

The model module compiles circuits into round-structured protocol specs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .qlin import (DimensionError, as_complex, basis_index, dagger,
                   index_digits, is_unitary)


@dataclass(frozen=True)
class Reg:
    name: str
    dim: int
    owner: str  # "alice" | "bob" | "msg"

    def __post_init__(self):
        if self.owner not in ("alice", "bob", "msg"):
            raise ValueError(f"unknown owner {self.owner!r}")
        if self.dim < 2:
            raise DimensionError(f"register {self.name} needs dim >= 2")


@dataclass(frozen=True)
class Gate:
    party: str                # "alice" | "bob"
    regs: tuple[str, ...]     # registers in the order the matrix acts on
    matrix: np.ndarray

    def __post_init__(self):
        if self.party not in ("alice", "bob"):
            raise ValueError(f"unknown party {self.party!r}")


@dataclass
class Circuit:
    name: str
    regs: list[Reg]
    gates: list[Gate]
    alice_outcome: Callable[[tuple[int, ...]], str]  # digits of alice regs -> label
    bob_outcome: Callable[[tuple[int, ...]], str]    # digits of bob regs -> label
    n: int
    k: int

    def reg(self, name: str) -> Reg:
        for r in self.regs:
            if r.name == name:
                return r
        raise KeyError(name)

    def owned(self, owner: str) -> list[Reg]:
        return [r for r in self.regs if r.owner == owner]

    def validate(self) -> None:
        names = [r.name for r in self.regs]
        if len(set(names)) != len(names):
            raise ValueError("duplicate register names")
        for gate in self.gates:
            d = 1
            for rn in gate.regs:
                r = self.reg(rn)
                if r.owner not in (gate.party, "msg"):
                    raise ValueError(
                        f"{gate.party} gate touches {r.owner} register {rn}")
                d *= r.dim
            m = as_complex(gate.matrix)
            if m.shape != (d, d):
                raise DimensionError(
                    f"gate on {gate.regs} has shape {m.shape}, expected {(d, d)}")
            if not is_unitary(m):
                raise ValueError(f"gate on {gate.regs} is not unitary")


# ---------------------------------------------------------------------------
# gate builders
# ---------------------------------------------------------------------------

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)


def permutation_gate(dims: Sequence[int], perm: Callable[[tuple[int, ...]], Sequence[int]]) -> np.ndarray:
    """Unitary permuting computational basis states digit-tuple-wise."""
    total = int(np.prod(dims))
    m = np.zeros((total, total), dtype=complex)
    seen = set()
    for i in range(total):
        digits = index_digits(i, dims)
        j = basis_index(tuple(perm(digits)), dims)
        if j in seen:
            raise ValueError("perm is not a bijection")
        seen.add(j)
        m[j, i] = 1.0
    return m


def move_gate(dim_src: int, dim_dst: int) -> np.ndarray:
    """Move register contents: (s, 0) <-> (0, s) for s below both dims.

    Acts on (src, dst); honest use has the destination in state 0 and the
    source populated only on levels shared by both registers.
    """
    mobile = min(dim_src, dim_dst)

    def perm(digits):
        s, d = digits
        if d == 0 and 0 < s < mobile:
            return (0, s)
        if s == 0 and 0 < d < mobile:
            return (d, 0)
        return (s, d)

    return permutation_gate((dim_src, dim_dst), perm)


def xor_gate(dim: int = 2) -> np.ndarray:
    """(c, t) -> (c, t xor c) on a pair of same-dim registers (addition mod dim)."""
    return permutation_gate((dim, dim), lambda d: (d[0], (d[1] + d[0]) % dim))


def controlled_gate(control_dims: Sequence[int],
                    branch: Callable[[tuple[int, ...]], np.ndarray],
                    target_dim: int) -> np.ndarray:
    """Block unitary applying ``branch(control digits)`` to the target space."""
    control_dims = list(control_dims)
    nc = int(np.prod(control_dims))
    m = np.zeros((nc * target_dim, nc * target_dim), dtype=complex)
    for c in range(nc):
        digits = index_digits(c, control_dims)
        blk = as_complex(branch(digits))
        if blk.shape != (target_dim, target_dim):
            raise DimensionError("branch block has wrong shape")
        m[c * target_dim:(c + 1) * target_dim, c * target_dim:(c + 1) * target_dim] = blk
    return m


def unitary_with_columns(columns: dict[int, np.ndarray], dim: int) -> np.ndarray:
    """Unitary whose listed columns are the given orthonormal vectors.

    Remaining columns are completed deterministically by Gram-Schmidt over the
    computational basis, so regenerated artifacts are bit-identical.
    """
    fixed = sorted(columns)
    vecs = [as_complex(columns[i]).reshape(-1) for i in fixed]
    for i, v in enumerate(vecs):
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise ValueError("column vectors must be normalized")
        for w in vecs[:i]:
            if abs(np.vdot(w, v)) > 1e-10:
                raise ValueError("column vectors must be orthonormal")
    basis = list(vecs)
    completion = []
    for i in range(dim):
        cand = np.zeros(dim, dtype=complex)
        cand[i] = 1.0
        for b in basis:
            cand = cand - np.vdot(b, cand) * b
        norm = np.linalg.norm(cand)
        if norm > 1e-7:
            cand = cand / norm
            basis.append(cand)
            completion.append(cand)
    if len(basis) != dim:
        raise ValueError("failed to complete the basis")
    u = np.zeros((dim, dim), dtype=complex)
    free = [i for i in range(dim) if i not in columns]
    for i, col in zip(fixed, vecs):
        u[:, i] = col
    for i, col in zip(free, completion):
        u[:, i] = col
    return u


def rotation_to_basis_states(targets: dict[int, np.ndarray], dim: int) -> np.ndarray:
    """Unitary sending each given vector to the given basis state index.

    Everything orthogonal to the given vectors lands in the remaining basis
    states (deterministic completion).
    """
    u = unitary_with_columns(targets, dim)
    return dagger(u)
