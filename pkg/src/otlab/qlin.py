"""Dense complex linear algebra for small multipartite quantum systems.

Everything here works on plain complex numpy arrays.  ``PureState``,
``DensityMatrix`` and ``SubsystemLayout`` are thin validated wrappers used at
module boundaries where the invariants matter; the functional core accepts
both wrappers and raw arrays.

Basis convention: computational basis, row-major composite index
``i = sum_j digit_j * prod(dims[j+1:])`` (numpy C order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Tolerance tiers used throughout the package.
ATOL_STATE = 1e-12     # state norms, traces
ATOL_OPERATOR = 1e-10  # unitarity, idempotence, PSD eigenvalue floors
ATOL_DERIVED = 1e-9    # derived equalities between independently computed values


class DimensionError(ValueError):
    """Shapes or subsystem layouts do not match."""


class RankError(ValueError):
    """Vectors fail a linear-independence requirement."""


class QlinValidationError(ValueError):
    """An operator or state violates a structural invariant."""


def as_complex(x) -> np.ndarray:
    return np.asarray(x, dtype=complex)


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conjugate(np.transpose(m))


def is_hermitian(m: np.ndarray, atol: float = ATOL_STATE) -> bool:
    m = as_complex(m)
    return m.shape[0] == m.shape[1] and np.max(np.abs(m - dagger(m))) <= atol


def is_unitary(m: np.ndarray, atol: float = ATOL_OPERATOR) -> bool:
    m = as_complex(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return np.max(np.abs(dagger(m) @ m - np.eye(m.shape[0]))) <= atol


def min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(as_complex(m)).min())


def basis_state(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def basis_index(digits: Sequence[int], dims: Sequence[int]) -> int:
    """Composite row-major index of a digit tuple."""
    idx = 0
    for d, dim in zip(digits, dims):
        if not 0 <= d < dim:
            raise DimensionError(f"digit {d} out of range for dim {dim}")
        idx = idx * dim + d
    return idx


def index_digits(index: int, dims: Sequence[int]) -> tuple[int, ...]:
    digits = []
    for dim in reversed(dims):
        digits.append(index % dim)
        index //= dim
    return tuple(reversed(digits))


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of the given vectors or matrices, left to right."""
    out = as_complex(ops[0])
    for op in ops[1:]:
        out = np.kron(out, as_complex(op))
    return out


@dataclass(frozen=True)
class SubsystemLayout:
    """Ordered factor dimensions of a tensor-product space."""

    dims: tuple[int, ...]

    def __init__(self, dims: Iterable[int]):
        dims = tuple(int(d) for d in dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"invalid layout {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def check(self, dim: int) -> None:
        if self.total != dim:
            raise DimensionError(
                f"layout {self.dims} has total {self.total}, expected {dim}")


def _layout_dims(layout) -> tuple[int, ...]:
    if isinstance(layout, SubsystemLayout):
        return layout.dims
    return tuple(int(d) for d in layout)


@dataclass(frozen=True)
class PureState:
    """Normalized complex state vector."""

    amplitudes: np.ndarray

    def __init__(self, amplitudes):
        amps = as_complex(amplitudes).reshape(-1).copy()
        if not np.all(np.isfinite(amps.view(float))):
            raise QlinValidationError("non-finite amplitudes")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > ATOL_STATE:
            raise QlinValidationError(f"state norm^2 = {norm2}, not 1 within {ATOL_STATE}")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, np.conjugate(self.amplitudes))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian PSD matrix with unit trace (or trace <= 1 when subnormalized)."""

    matrix: np.ndarray
    subnormalized: bool = field(default=False)

    def __init__(self, matrix, subnormalized: bool = False):
        m = as_complex(matrix).copy()
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"density matrix must be square, got {m.shape}")
        if not np.all(np.isfinite(m.view(float))):
            raise QlinValidationError("non-finite entries")
        if np.max(np.abs(m - dagger(m))) > ATOL_STATE:
            raise QlinValidationError("not Hermitian within tolerance")
        lo = min_eig(m)
        if lo < -ATOL_OPERATOR:
            raise QlinValidationError(f"min eigenvalue {lo} below -{ATOL_OPERATOR}")
        tr = float(np.trace(m).real)
        if subnormalized:
            if tr > 1.0 + ATOL_STATE:
                raise QlinValidationError(f"trace {tr} exceeds 1 for subnormalized matrix")
        elif abs(tr - 1.0) > ATOL_STATE:
            raise QlinValidationError(f"trace {tr}, expected 1 within {ATOL_STATE}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "subnormalized", subnormalized)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def pure_density(state: PureState | np.ndarray) -> DensityMatrix:
    v = state.amplitudes if isinstance(state, PureState) else as_complex(state)
    return DensityMatrix(np.outer(v, v.conj()))


def partial_trace(rho, layout, keep) -> np.ndarray | DensityMatrix:
    """Trace out every factor not listed in ``keep``; kept factors stay ordered.

    Accepts a ``DensityMatrix`` (returns one) or a raw matrix (returns one).
    """
    wrapped = isinstance(rho, DensityMatrix)
    m = rho.matrix if wrapped else as_complex(rho)
    dims = list(_layout_dims(layout))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError("partial_trace needs a square matrix")
    if int(np.prod(dims)) != m.shape[0]:
        raise DimensionError(f"layout {dims} inconsistent with dim {m.shape[0]}")
    keep = sorted(set(int(i) for i in keep))
    if any(i < 0 or i >= len(dims) for i in keep):
        raise DimensionError(f"keep indices {keep} out of range")
    drop = [i for i in range(len(dims)) if i not in keep]
    t = m.reshape(dims + dims)
    for i in sorted(drop, reverse=True):
        t = np.trace(t, axis1=i, axis2=i + len(dims))
        dims.pop(i)
    d_out = int(np.prod(dims)) if dims else 1
    out = t.reshape(d_out, d_out)
    if wrapped:
        return DensityMatrix(out, subnormalized=rho.subnormalized)
    return out


def trace_norm(m: np.ndarray) -> float:
    """Sum of singular values."""
    m = as_complex(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"trace_norm needs a square matrix, got {m.shape}")
    return float(np.linalg.svd(m, compute_uv=False).sum())


def apply_on_factors(vec: np.ndarray, dims: Sequence[int], op: np.ndarray,
                     on: Sequence[int]) -> np.ndarray:
    """Apply ``op`` to the listed tensor factors of a state vector.

    ``op`` acts on the factors in the order given by ``on``.
    """
    dims = list(dims)
    on = list(on)
    n = len(dims)
    k = len(on)
    if on == list(range(k)):
        if k == n:
            return op @ vec
        t = op @ vec.reshape(op.shape[1], -1)
        return t.reshape(-1)
    rest = [i for i in range(n) if i not in on]
    perm = on + rest
    head = 1
    for i in on:
        head *= dims[i]
    t = vec.reshape(dims).transpose(perm).reshape(head, -1)
    t = op @ t
    inv = [0] * n
    for pos, axis in enumerate(perm):
        inv[axis] = pos
    t = t.reshape([dims[i] for i in perm]).transpose(inv)
    return np.ascontiguousarray(t).reshape(-1)


def embed_operator(op: np.ndarray, layout, on: Sequence[int]) -> np.ndarray:
    """Dense matrix acting as ``op`` on the listed factors and identity elsewhere."""
    dims = list(_layout_dims(layout))
    on = list(on)
    op = as_complex(op)
    d_on = int(np.prod([dims[i] for i in on]))
    if op.shape != (d_on, d_on):
        raise DimensionError(f"operator shape {op.shape} does not match factors {on}")
    rest = [i for i in range(len(dims)) if i not in on]
    full = np.kron(op, np.eye(int(np.prod([dims[i] for i in rest])) if rest else 1))
    # full acts in factor order on + rest; permute back to the layout order
    order = on + rest
    n = len(dims)
    t = full.reshape([dims[i] for i in order] * 2)
    inv = np.argsort(order)
    t = np.transpose(t, list(inv) + [n + i for i in inv])
    d = int(np.prod(dims))
    return t.reshape(d, d)


def apply_unitary(state: PureState, u: np.ndarray, layout, on: Sequence[int]) -> PureState:
    """Apply a local unitary to the given factors of a pure state."""
    u = as_complex(u)
    if not is_unitary(u, ATOL_OPERATOR):
        raise QlinValidationError("operator is not unitary within tolerance")
    dims = _layout_dims(layout)
    if int(np.prod(dims)) != state.dim:
        raise DimensionError(f"layout {dims} inconsistent with state dim {state.dim}")
    out = apply_on_factors(state.amplitudes, dims, u, on)
    return PureState(out)


def projector_span(vectors: Sequence[PureState | np.ndarray]) -> np.ndarray:
    """Hermitian idempotent projector onto the span of the given states.

    The vectors must be linearly independent (Gram-matrix eigenvalue cutoff
    1e-10), otherwise a ``RankError`` is raised.
    """
    cols = [v.amplitudes if isinstance(v, PureState) else as_complex(v).reshape(-1)
            for v in vectors]
    a = np.stack(cols, axis=1)
    gram = dagger(a) @ a
    eig = np.linalg.eigvalsh(gram)
    if eig.min() <= ATOL_OPERATOR:
        raise RankError(f"vectors are linearly dependent (min Gram eigenvalue {eig.min()})")
    q, _ = np.linalg.qr(a)
    p = q @ dagger(q)
    return 0.5 * (p + dagger(p))


def haar_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state vector."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r).copy()
    ph /= np.abs(ph)
    return q * ph
