"""Scalar bound algebra for oblivious-transfer and coin-flipping cheating probabilities.

Covers the cubic ``g`` and its inverse ``f``, the universal OT lower bound,
the CF product check, and the forcing-OT bound formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Below this point the closed form for f is abandoned for bisection; the
# radical goes complex for z < 2/27 and loses digits as z -> 0.
F_CLOSED_FORM_CUTOFF = 1e-6


class DomainError(ValueError):
    """Argument outside the function's mathematical domain."""


@dataclass(frozen=True)
class BoundSet:
    """A consistent collection of cheating-probability bounds for one setting."""

    a_ot: float | None = None
    b_ot: float | None = None
    a_cf: float | None = None
    b_cf: float | None = None
    epsilon: float | None = None
    n: int | None = None
    k: int | None = None
    gamma: float | None = None
    delta: float | None = None

    def __post_init__(self):
        for name in ("a_ot", "b_ot", "a_cf", "b_cf"):
            v = getattr(self, name)
            if v is not None and not 0.5 - 1e-12 <= v <= 1.0 + 1e-12:
                raise DomainError(f"{name}={v} outside [1/2, 1]")

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def g(x: float) -> float:
    """x * (2x - 1)^2 on [1/2, 1]; strictly increasing there."""
    if not 0.5 - 1e-12 <= x <= 1.0 + 1e-12:
        raise DomainError(f"g domain is [1/2, 1], got {x}")
    return x * (2.0 * x - 1.0) ** 2


def _f_closed(z: float) -> float:
    # Complex intermediates are expected for z < 2/27; the principal branches
    # land on the real root in [1/2, 1].
    w3 = 3.0 * math.sqrt(3.0) * np.sqrt(complex(27.0 * z * z - 2.0 * z)) + 27.0 * z - 1.0
    w = w3 ** (1.0 / 3.0)
    return float((w / 6.0 + 1.0 / (6.0 * w) + 1.0 / 3.0).real)


def _bisect_increasing(fn, lo: float, hi: float, target: float, tol: float = 1e-12) -> float:
    flo, fhi = fn(lo) - target, fn(hi) - target
    if flo > 0 or fhi < 0:
        raise DomainError(f"target {target} not bracketed on [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) - target <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def f(z: float, force_bisection: bool = False) -> float:
    """Inverse of ``g``, mapping [0, 1] onto [1/2, 1]; increasing.

    Uses the closed-form cube-root expression except very near zero, where
    bisection on ``g`` is numerically safer.
    """
    if not 0.0 - 1e-12 <= z <= 1.0 + 1e-12:
        raise DomainError(f"f domain is [0, 1], got {z}")
    z = min(max(z, 0.0), 1.0)
    if z == 0.0:
        return 0.5
    if z == 1.0:
        return 1.0
    if force_bisection or z < F_CLOSED_FORM_CUTOFF:
        return _bisect_increasing(g, 0.5, 1.0, z)
    return _f_closed(z)


def ot_lower_bound_epsilon() -> float:
    """Closed-form universal bias lower bound for 1-out-of-2 OT, about 0.0586."""
    return 0.5 * (math.sqrt(0.5 + 2.0 * math.sqrt(2.0)) - math.sqrt(0.5)) - 0.5


def ot_lower_bound_epsilon_bisection(tol: float = 1e-12) -> float:
    """The same bound computed as the root of x*f(x) = 1/2 on [1/2, 1]."""
    x = _bisect_increasing(lambda t: t * f(t), 0.5, 1.0, 0.5, tol)
    return x - 0.5


def bcf_upper_from_bot(b_ot: float) -> float:
    """Upper bound on the CF forcing probability implied by the OT guessing bound."""
    if not 0.0 - 1e-12 <= b_ot <= 1.0 + 1e-12:
        raise DomainError(f"b_ot must lie in [0, 1], got {b_ot}")
    return f(min(max(b_ot, 0.0), 1.0))


@dataclass(frozen=True)
class ProductCheck:
    passed: bool
    margin: float
    product: float


def kitaev_product_check(a: float, b: float, slack: float = 1e-9) -> ProductCheck:
    """Check A*B >= 1/2 (the coin-flipping product lower bound)."""
    product = a * b
    margin = product - 0.5
    return ProductCheck(passed=margin >= -slack, margin=margin, product=product)


def fot_lower(n: int, k: int) -> tuple[float, float]:
    """(honest joint outcome probability, minimum forcing bias) for k-of-n fOT."""
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    joint = 1.0 / (math.comb(n, k) * 2 ** n)
    return joint, math.sqrt(2.0) ** k


def fot_upper(n: int, k: int, gamma: float) -> tuple[float, float, float]:
    """(A bound, B bound, required per-coin delta) for the composed fOT protocol.

    The delta is the largest coin-flipping slack for which k coins at cheating
    probability 1/sqrt(2) + delta/2 still meet the target; solved by bisection
    on the monotone left-hand side.
    """
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    root2k = math.sqrt(2.0) ** k
    a_bound = root2k * (1.0 + gamma) / (math.comb(n, k) * 2 ** k)
    b_bound = root2k * (1.0 + gamma) / 2 ** n
    target = root2k * (1.0 + gamma) / 2 ** k

    def lhs(delta):
        return (1.0 / math.sqrt(2.0) + delta / 2.0) ** k

    hi = 2.0 * (1.0 - 1.0 / math.sqrt(2.0))  # delta at which the per-coin prob hits 1
    if lhs(hi) <= target:
        delta = hi
    else:
        delta = _bisect_increasing(lhs, 0.0, hi, target, tol=1e-12)
    return a_bound, b_bound, delta
