"""k-out-of-n forcing oblivious transfer built from coin-flipping subroutines,
with its cheating-bound accounting.

The coin-flipping slot accepts either an abstract per-coin forcing probability
(for bound arithmetic) or a concrete simulated protocol for end-to-end runs.
Per-coin instances are independent: fresh registers, fresh randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import otcore
from .bounds import DomainError, fot_lower
from .otcore import ABORT, InteractiveProtocol, RandomChoices, run_protocol


@dataclass
class CfPrimitive:
    """A coin-flipping subroutine slot.

    ``max_cheat`` is the largest probability with which either party can force
    either outcome of one coin; an optional interactive protocol makes the
    primitive executable.
    """

    max_cheat: float
    protocol: InteractiveProtocol | None = None

    def __post_init__(self):
        if not 0.5 - 1e-12 <= self.max_cheat <= 1.0 + 1e-12:
            raise DomainError(f"per-coin cheating probability {self.max_cheat} outside [1/2, 1]")

    @classmethod
    def ideal(cls, max_cheat: float = 0.5) -> "CfPrimitive":
        return cls(max_cheat=max_cheat)

    @classmethod
    def simulated(cls, protocol: InteractiveProtocol, max_cheat: float) -> "CfPrimitive":
        return cls(max_cheat=max_cheat, protocol=protocol)

    def flip(self, rng: np.random.Generator) -> int | str:
        """One honest coin; simulated protocols may abort."""
        if self.protocol is None:
            return int(rng.integers(0, 2))
        res = run_protocol(self.protocol, RandomChoices(rng))
        a, b = res.outputs["alice"], res.outputs["bob"]
        if a == ABORT or b == ABORT:
            return ABORT
        return int(a)


@dataclass
class FotRun:
    b: tuple[int, ...]                  # sorted 1-based index subset, Bob's output
    x_b: tuple[int, ...]
    x: tuple[int, ...]                  # Alice's n bits
    coin_transcripts: list = field(default_factory=list)
    aborted: bool = False


def sample_subset(n: int, k: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Uniform k-subset of {1..n} via a partial Fisher-Yates shuffle."""
    idx = list(range(1, n + 1))
    for i in range(k):
        j = int(rng.integers(i, n))
        idx[i], idx[j] = idx[j], idx[i]
    return tuple(sorted(idx[:k]))


def fot_run(n: int, k: int, cf: CfPrimitive, rng: np.random.Generator) -> FotRun:
    """One honest run: Bob samples the index set, k coins fix the shared bits,
    and Alice draws her remaining bits."""
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    subset = sample_subset(n, k, rng)
    coins = []
    transcripts = []
    for _ in range(k):
        c = cf.flip(rng)
        transcripts.append({"coin": c})
        if c == ABORT:
            return FotRun(b=subset, x_b=(), x=(), coin_transcripts=transcripts,
                          aborted=True)
        coins.append(c)
    x = [0] * n
    for i, c in zip(subset, coins):
        x[i - 1] = c
    for i in range(1, n + 1):
        if i not in subset:
            x[i - 1] = int(rng.integers(0, 2))
    return FotRun(b=subset, x_b=tuple(coins), x=tuple(x),
                  coin_transcripts=transcripts)


def fot_cheat_bounds(n: int, k: int, cf: CfPrimitive) -> tuple[float, float]:
    """(A_max, B_max): best forcing probabilities against the composition.

    The forcer wins every targeted coin independently with probability at most
    the per-coin cheat; the index set and the free bits stay uniform.
    """
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    ck = cf.max_cheat ** k
    return ck / math.comb(n, k), ck / 2 ** (n - k)


def fot_bound_vs_lower(n: int, k: int, cf: CfPrimitive) -> dict:
    """Compare the composition's bounds against the universal product floor."""
    a_max, b_max = fot_cheat_bounds(n, k, cf)
    joint_floor, bias_floor = fot_lower(n, k)
    bias = cf.max_cheat ** k * 2 ** k
    return {
        "n": n,
        "k": k,
        "per_coin_cheat": cf.max_cheat,
        "a_max": a_max,
        "b_max": b_max,
        "product": a_max * b_max,
        "joint_floor": joint_floor,
        "bias": bias,
        "bias_floor": bias_floor,
        "product_above_floor": a_max * b_max >= joint_floor - 1e-12,
    }


@dataclass
class ForcingTrialStats:
    successes: int
    trials: int
    bound: float

    @property
    def rate(self) -> float:
        return self.successes / self.trials

    @property
    def sigma(self) -> float:
        return math.sqrt(max(self.bound * (1.0 - self.bound), 1e-12) / self.trials)

    def within_bound(self, sigmas: float = 3.0) -> bool:
        return self.rate <= self.bound + sigmas * self.sigma


def bob_forcing_montecarlo(n: int, k: int, cf: CfPrimitive, target_x: tuple[int, ...],
                           trials: int, rng: np.random.Generator) -> ForcingTrialStats:
    """Bob attacks every coin (winning each with the per-coin probability) and
    needs Alice's free bits to land on the target as well."""
    if len(target_x) != n:
        raise DomainError("target must have n bits")
    _, b_max = fot_cheat_bounds(n, k, cf)
    wins = 0
    for _ in range(trials):
        subset = sample_subset(n, k, rng)
        ok = all(rng.random() < cf.max_cheat for _ in range(k))
        if not ok:
            continue
        free = [i for i in range(1, n + 1) if i not in subset]
        if all(int(rng.integers(0, 2)) == target_x[i - 1] for i in free):
            wins += 1
    return ForcingTrialStats(successes=wins, trials=trials, bound=b_max)


def alice_forcing_montecarlo(n: int, k: int, cf: CfPrimitive,
                             target_b: tuple[int, ...], target_xb: tuple[int, ...],
                             trials: int, rng: np.random.Generator) -> ForcingTrialStats:
    """Alice attacks the coins but cannot touch Bob's index set."""
    if len(target_b) != k or len(target_xb) != k:
        raise DomainError("target subset and bits must have k entries")
    a_max, _ = fot_cheat_bounds(n, k, cf)
    tgt = tuple(sorted(target_b))
    wins = 0
    for _ in range(trials):
        subset = sample_subset(n, k, rng)
        if subset != tgt:
            continue
        if all(rng.random() < cf.max_cheat for _ in range(k)):
            wins += 1
    return ForcingTrialStats(successes=wins, trials=trials, bound=a_max)
