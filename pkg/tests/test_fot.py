import itertools
import math

import numpy as np
import pytest
from scipy.stats import chi2

from otlab import fot, protocols
from otlab.bounds import DomainError
from otlab.fot import (CfPrimitive, alice_forcing_montecarlo,
                       bob_forcing_montecarlo, fot_bound_vs_lower,
                       fot_cheat_bounds, fot_run, sample_subset)


class TapeRng:
    """Deterministic stand-in for a Generator, driven by a value tape."""

    def __init__(self, tape):
        self.tape = list(tape)

    def integers(self, lo, hi=None):
        if hi is None:
            lo, hi = 0, lo
        v = self.tape.pop(0)
        assert lo <= v < hi
        return v

    def random(self):
        return self.tape.pop(0)


class TestSubsetSampling:
    def test_exactly_uniform_over_draw_space(self):
        n, k = 4, 2
        counts = {}
        # enumerate all Fisher-Yates draw tapes: j0 in [0,4), j1 in [1,4)
        for j0 in range(0, 4):
            for j1 in range(1, 4):
                subset = sample_subset(n, k, TapeRng([j0, j1]))
                counts[subset] = counts.get(subset, 0) + 1
        assert len(counts) == math.comb(n, k)
        assert len(set(counts.values())) == 1  # every subset equally often

    def test_subsets_sorted_one_based(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            s = sample_subset(5, 3, rng)
            assert s == tuple(sorted(s)) and all(1 <= i <= 5 for i in s)


class TestCfPrimitive:
    def test_domain(self):
        with pytest.raises(DomainError):
            CfPrimitive.ideal(0.3)

    def test_ideal_flip(self):
        rng = np.random.default_rng(1)
        vals = {CfPrimitive.ideal().flip(rng) for _ in range(64)}
        assert vals == {0, 1}

    def test_simulated_flip(self):
        cf = CfPrimitive.simulated(protocols.qutrit_commitment_cf(),
                                   protocols.COMMITMENT_CF_MAX_CHEAT)
        rng = np.random.default_rng(2)
        vals = {cf.flip(rng) for _ in range(64)}
        assert vals == {0, 1}


class TestFotRun:
    def test_exact_uniformity_ideal_cf(self):
        # enumerate every random draw of a (2, 1) run with the ideal primitive:
        # subset draw j0 in [0,2), one coin bit, one free bit
        counts = {}
        for j0, coin, free in itertools.product(range(2), range(2), range(2)):
            run = fot_run(2, 1, CfPrimitive.ideal(), TapeRng([j0, coin, free]))
            assert run.x_b == tuple(run.x[i - 1] for i in run.b)
            counts[(run.b, run.x)] = counts.get((run.b, run.x), 0) + 1
        assert len(counts) == 8
        assert len(set(counts.values())) == 1

    def test_boundary_n_equals_k(self):
        rng = np.random.default_rng(3)
        run = fot_run(3, 3, CfPrimitive.ideal(), rng)
        assert run.b == (1, 2, 3)
        assert run.x == run.x_b

    def test_simulated_cf_uniform_chi_square(self):
        rng = np.random.default_rng(4)
        cf = CfPrimitive.simulated(protocols.qutrit_commitment_cf(),
                                   protocols.COMMITMENT_CF_MAX_CHEAT)
        trials = 20_000
        counts = {}
        for _ in range(trials):
            run = fot_run(3, 2, cf, rng)
            assert not run.aborted
            counts[(run.b, run.x)] = counts.get((run.b, run.x), 0) + 1
        cells = math.comb(3, 2) * 2 ** 3
        assert len(counts) == cells
        expected = trials / cells
        stat = sum((c - expected) ** 2 / expected for c in counts.values())
        assert chi2.sf(stat, cells - 1) > 0.01

    def test_marginals(self):
        rng = np.random.default_rng(5)
        subsets = {}
        xs = {}
        trials = 12_000
        for _ in range(trials):
            run = fot_run(3, 1, CfPrimitive.ideal(), rng)
            subsets[run.b] = subsets.get(run.b, 0) + 1
            xs[run.x] = xs.get(run.x, 0) + 1
        stat = sum((c - trials / 3) ** 2 / (trials / 3) for c in subsets.values())
        assert chi2.sf(stat, 2) > 0.01
        stat = sum((c - trials / 8) ** 2 / (trials / 8) for c in xs.values())
        assert chi2.sf(stat, 7) > 0.01

    def test_domain(self):
        with pytest.raises(DomainError):
            fot_run(2, 3, CfPrimitive.ideal(), np.random.default_rng(0))


class TestCheatBounds:
    def test_corollary_value(self):
        for gamma in (1e-6, 0.01):
            c = (1.0 + gamma) / math.sqrt(2.0)
            a_max, b_max = fot_cheat_bounds(2, 1, CfPrimitive(max_cheat=c))
            assert abs(b_max - (1.0 + gamma) / math.sqrt(8.0)) < 1e-12

    def test_broken_cf(self):
        a_max, b_max = fot_cheat_bounds(3, 2, CfPrimitive(max_cheat=1.0))
        assert a_max == 1.0 / math.comb(3, 2)
        assert b_max == 2.0 ** (2 - 3)

    def test_commitment_cf_values(self):
        a_max, b_max = fot_cheat_bounds(
            2, 1, CfPrimitive(max_cheat=protocols.COMMITMENT_CF_MAX_CHEAT))
        assert abs(a_max - 3.0 / 8.0) < 1e-12
        assert abs(b_max - 3.0 / 8.0) < 1e-12


class TestBoundVsLower:
    def test_ideal_bias_is_optimal(self):
        for k in range(1, 7):
            rep = fot_bound_vs_lower(k + 1, k, CfPrimitive(max_cheat=1 / math.sqrt(2)))
            assert abs(rep["bias"] - math.sqrt(2.0) ** k) < 1e-12
            assert abs(rep["bias"] - rep["bias_floor"]) < 1e-12

    def test_commitment_bias(self):
        rep = fot_bound_vs_lower(2, 1, CfPrimitive(max_cheat=0.75))
        assert abs(rep["bias"] - 1.5) < 1e-12

    def test_product_floor_for_realizable_c_grid(self):
        # coins below the 1/sqrt(2) forcing floor do not exist, so the product
        # floor is checked over the realizable per-coin range, tight at the
        # left endpoint
        for c in np.linspace(1.0 / math.sqrt(2.0), 1.0, 21):
            for n, k in [(2, 1), (4, 2), (5, 5)]:
                rep = fot_bound_vs_lower(n, k, CfPrimitive(max_cheat=float(c)))
                assert rep["product"] >= rep["joint_floor"] - 1e-12
        rep = fot_bound_vs_lower(3, 2, CfPrimitive(max_cheat=1.0 / math.sqrt(2.0)))
        assert abs(rep["product"] - rep["joint_floor"]) < 1e-12

    def test_bias_monotone_in_c(self):
        biases = [fot_bound_vs_lower(3, 2, CfPrimitive(max_cheat=float(c)))["bias"]
                  for c in np.linspace(0.5, 1.0, 40)]
        assert all(b2 >= b1 - 1e-12 for b1, b2 in zip(biases, biases[1:]))


class TestForcingMonteCarlo:
    def test_bob_forcing_within_bound(self):
        rng = np.random.default_rng(6)
        cf = CfPrimitive(max_cheat=0.75)
        stats = bob_forcing_montecarlo(2, 1, cf, (0, 0), trials=100_000, rng=rng)
        assert stats.within_bound(3.0)

    def test_alice_forcing_within_bound(self):
        rng = np.random.default_rng(7)
        cf = CfPrimitive(max_cheat=0.75)
        stats = alice_forcing_montecarlo(2, 1, cf, (1,), (0,), trials=100_000, rng=rng)
        assert stats.within_bound(3.0)

    def test_broken_cf_forcer_hits_bound(self):
        rng = np.random.default_rng(8)
        cf = CfPrimitive(max_cheat=1.0)
        stats = bob_forcing_montecarlo(2, 2, cf, (1, 0), trials=50_000, rng=rng)
        # with fully broken coins Bob forces any target whose bits are all shared
        assert abs(stats.rate - 1.0) < 1e-12
        assert stats.bound == 1.0
