"""Exact walk laws on the n-cube, uniformization depth, mixing bounds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from remclock.clock_dynamics import sample_skeleton
from remclock.hypercube_walk import (distance_chain, far_pair_sum,
                                     hamming_distance, parity_transition,
                                     return_sum, step, theta_n,
                                     transition_prob,
                                     two_time_uniformization_defect, tv_bound)

from oracles import brute_transition, exact_transition_fraction

MASTER = 1380272417


class TestDistanceChain:
    def test_rows_sum_to_one(self):
        for n in (3, 8, 20):
            P = distance_chain(n)
            assert np.allclose(P.sum(axis=1), 1.0, atol=1e-15)

    def test_spectrum(self):
        # eigenvalues of the lumped chain are 1 - 2j/n, each simple
        n = 12
        evs = np.sort(np.linalg.eigvals(distance_chain(n)).real)
        want = np.sort([1.0 - 2.0 * j / n for j in range(n + 1)])
        assert np.allclose(evs, want, atol=1e-10)


class TestTransitionProb:
    def test_trivial_cases(self):
        assert transition_prob(5, 0, 1) == 0.0
        assert transition_prob(5, 1, 1) == pytest.approx(1.0 / 5.0, abs=1e-15)
        assert transition_prob(5, 0, 0) == 1.0

    def test_two_step_return(self):
        for n in (4, 9, 16):
            assert transition_prob(n, 0, 2) == pytest.approx(1.0 / n, rel=1e-13)

    def test_n4_d2_l3_vs_brute(self):
        got = transition_prob(4, 2, 3)
        M = brute_transition(4, 3)
        y = 0b0011
        assert got == pytest.approx(M[0, y], rel=1e-12)

    def test_matches_dense_matrix_small_n(self):
        for n in (2, 3, 5):
            for l in (0, 1, 4, 9, 12):
                M = brute_transition(n, l)
                for d in range(n + 1):
                    y = (1 << d) - 1
                    assert transition_prob(n, d, l) == pytest.approx(
                        M[0, y], abs=1e-12), (n, d, l)

    def test_matches_exact_rationals(self):
        for n, d, l in ((4, 2, 6), (5, 3, 7), (6, 0, 8)):
            want = float(exact_transition_fraction(n, d, l))
            assert transition_prob(n, d, l) == pytest.approx(want, rel=1e-13)

    def test_row_sum_identity_deep(self):
        # sum over distance classes of C(n,d) p^l(d) is 1 for large l, n
        n = 20
        for l in (50, 125, 200):
            total = sum(math.comb(n, d) * transition_prob(n, d, l)
                        for d in range(n + 1))
            assert total == pytest.approx(1.0, abs=1e-10)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            transition_prob(5, 6, 1)
        with pytest.raises(ValueError):
            transition_prob(5, 1, -1)


@given(st.integers(min_value=3, max_value=12), st.integers(min_value=0, max_value=30))
@settings(deadline=None, max_examples=80)
def test_parity_zeros_property(n, l):
    # mass at distance d after l steps vanishes unless d = l mod 2
    for d in range(n + 1):
        if (d - l) % 2 != 0:
            assert transition_prob(n, d, l) == 0.0


class TestThetaN:
    def test_value_at_ten(self):
        assert theta_n(10) == 84

    def test_even_and_bounded(self):
        for n in range(3, 65):
            th = theta_n(n)
            assert th % 2 == 0
            assert th <= 2 * n * n

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            theta_n(2)


class TestUniformizationDefect:
    def test_defect_below_capacity(self):
        for n in (8, 10, 12):
            d = two_time_uniformization_defect(n, 0, 0, (1 << n) - 1)
            assert d <= 2.0 ** -n, (n, d)

    def test_defect_i_independent_decay(self):
        # the bound keeps holding at later offsets
        n = 8
        for i in (0, 5, 17):
            assert two_time_uniformization_defect(n, i, 0, 3) <= 2.0 ** -n

    def test_capacity_guard(self):
        with pytest.raises(ValueError):
            two_time_uniformization_defect(16, 0, 0, 1)


class TestParityChain:
    def test_self_loop(self):
        n = 9
        assert parity_transition(n, 0, 0, 1) == pytest.approx(1.0 / n, rel=1e-13)

    def test_distance_two(self):
        n = 9
        assert parity_transition(n, 0, 3, 1) == pytest.approx(2.0 / n ** 2, rel=1e-13)

    def test_odd_distance_rejected(self):
        with pytest.raises(ValueError):
            parity_transition(9, 0, 1, 1)


class TestTvBound:
    def test_theta_half_bound(self):
        for n in range(8, 15):
            assert tv_bound(n, theta_n(n) // 2) <= 2.0 ** -n

    def test_decreasing_in_m(self):
        vals = [tv_bound(10, m) for m in range(0, 200, 10)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_deep_n_no_overflow(self):
        v = tv_bound(2000, 0)
        assert math.isfinite(v) or v == math.inf
        assert tv_bound(2000, 10 ** 7) >= 0.0


class TestLaggedSums:
    def test_zero_horizon(self):
        assert return_sum(8, 0) == 0.0
        assert far_pair_sum(8, 0, 4) == 0.0

    def test_return_sum_scaling(self):
        # n^2 * sum stays bounded across the sweep
        for n in range(8, 15, 2):
            assert n ** 2 * return_sum(n, n) <= 10.0

    def test_far_pair_decay(self):
        # at fixed horizon the sum decays with the pair distance
        n = 10
        vals = [far_pair_sum(n, n, d) for d in (2, 4, 6)]
        assert vals[0] > vals[1] > vals[2]

    def test_far_pair_log_linear(self):
        # log of the d-indexed sums falls roughly linearly (slope < 0)
        n = 12
        ds = np.array([2, 4, 6, 8])
        logs = np.log([far_pair_sum(n, n, int(d)) for d in ds])
        slope = np.polyfit(ds, logs, 1)[0]
        assert slope < 0.0

    def test_horizon_guard(self):
        with pytest.raises(ValueError):
            return_sum(8, 65)


class TestEmpirical:
    def test_step_flips_one_coordinate(self, rng):
        n = 11
        v = 0
        for _ in range(200):
            w = step(v, n, rng)
            assert hamming_distance(v, w) == 1
            v = w

    def test_flip_choice_uniform(self):
        # chi-square on which coordinate each skeleton step flips
        n = 8
        steps = 10 ** 6
        skel = sample_skeleton(n, steps, MASTER, env=0, chain=0, start=0)
        flips = skel[1:] ^ skel[:-1]
        counts = np.bincount(np.log2(flips).astype(int), minlength=n)
        expected = steps / n
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        from scipy import stats
        assert stats.chi2.sf(chi2, n - 1) > 1e-4

    def test_two_step_return_frequency(self):
        # disjoint 2-step windows of one long skeleton are iid Bernoulli(1/n)
        n = 8
        steps = 10 ** 6
        skel = sample_skeleton(n, steps, MASTER, env=1, chain=0, start=0)
        eq = skel[2::2] == skel[0:-2:2]
        reps = eq.size
        p = 1.0 / n
        assert abs(eq.mean() - p) <= 5.0 * math.sqrt(p * (1 - p) / reps)

    def test_skeleton_law_matches_exact(self):
        # empirical distance histogram after l steps vs the lumped chain,
        # using disjoint windows of one long kernel-generated skeleton
        n = 8
        steps = 4 * 10 ** 6
        skel = sample_skeleton(n, steps, MASTER, env=2, chain=0, start=0)
        from scipy import stats
        for l in (2, 4):
            pos = skel[l::l] ^ skel[0:-l:l]
            dist = np.unpackbits(pos.astype(np.uint8)[:, None], axis=1).sum(axis=1)
            reps = dist.size
            counts = np.bincount(dist, minlength=n + 1)
            probs = np.array([math.comb(n, d) * transition_prob(n, d, l)
                              for d in range(n + 1)])
            live = probs > 0
            chi2 = float((((counts - reps * probs) ** 2)[live] / (reps * probs)[live]).sum())
            dof = int(live.sum()) - 1
            assert stats.chi2.sf(chi2, dof) > 1e-4, (l, chi2)
