"""Scale machinery, tail inverses, landscape sampling, blob export."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from remclock.gaussians import gaussian_tail
from remclock.landscape import (CapacityError, LandscapeParams, ScaleSpec,
                                beta_critical, classify_scale, compute_scales,
                                constant_landscape, derive_rn_from_epsilon,
                                export_landscape, g_n, h_n, hall_surrogate,
                                import_landscape, sample_landscape, solve_Bn,
                                validate_scale_identity)

from oracles import solve_Bn_bisect

MASTER = 1380272417


def _params(n, beta, eps, seed=MASTER):
    return LandscapeParams(n=n, beta=beta, scale=ScaleSpec.from_epsilon(eps),
                           master_seed=seed)


def _alpha_half_params(n, seed=MASTER):
    return _params(n, 2.0 * beta_critical(0.5), 0.5, seed)


class TestParamsValidation:
    def test_beta_zero_rejected(self):
        with pytest.raises(ValueError):
            LandscapeParams(n=8, beta=0.0, scale=ScaleSpec.from_epsilon(0.5),
                            master_seed=1)

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            LandscapeParams(n=1, beta=1.0, scale=ScaleSpec.from_epsilon(0.5),
                            master_seed=1)

    def test_explicit_rn_must_exceed_one(self):
        with pytest.raises(ValueError):
            ScaleSpec.from_rn(0.5)

    def test_scale_spec_exactly_one_field(self):
        with pytest.raises(ValueError):
            ScaleSpec(epsilon=0.5, m_n=4)
        with pytest.raises(ValueError):
            ScaleSpec()

    def test_scale_identity_within_tolerance(self):
        s = compute_scales(16, 1.5, ScaleSpec.from_epsilon(0.5))
        assert validate_scale_identity(s, rtol=1e-10) <= 1e-10


class TestSolveBn:
    def test_b10_matches_bisection_oracle(self):
        B, A = solve_Bn(10.0)
        want = solve_Bn_bisect(10.0)
        assert B == pytest.approx(want, rel=1e-12)
        assert A == pytest.approx(1.0 / want, rel=1e-12)

    def test_residual_identity(self):
        for b in (10.0, 1e4, 2.0 ** 20, 1e80):
            B, _ = solve_Bn(b)
            resid = b * math.exp(-0.5 * B * B) / (B * math.sqrt(2 * math.pi))
            assert resid == pytest.approx(1.0, rel=1e-12)

    def test_monotone_in_b(self):
        bs = np.geomspace(5.0, 1e30, 40)
        roots = np.array([solve_Bn(b)[0] for b in bs])
        assert np.all(np.diff(roots) > 0)

    def test_b_2_20_near_surrogate(self):
        b = 2.0 ** 20
        B, A = solve_Bn(b)
        assert abs(B - hall_surrogate(b)) <= 5.0 * A

    def test_nonpositive_b_rejected(self):
        with pytest.raises(ValueError):
            solve_Bn(0.0)
        with pytest.raises(ValueError):
            solve_Bn(-4.0)

    def test_tiny_b_still_solved(self):
        # phi(B)/B ranges over all of (0, inf), so a root exists even for b < 1
        B, _ = solve_Bn(0.1)
        assert 0.1 * math.exp(-0.5 * B * B) / (B * math.sqrt(2 * math.pi)) == pytest.approx(1.0, rel=1e-10)


class TestTailPair:
    def test_h_of_one_is_one(self):
        p = _alpha_half_params(16)
        assert h_n(1.0, p) == pytest.approx(1.0, rel=1e-10)

    def test_inverse_round_trip_at_two(self):
        p = _alpha_half_params(16)
        assert g_n(h_n(2.0, p), p) == pytest.approx(2.0, rel=1e-8)

    def test_inverse_pair_on_grid(self):
        p = _alpha_half_params(12)
        s = p.scales()
        vs = np.geomspace(math.exp(-s.log_rn), math.exp(s.log_rn), 100)
        got = g_n(h_n(vs, p), p)
        assert np.allclose(got, vs, rtol=1e-8, atol=0.0)

    def test_g_saturates_at_zero(self):
        p = _alpha_half_params(12)
        b_n = p.scales().b_n
        assert g_n(b_n, p) == 0.0
        assert g_n(2.0 * b_n, p) == 0.0

    def test_domain_errors(self):
        p = _alpha_half_params(12)
        with pytest.raises(ValueError):
            h_n(-1.0, p)
        with pytest.raises(ValueError):
            g_n(-0.5, p)

    def test_power_law_defect_shrinks(self):
        # h_n(v) = v^{-alpha_n}(1 + o(1)); the defect at v = 2 shrinks with n
        v = 2.0
        defects = []
        for n in (32, 64):
            p = _alpha_half_params(n)
            alpha_n = p.scales().alpha_n
            defects.append(abs(h_n(v, p) - v ** -alpha_n))
        assert defects[1] < defects[0]
        assert defects[1] < 0.05

    def test_power_law_trend_to_one(self):
        # h_n(v) v^{alpha_n} -> 1, and the gap is monotone along the n sweep.
        # v = 1 is the exact fixed point (gap is rounding noise), so it only
        # enters the band check below.
        for v in (0.5, 2.0, 5.0):
            gaps = []
            for n in (32, 64, 128, 256):
                p = _alpha_half_params(n)
                ratio = h_n(v, p) * v ** p.scales().alpha_n
                gaps.append(abs(ratio - 1.0))
            assert all(a >= b for a, b in zip(gaps, gaps[1:])), (v, gaps)
        p = _alpha_half_params(256)
        for v in (0.5, 1.0, 2.0, 5.0):
            assert 0.9 <= h_n(v, p) * v ** p.scales().alpha_n <= 1.1

    def test_g_power_envelope_extreme_scale(self):
        # g_n(u) <= 2 u^{-1/alpha} on the extreme scale at beta = 2 beta_c
        n = 64
        p = _params(n, 2.0 * beta_critical(1.0), 1.0)
        alpha = 0.5
        for u in np.geomspace(1.0, p.scales().b_n * 0.999, 60):
            assert g_n(u, p) <= 2.0 * u ** (-1.0 / alpha)


class TestClassification:
    def test_half_epsilon_is_intermediate(self):
        c = classify_scale(_params(20, 1.5, 0.5))
        assert c.kind == "Intermediate"
        assert c.epsilon == pytest.approx(0.5)
        assert c.epsilon_prime is None

    def test_log2n_scale_is_short(self):
        n = 256
        p = LandscapeParams(n=n, beta=1.0,
                            scale=ScaleSpec.from_mn(int(math.log2(n))),
                            master_seed=1)
        assert classify_scale(p).kind == "Short"

    def test_full_mn_is_extreme(self):
        c = classify_scale(LandscapeParams(n=16, beta=2.0,
                                           scale=ScaleSpec.from_mn(16),
                                           master_seed=1))
        assert c.kind == "Extreme"
        assert c.epsilon_prime == pytest.approx(1.0)

    def test_alpha_eps_formula(self):
        c = classify_scale(_params(20, 1.3, 0.5))
        assert c.alpha_eps == pytest.approx(math.sqrt(2.0 * 0.5 * math.log(2)) / 1.3, rel=1e-14)

    def test_alpha_n_at_critical_beta_below_one(self):
        p = _params(24, beta_critical(1.0), 1.0)
        assert classify_scale(p).alpha_n <= 1.0


class TestDeriveRn:
    def test_defining_identity_eps1_n16(self):
        n, beta = 16, 2.0
        rn = derive_rn_from_epsilon(n, beta, 1.0)
        b_n = 2.0 ** n
        assert b_n * gaussian_tail(math.log(rn) / (beta * math.sqrt(n))) == pytest.approx(1.0, rel=1e-8)

    def test_log_rn_growth_rate(self):
        # log r_n / (beta beta_c(eps) n) -> 1; the gap shrinks along the sweep
        beta = 1.7
        bc = beta_critical(0.5)
        gaps = []
        for n in (20, 40, 80, 160):
            s = compute_scales(n, beta, ScaleSpec.from_epsilon(0.5))
            gaps.append(abs(s.log_rn / (beta * bc * n) - 1.0))
        assert all(a >= b for a, b in zip(gaps, gaps[1:])), gaps
        assert gaps[-1] < 0.1


class TestSampling:
    def test_determinism(self):
        p = _alpha_half_params(10)
        assert np.array_equal(sample_landscape(p).log_tau,
                              sample_landscape(p).log_tau)

    def test_envs_differ(self):
        p = _alpha_half_params(10)
        assert not np.array_equal(sample_landscape(p, env=0).log_tau,
                                  sample_landscape(p, env=1).log_tau)

    def test_gaussian_moments(self):
        p = _alpha_half_params(14)
        land = sample_landscape(p)
        h = land.log_tau / (-p.beta * math.sqrt(p.n))
        m = 2.0 ** p.n
        assert abs(h.mean()) <= 5.0 / math.sqrt(m)
        assert abs(h.var() - 1.0) <= 5.0 * math.sqrt(2.0 / m)

    def test_tail_fraction_matches_one_over_bn(self):
        p = _alpha_half_params(16)
        s = p.scales()
        land = sample_landscape(p)
        count = int((land.log_tau >= s.log_rn).sum())
        mean = 2.0 ** p.n / s.b_n
        assert abs(count - mean) <= 4.0 * math.sqrt(mean)

    def test_on_demand_matches_dense(self):
        p = _alpha_half_params(10)
        dense = sample_landscape(p, storage="dense")
        lazy = sample_landscape(p, storage="on_demand")
        v = np.arange(2 ** 10, dtype=np.int64)
        assert np.array_equal(dense.log_tau_at(v), lazy.log_tau_at(v))

    def test_dense_capacity_error(self):
        p = _alpha_half_params(31)
        with pytest.raises(CapacityError):
            sample_landscape(p, storage="dense")

    def test_unknown_storage_rejected(self):
        with pytest.raises(ValueError):
            sample_landscape(_alpha_half_params(8), storage="sparse")

    def test_activity_weights_bounded(self):
        # exp(-u/gamma) must stay in [0,1] even when log gamma is extreme
        p = _params(16, 3.0, 1.0)
        g = sample_landscape(p).exp_neg_u_over_gamma(1.0)
        assert np.all((g >= 0.0) & (g <= 1.0))

    def test_constant_landscape_hook(self):
        land = constant_landscape(6, 0.0)
        assert np.all(land.log_tau == 0.0)
        assert land.params is None


class TestBlobExport:
    def test_round_trip(self, tmp_path):
        p = _alpha_half_params(10)
        land = sample_landscape(p)
        blob = tmp_path / "env.blob"
        sidecar = export_landscape(land, blob)
        back = import_landscape(blob)
        assert np.array_equal(back.log_tau, land.log_tau)
        assert back.n == land.n
        assert back.params.master_seed == MASTER
        assert sidecar.exists()

    def test_sidecar_contents(self, tmp_path):
        p = _alpha_half_params(10)
        land = sample_landscape(p)
        sidecar = export_landscape(land, tmp_path / "env.blob")
        doc = json.loads(sidecar.read_text())
        assert doc["n"] == 10
        assert doc["log_r_n"] == pytest.approx(p.scales().log_rn)
        assert doc["kind"] == "Intermediate"

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.blob"
        path.write_bytes(b"NOTABLOB" + b"\x00" * 64)
        with pytest.raises(ValueError):
            import_landscape(path)


@given(st.integers(min_value=2, max_value=28),
       st.floats(min_value=0.2, max_value=4.0))
@settings(deadline=None, max_examples=60)
def test_scale_identity_property(n, beta):
    s = compute_scales(n, beta, ScaleSpec.from_epsilon(0.5))
    assert validate_scale_identity(s) <= 1e-10


@given(st.floats(min_value=0.05, max_value=1.0),
       st.integers(min_value=4, max_value=64))
@settings(deadline=None, max_examples=60)
def test_classification_total(eps, n):
    p = LandscapeParams(n=n, beta=1.0, scale=ScaleSpec.from_epsilon(eps),
                        master_seed=3)
    c = classify_scale(p)
    assert c.kind in ("Short", "Intermediate", "Extreme")
    assert c.alpha_n >= 0.0
