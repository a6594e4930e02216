import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prising.estimator import PrivacyBudget, calibrate, pseudo_likelihood_value
from prising.graph import coupling_scaled_adjacency, generate_erdos_renyi, zero_coupling
from prising.ising import index_to_states
from prising.privacy_audit import (audit_density_ratio, audit_jacobian_ratio,
                                   audit_sensitivity, format_report, mc_privacy_smoke,
                                   write_audit_csv)

from .conftest import random_coupling

BETA_GRID = np.arange(0, 3.0001, 0.25)


def test_sensitivity_zero_coupling():
    r = audit_sensitivity(zero_coupling(4), [0, 1, 2])
    assert r.passed and r.worst_gap == 0.0 and r.bound == 0.0


def test_sensitivity_k2(k2):
    r = audit_sensitivity(k2, [0, 1, 2])
    assert r.passed
    assert r.bound == 2.0
    assert r.checked == 4 * 2 * 3
    # brute-force oracle over the 4 states and both flips
    worst = 0.0
    for idx in range(4):
        s = index_to_states(np.array([idx]), 2)[0]
        for j in range(2):
            t = s.copy()
            t[j] = -t[j]
            for x in (0, 1, 2):
                worst = max(worst, abs(pseudo_likelihood_value(k2, s, x)
                                       - pseudo_likelihood_value(k2, t, x)))
    assert r.worst_gap == pytest.approx(worst, abs=1e-15)


def test_sensitivity_sampled_er():
    J = coupling_scaled_adjacency(generate_erdos_renyi(10, 0.4, seed=2), 4.0)
    r = audit_sensitivity(J, [0.0, 0.5, 1.0, 2.0], mode="sampled", seed=1, samples=1000)
    assert r.passed and r.checked == 1000 * 4


def test_sensitivity_mode_errors(k2):
    with pytest.raises(ValueError):
        audit_sensitivity(zero_coupling(13), [0.0])
    with pytest.raises(ValueError):
        audit_sensitivity(k2, [0.0], mode="bogus")


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 8))
def test_sensitivity_exhaustive_random(seed, n):
    J = random_coupling(np.random.default_rng(seed), n, normalize=False)
    assert audit_sensitivity(J, BETA_GRID).passed


def test_jacobian_examples(k3_half):
    z = audit_jacobian_ratio(zero_coupling(3), PrivacyBudget(1.0), [0, 1])
    assert z.passed and z.worst_gap == 1.0
    r = audit_jacobian_ratio(k3_half, PrivacyBudget(1.0), [0, 0.5, 1, 2])
    assert r.passed and r.checked == 8 * 3 * 4
    assert r.worst_gap <= math.exp(0.5)
    assert r.bound == pytest.approx(math.exp(0.5))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(2, 8), eps=st.floats(0.1, 10))
def test_jacobian_passes_at_calibrated_regulariser(seed, n, eps):
    J = random_coupling(np.random.default_rng(seed), n, normalize=False)
    assert audit_jacobian_ratio(J, PrivacyBudget(eps), BETA_GRID).passed


def test_jacobian_fails_below_minimum(k3_half):
    budget = PrivacyBudget(1.0)
    d0 = calibrate(k3_half, budget).delta_min
    for cap in (0.0, d0 / 100):
        r = audit_jacobian_ratio(k3_half, budget, [0, 0.5, 1, 2], delta_cap=cap)
        assert not r.passed
        assert r.worst_gap > math.exp(0.5)


def test_density_laplace_k2(k2):
    r = audit_density_ratio(k2, PrivacyBudget(1.0), [0, 0.5, 1, 2, 5])
    assert r.passed and r.excluded == 0


def test_density_gaussian_inside_set(k3_half):
    r = audit_density_ratio(k3_half, PrivacyBudget(1.0, 0.05), [0, 0.5, 1, 2])
    assert r.passed and r.excluded == 0


def test_density_gaussian_outside_set_reported_not_failed(k3_half):
    budget = PrivacyBudget(1.0, 0.05)
    r = audit_density_ratio(k3_half, budget, [0.5, 50.0, 100.0])
    assert r.excluded > 0
    assert r.excluded_violations > 0
    assert r.passed
    assert "outside" in format_report(r)


def test_density_degenerate_noise():
    r = audit_density_ratio(zero_coupling(3), PrivacyBudget(1.0, 0.1), [0, 1])
    assert r.passed and r.worst_gap == 1.0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(2, 7), eps=st.floats(0.2, 5))
def test_density_laplace_random(seed, n, eps):
    J = random_coupling(np.random.default_rng(seed), n, normalize=False)
    assert audit_density_ratio(J, PrivacyBudget(eps), BETA_GRID).passed


def test_smoke_k3_gaussian(k3_half):
    r = mc_privacy_smoke(k3_half, [1, 1, 1], 0, PrivacyBudget(1.0, 1 / 3), seed=1)
    assert r.passed
    assert r.threshold_log == pytest.approx(1.0 + math.log(1.2))


def test_smoke_identical_inputs_consistent_with_zero(k3_half):
    min_count = 1000
    r = mc_privacy_smoke(k3_half, [1, -1, 1], None, PrivacyBudget(1.0), seed=2,
                         min_count=min_count)
    assert r.bins_used > 0
    assert abs(r.worst_log_ratio) <= 4 * math.sqrt(2 / min_count)


def test_smoke_zero_coupling():
    r = mc_privacy_smoke(zero_coupling(3), [1, 1, -1], 1, PrivacyBudget(1.0, 0.1), seed=3,
                         draws=10_000)
    # both outputs are a point mass at 0, so only the delta correction remains
    assert r.worst_log_ratio == pytest.approx(math.log(0.9), rel=1e-12)


def test_smoke_needs_draws(k3_half):
    with pytest.raises(ValueError):
        mc_privacy_smoke(k3_half, [1, 1, 1], 0, PrivacyBudget(1.0), draws=100)


def test_smoke_trend_in_epsilon(k3_half):
    worst = [mc_privacy_smoke(k3_half, [1, 1, 1], 0, PrivacyBudget(eps), seed=5).worst_log_ratio
             for eps in (0.5, 1.0, 2.0, 5.0)]
    assert all(a < b for a, b in zip(worst, worst[1:]))


def test_audit_csv(k2):
    reports = [audit_sensitivity(k2, [0, 1]), audit_jacobian_ratio(k2, PrivacyBudget(1), [0])]
    buf = io.StringIO()
    write_audit_csv(reports, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "audit_name,n,worst_gap,bound,pass"
    assert len(lines) == 3
    assert lines[1].startswith("sensitivity,2,") and lines[1].endswith(",true")
    assert all(len(line.split(",")) == 5 for line in lines)
