import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relay_dmt.cf import CfScenario, cf_outage_indicator, sample_cf
from relay_dmt.channel import RateSpec, SnrPoint, sample_channels
from relay_dmt.errors import RequiresMtGeMr
from relay_dmt.jeemas import SelectionPolicy, outage_indicator, select_path
from relay_dmt.montecarlo import (CfStrategy, FixedPathStrategy, JeemasStrategy, OutageEstimate,
                                  P2pStrategy, count_outages, estimate_outage, fit_exponent,
                                  snr_grid, sweep, sweep_and_fit, wilson_interval)
from relay_dmt.numerics import RngStream
from relay_dmt.topology import Path, RelayTopology

R1 = RateSpec.fixed(1.0)


def test_zero_rate_never_outage():
    est = estimate_outage(P2pStrategy(1, 1), SnrPoint(0.0), RateSpec.fixed(0.0), 10000, 1)
    assert est.p_hat == 0.0 and est.outage_events == 0


def test_scalar_closed_form():
    snr = SnrPoint(10.0)
    est = estimate_outage(P2pStrategy(1, 1), snr, R1, 10 ** 6, 2)
    exact = 1 - math.exp(-(2 ** 1 - 1) / snr.snr_linear)
    assert abs(est.p_hat - exact) <= 3 * est.stderr


def test_partition_independence():
    strat = JeemasStrategy(RelayTopology((2, 2, 2)), SelectionPolicy(m=1))
    grid = snr_grid(0, 10, 5)
    one = count_outages(strat, grid, R1, 50000, 3, workers=1)
    eight = count_outages(strat, grid, R1, 50000, 3, workers=8)
    small = count_outages(dataclasses.replace(strat, chunk=777), grid, R1, 50000, 3)
    assert np.array_equal(one, eight) and np.array_equal(one, small)


def test_jeemas_batch_matches_reference():
    t = RelayTopology((2, 3, 2))
    pol = SelectionPolicy("exhaustive", "fixed", 1)
    s = SnrPoint(5.0)
    rate = RateSpec.fixed(2.0)
    batch = JeemasStrategy(t, pol).outage_batch(4, 0, 300, [s], rate)[0]
    ref = [outage_indicator(select_path(sample_channels(t, RngStream(4, i)), t, s, pol), s, rate)
           for i in range(300)]
    assert np.array_equal(batch, ref)


def test_fixed_path_and_p2p_selection_reference():
    t = RelayTopology((3, 2))
    s = SnrPoint(8.0)
    rate = RateSpec.fixed(3.0)
    sel = P2pStrategy(3, 2, selection=True).outage_batch(5, 0, 200, [s], rate)[0]
    pol = SelectionPolicy("exhaustive", "fixed", 2)
    ref = [outage_indicator(select_path(sample_channels(t, RngStream(5, i)), t, s, pol), s, rate)
           for i in range(200)]
    assert np.array_equal(sel, ref)
    fixed = FixedPathStrategy(t, Path(((0, 1), (0, 1)))).outage_batch(5, 0, 200, [s], rate)[0]
    assert fixed.sum() >= sel.sum()
    with pytest.raises(RequiresMtGeMr):
        P2pStrategy(1, 2, selection=True)


def test_cf_batch_matches_reference():
    sc = CfScenario(1, (1,), 1)
    rate = RateSpec.fixed(2.0)
    grid = [SnrPoint(5.0), SnrPoint(15.0)]
    batch = CfStrategy(sc).outage_batch(6, 0, 100, grid, rate)
    for j, s in enumerate(grid):
        ref = [cf_outage_indicator(sc.with_snr(s), sample_cf(sc, RngStream(6, i)), rate)
               for i in range(100)]
        assert np.array_equal(batch[j], ref)


@given(st.integers(1, 10 ** 6), st.data())
@settings(max_examples=200, deadline=None)
def test_wilson_invariants(n, data):
    k = data.draw(st.integers(0, n))
    est = OutageEstimate.from_counts(SnrPoint(0.0), n, k)
    assert 0.0 <= est.ci_low <= est.p_hat <= est.ci_high <= 1.0
    assert est.p_hat == k / n


def test_wilson_coverage():
    rng = np.random.default_rng(7)
    p, n = 0.05, 400
    hits = 0
    for k in rng.binomial(n, p, size=1000):
        lo, hi = wilson_interval(int(k), n)
        hits += lo <= p <= hi
    assert 0.93 <= hits / 1000 <= 0.97


def test_estimate_validation():
    with pytest.raises(ValueError):
        OutageEstimate.from_counts(SnrPoint(0.0), 0, 0)
    with pytest.raises(ValueError):
        OutageEstimate.from_counts(SnrPoint(0.0), 10, 11)
    with pytest.raises(ValueError):
        estimate_outage(P2pStrategy(1, 1), SnrPoint(0.0), R1, 0, 1)


def _synthetic(slope, c=0.5, trials=10 ** 15):
    out = []
    for s in snr_grid(10, 30, 2):
        p = c * s.snr_linear ** slope
        out.append(OutageEstimate.from_counts(s, trials, int(round(p * trials))))
    return out


def test_fit_exact_loglinear():
    fit = fit_exponent(_synthetic(-3.0))
    assert abs(fit.slope + 3.0) < 1e-6
    assert fit.reliable and fit.points_used == 11 and fit.r_squared > 0.999999


def test_fit_reliability_flags():
    est = _synthetic(-1.0, trials=10 ** 4)
    fit = fit_exponent(est)
    assert not fit.reliable  # tail points have fewer than 50 events
    assert fit.points_used < len(est)
    assert fit_exponent(est, (10, 12)).points_used == 2
    assert not fit_exponent(est, (10, 12)).reliable
    assert fit_exponent(_synthetic(-1.0, trials=10 ** 9), (10, 14)).reliable


def test_sweep_validation():
    strat = P2pStrategy(1, 1)
    with pytest.raises(ValueError):
        sweep(strat, [SnrPoint(10), SnrPoint(5)], R1, 10, 1)
    with pytest.raises(ValueError):
        sweep_and_fit(strat, snr_grid(0, 10, 5), R1, 10, 1, window=(0, 20))


def test_snr_grid():
    g = snr_grid(5, 20, 1)
    assert len(g) == 16 and g[0].snr_db == 5.0 and g[-1].snr_db == 20.0
    assert [s.snr_db for s in snr_grid(0, 1, 0.1)][-1] == 1.0
    with pytest.raises(ValueError):
        snr_grid(0, 10, 0)


@pytest.mark.parametrize("strategy", [
    P2pStrategy(1, 1), P2pStrategy(1, 2), P2pStrategy(3, 2, selection=True),
    JeemasStrategy(RelayTopology((2, 4, 2)), SelectionPolicy(m_policy="hybrid")),
    JeemasStrategy(RelayTopology((2, 4, 2)), SelectionPolicy("independent", "fixed", 2)),
    FixedPathStrategy(RelayTopology((1, 1, 1)), Path(((0,), (0,), (0,)))),
    CfStrategy(CfScenario(1, (1,), 1)),
])
def test_monotone_in_snr(strategy):
    trials = 4000 if isinstance(strategy, CfStrategy) else 40000
    est = sweep(strategy, snr_grid(0, 20, 4), RateSpec.fixed(1.5), trials, 8)
    for a, b in zip(est, est[1:]):
        assert b.p_hat <= a.p_hat + 2 * math.hypot(a.stderr, b.stderr)


def test_scaled_rate_uses_hybrid_size():
    # r > 0 switches the hybrid policy to the widest subsets
    strat = JeemasStrategy(RelayTopology((2, 2)), SelectionPolicy(m_policy="hybrid"))
    wide = strat.outage_batch(1, 0, 1000, [SnrPoint(20)], RateSpec.scaled(0.5))
    fixed = JeemasStrategy(RelayTopology((2, 2)), SelectionPolicy(m=2)).outage_batch(
        1, 0, 1000, [SnrPoint(20)], RateSpec.scaled(0.5))
    assert np.array_equal(wide, fixed)
