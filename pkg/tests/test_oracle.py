import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from switchcost.market import MarketConfig
from switchcost.oracle import EXIT, BLOCK, choice_counts, consumer_choice, draw_consumers, mc_demand

from helpers import FAMILY_POOL
from oracles import uniform_duopoly_masses

FIG = (0.6, 0.45)


def test_choice_examples():
    assert consumer_choice([0.7, 0.9], FIG, 0.2, 0) == 1
    assert consumer_choice([0.5, 0.5], FIG, 0.2, 0) == EXIT
    # without exit the initial firm's -0.1 beats the rival's -0.15
    assert consumer_choice([0.5, 0.5], FIG, 0.2, 0, exit_allowed=False) == 0


def test_tie_breaking():
    assert consumer_choice([0.5, 0.2], [0.5, 0.5], 0.1, 0) == 0          # buy beats exit at zero utility
    assert consumer_choice([0.6, 0.7], [0.5, 0.5], 0.1, 0) == 0          # initial beats rival on a tie
    assert consumer_choice([0.1, 0.8, 0.8], [0.9, 0.5, 0.5], 0.1, 0) == 1  # lower index among rivals


def test_discriminatory_choice_uses_switch_price_at_rivals():
    po, ps = [0.6, 0.6], [0.3, 0.3]
    assert consumer_choice([0.7, 0.7], po, 0.1, 0, p_switch=ps) == 1
    assert consumer_choice([0.7, 0.7], po, 0.1, 0) == 0


def _python_choices(cfg, draw, po, ps):
    return np.array([consumer_choice(v, po, cfg.s, k, cfg.exit_allowed, ps)
                     for v, k in zip(draw.v, draw.initial_firm)])


@pytest.mark.parametrize("exit_allowed", [True, False])
def test_kernel_counts_match_reference_rule(exit_allowed):
    cfg = MarketConfig(3, (0.2, 0.3, 0.5), (0, 0, 0), 0.12, FAMILY_POOL[2:5], exit_allowed=exit_allowed)
    po, ps = np.array([0.5, 0.4, 0.45]), np.array([0.35, 0.4, 0.3])
    draw = draw_consumers(cfg, 4000, seed=9)
    ch = _python_choices(cfg, draw, po, ps)
    counts = np.zeros((3, 4), dtype=np.int64)
    np.add.at(counts, (draw.initial_firm, ch + 1), 1)
    got = choice_counts(cfg, np.column_stack([po, ps]), 4000, seed=9)
    np.testing.assert_array_equal(got, counts)


def test_draws_follow_shares_and_distributions():
    cfg = MarketConfig(3, (0.2, 0.3, 0.5), (0, 0, 0), 0.1, FAMILY_POOL[1:4])
    d = draw_consumers(cfg, 200_000, seed=1)
    share = np.bincount(d.initial_firm, minlength=3) / 200_000
    np.testing.assert_allclose(share, cfg.mu, atol=5e-3)
    # triangular-increasing: mean 2/3
    assert d.v[:, 0].mean() == pytest.approx(2 / 3, abs=3e-3)
    assert np.all((d.v >= 0) & (d.v <= 1))


def test_closed_form_anchor_within_three_se():
    cfg = MarketConfig.symmetric(2, 0.1)
    bd = mc_demand(cfg, [0.6, 0.6], 1_000_000, seed=3)
    assert np.all(np.abs(bd.total_mass - 0.29) <= 3 * bd.total_se)
    stay, switch = uniform_duopoly_masses([0.6, 0.6], 0.1)[0]
    assert stay == pytest.approx(0.1775) and switch == pytest.approx(0.1125)


def test_all_prices_at_one_means_everyone_exits():
    cfg = MarketConfig(3, (0.2, 0.3, 0.5), (0, 0, 0), 0.4, FAMILY_POOL[:3])
    bd = mc_demand(cfg, [1.0, 1.0, 1.0], 50_000, seed=2)
    assert bd.exit_mass == 1.0 and np.all(bd.total_mass == 0.0)


def test_large_switching_cost_shuts_switching():
    cfg = MarketConfig.symmetric(2, 1.0)
    bd = mc_demand(cfg, [0.5, 0.5], 400_000, seed=4)
    assert np.all(bd.switch_in_mass == 0.0)
    assert np.all(np.abs(bd.total_mass - 0.25) <= 3 * bd.total_se)


def test_no_exit_means_zero_exit_mass():
    cfg = MarketConfig(3, (0.2, 0.3, 0.5), (0, 0, 0), 0.3, FAMILY_POOL[3:6], exit_allowed=False)
    bd = mc_demand(cfg, [0.9, 0.8, 0.95], 100_000, seed=5)
    assert bd.exit_mass == 0.0
    assert bd.total_mass.sum() == pytest.approx(1.0, abs=1e-15)


def test_same_seed_same_output_any_jobs():
    cfg = MarketConfig(3, (0.2, 0.3, 0.5), (0, 0, 0), 0.1, FAMILY_POOL[4:7])
    N = 3 * BLOCK + 123
    a = choice_counts(cfg, [0.4, 0.5, 0.6], N, 8, jobs=1)
    b = choice_counts(cfg, [0.4, 0.5, 0.6], N, 8, jobs=4)
    np.testing.assert_array_equal(a, b)
    assert a.sum() == N
    assert not np.array_equal(a, choice_counts(cfg, [0.4, 0.5, 0.6], N, 9))


def test_sample_count_checked():
    with pytest.raises(ValueError):
        choice_counts(MarketConfig.symmetric(2, 0.1), [0.5, 0.5], 0, 0)


prices = st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3)


@settings(max_examples=25, deadline=None)
@given(prices, st.integers(0, 2), st.floats(0.01, 0.3), st.floats(0.01, 0.5), st.booleans())
def test_accounting_and_own_price_monotonicity(P, i, dp, s, exit_allowed):
    cfg = MarketConfig(3, (0.25, 0.35, 0.4), (0, 0, 0), s, FAMILY_POOL[:3], exit_allowed=exit_allowed)
    P = np.array(P)
    lo = mc_demand(cfg, P, 20_000, seed=17)
    P2 = P.copy()
    P2[i] = min(1.0, P[i] + dp)
    hi = mc_demand(cfg, P2, 20_000, seed=17)
    for bd in (lo, hi):
        assert bd.total_mass.sum() + bd.exit_mass == pytest.approx(1.0, abs=1e-12)
        assert np.all(bd.total_mass >= 0)
    assert hi.total_mass[i] <= lo.total_mass[i]
    others = [j for j in range(3) if j != i]
    assert np.all(hi.total_mass[others] >= lo.total_mass[others])
    assert hi.exit_mass >= lo.exit_mass


@settings(max_examples=25, deadline=None)
@given(prices, st.floats(0.01, 0.5), st.floats(0.01, 0.3))
def test_switching_cost_monotonicity(P, s, ds):
    cfg = MarketConfig(3, (0.25, 0.35, 0.4), (0, 0, 0), s, FAMILY_POOL[2:5])
    lo = mc_demand(cfg, P, 20_000, seed=23)
    hi = mc_demand(cfg.with_s(s + ds), P, 20_000, seed=23)
    assert np.all(hi.switch_in_mass <= lo.switch_in_mass)
    assert np.all(hi.initial_mass >= lo.initial_mass)
    assert hi.exit_mass >= lo.exit_mass


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.01, 0.9))
def test_no_exit_symmetric_duopoly_covers_market(p, s):
    cfg = MarketConfig.symmetric(2, s, exit_allowed=False)
    bd = mc_demand(cfg, [p, p], 20_000, seed=31)
    assert bd.exit_mass == 0.0
    assert bd.total_mass.sum() == pytest.approx(1.0, abs=1e-15)
