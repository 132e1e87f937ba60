from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from circadian_ieeg.model import ChannelMeta
from circadian_ieeg.soz import (anova_oneway, event_rates_by_group, min_distance_to_soz,
                                summarize, wilcoxon_signed_rank)
from oracles import anova_by_hand, anova_monte_carlo_p, min_distance_pairs, wilcoxon_enumeration


def ev(channel, t=0.0, kind="spike"):
    return SimpleNamespace(channel=channel, t_peak=t, kind=kind)


CHANNELS = [ChannelMeta("A", is_soz=True), ChannelMeta("B", is_soz=True),
            ChannelMeta("C"), ChannelMeta("D"), ChannelMeta("X", is_bad=True)]


# -- rates ----------------------------------------------------------------------

def test_no_events_zero_rates():
    tab = event_rates_by_group([], CHANNELS, "soz", 30.0)
    assert [r.rate for r in tab.rows] == [0.0, 0.0]
    assert tab.total_events == 0


def test_unit_rate():
    tab = event_rates_by_group([ev("A", i) for i in range(60)], [ChannelMeta("A", is_soz=True)],
                               "soz", 60.0)
    assert tab["soz"].rate == 1.0 and tab["soz"].event_count == 60


def test_soz_grouping_means_and_bad_channels():
    events = [ev("A")] * 6 + [ev("B")] * 2 + [ev("C")] * 1 + [ev("X")] * 50
    tab = event_rates_by_group(events, CHANNELS, "soz", 2.0)
    soz, non = tab["soz"], tab["non-soz"]
    assert soz.rate == pytest.approx(8 / (2 * 2)) and non.rate == pytest.approx(1 / (2 * 2))
    assert soz.mean == pytest.approx(2.0) and soz.sd == pytest.approx(np.std([3, 1], ddof=1))
    assert soz.channel_rates == {"A": 3.0, "B": 1.0}
    assert tab.total_events == 9


def test_state_grouping():
    events = [ev("A", t) for t in (1, 2, 3, 11, 12)]
    tab = event_rates_by_group(events, CHANNELS[:1], "sleep-state", {"sleep": 2.0, "wake": 4.0},
                               state_of=lambda t: "sleep" if t < 10 else "wake")
    assert tab["sleep"].rate == pytest.approx(1.5) and tab["wake"].rate == pytest.approx(0.5)


def test_kind_grouping():
    events = [ev("A", kind="spike")] * 3 + [ev("C", kind="hfo")]
    tab = event_rates_by_group(events, CHANNELS, "kind", 1.0)
    assert tab["spike"].event_count == 3 and tab["hfo"].rate == pytest.approx(0.25)


def test_zero_exposure_rejected():
    with pytest.raises(ValueError, match="zero exposure"):
        event_rates_by_group([], CHANNELS, "soz", 0.0)
    with pytest.raises(ValueError):
        event_rates_by_group([], CHANNELS, "bogus", 1.0)


@given(st.lists(st.tuples(st.sampled_from("ABCDX"), st.floats(0, 100)), max_size=200),
       st.floats(0.1, 1000))
def test_rate_tables_reconcile(items, exposure):
    events = [ev(c, t) for c, t in items]
    n_good = sum(c != "X" for c, _ in items)
    for grouping in ("soz", "kind"):
        tab = event_rates_by_group(events, CHANNELS, grouping, exposure)
        assert tab.total_events == n_good
        for r in tab.rows:
            assert r.rate * r.exposure_min * r.n_channels == pytest.approx(r.event_count, abs=1e-9)
    tab = event_rates_by_group(events, CHANNELS, "sleep-state", {"s": exposure, "w": exposure},
                               state_of=lambda t: "s" if t < 50 else "w")
    assert tab.total_events == n_good


def test_summarize():
    assert summarize([]) == (0.0, 0.0)
    assert summarize([4.0]) == (4.0, 0.0)


# -- Wilcoxon --------------------------------------------------------------------

def test_all_zero_differences():
    with pytest.raises(ValueError, match="all differences zero"):
        wilcoxon_signed_rank([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])


def test_too_few_pairs():
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([1, 2, 3, 4], [0, 0, 0, 0])


def test_one_sided_sample():
    res = wilcoxon_signed_rank([1, 2, 3, 4, 5], [0] * 5)
    assert res.W == 0 and res.exact and res.p == pytest.approx(0.0625, abs=1e-15)


def test_antisymmetric_sample():
    res = wilcoxon_signed_rank([1, -1, 2, -2, 3, -3], [0] * 6)
    assert res.w_plus == res.w_minus and res.p == 1.0


def test_pair_array_input():
    res = wilcoxon_signed_rank(np.array([[2, 1], [3, 1], [5, 1], [9, 1], [17, 1]]))
    assert res.W == 0 and res.n == 5


def test_exact_matches_enumeration():
    rng = np.random.default_rng(5)
    for trial in range(300):
        n = int(rng.integers(5, 13))
        # a coarse grid so ties and zeros occur
        d = rng.integers(-6, 7, n) / 2.0
        if np.count_nonzero(d) < 5:
            continue
        res = wilcoxon_signed_rank(d, np.zeros(n))
        w, p = wilcoxon_enumeration(list(d))
        assert res.W == w
        assert res.p == pytest.approx(p, abs=1e-12)


@pytest.mark.xfail(strict=True, reason="the continuity-corrected normal approximation is off by "
                   "up to 0.017 near p = 0.42 for n = 10, beyond the 0.01 agreement target")
def test_normal_approximation_close_to_exact():
    # every attainable W for untied samples of size 10..12
    worst = 0.0
    for n in (10, 11, 12):
        for w in range(n * (n + 1) // 4 + 1):
            ranks = list(range(1, n + 1))
            # a sample whose negative ranks sum to w, built greedily from the top
            neg, rest = set(), w
            for r in reversed(ranks):
                if r <= rest:
                    neg.add(r)
                    rest -= r
            d = [-r if r in neg else r for r in ranks]
            approx = wilcoxon_signed_rank(d, [0] * n, exact_max_n=0)
            _, p = wilcoxon_enumeration(d)
            worst = max(worst, abs(approx.p - p))
    assert worst <= 0.01


def test_normal_approximation_tail():
    # in the tail the approximation is much closer
    d = list(range(1, 13))
    d[0] = -1
    approx = wilcoxon_signed_rank(d, [0] * 12, exact_max_n=0)
    _, p = wilcoxon_enumeration(d)
    assert abs(approx.p - p) < 0.005 and p < 0.001


@given(st.lists(st.floats(-100, 100).filter(lambda v: v != 0), min_size=5, max_size=30))
def test_w_bounds_and_p_range(d):
    res = wilcoxon_signed_rank(d, [0.0] * len(d))
    n = res.n
    assert res.w_plus + res.w_minus == pytest.approx(n * (n + 1) / 2)
    assert 0 <= res.W <= n * (n + 1) / 4 + 1e-9
    assert 0 < res.p <= 1


# -- ANOVA -----------------------------------------------------------------------

def test_equal_groups():
    res = anova_oneway([[1, 2, 3], [1, 2, 3]])
    assert res.F == 0 and res.p == pytest.approx(1.0)


def test_hand_example():
    res = anova_oneway([[1, 2], [3, 4]])
    assert res.F == pytest.approx(8.0) and (res.df1, res.df2) == (1, 2)
    # for df (1, 2) the survival function is 1 - sqrt(F / (F + 2))
    assert res.p == pytest.approx(1 - np.sqrt(8 / 10), rel=1e-12)


def test_zero_within_variance():
    res = anova_oneway([[5, 5], [7, 7]])
    assert res.infinite and res.F == float("inf") and res.p == 0.0


def test_invalid_inputs():
    for groups in ([[1, 2]], [[1, 2], [3]], [[2, 2], [2, 2]]):
        with pytest.raises(ValueError):
            anova_oneway(groups)


def test_matches_hand_evaluation():
    rng = np.random.default_rng(8)
    for _ in range(50):
        groups = [list(rng.normal(size=int(rng.integers(2, 9)))) for _ in range(int(rng.integers(2, 5)))]
        f, df1, df2 = anova_by_hand(groups)
        res = anova_oneway(groups)
        assert res.F == pytest.approx(f, rel=1e-10) and (res.df1, res.df2) == (df1, df2)


@pytest.mark.parametrize("sizes,f_obs", [((4, 5), 3.0), ((3, 3, 4), 2.5), ((6, 6, 6, 6), 1.2)])
def test_p_against_monte_carlo(sizes, f_obs):
    groups = [np.arange(s, dtype=float) + 10 * i for i, s in enumerate(sizes)]
    k, n = len(sizes), sum(sizes)
    from scipy.special import fdtrc
    p = anova_oneway(groups).p
    assert p == pytest.approx(fdtrc(k - 1, n - k, anova_oneway(groups).F))
    # the survival function at f_obs, via a tiny two-point synthetic input is awkward; compare directly
    res_p = float(fdtrc(k - 1, n - k, f_obs))
    mc = anova_monte_carlo_p(f_obs, sizes, n_sim=40_000, seed=1)
    assert abs(res_p - mc) < 0.01


@given(st.lists(st.lists(st.floats(-50, 50), min_size=2, max_size=8), min_size=2, max_size=4),
       st.floats(-1e3, 1e3), st.floats(0.01, 100))
def test_shift_and_scale_invariance(groups, shift, scale):
    try:
        base = anova_oneway(groups)
    except ValueError:
        return
    if base.infinite or np.concatenate([np.asarray(g) for g in groups]).std() < 1e-3:
        return
    shifted = anova_oneway([[v + shift for v in g] for g in groups])
    scaled = anova_oneway([[v * scale for v in g] for g in groups])
    assert shifted.F == pytest.approx(base.F, rel=1e-6, abs=1e-9)
    assert scaled.F == pytest.approx(base.F, rel=1e-9, abs=1e-12)


# -- distances -------------------------------------------------------------------

def test_three_four_five():
    chans = [ChannelMeta("S", (0, 0, 0), is_soz=True), ChannelMeta("E", (3, 4, 0))]
    recs = min_distance_to_soz([ev("E"), ev("S")], chans)
    assert recs[0].min_euclid_mm == 5.0 and recs[1].min_euclid_mm == 0.0


def test_no_soz():
    with pytest.raises(ValueError, match="no SOZ"):
        min_distance_to_soz([ev("A")], [ChannelMeta("A")])


def _random_montage(rng, n=20, n_soz=5):
    xyz = rng.uniform(-60, 60, (n, 3))
    return [ChannelMeta(f"c{i}", tuple(xyz[i]), is_soz=i < n_soz) for i in range(n)], xyz


def test_against_all_pairs():
    rng = np.random.default_rng(9)
    chans, xyz = _random_montage(rng)
    idx = rng.integers(0, 20, 100)
    recs = min_distance_to_soz([ev(f"c{i}") for i in idx], chans)
    expected = min_distance_pairs([tuple(xyz[i]) for i in idx], [tuple(p) for p in xyz[:5]])
    for r, e, i in zip(recs, expected, idx):
        assert abs(r.min_euclid_mm - e) <= 1e-12
        assert (r.min_euclid_mm == 0) == (i < 5)


@given(st.integers(0, 2 ** 32 - 1))
def test_rigid_motion_invariance(seed):
    rng = np.random.default_rng(seed)
    chans, xyz = _random_montage(rng)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    moved_xyz = xyz @ q.T + rng.uniform(-100, 100, 3)
    moved = [ChannelMeta(c.name, tuple(p), is_soz=c.is_soz) for c, p in zip(chans, moved_xyz)]
    events = [ev(f"c{i}") for i in range(20)]
    a = [r.min_euclid_mm for r in min_distance_to_soz(events, chans)]
    b = [r.min_euclid_mm for r in min_distance_to_soz(events, moved)]
    assert np.allclose(a, b, atol=1e-9, rtol=0)
