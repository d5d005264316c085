import itertools

import numpy as np
import pytest
from datetime import datetime, timedelta
from hypothesis import given, settings, strategies as st

from oracles import brute_force_phase
from smogcast.alerts import (
    Thresholds,
    classify_phase,
    collect_regional_maxima,
    exceedance_profiles,
    maaqs_exceedance,
    phase_day_counts,
    phase_probabilities,
    regional_max,
)
from smogcast.forecast import PredictiveDraws

THR = Thresholds()


def test_threshold_defaults():
    assert (THR.phase1_ozone, THR.phase2_ozone) == (154.0, 204.0)
    assert (THR.phase1_pm10, THR.phase2_pm10) == (214.0, 354.0)
    assert (THR.maaqs_ozone_1h, THR.maaqs_ozone_8h, THR.maaqs_pm10_24h) == (95.0, 70.0, 75.0)
    with pytest.raises(ValueError):
        Thresholds(phase1_ozone=300.0)


def test_regional_max_basics():
    region_index = np.array([0, 0, 1, 2, 2])
    vals = np.array([50.0, 90.0, 70.0, 10.0, 30.0])
    out = regional_max(vals, region_index, n_regions=3)
    assert np.array_equal(out, [90.0, 70.0, 30.0])
    # singleton region equals its station
    assert out[1] == vals[2]
    with pytest.raises(ValueError, match="no stations"):
        regional_max(vals, region_index, n_regions=4)


def classify_one(z_o3, z_pm):
    return classify_phase(np.array([z_o3]), np.array([z_pm]), THR)[0]


def test_phase_all_clear():
    assert np.all(classify_one([100, 80, 60, 70, 90], [100] * 5) == 0)


def test_phase_ozone_city_wide_level1():
    s = classify_one([100, 80, 60, 70, 160], [100] * 5)
    assert np.all(s == 1)


def test_phase_pm_regional_only():
    s = classify_one([100] * 5, [220, 100, 100, 100, 100])
    assert np.array_equal(s, [1, 0, 0, 0, 0])


def test_phase_pm_two_regions_city_wide():
    s = classify_one([100] * 5, [220, 100, 100, 230, 100])
    assert np.all(s == 1)


def test_phase_ozone_level2_city_wide():
    s = classify_one([100, 100, 210, 100, 100], [100] * 5)
    assert np.all(s == 2)


def test_phase_regional_two_with_city_one():
    # single-region PM phase 2 rides on top of a city-wide ozone phase 1
    s = classify_one([160, 100, 100, 100, 100], [100, 360, 100, 100, 100])
    assert np.array_equal(s, [1, 2, 1, 1, 1])


def test_phase_thresholds_inclusive():
    s = classify_one([154.0, 0, 0, 0, 0], [0.0] * 5)
    assert np.all(s == 1)
    s = classify_one([0.0] * 5, [214.0, 0, 0, 0, 0])
    assert s[0] == 1


def test_phase_truth_table_exhaustive():
    # every combination of {below L1, in [L1, L2), at/above L2} per pollutant per region
    o3_levels = [100.0, 170.0, 210.0]
    pm_levels = [100.0, 250.0, 400.0]
    combos = list(itertools.product(range(3), repeat=5))
    # vectorized classification over all ozone x pm level grids in chunks
    mismatches = 0
    for o3_combo in combos:
        z_o3 = np.array([o3_levels[c] for c in o3_combo])
        pm_grid = np.array([[pm_levels[c] for c in pc] for pc in combos])
        got = classify_phase(np.tile(z_o3, (len(combos), 1)), pm_grid, THR)
        for r, pc in enumerate(combos):
            expected = brute_force_phase(z_o3, pm_grid[r], THR)
            if not np.array_equal(got[r], expected):
                mismatches += 1
    assert mismatches == 0


@given(
    st.lists(st.floats(0, 400), min_size=5, max_size=5),
    st.lists(st.floats(0, 500), min_size=5, max_size=5),
    st.integers(0, 4),
    st.floats(1, 100),
)
@settings(max_examples=200)
def test_phase_monotonicity(z_o3, z_pm, which, bump):
    z_o3, z_pm = np.array(z_o3), np.array(z_pm)
    before = classify_phase(z_o3, z_pm, THR)
    z_o3_up = z_o3.copy()
    z_o3_up[which] += bump
    after = classify_phase(z_o3_up, z_pm, THR)
    assert np.all(after >= before)
    z_pm_up = z_pm.copy()
    z_pm_up[which] += bump
    after_pm = classify_phase(z_o3, z_pm_up, THR)
    assert np.all(after_pm >= before)


def test_phase_ozone_city_rule_lifts_all_regions():
    rng = np.random.default_rng(0)
    for _ in range(200):
        z_o3 = rng.uniform(0, 400, 5)
        z_pm = rng.uniform(0, 500, 5)
        s = classify_phase(z_o3, z_pm, THR)
        if np.any(z_o3 >= THR.phase2_ozone):
            assert np.all(s == 2)
        elif np.any(z_o3 >= THR.phase1_ozone):
            assert np.all(s >= 1)


def make_draws(o3, pm24, o3_8h=None, start=datetime(2017, 5, 1, 10)):
    """Wrap [h, m, n_s] arrays as PredictiveDraws on a 3-evaluations/day grid."""
    o3 = np.asarray(o3, dtype=float)
    h = o3.shape[0]
    stamps = []
    d, slot = 0, 0
    slots = (10, 15, 20)
    for i in range(h):
        stamps.append(start.replace(hour=slots[slot]) + timedelta(days=d))
        slot += 1
        if slot == 3:
            slot, d = 0, d + 1
    pm24 = np.asarray(pm24, dtype=float)
    o3_8h = np.zeros_like(o3) if o3_8h is None else np.asarray(o3_8h, dtype=float)
    n_s = o3.shape[2]
    region_index = np.arange(n_s) % 5
    return PredictiveDraws(
        target_hours=np.arange(h),
        timestamps=stamps,
        station_ids=[f"S{i}" for i in range(n_s)],
        region_index=region_index,
        o3=o3,
        pm=pm24.copy(),
        o3_model=o3.copy(),
        pm_model=pm24.copy(),
        pm24=pm24,
        o3_8h=o3_8h,
    )


def test_collect_regional_maxima_daily_is_max_over_hours():
    # 6 hours = 2 days, 1 draw, 5 stations in 5 regions
    o3 = np.zeros((6, 1, 5))
    o3[0, 0, 0] = 100.0
    o3[1, 0, 0] = 160.0
    o3[2, 0, 0] = 120.0
    pm = np.zeros((6, 1, 5))
    maxima = collect_regional_maxima(make_draws(o3, pm))
    assert maxima.w_o3.shape == (2, 1, 5)
    assert maxima.w_o3[0, 0, 0] == 160.0
    assert maxima.z_o3[1, 0, 0] == 160.0


def test_phase_probabilities_partition_and_halves():
    m = 400
    o3 = np.zeros((3, m, 5))
    o3[:, : m // 2, 0] = 160.0  # half the draws exceed level 1 at all three hours
    pm = np.zeros((3, m, 5))
    maxima = collect_regional_maxima(make_draws(o3, pm))
    probs = phase_probabilities(maxima, THR)
    assert np.allclose(probs.hourly.sum(axis=-1), 1.0)
    assert np.allclose(probs.daily.sum(axis=-1), 1.0)
    assert probs.daily[0, :, 1] == pytest.approx(np.full(5, 0.5), abs=1e-12)
    assert probs.daily_any[0, 1] == pytest.approx(0.5)


def test_phase_probabilities_all_quiet():
    maxima = collect_regional_maxima(make_draws(np.zeros((3, 50, 5)), np.zeros((3, 50, 5))))
    probs = phase_probabilities(maxima, THR)
    assert np.all(probs.hourly[:, :, 0] == 1.0)
    assert np.all(probs.daily_any[:, 0] == 1.0)


def test_phase_day_counts_deterministic():
    # two of three days exceed deterministically in region 0 (PM regional rule)
    o3 = np.zeros((9, 4, 5))
    pm = np.zeros((9, 4, 5))
    pm[0:3, :, 0] = 250.0  # day 1, region 0, all draws
    pm[3:6, :, 0] = 250.0  # day 2
    maxima = collect_regional_maxima(make_draws(o3, pm))
    counts = phase_day_counts(maxima, THR)
    assert counts.days_total == 3
    assert counts.days["mean"][0, 1] == pytest.approx(2.0)
    assert counts.days["lo"][0, 1] == pytest.approx(2.0)
    assert counts.days["hi"][0, 1] == pytest.approx(2.0)
    assert counts.hours["mean"][0, 1] == pytest.approx(6.0)
    # the "Any" row dominates each region, draw-wise
    assert counts.days["mean"][5, 1] >= counts.days["mean"][0, 1]


def test_phase_counts_any_dominance_random():
    rng = np.random.default_rng(2)
    o3 = rng.uniform(0, 250, size=(6, 30, 5))
    pm = rng.uniform(0, 400, size=(6, 30, 5))
    maxima = collect_regional_maxima(make_draws(o3, pm))
    s_h = classify_phase(maxima.z_o3, maxima.z_pm, THR)
    any_counts = (s_h.max(axis=-1) >= 1).sum(axis=0)
    for j in range(5):
        assert np.all(any_counts >= (s_h[:, :, j] >= 1).sum(axis=0))


def test_maaqs_exceedance_all_zero():
    maxima = collect_regional_maxima(make_draws(np.zeros((6, 8, 5)), np.zeros((6, 8, 5))))
    rep = maaqs_exceedance(maxima, THR)
    assert np.all(rep.ozone_hourly["mean"] == 0.0)
    assert np.all(rep.pm10_daily["mean"] == 0.0)


def test_maaqs_exceedance_constant_100ppb():
    o3 = np.full((6, 8, 5), 0.0)
    o3[:, :, 0] = 100.0  # region 0 always above the 95 ppb hourly limit
    maxima = collect_regional_maxima(make_draws(o3, np.zeros((6, 8, 5))))
    rep = maaqs_exceedance(maxima, THR)
    assert rep.ozone_hourly["mean"][0] == pytest.approx(1.0)
    assert np.all(rep.ozone_hourly["mean"][1:5] == 0.0)
    assert rep.ozone_hourly["mean"][5] == pytest.approx(1.0)  # Any


def test_maaqs_union_of_ozone_criteria():
    o3 = np.zeros((3, 4, 5))
    o3_8h = np.zeros((3, 4, 5))
    o3_8h[:, :, 2] = 72.0  # below 95 hourly but above the 8-hour 70 ppb limit
    maxima = collect_regional_maxima(make_draws(o3, np.zeros((3, 4, 5)), o3_8h=o3_8h))
    rep = maaqs_exceedance(maxima, THR)
    assert rep.ozone_hourly["mean"][2] == pytest.approx(1.0)


def test_maaqs_strict_inequality():
    o3 = np.full((3, 4, 5), 95.0)  # exactly at the limit: no exceedance
    maxima = collect_regional_maxima(make_draws(o3, np.zeros((3, 4, 5))))
    rep = maaqs_exceedance(maxima, THR)
    assert np.all(rep.ozone_hourly["mean"] == 0.0)


def test_exceedance_profiles_partition():
    rng = np.random.default_rng(1)
    o3 = rng.uniform(80, 120, size=(12, 20, 5))
    pm = rng.uniform(50, 100, size=(12, 20, 5))
    maxima = collect_regional_maxima(make_draws(o3, pm))
    prof = exceedance_profiles(maxima, THR)
    # hour profile, weighted by bin counts, averages to the overall proportion
    hour_labels = [ts.hour for ts in maxima.timestamps]
    weights = np.array([hour_labels.count(h) for h in prof.hours], dtype=float)
    overall = ((maxima.z_o3 > THR.maaqs_ozone_1h) | (maxima.z_o8 > THR.maaqs_ozone_8h)).any(-1).mean()
    assert np.average(prof.ozone_by_hour, weights=weights) == pytest.approx(overall)


def test_exceedance_profiles_single_month():
    o3 = np.zeros((6, 4, 5))
    o3[:, :, 1] = 120.0
    maxima = collect_regional_maxima(make_draws(o3, np.zeros((6, 4, 5)), start=datetime(2017, 5, 1, 10)))
    prof = exceedance_profiles(maxima, THR)
    assert prof.months == ["2017-05"]
    assert prof.ozone_by_month[0] == pytest.approx(1.0)
    assert prof.pm10_by_month[0] == 0.0


def test_phase_counts_csv_layout(tmp_path):
    maxima = collect_regional_maxima(make_draws(np.zeros((6, 4, 5)), np.zeros((6, 4, 5))))
    counts = phase_day_counts(maxima, THR)
    counts.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().strip().splitlines()
    assert lines[0] == "panel,phase,stat,NE,NW,CE,SE,SW,Any"
    # two panels (hours, days) x three phases x three stats
    assert len(lines) == 1 + 2 * 3 * 3
    assert lines[1].startswith("hours (total 6),0,mean")


def test_exceedance_csv_layout(tmp_path):
    maxima = collect_regional_maxima(make_draws(np.zeros((6, 4, 5)), np.zeros((6, 4, 5))))
    rep = maaqs_exceedance(maxima, THR)
    rep.to_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().strip().splitlines()
    assert lines[0] == "pollutant,panel,stat,NE,NW,CE,SE,SW,Any"
    assert len(lines) == 1 + 2 * 2 * 3


def test_phase_probabilities_csv(tmp_path):
    maxima = collect_regional_maxima(make_draws(np.zeros((3, 5, 5)), np.zeros((3, 5, 5))))
    probs = phase_probabilities(maxima, THR)
    probs.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().strip().splitlines()
    assert lines[0] == "date,region,P0,P1,P2"
    assert len(lines) == 1 + 6  # one day x (5 regions + Any)


def test_zero_draws_rejected():
    maxima = collect_regional_maxima(make_draws(np.zeros((3, 1, 5)), np.zeros((3, 1, 5))))
    maxima.z_o3 = maxima.z_o3[:, :0, :]
    maxima.z_pm = maxima.z_pm[:, :0, :]
    maxima.w_o3 = maxima.w_o3[:, :0, :]
    maxima.w_pm = maxima.w_pm[:, :0, :]
    with pytest.raises(ValueError):
        phase_day_counts(maxima, THR)
    with pytest.raises(ValueError):
        phase_probabilities(maxima, THR)
