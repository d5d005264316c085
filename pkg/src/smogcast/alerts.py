"""Regional maxima, emergency-phase states, and standard-exceedance summaries.

Phase alerts follow the Mexico City contingency rules: hourly ozone against
154/204 ppb and 24-hour-average PM10 against 214/354 ug/m3, with ozone
exceedances escalating city-wide, single-region PM exceedances staying
regional, and two-plus-region PM exceedances going city-wide. Higher phases
supersede lower ones. Phase comparisons use >=.

Exceedance summaries use the national ambient standards (95 ppb hourly or
70 ppb 8-hour ozone, 75 ug/m3 24-hour PM10) with strict > comparisons;
either ozone criterion counts as an ozone exceedance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .forecast import PredictiveDraws
from .panel import REGIONS

N_PHASES = 3


@dataclass(frozen=True)
class Thresholds:
    phase1_ozone: float = 154.0
    phase2_ozone: float = 204.0
    phase1_pm10: float = 214.0
    phase2_pm10: float = 354.0
    maaqs_ozone_1h: float = 95.0
    maaqs_ozone_8h: float = 70.0
    maaqs_pm10_24h: float = 75.0

    def __post_init__(self) -> None:
        if not (0 < self.phase1_ozone < self.phase2_ozone):
            raise ValueError("ozone phase thresholds must satisfy 0 < level1 < level2")
        if not (0 < self.phase1_pm10 < self.phase2_pm10):
            raise ValueError("pm10 phase thresholds must satisfy 0 < level1 < level2")
        for name in ("maaqs_ozone_1h", "maaqs_ozone_8h", "maaqs_pm10_24h"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def regional_max(values: np.ndarray, region_index: np.ndarray, n_regions: int = len(REGIONS)) -> np.ndarray:
    """Maximum over stations within each region; stations sit on the last axis."""
    out = np.empty(values.shape[:-1] + (n_regions,))
    for j in range(n_regions):
        members = np.flatnonzero(region_index == j)
        if len(members) == 0:
            raise ValueError(f"region {REGIONS[j]} has no stations")
        out[..., j] = values[..., members].max(axis=-1)
    return out


def classify_phase(z_o3: np.ndarray, z_pm: np.ndarray, thresholds: Thresholds) -> np.ndarray:
    """Phase state per region from regional maxima; vectorized over leading axes.

    z_o3: hourly-ozone regional maxima [..., n_regions]; z_pm: 24-hour-average
    PM10 regional maxima, same shape. Returns integer states 0/1/2.
    """
    thr = thresholds
    z_o3 = np.asarray(z_o3)
    z_pm = np.asarray(z_pm)
    if z_o3.shape != z_pm.shape:
        raise ValueError("ozone and pm10 maxima must share a shape")
    s = np.zeros(z_o3.shape, dtype=np.int64)
    # regional PM rules
    s = np.maximum(s, (z_pm >= thr.phase1_pm10).astype(np.int64))
    s = np.maximum(s, 2 * (z_pm >= thr.phase2_pm10).astype(np.int64))
    # city-wide escalations: any-region ozone, or PM in two or more regions
    city1 = (z_o3 >= thr.phase1_ozone).any(axis=-1) | ((z_pm >= thr.phase1_pm10).sum(axis=-1) >= 2)
    city2 = (z_o3 >= thr.phase2_ozone).any(axis=-1) | ((z_pm >= thr.phase2_pm10).sum(axis=-1) >= 2)
    s = np.maximum(s, city1[..., None].astype(np.int64))
    s = np.maximum(s, 2 * city2[..., None].astype(np.int64))
    return s


@dataclass
class RegionalMaxima:
    """Hourly and daily regional maxima of the predictive draws.

    Z arrays are [n_hours, n_draws, n_regions]; W arrays are
    [n_days, n_draws, n_regions], maxima of Z over each day's evaluated hours.
    """

    timestamps: list
    day_keys: list
    z_o3: np.ndarray
    z_pm: np.ndarray
    z_o8: np.ndarray
    w_o3: np.ndarray
    w_pm: np.ndarray
    w_o8: np.ndarray

    @property
    def n_draws(self) -> int:
        return self.z_o3.shape[1]


def collect_regional_maxima(draws: PredictiveDraws) -> RegionalMaxima:
    """Reduce per-station draws to hourly Z and daily W regional maxima."""
    region_index = draws.region_index
    z_o3 = regional_max(draws.o3, region_index)
    z_pm = regional_max(draws.pm24, region_index)
    z_o8 = regional_max(draws.o3_8h, region_index)
    keys = draws.day_keys()
    days = sorted(set(keys))
    pos = {d: j for j, d in enumerate(days)}
    shape = (len(days),) + z_o3.shape[1:]
    w_o3 = np.full(shape, -np.inf)
    w_pm = np.full(shape, -np.inf)
    w_o8 = np.full(shape, -np.inf)
    for h, d in enumerate(keys):
        j = pos[d]
        np.maximum(w_o3[j], z_o3[h], out=w_o3[j])
        np.maximum(w_pm[j], z_pm[h], out=w_pm[j])
        np.maximum(w_o8[j], z_o8[h], out=w_o8[j])
    return RegionalMaxima(
        timestamps=list(draws.timestamps),
        day_keys=days,
        z_o3=z_o3,
        z_pm=z_pm,
        z_o8=z_o8,
        w_o3=w_o3,
        w_pm=w_pm,
        w_o8=w_o8,
    )


@dataclass
class PhaseProbabilities:
    """Monte Carlo phase probabilities per hour and per day.

    ``hourly``/``daily`` are [n_hours|n_days, n_regions, 3]; the ``*_any``
    arrays hold the distribution of the worst phase across regions.
    """

    timestamps: list
    day_keys: list
    hourly: np.ndarray
    hourly_any: np.ndarray
    daily: np.ndarray
    daily_any: np.ndarray

    def to_csv(self, path) -> None:
        """Daily series: date,region,P0,P1,P2 with an extra Any row per day."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["date", "region", "P0", "P1", "P2"])
            for d, day in enumerate(self.day_keys):
                for j, reg in enumerate(REGIONS):
                    writer.writerow([day.isoformat(), reg] + [repr(float(p)) for p in self.daily[d, j]])
                writer.writerow([day.isoformat(), "Any"] + [repr(float(p)) for p in self.daily_any[d]])


def _phase_distribution(states: np.ndarray) -> np.ndarray:
    """Proportion of draws at each phase; draws on axis 1 of [t, m, ...]."""
    m = states.shape[1]
    out = np.stack([(states == k).sum(axis=1) / m for k in range(N_PHASES)], axis=-1)
    return out


def phase_probabilities(maxima: RegionalMaxima, thresholds: Thresholds) -> PhaseProbabilities:
    if maxima.n_draws == 0:
        raise ValueError("no draws to summarize")
    s_hourly = classify_phase(maxima.z_o3, maxima.z_pm, thresholds)  # [h, m, r]
    s_daily = classify_phase(maxima.w_o3, maxima.w_pm, thresholds)  # [d, m, r]
    return PhaseProbabilities(
        timestamps=maxima.timestamps,
        day_keys=maxima.day_keys,
        hourly=_phase_distribution(s_hourly),
        hourly_any=_phase_distribution(s_hourly.max(axis=-1)),
        daily=_phase_distribution(s_daily),
        daily_any=_phase_distribution(s_daily.max(axis=-1)),
    )


def _summary(counts: np.ndarray) -> dict:
    """Posterior mean and central 95% interval over the draw axis (axis 0)."""
    return {
        "mean": counts.mean(axis=0),
        "lo": np.percentile(counts, 2.5, axis=0),
        "hi": np.percentile(counts, 97.5, axis=0),
    }


@dataclass
class PhaseCounts:
    """Counts of evaluated hours and of days spent at each phase.

    Entries are [n_regions + 1, 3] (regions plus the across-region maximum in
    the last row) holding posterior means and 95% interval endpoints.
    """

    hours_total: int
    days_total: int
    hours: dict
    days: dict

    def to_csv(self, path) -> None:
        cols = list(REGIONS) + ["Any"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["panel", "phase", "stat"] + cols)
            for panel_name, summary, total in (
                ("hours", self.hours, self.hours_total),
                ("days", self.days, self.days_total),
            ):
                for k in range(N_PHASES):
                    for stat in ("mean", "lo", "hi"):
                        row = summary[stat][:, k]
                        writer.writerow([f"{panel_name} (total {total})", k, stat] + [repr(float(v)) for v in row])


def phase_day_counts(maxima: RegionalMaxima, thresholds: Thresholds) -> PhaseCounts:
    """Draw-wise counts of hours/days at each phase, summarized over draws."""
    if maxima.n_draws == 0:
        raise ValueError("no draws to summarize")
    s_hourly = classify_phase(maxima.z_o3, maxima.z_pm, thresholds)  # [h, m, r]
    s_daily = classify_phase(maxima.w_o3, maxima.w_pm, thresholds)
    blocks = []
    for s in (s_hourly, s_daily):
        s_any = s.max(axis=-1, keepdims=True)
        s_all = np.concatenate([s, s_any], axis=-1)  # [t, m, r+1]
        counts = np.stack([(s_all == k).sum(axis=0) for k in range(N_PHASES)], axis=-1)  # [m, r+1, 3]
        blocks.append(_summary(counts))
    hours_summary, days_summary = blocks
    # summaries transpose to [r+1, 3] already; keep dicts of arrays
    return PhaseCounts(
        hours_total=s_hourly.shape[0],
        days_total=s_daily.shape[0],
        hours=hours_summary,
        days=days_summary,
    )


@dataclass
class ExceedanceReport:
    """Standard-exceedance proportions per region and for any region.

    ``*_hourly``/``*_daily`` are dicts with mean/lo/hi arrays of length
    n_regions + 1 (regions then Any).
    """

    hours_total: int
    days_total: int
    ozone_hourly: dict
    ozone_daily: dict
    pm10_hourly: dict
    pm10_daily: dict

    def to_csv(self, path) -> None:
        cols = list(REGIONS) + ["Any"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["pollutant", "panel", "stat"] + cols)
            for pol, hourly, daily in (
                ("ozone", self.ozone_hourly, self.ozone_daily),
                ("pm10", self.pm10_hourly, self.pm10_daily),
            ):
                for panel_name, summary in (
                    (f"hours (total {self.hours_total})", hourly),
                    (f"days (total {self.days_total})", daily),
                ):
                    for stat in ("mean", "lo", "hi"):
                        writer.writerow([pol, panel_name, stat] + [repr(float(v)) for v in summary[stat]])


def _exceed_summary(ind: np.ndarray) -> dict:
    """ind: [t, m, r] boolean; returns proportions over t with Any appended."""
    any_ind = ind.any(axis=-1, keepdims=True)
    full = np.concatenate([ind, any_ind], axis=-1)
    prop = full.mean(axis=0)  # [m, r+1]
    return _summary(prop)


def maaqs_exceedance(maxima: RegionalMaxima, thresholds: Thresholds) -> ExceedanceReport:
    thr = thresholds
    o3_h = (maxima.z_o3 > thr.maaqs_ozone_1h) | (maxima.z_o8 > thr.maaqs_ozone_8h)
    pm_h = maxima.z_pm > thr.maaqs_pm10_24h
    o3_d = (maxima.w_o3 > thr.maaqs_ozone_1h) | (maxima.w_o8 > thr.maaqs_ozone_8h)
    pm_d = maxima.w_pm > thr.maaqs_pm10_24h
    return ExceedanceReport(
        hours_total=maxima.z_o3.shape[0],
        days_total=maxima.w_o3.shape[0],
        ozone_hourly=_exceed_summary(o3_h),
        ozone_daily=_exceed_summary(o3_d),
        pm10_hourly=_exceed_summary(pm_h),
        pm10_daily=_exceed_summary(pm_d),
    )


@dataclass
class ExceedanceProfiles:
    """Posterior-mean exceedance proportion by month and by hour of day.

    PM10 is profiled by month only: its 24-hour averages make time-of-day
    patterns meaningless.
    """

    months: list
    ozone_by_month: np.ndarray
    pm10_by_month: np.ndarray
    hours: list
    ozone_by_hour: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["axis", "bin", "ozone", "pm10"])
            for mlabel, o3v, pmv in zip(self.months, self.ozone_by_month, self.pm10_by_month):
                writer.writerow(["month", mlabel, repr(float(o3v)), repr(float(pmv))])
            for h, o3v in zip(self.hours, self.ozone_by_hour):
                writer.writerow(["hour", h, repr(float(o3v)), ""])


def exceedance_profiles(maxima: RegionalMaxima, thresholds: Thresholds) -> ExceedanceProfiles:
    """Aggregate the any-region hourly exceedance indicator by month / hour of day."""
    thr = thresholds
    o3 = ((maxima.z_o3 > thr.maaqs_ozone_1h) | (maxima.z_o8 > thr.maaqs_ozone_8h)).any(axis=-1)
    pm = (maxima.z_pm > thr.maaqs_pm10_24h).any(axis=-1)
    o3_mean = o3.mean(axis=1)  # over draws -> [h]
    pm_mean = pm.mean(axis=1)
    month_labels = [f"{ts.year:04d}-{ts.month:02d}" for ts in maxima.timestamps]
    hour_labels = [ts.hour for ts in maxima.timestamps]
    months = sorted(set(month_labels))
    hours = sorted(set(hour_labels))
    o3_month = np.array([np.mean([v for v, l in zip(o3_mean, month_labels) if l == m]) for m in months])
    pm_month = np.array([np.mean([v for v, l in zip(pm_mean, month_labels) if l == m]) for m in months])
    o3_hour = np.array([np.mean([v for v, l in zip(o3_mean, hour_labels) if l == h]) for h in hours])
    return ExceedanceProfiles(
        months=months,
        ozone_by_month=o3_month,
        pm10_by_month=pm_month,
        hours=hours,
        ozone_by_hour=o3_hour,
    )
