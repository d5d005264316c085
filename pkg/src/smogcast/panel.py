"""Hourly station panel: CSV ingestion, imputation, rolling means, lag design.

Input format
------------
stations.csv:      id,name,region,lat,lon
observations.csv:  station_id,timestamp,ozone_ppb,pm10_ugm3,rh_pct,tmp_c

Timestamps are naive local time on an exact hourly grid (no DST handling).
``NA`` marks missing measurements. The panel spans the full hourly grid from
the earliest to the latest timestamp seen; rows absent from the file are
missing. The first ``warmup_hours`` rows are a warm-up window used only for
lags and rolling averages, never as modeling targets.

Hour indices throughout this module are absolute row indices into the panel
(warm-up included). Analysis hour ``t`` lives at absolute index
``warmup_hours + t``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from . import transforms as vst

REGIONS = ("NE", "NW", "CE", "SE", "SW")
POLLUTANTS = ("ozone", "pm10")

_OBS_HEADER = ["station_id", "timestamp", "ozone_ppb", "pm10_ugm3", "rh_pct", "tmp_c"]
_STATION_HEADER = ["id", "name", "region", "lat", "lon"]


@dataclass(frozen=True)
class StationMeta:
    id: str
    name: str
    region: str
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if self.region not in REGIONS:
            raise ValueError(f"station {self.id}: unknown region {self.region!r}, expected one of {REGIONS}")
        if not abs(self.lat) <= 90.0:
            raise ValueError(f"station {self.id}: latitude {self.lat} out of range")
        if not abs(self.lon) <= 180.0:
            raise ValueError(f"station {self.id}: longitude {self.lon} out of range")


@dataclass(frozen=True)
class ImputedCell:
    """Provenance record: where an imputed value came from."""

    variable: str
    station_id: str
    hour: int
    source_station_id: str


@dataclass
class HourlyPanel:
    """Aligned hourly series of two pollutants and two covariates per station.

    Arrays are [n_stations, n_hours_total] with NaN in unobserved cells;
    ``missing`` is a boolean [2, n_stations, n_hours_total] mask for
    (ozone, pm10).
    """

    start: datetime
    warmup_hours: int
    stations: list
    ozone: np.ndarray
    pm10: np.ndarray
    rh: np.ndarray
    tmp: np.ndarray
    missing: np.ndarray
    provenance: list = field(default_factory=list)

    def __post_init__(self) -> None:
        n_s, n_h = self.ozone.shape
        if len(self.stations) != n_s:
            raise ValueError("station list does not match matrix rows")
        for name in ("pm10", "rh", "tmp"):
            if getattr(self, name).shape != (n_s, n_h):
                raise ValueError(f"{name} matrix shape mismatch")
        if self.missing.shape != (2, n_s, n_h):
            raise ValueError("missing mask must be [2, n_stations, n_hours]")
        if not 0 <= self.warmup_hours < n_h:
            raise ValueError("warmup_hours must be smaller than the panel length")
        ids = [s.id for s in self.stations]
        if len(set(ids)) != len(ids):
            raise ValueError("station ids must be unique")

    def validate_concentrations(self) -> None:
        """Observed pollutant values must be nonnegative (ingested data)."""
        for k, arr in enumerate((self.ozone, self.pm10)):
            observed = ~self.missing[k] & np.isfinite(arr)
            if np.any(arr[observed] < 0):
                raise ValueError(f"negative observed {POLLUTANTS[k]} concentration")

    # -- geometry -----------------------------------------------------------
    @property
    def n_stations(self) -> int:
        return len(self.stations)

    @property
    def n_hours_total(self) -> int:
        return self.ozone.shape[1]

    @property
    def n_analysis_hours(self) -> int:
        return self.n_hours_total - self.warmup_hours

    def timestamp(self, hour: int) -> datetime:
        return self.start + timedelta(hours=int(hour))

    def hour_of_day(self, hour) -> np.ndarray:
        """Local hour-of-day for absolute hour indices."""
        return (np.asarray(hour) + self.start.hour) % 24

    def pollutant(self, k: int) -> np.ndarray:
        return (self.ozone, self.pm10)[k]

    def region_index(self) -> np.ndarray:
        """Per-station region index into REGIONS."""
        return np.array([REGIONS.index(s.region) for s in self.stations])

    def station_ids(self) -> list:
        return [s.id for s in self.stations]

    def copy(self) -> "HourlyPanel":
        return HourlyPanel(
            start=self.start,
            warmup_hours=self.warmup_hours,
            stations=list(self.stations),
            ozone=self.ozone.copy(),
            pm10=self.pm10.copy(),
            rh=self.rh.copy(),
            tmp=self.tmp.copy(),
            missing=self.missing.copy(),
            provenance=list(self.provenance),
        )

    def slice_hours(self, end: int) -> "HourlyPanel":
        """Panel truncated to absolute hours [0, end). Warm-up is unchanged."""
        if end <= self.warmup_hours:
            raise ValueError("slice would leave no analysis hours")
        return HourlyPanel(
            start=self.start,
            warmup_hours=self.warmup_hours,
            stations=list(self.stations),
            ozone=self.ozone[:, :end].copy(),
            pm10=self.pm10[:, :end].copy(),
            rh=self.rh[:, :end].copy(),
            tmp=self.tmp[:, :end].copy(),
            missing=self.missing[:, :, :end].copy(),
            provenance=list(self.provenance),
        )


def _parse_timestamp(raw: str) -> datetime:
    ts = datetime.fromisoformat(raw)
    if ts.minute or ts.second or ts.microsecond:
        raise ValueError(f"timestamp {raw!r} is not hour-aligned")
    return ts


def _parse_value(raw: str, what: str, line: int) -> float:
    raw = raw.strip()
    if raw == "NA" or raw == "":
        return np.nan
    try:
        return float(raw)
    except ValueError as exc:
        raise ValueError(f"line {line}: bad {what} value {raw!r}") from exc


def load_stations(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _STATION_HEADER:
            raise ValueError(f"{path}: expected header {','.join(_STATION_HEADER)}")
        return [
            StationMeta(
                id=row["id"],
                name=row["name"],
                region=row["region"],
                lat=float(row["lat"]),
                lon=float(row["lon"]),
            )
            for row in reader
        ]


def load_panel(station_csv, observations_csv, warmup_hours: int) -> HourlyPanel:
    """Load station metadata and observations onto the full hourly grid.

    Hard errors: unknown station ids, duplicate (station, hour) rows,
    timestamps out of order within a station, non-hour-aligned timestamps,
    and an empty observations file.
    """
    stations = load_stations(station_csv)
    index = {s.id: k for k, s in enumerate(stations)}

    rows = []
    last_ts = {}
    with open(observations_csv, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _OBS_HEADER:
            raise ValueError(f"{observations_csv}: expected header {','.join(_OBS_HEADER)}")
        for ln, row in enumerate(reader, start=2):
            sid = row["station_id"]
            if sid not in index:
                raise ValueError(f"line {ln}: unknown station_id {sid!r}")
            ts = _parse_timestamp(row["timestamp"])
            if sid in last_ts and ts <= last_ts[sid]:
                raise ValueError(f"line {ln}: timestamps for station {sid} are not strictly increasing")
            last_ts[sid] = ts
            rows.append(
                (
                    index[sid],
                    ts,
                    _parse_value(row["ozone_ppb"], "ozone", ln),
                    _parse_value(row["pm10_ugm3"], "pm10", ln),
                    _parse_value(row["rh_pct"], "rh", ln),
                    _parse_value(row["tmp_c"], "tmp", ln),
                )
            )
    if not rows:
        raise ValueError(f"{observations_csv}: no observations")

    t0 = min(r[1] for r in rows)
    t1 = max(r[1] for r in rows)
    n_hours = int((t1 - t0).total_seconds() // 3600) + 1
    n_s = len(stations)

    shape = (n_s, n_hours)
    ozone = np.full(shape, np.nan)
    pm10 = np.full(shape, np.nan)
    rh = np.full(shape, np.nan)
    tmp = np.full(shape, np.nan)
    seen = np.zeros(shape, dtype=bool)

    for si, ts, o3, pm, r, tm in rows:
        h = int((ts - t0).total_seconds() // 3600)
        if seen[si, h]:
            raise ValueError(f"duplicate observation for station {stations[si].id} at {ts.isoformat()}")
        seen[si, h] = True
        ozone[si, h] = o3
        pm10[si, h] = pm
        rh[si, h] = r
        tmp[si, h] = tm

    missing = np.stack([~np.isfinite(ozone), ~np.isfinite(pm10)])
    if not 0 <= warmup_hours < n_hours:
        raise ValueError(f"warmup_hours={warmup_hours} does not fit a {n_hours}-hour panel")
    out = HourlyPanel(
        start=t0,
        warmup_hours=warmup_hours,
        stations=stations,
        ozone=ozone,
        pm10=pm10,
        rh=rh,
        tmp=tmp,
        missing=missing,
    )
    out.validate_concentrations()
    return out


def _fmt(x: float) -> str:
    return "NA" if not np.isfinite(x) else repr(float(x))


def write_panel(panel: HourlyPanel, station_csv, observations_csv) -> None:
    """Write a panel back to the two-file CSV format (bit-exact round trip)."""
    with open(station_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_STATION_HEADER)
        for s in panel.stations:
            writer.writerow([s.id, s.name, s.region, repr(s.lat), repr(s.lon)])
    with open(observations_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_OBS_HEADER)
        for si, s in enumerate(panel.stations):
            for h in range(panel.n_hours_total):
                o3 = np.nan if panel.missing[0, si, h] else panel.ozone[si, h]
                pm = np.nan if panel.missing[1, si, h] else panel.pm10[si, h]
                writer.writerow(
                    [
                        s.id,
                        panel.timestamp(h).isoformat(),
                        _fmt(o3),
                        _fmt(pm),
                        _fmt(panel.rh[si, h]),
                        _fmt(panel.tmp[si, h]),
                    ]
                )


def nearest_station_impute(panel: HourlyPanel, spatial) -> HourlyPanel:
    """Fill missing cells from the nearest station observed at the same hour.

    Same-region stations are preferred; if the whole region is unobserved at
    that hour, the nearest station in any region donates. Ties break on
    lexicographic station id. Donors are stations observed in the input panel,
    never previously imputed cells. Observed cells are never altered.
    """
    out = panel.copy()
    dist = spatial.dist
    region = panel.region_index()
    ids = panel.station_ids()
    order = {}  # per target station: donor candidates sorted by preference

    def donor_order(si: int):
        if si not in order:
            cand = [j for j in range(panel.n_stations) if j != si]
            cand.sort(key=lambda j: (region[j] != region[si], dist[si, j], ids[j]))
            order[si] = cand
        return order[si]

    fields = [
        ("ozone", panel.ozone, out.ozone, ~panel.missing[0]),
        ("pm10", panel.pm10, out.pm10, ~panel.missing[1]),
        ("rh", panel.rh, out.rh, np.isfinite(panel.rh)),
        ("tmp", panel.tmp, out.tmp, np.isfinite(panel.tmp)),
    ]
    for name, src, dst, observed in fields:
        holes = np.argwhere(~observed)
        for si, h in holes:
            donor = next((j for j in donor_order(int(si)) if observed[j, h]), None)
            if donor is None:
                raise ValueError(
                    f"all stations missing {name} at {panel.timestamp(int(h)).isoformat()}; cannot impute"
                )
            dst[si, h] = src[donor, h]
            out.provenance.append(ImputedCell(name, ids[int(si)], int(h), ids[donor]))
    out.missing = np.zeros_like(panel.missing)
    return out


def rolling_mean(series, window: int, t: int) -> float:
    """Mean of ``series[t-window+1 .. t]``; warm-up values count as history."""
    series = np.asarray(series, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    lo = t - window + 1
    if lo < 0 or t >= len(series):
        raise ValueError(f"rolling mean window [{lo}, {t}] out of range for series of length {len(series)}")
    chunk = series[lo : t + 1]
    if not np.all(np.isfinite(chunk)):
        raise ValueError(f"rolling mean window [{lo}, {t}] contains missing values")
    return float(chunk.mean())


@dataclass(frozen=True)
class LagConfig:
    """Positive hour offsets of the autoregressive terms, per pollutant."""

    ozone_lags: tuple
    pm10_lags: tuple

    def __post_init__(self) -> None:
        for name, lags in (("ozone", self.ozone_lags), ("pm10", self.pm10_lags)):
            lags = tuple(lags)
            object.__setattr__(self, f"{name}_lags", lags)
            if any(l < 1 for l in lags):
                raise ValueError(f"{name} lags must be positive hours")
            if list(lags) != sorted(set(lags)):
                raise ValueError(f"{name} lags must be strictly increasing without duplicates")

    def lags(self, pollutant: int) -> tuple:
        return (self.ozone_lags, self.pm10_lags)[pollutant]

    @property
    def max_lag(self) -> int:
        return max(self.ozone_lags + self.pm10_lags, default=0)


N_REGRESSORS = 3  # intercept, previous-hour temperature, previous-hour relative humidity


@dataclass
class LagSet:
    """Modeling-scale outcomes plus the lagged/covariate design for fitting.

    ``y`` holds the two transformed outcome matrices over the full panel
    (warm-up included); analysis hour t maps to column ``warmup + t``. ``x``
    is the regression design for each analysis hour: intercept and the two
    covariates observed one hour earlier. Lag vectors are read directly out of
    ``y`` at fixed offsets.
    """

    panel: HourlyPanel
    config: LagConfig
    transforms: vst.TransformPair
    y: tuple  # (y_ozone, y_pm10), [n_stations, n_hours_total] modeling scale
    x: np.ndarray  # [n_stations, n_analysis_hours, 3]
    hod: np.ndarray  # hour-of-day per analysis hour

    @property
    def n_stations(self) -> int:
        return self.panel.n_stations

    @property
    def n_t(self) -> int:
        return self.panel.n_analysis_hours

    @property
    def warmup(self) -> int:
        return self.panel.warmup_hours

    def lag_stack(self, pollutant: int, y=None) -> np.ndarray:
        """Lagged outcome values [n_lags, n_stations, n_analysis_hours].

        Row j at analysis hour t is the modeling-scale outcome at absolute
        hour ``warmup + t - lag_j``; the earliest analysis hours therefore
        read warm-up columns.
        """
        src = self.y[pollutant] if y is None else y
        w, n_t = self.warmup, self.n_t
        lags = self.config.lags(pollutant)
        if not lags:
            return np.empty((0, self.n_stations, n_t))
        return np.stack([src[:, w - l : w - l + n_t] for l in lags])

    def lag_vector(self, pollutant: int, station: int, t: int) -> np.ndarray:
        """Lag vector for one analysis hour (direct indexing form)."""
        src = self.y[pollutant]
        w = self.warmup
        return np.array([src[station, w + t - l] for l in self.config.lags(pollutant)])


def _transform_outcome(panel: HourlyPanel, pollutant: int, kind: str) -> np.ndarray:
    raw = panel.pollutant(pollutant)
    mask = panel.missing[pollutant]
    observed = ~mask
    bad = observed & ~np.isfinite(raw)
    if np.any(bad):
        si, h = np.argwhere(bad)[0]
        raise ValueError(
            f"{POLLUTANTS[pollutant]} marked observed but non-finite at station "
            f"{panel.stations[si].id}, {panel.timestamp(int(h)).isoformat()}"
        )
    if kind == "log":
        bad = observed & (raw <= 0)
        if np.any(bad):
            si, h = np.argwhere(bad)[0]
            raise ValueError(
                f"log transform needs positive {POLLUTANTS[pollutant]}; offending cell: station "
                f"{panel.stations[si].id}, {panel.timestamp(int(h)).isoformat()}"
            )
    with np.errstate(invalid="ignore"):
        y = vst.forward(np.where(mask, np.nan, raw), kind)
    return y


def build_lags(panel: HourlyPanel, config: LagConfig, transforms: vst.TransformPair) -> LagSet:
    """Assemble modeling-scale outcomes and the fitting design.

    Requires warm-up depth of at least max(lag, 1): the covariates enter at a
    one-hour shift, and the earliest analysis hours draw their lag values from
    the warm-up window.
    """
    need = max(config.max_lag, 1)
    if panel.warmup_hours < need:
        raise ValueError(
            f"warm-up of {panel.warmup_hours} hours is too shallow; "
            f"lags/covariate shift require at least {need}"
        )
    y1 = _transform_outcome(panel, 0, transforms.ozone)
    y2 = _transform_outcome(panel, 1, transforms.pm10)

    w, n_t, n_s = panel.warmup_hours, panel.n_analysis_hours, panel.n_stations
    # warm-up outcomes feed lag vectors: they must be present
    for k, y in enumerate((y1, y2)):
        if np.any(panel.missing[k, :, :w]):
            raise ValueError(
                f"warm-up window has missing {POLLUTANTS[k]} cells; impute before building lags"
            )

    tmp_prev = panel.tmp[:, w - 1 : w - 1 + n_t]
    rh_prev = panel.rh[:, w - 1 : w - 1 + n_t]
    if not np.all(np.isfinite(tmp_prev)) or not np.all(np.isfinite(rh_prev)):
        bad = ~(np.isfinite(tmp_prev) & np.isfinite(rh_prev))
        si, t = np.argwhere(bad)[0]
        raise ValueError(
            f"covariates missing at station {panel.stations[si].id}, "
            f"{panel.timestamp(int(w - 1 + t)).isoformat()}; impute before building lags"
        )
    x = np.empty((n_s, n_t, N_REGRESSORS))
    x[:, :, 0] = 1.0
    x[:, :, 1] = tmp_prev
    x[:, :, 2] = rh_prev

    hod = panel.hour_of_day(np.arange(w, w + n_t))
    return LagSet(panel=panel, config=config, transforms=transforms, y=(y1, y2), x=x, hod=hod)
