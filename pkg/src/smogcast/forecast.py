"""One-hour-ahead posterior predictive draws and rolling pollutant summaries.

Predictions at hour t+1 use covariates observed at t and lagged outcomes
observed through t; nothing at or after the target hour is read. Each
retained posterior draw produces exactly one predictive draw.

Two drivers cover the two analyses: the retrospective driver predicts at the
daily alert-evaluation hours with a chain fit to the full record, and the
prospective driver refits month by month and predicts every hour of the
following month.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .gibbs import ChainConfig, ChainOutput, run_chain
from .model import ModelState
from .panel import HourlyPanel, LagConfig
from .transforms import TransformPair, forward as fwd, inverse as inv

PM24_WINDOW = 24
O3_8H_WINDOW = 8
EVALUATION_HOURS = (10, 15, 20)


def _design_row(panel: HourlyPanel, target: int) -> np.ndarray:
    """Covariate vector (1, TMP, RH) observed the hour before ``target``."""
    if target < 1 or target >= panel.n_hours_total + 1:
        raise ValueError(f"target hour {target} out of range")
    tmp = panel.tmp[:, target - 1]
    rh = panel.rh[:, target - 1]
    bad = ~(np.isfinite(tmp) & np.isfinite(rh))
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(
            f"covariate missing at station {panel.stations[i].id}, "
            f"{panel.timestamp(target - 1).isoformat()}"
        )
    return np.stack([np.ones(panel.n_stations), tmp, rh], axis=1)


def _lag_values(panel: HourlyPanel, transforms: TransformPair, k: int, lags, target: int) -> np.ndarray:
    """Modeling-scale lagged outcomes read strictly before ``target``: [n_l, n_s]."""
    vals = []
    for lag in lags:
        h = target - lag
        if h < 0:
            raise ValueError(f"lag {lag} reaches before the panel start at target hour {target}")
        col = panel.pollutant(k)[:, h]
        if np.any(~np.isfinite(col)) or np.any(panel.missing[k, :, h]):
            i = int(np.flatnonzero(~np.isfinite(col) | panel.missing[k, :, h])[0])
            raise ValueError(
                f"lagged outcome missing at station {panel.stations[i].id}, "
                f"{panel.timestamp(h).isoformat()}"
            )
        vals.append(fwd(col, transforms.kind(k)))
    return np.array(vals).reshape(len(lags), panel.n_stations)


def one_step_predict(
    state: ModelState,
    panel: HourlyPanel,
    target: int,
    lag_config: LagConfig,
    transforms: TransformPair,
    rng: np.random.Generator,
) -> tuple:
    """Modeling-scale predictive draw for every station at one target hour.

    Returns (ozone_draws, pm10_draws), each [n_stations]. The mean is the
    linear predictor under ``state``; noise uses the state's (hour-of-day)
    variance.
    """
    x = _design_row(panel, target)
    psi = state.psi()
    hod = int(panel.hour_of_day(target))
    out = []
    for k in range(2):
        lags = lag_config.lags(k)
        lagvals = _lag_values(panel, transforms, k, lags, target)
        mean = np.einsum("ip,ip->i", x, state.beta[k])
        if len(lags):
            mean = mean + np.einsum("ji,ij->i", lagvals, state.gamma[k])
        mean = mean + psi[k]
        sig2 = state.sigma2[k, hod] if state.heteroscedastic else state.sigma2[k]
        out.append(mean + np.sqrt(sig2) * rng.standard_normal(panel.n_stations))
    return out[0], out[1]


def predict_hour(chain: ChainOutput, panel: HourlyPanel, target: int, rng: np.random.Generator) -> dict:
    """Predictive draws for one hour across all retained states: [m, n_s] arrays."""
    transforms = chain.transforms
    x = _design_row(panel, target)
    hod = int(panel.hour_of_day(target))
    psi1, psi2 = chain.psi_draws()
    m = len(chain)
    res = {}
    for k, (psi, gam, key) in enumerate(((psi1, chain.gamma1, "o3"), (psi2, chain.gamma2, "pm"))):
        lags = chain.lag_config.lags(k)
        lagvals = _lag_values(panel, transforms, k, lags, target)  # [n_l, n_s]
        mean = np.einsum("ip,mip->mi", x, chain.beta[:, k]) + psi
        if len(lags):
            mean = mean + np.einsum("ji,mij->mi", lagvals, gam)
        sig2 = chain.sigma2_for_hour(k, hod)  # [m]
        draws = mean + np.sqrt(sig2)[:, None] * rng.standard_normal((m, panel.n_stations))
        res[f"{key}_model"] = draws
        res[key] = inv(draws, transforms.kind(k))
    return res


def _rolling_window(panel: HourlyPanel, k: int, target: int, window: int) -> np.ndarray:
    """Sum of the window-1 observed concentrations before ``target``: [n_s]."""
    lo = target - (window - 1)
    if lo < 0:
        raise ValueError(
            f"need {window - 1} observed hours before target {target}; history starts at the panel"
        )
    chunk = panel.pollutant(k)[:, lo:target]
    if np.any(~np.isfinite(chunk)) or np.any(panel.missing[k, :, lo:target]):
        i = int(np.argwhere(~np.isfinite(chunk) | panel.missing[k, :, lo:target])[0][0])
        raise ValueError(f"missing history for rolling average at station {panel.stations[i].id}")
    return chunk.sum(axis=1)


def predicted_pm24(pm_pred, panel: HourlyPanel, target: int) -> np.ndarray:
    """24-hour average: forecast plus the 23 most recent observed values."""
    hist = _rolling_window(panel, 1, target, PM24_WINDOW)
    return (np.asarray(pm_pred) + hist) / PM24_WINDOW


def predicted_o3_8h(o3_pred, panel: HourlyPanel, target: int) -> np.ndarray:
    """8-hour average: forecast plus the previous seven observed values."""
    hist = _rolling_window(panel, 0, target, O3_8H_WINDOW)
    return (np.asarray(o3_pred) + hist) / O3_8H_WINDOW


@dataclass
class PredictiveDraws:
    """Per-hour predictive draws on both scales plus rolling summaries.

    Arrays are [n_hours, n_draws, n_stations]; memory grows accordingly, so
    year-scale runs should keep retained draw counts at desk scale.
    """

    target_hours: np.ndarray
    timestamps: list
    station_ids: list
    region_index: np.ndarray
    o3: np.ndarray
    pm: np.ndarray
    o3_model: np.ndarray
    pm_model: np.ndarray
    pm24: np.ndarray
    o3_8h: np.ndarray

    @property
    def n_draws(self) -> int:
        return self.o3.shape[1]

    def day_keys(self) -> list:
        return [ts.date() for ts in self.timestamps]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["hour", "station", "draw_index", "o3_ppb", "pm10_ugm3", "pm24", "o3_8h"])
            for h, ts in enumerate(self.timestamps):
                for m in range(self.n_draws):
                    for i, sid in enumerate(self.station_ids):
                        writer.writerow(
                            [
                                ts.isoformat(),
                                sid,
                                m,
                                repr(float(self.o3[h, m, i])),
                                repr(float(self.pm[h, m, i])),
                                repr(float(self.pm24[h, m, i])),
                                repr(float(self.o3_8h[h, m, i])),
                            ]
                        )


def evaluation_hour_indices(panel: HourlyPanel, hours=EVALUATION_HOURS) -> np.ndarray:
    """Absolute indices of analysis hours at the given local hours of day."""
    idx = np.arange(panel.warmup_hours, panel.n_hours_total)
    hod = panel.hour_of_day(idx)
    return idx[np.isin(hod, list(hours))]


def predict_hours(chain: ChainOutput, panel: HourlyPanel, targets, seed: int = 0) -> PredictiveDraws:
    """Materialize predictive draws and rolling summaries for target hours."""
    rng = np.random.default_rng(seed)
    targets = np.asarray(targets, dtype=int)
    m, n_s = len(chain), panel.n_stations
    shape = (len(targets), m, n_s)
    out = {k: np.empty(shape) for k in ("o3", "pm", "o3_model", "pm_model", "pm24", "o3_8h")}
    for h, target in enumerate(targets):
        block = predict_hour(chain, panel, int(target), rng)
        out["o3"][h] = block["o3"]
        out["pm"][h] = block["pm"]
        out["o3_model"][h] = block["o3_model"]
        out["pm_model"][h] = block["pm_model"]
        out["pm24"][h] = predicted_pm24(block["pm"], panel, int(target))
        out["o3_8h"][h] = predicted_o3_8h(block["o3"], panel, int(target))
    return PredictiveDraws(
        target_hours=targets,
        timestamps=[panel.timestamp(int(t)) for t in targets],
        station_ids=panel.station_ids(),
        region_index=panel.region_index(),
        **out,
    )


def retrospective_driver(
    chain: ChainOutput, panel: HourlyPanel, hours=EVALUATION_HOURS, seed: int = 0
) -> PredictiveDraws:
    """One-step-ahead draws at the daily evaluation hours over the full panel."""
    return predict_hours(chain, panel, evaluation_hour_indices(panel, hours), seed=seed)


def month_key(ts: datetime) -> tuple:
    return ts.year, ts.month


@dataclass(frozen=True)
class MonthPlan:
    label: str
    fit_end: int  # absolute hour index; training uses hours < fit_end
    targets: np.ndarray  # absolute hour indices of the prediction month


def prospective_schedule(panel: HourlyPanel) -> list:
    """Month-by-month plan: fit through the previous month, predict the next.

    The first month in the analysis window is never predicted (there is no
    prior month to train on).
    """
    idx = np.arange(panel.warmup_hours, panel.n_hours_total)
    keys = [month_key(panel.timestamp(int(h))) for h in idx]
    months = sorted(set(keys))
    if len(months) < 2:
        raise ValueError("prospective prediction needs a panel spanning at least two months")
    plans = []
    keys = np.array([k[0] * 12 + k[1] for k in keys])
    for mk in months[1:]:
        flat = mk[0] * 12 + mk[1]
        targets = idx[keys == flat]
        fit_end = int(targets[0])
        plans.append(MonthPlan(label=f"{mk[0]:04d}-{mk[1]:02d}", fit_end=fit_end, targets=targets))
    return plans


def _fit_and_predict_month(args) -> tuple:
    (panel, lag_config, transforms, cfg, plan, predict_seed) = args
    sub = panel.slice_hours(plan.fit_end)
    chain = run_chain(sub, lag_config, transforms, cfg)
    draws = predict_hours(chain, panel, plan.targets, seed=predict_seed)
    return plan.label, draws


def prospective_driver(
    panel: HourlyPanel,
    lag_config: LagConfig,
    transforms: TransformPair,
    config: ChainConfig,
    *,
    workers: int = 1,
) -> list:
    """Fit fresh chains month by month and predict every hour of the next month.

    Returns [(month label, PredictiveDraws)] in calendar order, deterministic
    given ``config.seed`` regardless of worker count.
    """
    plans = prospective_schedule(panel)
    seeds = np.random.SeedSequence(config.seed).spawn(2 * len(plans))
    jobs = []
    for j, plan in enumerate(plans):
        cfg = ChainConfig(
            n_iter=config.n_iter,
            burn_in=config.burn_in,
            thin=config.thin,
            variant=config.variant,
            seed=int(seeds[2 * j].generate_state(1)[0]),
        )
        jobs.append((panel, lag_config, transforms, cfg, plan, int(seeds[2 * j + 1].generate_state(1)[0])))
    if workers <= 1:
        return [_fit_and_predict_month(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_fit_and_predict_month, jobs))
