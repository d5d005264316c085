"""Synthetic panels drawn from the exact generative model with known truth.

The generator inverts the fitted model: latent CAR fields are drawn on the
zero-sum subspace of the intrinsic precision (the constant direction is
projected out; the regression intercept absorbs level), outcomes are built
recursively on the modeling scale, then back-transformed to concentrations.
Used as the ground-truth oracle for sampler validation, scoring experiments,
and acceptance tests.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .model import ModelState, N_HOURS_OF_DAY
from .panel import HourlyPanel, LagConfig, StationMeta, REGIONS, N_REGRESSORS
from .spatial import Coregionalization, build_car, pairwise_distances
from .transforms import TransformPair, inverse as inverse_transform


def draw_car_field(rng, q: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Draw from the intrinsic CAR prior restricted to its non-null space.

    Eigendirections with (relatively) zero eigenvalue -- the constant vector
    on a connected proximity graph -- are projected out; the rest are scaled
    by 1/sqrt(eigenvalue).
    """
    vals, vecs = np.linalg.eigh(q)
    keep = vals > rtol * vals.max()
    z = rng.standard_normal(int(keep.sum()))
    return vecs[:, keep] @ (z / np.sqrt(vals[keep]))


def ar_spectral_radius(lags, coefs) -> float:
    """Spectral radius of the companion matrix of the lag polynomial."""
    lags = np.asarray(lags, dtype=int)
    if len(lags) == 0:
        return 0.0
    order = int(lags.max())
    comp = np.zeros((order, order))
    for lag, c in zip(lags, coefs):
        comp[0, lag - 1] = c
    if order > 1:
        comp[1:, :-1] = np.eye(order - 1)
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def simulate_outcomes(y, x, beta, gamma, psi, sigma2_series, lags, warmup, rng) -> None:
    """Fill ``y[:, warmup:]`` recursively, in place, on the modeling scale.

    y: [n_s, warmup + n_t] with warm-up columns already set; x: [n_s, n_t, p];
    beta: [n_s, p]; gamma: [n_s, n_l]; psi: [n_s]; sigma2_series: [n_t]
    per-hour noise variance.
    """
    n_t = x.shape[1]
    lags = np.asarray(lags, dtype=int)
    sd = np.sqrt(np.asarray(sigma2_series, dtype=float))
    base = np.einsum("itp,ip->it", x, beta) + psi[:, None]
    noise = rng.standard_normal((y.shape[0], n_t))
    for t in range(n_t):
        val = base[:, t]
        for j, lag in enumerate(lags):
            val = val + gamma[:, j] * y[:, warmup + t - lag]
        y[:, warmup + t] = val + sd[t] * noise[:, t]


def default_station_layout(n_stations: int, rng) -> tuple:
    """Deterministic-ish scatter of stations around a metro center."""
    lat = 19.40 + 0.35 * rng.uniform(-1, 1, n_stations)
    lon = -99.15 + 0.35 * rng.uniform(-1, 1, n_stations)
    stations = []
    for i in range(n_stations):
        stations.append(
            StationMeta(
                id=f"S{i:02d}",
                name=f"S{i:02d}",
                region=REGIONS[i % len(REGIONS)],
                lat=float(lat[i]),
                lon=float(lon[i]),
            )
        )
    return stations


@dataclass
class SynthSpec:
    """Everything needed to generate one synthetic panel with known truth.

    Per-station coefficients are the hierarchical means plus Gaussian jitter
    with the given spreads. Covariates are iid Gaussian unless arrays are
    supplied. The analysis period starts at ``analysis_start``; the warm-up
    window precedes it.
    """

    n_stations: int = 5
    n_hours: int = 2000
    warmup_hours: int = 168
    lag_config: LagConfig = field(default_factory=lambda: LagConfig((1, 2, 24), (1, 2, 24)))
    transforms: TransformPair = field(default_factory=TransformPair)
    analysis_start: datetime = datetime(2017, 1, 1)
    seed: int = 0
    variant: str = "homoscedastic"

    # hierarchical means and spreads on the modeling scale
    beta_mean: np.ndarray | None = None  # [2, 3]; derived from level_mean when omitted
    beta_sd: tuple = (0.10, 0.003, 0.0015)  # per-coefficient station spread
    gamma_mean: tuple | None = None  # per pollutant, len n_lags
    gamma_sd: float = 0.02
    sigma2: tuple = (0.16, 0.04)  # per pollutant; heteroscedastic gets a daily profile
    coreg: Coregionalization = field(default_factory=lambda: Coregionalization(0.15, 0.05, 0.10))
    level_mean: tuple = (5.5, 3.8)  # target stationary levels: sqrt-ozone, log-pm10
    slope_mean: tuple = ((0.02, -0.008), (0.008, -0.006))  # (tmp, rh) per pollutant

    tmp_mean: float = 16.0
    tmp_sd: float = 5.0
    rh_mean: float = 55.0
    rh_sd: float = 15.0

    stations: list | None = None  # override the generated layout

    def resolved_gamma_mean(self) -> list:
        if self.gamma_mean is not None:
            return [np.asarray(g, dtype=float) for g in self.gamma_mean]
        out = []
        for k in range(2):
            lags = self.lag_config.lags(k)
            base = {1: 0.35, 2: 0.10, 12: 0.04, 24: 0.12, 168: 0.08}
            out.append(np.array([base.get(l, 0.04) for l in lags]))
        return out

    def resolved_beta_mean(self) -> np.ndarray:
        """Hierarchical coefficient means, intercepts back-solved so the
        stationary mean sits at ``level_mean`` on the modeling scale."""
        if self.beta_mean is not None:
            return np.asarray(self.beta_mean, dtype=float)
        gamma = self.resolved_gamma_mean()
        out = np.zeros((2, N_REGRESSORS))
        for k in range(2):
            tmp_s, rh_s = self.slope_mean[k]
            carry = tmp_s * self.tmp_mean + rh_s * self.rh_mean
            out[k] = (self.level_mean[k] * (1.0 - gamma[k].sum()) - carry, tmp_s, rh_s)
        return out


def generate(spec: SynthSpec) -> tuple:
    """Generate (HourlyPanel, ModelState truth) from the forward model."""
    rng = np.random.default_rng(spec.seed)
    n_s, n_t, w = spec.n_stations, spec.n_hours, spec.warmup_hours
    need = max(spec.lag_config.max_lag, 1)
    if w < need:
        raise ValueError(f"warm-up of {w} hours cannot support lags up to {need}")

    stations = spec.stations or default_station_layout(n_s, rng)
    spatial = build_car(pairwise_distances(stations))

    beta_mean = spec.resolved_beta_mean()
    gamma_mean = spec.resolved_gamma_mean()
    beta_sd = np.broadcast_to(np.asarray(spec.beta_sd, dtype=float), (N_REGRESSORS,))
    beta = beta_mean[:, None, :] + beta_sd * rng.standard_normal((2, n_s, N_REGRESSORS))
    gamma = [gamma_mean[k][None, :] + spec.gamma_sd * rng.standard_normal((n_s, len(gamma_mean[k]))) for k in range(2)]

    bad = []
    for k in range(2):
        for i in range(n_s):
            if ar_spectral_radius(spec.lag_config.lags(k), gamma[k][i]) >= 1.0:
                bad.append((("ozone", "pm10")[k], stations[i].id))
    if bad:
        warnings.warn(f"explosive autoregression for {bad}; generation proceeds")

    v1 = draw_car_field(rng, spatial.q)
    v2 = draw_car_field(rng, spatial.q)
    psi1 = spec.coreg.a11 * v1
    psi2 = spec.coreg.a12 * v1 + spec.coreg.a22 * v2

    if spec.variant == "heteroscedastic_hourly":
        prof = 1.0 + 0.5 * np.sin(2 * np.pi * np.arange(N_HOURS_OF_DAY) / N_HOURS_OF_DAY)
        sigma2 = np.stack([spec.sigma2[0] * prof, spec.sigma2[1] * prof])
    else:
        sigma2 = np.asarray(spec.sigma2, dtype=float)

    n_total = w + n_t
    tmp = spec.tmp_mean + spec.tmp_sd * rng.standard_normal((n_s, n_total))
    rh = spec.rh_mean + spec.rh_sd * rng.standard_normal((n_s, n_total))

    x = np.empty((n_s, n_t, N_REGRESSORS))
    x[:, :, 0] = 1.0
    x[:, :, 1] = tmp[:, w - 1 : w - 1 + n_t]
    x[:, :, 2] = rh[:, w - 1 : w - 1 + n_t]

    start = spec.analysis_start - timedelta(hours=w)
    hod = (np.arange(w, w + n_t) + start.hour) % 24

    y_model = []
    x_bar = np.array([1.0, spec.tmp_mean, spec.rh_mean])
    for k, psi in enumerate((psi1, psi2)):
        y = np.zeros((n_s, n_total))
        gsum = gamma[k].sum(axis=1)
        safe = np.abs(1.0 - gsum) > 0.05
        stat_mean = np.where(safe, (beta[k] @ x_bar + psi) / np.where(safe, 1.0 - gsum, 1.0), 0.0)
        sd_k = float(np.sqrt(np.mean(sigma2[k])))
        # jittered warm-up keeps long-lag regressors identifiable from hour one
        y[:, :w] = stat_mean[:, None] + 0.5 * sd_k * rng.standard_normal((n_s, w))
        sig_series = sigma2[k][hod] if sigma2.ndim == 2 else np.full(n_t, sigma2[k])
        simulate_outcomes(y, x, beta[k], gamma[k], psi, sig_series, spec.lag_config.lags(k), w, rng)
        y_model.append(y)

    ozone = inverse_transform(y_model[0], spec.transforms.ozone)
    pm10 = inverse_transform(y_model[1], spec.transforms.pm10)

    panel = HourlyPanel(
        start=start,
        warmup_hours=w,
        stations=stations,
        ozone=ozone,
        pm10=pm10,
        rh=rh,
        tmp=tmp,
        missing=np.zeros((2, n_s, n_total), dtype=bool),
    )
    truth = ModelState(
        beta=beta,
        beta0=beta_mean.copy(),
        sigma_beta=np.stack([np.diag(beta_sd**2)] * 2),
        gamma=gamma,
        gamma0=[g.copy() for g in gamma_mean],
        sigma_gamma=[np.eye(len(g)) * spec.gamma_sd**2 for g in gamma_mean],
        sigma2=sigma2,
        v1=v1,
        v2=v2,
        coreg=spec.coreg,
    )
    return panel, truth
