"""Shared builders for kernel-level and end-to-end tests."""

from __future__ import annotations

import sys
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from smogcast.gibbs import GibbsSampler
from smogcast.model import ModelState, PriorConfig
from smogcast.panel import HourlyPanel, LagConfig, StationMeta, build_lags, N_REGRESSORS
from smogcast.spatial import Coregionalization, build_car, pairwise_distances
from smogcast.transforms import TransformPair


def make_stations(n: int) -> list:
    regions = ("NE", "NW", "CE", "SE", "SW")
    return [
        StationMeta(
            id=f"T{i:02d}",
            name=f"T{i:02d}",
            region=regions[i % 5],
            lat=19.30 + 0.06 * i,
            lon=-99.20 + 0.04 * i + 0.01 * (i % 2),
        )
        for i in range(n)
    ]


def make_panel(n_stations=3, n_hours=50, warmup=2, seed=42, start=datetime(2017, 1, 1)):
    """In-memory panel with smooth-ish arbitrary data on the identity scale."""
    rng = np.random.default_rng(seed)
    n_total = warmup + n_hours
    stations = make_stations(n_stations)
    t = np.arange(n_total)
    ozone = 2.0 + 0.5 * np.sin(2 * np.pi * t / 24)[None, :] + 0.4 * rng.standard_normal((n_stations, n_total))
    pm10 = 1.5 + 0.3 * np.cos(2 * np.pi * t / 24)[None, :] + 0.5 * rng.standard_normal((n_stations, n_total))
    rh = 50 + 10 * rng.standard_normal((n_stations, n_total))
    tmp = 15 + 5 * rng.standard_normal((n_stations, n_total))
    return HourlyPanel(
        start=start - timedelta(hours=warmup),
        warmup_hours=warmup,
        stations=stations,
        ozone=ozone,
        pm10=pm10,
        rh=rh,
        tmp=tmp,
        missing=np.zeros((2, n_stations, n_total), dtype=bool),
    )


def frozen_state(n_stations=3, lags=(1, 2), variant="homoscedastic", seed=5) -> ModelState:
    """A generic fixed state with everything away from zero."""
    rng = np.random.default_rng(seed)
    n_l = len(lags)
    beta = np.stack(
        [
            np.array([2.0, 0.30, -0.15]) + 0.1 * rng.standard_normal((n_stations, N_REGRESSORS)),
            np.array([1.5, -0.20, 0.10]) + 0.1 * rng.standard_normal((n_stations, N_REGRESSORS)),
        ]
    )
    gamma = [
        np.array([0.35, 0.15] + [0.05] * (n_l - 2))[:n_l] + 0.05 * rng.standard_normal((n_stations, n_l)),
        np.array([0.25, 0.10] + [0.05] * (n_l - 2))[:n_l] + 0.05 * rng.standard_normal((n_stations, n_l)),
    ]
    base_cov = 0.3 * np.eye(N_REGRESSORS) + 0.05
    gcov = 0.2 * np.eye(n_l) + 0.03
    sigma2 = np.array([0.5, 0.8])
    if variant == "heteroscedastic_hourly":
        prof = 1.0 + 0.4 * np.sin(2 * np.pi * np.arange(24) / 24)
        sigma2 = np.stack([0.5 * prof, 0.8 * prof])
    return ModelState(
        beta=beta,
        beta0=beta.mean(axis=1),
        sigma_beta=np.stack([base_cov, base_cov * 1.2]),
        gamma=gamma,
        gamma0=[g.mean(axis=0) for g in gamma],
        sigma_gamma=[gcov, gcov * 1.1],
        sigma2=sigma2,
        v1=np.array([0.4, -0.2, 0.3])[:n_stations] if n_stations <= 3 else 0.3 * rng.standard_normal(n_stations),
        v2=np.array([-0.3, 0.2, 0.1])[:n_stations] if n_stations <= 3 else 0.3 * rng.standard_normal(n_stations),
        coreg=Coregionalization(0.8, 0.3, 1.2),
    )


def make_kernel_instance(variant="homoscedastic", n_stations=3, n_hours=50, lags=(1, 2), holdout=None, seed=42):
    """(sampler, oracle data dict, frozen state) for conditional checks."""
    panel = make_panel(n_stations=n_stations, n_hours=n_hours, warmup=max(lags), seed=seed)
    lag_config = LagConfig(tuple(lags), tuple(lags))
    transforms = TransformPair("identity", "identity")
    lagset = build_lags(panel, lag_config, transforms)
    spatial = build_car(pairwise_distances(panel.stations))
    sampler = GibbsSampler(
        lagset,
        spatial,
        priors=PriorConfig(),
        variant=variant,
        holdout_mask=holdout,
        rng=np.random.default_rng(seed + 1),
    )
    sampler.state = frozen_state(n_stations=n_stations, lags=lags, variant=variant)
    data = {
        "y": (sampler.y_analysis(0).copy(), sampler.y_analysis(1).copy()),
        "x": lagset.x,
        "lstack": (sampler.lag_stack(0).copy(), sampler.lag_stack(1).copy()),
        "hod": np.asarray(lagset.hod, dtype=int),
        "q": spatial.q,
    }
    return sampler, data, sampler.state.copy()


def sample_kernel(sampler, frozen, update, extract, n, restore_y=False):
    """Call a kernel ``n`` times from the same frozen state, collect draws."""
    y_frozen = [y.copy() for y in sampler.yw] if restore_y else None
    out = []
    for _ in range(n):
        update()
        out.append(extract(sampler.state, sampler))
        sampler.state = frozen.copy()
        if restore_y:
            for k in range(2):
                sampler.yw[k][...] = y_frozen[k]
    return np.asarray(out)


@pytest.fixture
def small_panel():
    return make_panel()
