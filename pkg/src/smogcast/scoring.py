"""Hold-out evaluation: CRPS, energy score, point scores, lag selection.

The empirical CRPS of an ensemble {Y_1..Y_M} against outcome y is

    mean_j |Y_j - y| - (1 / (2 M^2)) sum_jk |Y_j - Y_k|

evaluated here with an O(M log M) sorted form that matches the double sum to
machine precision. The energy score is the multivariate analogue with
Euclidean norms; predictions and outcomes are standardized per pollutant so
neither scale dominates. All scores are computed on the original
concentration scale.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .gibbs import ChainConfig, run_chain
from .panel import HourlyPanel, LagConfig
from .transforms import TransformPair, inverse as inv

# the standard candidate menu for lag selection
LAG_MENU = (
    (1, 2),
    (1, 2, 24),
    (1, 2, 24, 168),
    (1, 2, 12),
    (1, 2, 12, 24),
    (1, 2, 12, 24, 168),
)


def crps_ecdf(samples, y: float) -> float:
    """Empirical-CDF CRPS of a sample against a scalar outcome."""
    s = np.sort(np.asarray(samples, dtype=float))
    m = len(s)
    if m == 0:
        raise ValueError("CRPS needs at least one sample")
    term1 = np.abs(s - y).mean()
    # sum_{j<k} (s_(k) - s_(j)) via sorted-order weights
    weights = 2.0 * np.arange(m) - (m - 1)
    term2 = float(weights @ s) / (m * m)
    return float(term1 - term2)


def energy_score(samples, y, standardizer=None, chunk: int = 2048) -> float:
    """Empirical energy score of vector samples [M, d] against outcome y [d].

    ``standardizer`` is an optional (mean, sd) pair of length-d arrays applied
    to samples and outcome alike; zero standard deviations are an error.
    """
    s = np.atleast_2d(np.asarray(samples, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    m, d = s.shape
    if m == 0:
        raise ValueError("energy score needs at least one sample")
    if y.shape[0] != d:
        raise ValueError("outcome dimension mismatch")
    if standardizer is not None:
        mean, sd = (np.asarray(a, dtype=float) for a in standardizer)
        if np.any(sd == 0):
            raise ValueError("standardizer has a zero standard deviation")
        s = (s - mean) / sd
        y = (y - mean) / sd
    term1 = float(np.linalg.norm(s - y, axis=1).mean())
    acc = 0.0
    for lo in range(0, m, chunk):
        block = s[lo : lo + chunk]
        diff = block[:, None, :] - s[None, :, :]
        acc += float(np.sqrt((diff**2).sum(axis=2)).sum())
    return term1 - acc / (2.0 * m * m)


def crps_ecdf_batched(draws: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Column-wise empirical CRPS: draws [m, c] against outcomes y [c].

    Same sorted evaluation as ``crps_ecdf``, vectorized across cells.
    """
    m, c = draws.shape
    s = np.sort(draws, axis=0)
    term1 = np.abs(draws - y[None, :]).mean(axis=0)
    weights = 2.0 * np.arange(m) - (m - 1)
    term2 = (weights @ s) / (m * m)
    return term1 - term2


def energy_score_batched(d1, d2, y1, y2, standardizer, chunk: int = 128) -> np.ndarray:
    """Cell-wise bivariate energy scores: d1, d2 are [m, c] draw matrices.

    Evaluates the exact pairwise double sum for every cell, chunked over
    draws to bound memory.
    """
    mean, sd = (np.asarray(a, dtype=float) for a in standardizer)
    if np.any(sd == 0):
        raise ValueError("standardizer has a zero standard deviation")
    a = (d1 - mean[0]) / sd[0]
    b = (d2 - mean[1]) / sd[1]
    ya = (np.asarray(y1, dtype=float) - mean[0]) / sd[0]
    yb = (np.asarray(y2, dtype=float) - mean[1]) / sd[1]
    m = a.shape[0]
    term1 = np.hypot(a - ya[None, :], b - yb[None, :]).mean(axis=0)
    acc = np.zeros(a.shape[1])
    for lo in range(0, m, chunk):
        da = a[lo : lo + chunk, None, :] - a[None, :, :]
        db = b[lo : lo + chunk, None, :] - b[None, :, :]
        acc += np.hypot(da, db).sum(axis=(0, 1))
    return term1 - acc / (2.0 * m * m)


@dataclass(frozen=True)
class PointScores:
    squared_error: float
    absolute_error: float
    covered: bool


def point_scores(samples, y: float, level: float = 0.9) -> PointScores:
    """Squared/absolute error of the predictive mean and central-interval hit."""
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise ValueError("point scores need at least one sample")
    mean = float(s.mean())
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(s, [alpha, 1.0 - alpha])
    return PointScores(
        squared_error=(mean - y) ** 2,
        absolute_error=abs(mean - y),
        covered=bool(lo <= y <= hi),
    )


@dataclass
class ScoreReport:
    """One model's hold-out scores (lower is better except coverage)."""

    lags: tuple
    es: float
    crps_o3: float
    rmse_o3: float
    mae_o3: float
    cov90_o3: float
    crps_pm: float
    rmse_pm: float
    mae_pm: float
    cov90_pm: float


def write_score_reports(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["model", "lags", "es", "crps_o3", "rmse_o3", "mae_o3", "cov_o3", "crps_pm", "rmse_pm", "mae_pm", "cov_pm"]
        )
        for idx, r in enumerate(reports, start=1):
            writer.writerow(
                [idx, "(" + ",".join(str(l) for l in r.lags) + ")"]
                + [repr(float(v)) for v in (r.es, r.crps_o3, r.rmse_o3, r.mae_o3, r.cov90_o3, r.crps_pm, r.rmse_pm, r.mae_pm, r.cov90_pm)]
            )


def holdout_mask(panel: HourlyPanel, fraction: float, seed: int) -> np.ndarray:
    """Random location-time pairs held out jointly for both pollutants.

    Returns a [2, n_stations, n_analysis_hours] boolean mask with identical
    pollutant slices: model comparison scores joint predictions.
    """
    n_s, n_t = panel.n_stations, panel.n_analysis_hours
    n_pairs = int(fraction * n_s * n_t)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n_s * n_t, size=n_pairs, replace=False)
    flat = np.zeros(n_s * n_t, dtype=bool)
    flat[chosen] = True
    pair_mask = flat.reshape(n_s, n_t)
    return np.stack([pair_mask, pair_mask])


def score_imputations(chain, panel: HourlyPanel, transforms: TransformPair) -> ScoreReport:
    """Score a fitted chain's held-out imputations against the true panel."""
    w = panel.warmup_hours
    truths = []
    draws = []
    for k in range(2):
        i_idx, t_idx = chain.imputed_cells[k]
        if len(i_idx) == 0:
            raise ValueError("chain has no held-out cells to score")
        truths.append(panel.pollutant(k)[i_idx, w + t_idx])
        draws.append(inv(chain.imputed[k], transforms.kind(k)))  # [m, cells]
    if not np.all(np.isfinite(truths[0])) or not np.all(np.isfinite(truths[1])):
        raise ValueError("held-out cells must be observed in the source panel")

    standardizer = (
        np.array([truths[0].mean(), truths[1].mean()]),
        np.array([truths[0].std(), truths[1].std()]),
    )
    per_poll = []
    for k in range(2):
        crps_vals = crps_ecdf_batched(draws[k], truths[k])
        means = draws[k].mean(axis=0)
        lo, hi = np.quantile(draws[k], [0.05, 0.95], axis=0)
        covered = (lo <= truths[k]) & (truths[k] <= hi)
        per_poll.append(
            (
                float(crps_vals.mean()),
                float(np.sqrt(np.mean((means - truths[k]) ** 2))),
                float(np.mean(np.abs(means - truths[k]))),
                float(covered.mean()),
            )
        )
    es_vals = energy_score_batched(draws[0], draws[1], truths[0], truths[1], standardizer)
    (crps_o3, rmse_o3, mae_o3, cov_o3), (crps_pm, rmse_pm, mae_pm, cov_pm) = per_poll
    return ScoreReport(
        lags=chain.lag_config.ozone_lags,
        es=float(np.mean(es_vals)),
        crps_o3=crps_o3,
        rmse_o3=rmse_o3,
        mae_o3=mae_o3,
        cov90_o3=cov_o3,
        crps_pm=crps_pm,
        rmse_pm=rmse_pm,
        mae_pm=mae_pm,
        cov90_pm=cov_pm,
    )


def _fit_candidate(args):
    panel, lags, transforms, cfg, mask = args
    lag_config = LagConfig(tuple(lags), tuple(lags))
    chain = run_chain(panel, lag_config, transforms, cfg, holdout_mask=mask)
    return score_imputations(chain, panel, transforms)


def holdout_experiment(
    panel: HourlyPanel,
    candidates,
    transforms: TransformPair,
    config: ChainConfig,
    *,
    fraction: float = 0.1,
    seed: int = 0,
    workers: int = 1,
) -> list:
    """Fit every candidate lag set against one shared random hold-out.

    Candidates are lag tuples applied to both pollutants. The hold-out mask is
    drawn once from ``seed`` and reused so the comparison is paired; each
    candidate gets its own chain seed. Returns one ScoreReport per candidate,
    in input order.
    """
    cand = [tuple(c) for c in candidates]
    for c in cand:
        LagConfig(c, c)  # validates: increasing, positive, no duplicates
    if np.any(panel.missing[:, :, panel.warmup_hours :]):
        raise ValueError("panel has missing analysis cells; impute before a hold-out experiment")
    mask = holdout_mask(panel, fraction, seed)
    seeds = np.random.SeedSequence(seed).spawn(len(cand))
    jobs = [
        (
            panel,
            c,
            transforms,
            ChainConfig(
                n_iter=config.n_iter,
                burn_in=config.burn_in,
                thin=config.thin,
                variant=config.variant,
                seed=int(seeds[j].generate_state(1)[0]),
            ),
            mask,
        )
        for j, c in enumerate(cand)
    ]
    if workers <= 1:
        return [_fit_candidate(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_fit_candidate, jobs))
