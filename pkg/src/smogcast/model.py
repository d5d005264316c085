"""Model state, prior hyperparameters, and initialization.

The bivariate hourly model, per station i and analysis hour t, on the
modeling scale:

    y[k, i, t] = x[i, t] . beta[k, i] + lags[k, i, t] . gamma[k, i]
                 + psi[k, i] + eps[k, i, t]

with x = (1, previous-hour TMP, previous-hour RH), station coefficients drawn
exchangeably around hierarchical means with inverse-Wishart covariances, iid
(or hour-of-day) Gaussian noise, and spatial effects psi obtained by mixing
two latent CAR fields through a lower-triangular coregionalization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .panel import LagSet, N_REGRESSORS
from .spatial import Coregionalization

N_HOURS_OF_DAY = 24
VARIANTS = ("homoscedastic", "heteroscedastic_hourly")

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class PriorConfig:
    """Fixed prior hyperparameters.

    ``mean_cov_scale`` is the Normal prior variance of the hierarchical means
    and of the off-diagonal mix coefficient; ``iw_scale`` scales the identity
    inverse-Wishart scale matrix; the inverse-Wishart degrees of freedom are
    dimension + ``iw_df_offset``; variance-type blocks get IG(ig_shape,
    ig_rate) priors.
    """

    mean_cov_scale: float = 1e3
    iw_scale: float = 1e3
    iw_df_offset: int = 1
    ig_shape: float = 1.0
    ig_rate: float = 1.0

    def __post_init__(self) -> None:
        for name in ("mean_cov_scale", "iw_scale", "ig_shape", "ig_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class ModelState:
    """One full set of sampled parameters.

    Pollutant index k: 0 = ozone, 1 = pm10. ``beta`` is [2, n_stations, 3];
    gamma blocks are per-pollutant because lag counts differ. ``sigma2`` is
    [2] for the homoscedastic variant, [2, 24] indexed by hour of day for the
    heteroscedastic one.
    """

    beta: np.ndarray
    beta0: np.ndarray
    sigma_beta: np.ndarray
    gamma: list
    gamma0: list
    sigma_gamma: list
    sigma2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    coreg: Coregionalization

    @property
    def n_stations(self) -> int:
        return self.beta.shape[1]

    @property
    def heteroscedastic(self) -> bool:
        return self.sigma2.ndim == 2

    def sigma2_by_hour(self, k: int, hod) -> np.ndarray:
        """Noise variance for pollutant k at the given hour(s) of day."""
        if self.heteroscedastic:
            return self.sigma2[k][np.asarray(hod)]
        return np.broadcast_to(self.sigma2[k], np.asarray(hod).shape).copy()

    def psi(self) -> tuple:
        from .spatial import coregionalize

        return coregionalize(self.v1, self.v2, self.coreg)

    def copy(self) -> "ModelState":
        return ModelState(
            beta=self.beta.copy(),
            beta0=self.beta0.copy(),
            sigma_beta=self.sigma_beta.copy(),
            gamma=[g.copy() for g in self.gamma],
            gamma0=[g.copy() for g in self.gamma0],
            sigma_gamma=[s.copy() for s in self.sigma_gamma],
            sigma2=self.sigma2.copy(),
            v1=self.v1.copy(),
            v2=self.v2.copy(),
            coreg=Coregionalization(self.coreg.a11, self.coreg.a12, self.coreg.a22),
        )

    def all_finite(self) -> bool:
        arrays = [self.beta, self.beta0, self.sigma_beta, self.sigma2, self.v1, self.v2]
        arrays += list(self.gamma) + list(self.gamma0) + list(self.sigma_gamma)
        arrays.append(np.array([self.coreg.a11, self.coreg.a12, self.coreg.a22]))
        return all(np.all(np.isfinite(a)) for a in arrays)

    # -- checkpoint IO -------------------------------------------------------
    def save(self, path) -> None:
        np.savez(
            path,
            version=np.array(CHECKPOINT_VERSION),
            beta=self.beta,
            beta0=self.beta0,
            sigma_beta=self.sigma_beta,
            gamma_0=self.gamma[0],
            gamma_1=self.gamma[1],
            gamma0_0=self.gamma0[0],
            gamma0_1=self.gamma0[1],
            sigma_gamma_0=self.sigma_gamma[0],
            sigma_gamma_1=self.sigma_gamma[1],
            sigma2=self.sigma2,
            v1=self.v1,
            v2=self.v2,
            coreg=np.array([self.coreg.a11, self.coreg.a12, self.coreg.a22]),
        )

    @classmethod
    def load(cls, path) -> "ModelState":
        with np.load(path) as z:
            if int(z["version"]) != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported state version {int(z['version'])}")
            a11, a12, a22 = z["coreg"]
            return cls(
                beta=z["beta"],
                beta0=z["beta0"],
                sigma_beta=z["sigma_beta"],
                gamma=[z["gamma_0"], z["gamma_1"]],
                gamma0=[z["gamma0_0"], z["gamma0_1"]],
                sigma_gamma=[z["sigma_gamma_0"], z["sigma_gamma_1"]],
                sigma2=z["sigma2"],
                v1=z["v1"],
                v2=z["v2"],
                coreg=Coregionalization(float(a11), float(a12), float(a22)),
            )

    def scalar_labels(self) -> list:
        """Flat (name, value) view of the state, fixed order, for CSV dumps."""
        out = []
        poll = ("o3", "pm")
        for k in range(2):
            for i in range(self.n_stations):
                for j, nm in enumerate(("int", "tmp", "rh")):
                    out.append((f"beta_{poll[k]}_s{i}_{nm}", self.beta[k, i, j]))
        for k in range(2):
            for j, nm in enumerate(("int", "tmp", "rh")):
                out.append((f"beta0_{poll[k]}_{nm}", self.beta0[k, j]))
        for k in range(2):
            for i in range(self.n_stations):
                for j in range(self.gamma[k].shape[1]):
                    out.append((f"gamma_{poll[k]}_s{i}_l{j}", self.gamma[k][i, j]))
            for j in range(self.gamma[k].shape[1]):
                out.append((f"gamma0_{poll[k]}_l{j}", self.gamma0[k][j]))
        if self.heteroscedastic:
            for k in range(2):
                for q in range(N_HOURS_OF_DAY):
                    out.append((f"sigma2_{poll[k]}_h{q}", self.sigma2[k, q]))
        else:
            out.append(("sigma2_o3", self.sigma2[0]))
            out.append(("sigma2_pm", self.sigma2[1]))
        for i in range(self.n_stations):
            out.append((f"v1_s{i}", self.v1[i]))
        for i in range(self.n_stations):
            out.append((f"v2_s{i}", self.v2[i]))
        out += [("a11", self.coreg.a11), ("a12", self.coreg.a12), ("a22", self.coreg.a22)]
        return [(n, float(v)) for n, v in out]


def _station_ols(y_row, x_rows, l_rows, observed):
    """Least squares of one station's outcomes on [covariates | lags]."""
    design = np.concatenate([x_rows, l_rows.T], axis=1) if l_rows.size else x_rows
    design = design[observed]
    target = y_row[observed]
    n_coef = design.shape[1]
    if design.shape[0] < n_coef:
        return None, None
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < n_coef:
        return None, None
    resid = target - design @ coef
    dof = max(design.shape[0] - n_coef, 1)
    return coef, float(resid @ resid / dof)


def init_state(lagset: LagSet, variant: str = "homoscedastic", seed: int = 0) -> ModelState:
    """Deterministic starting point: per-station OLS, identity covariances.

    Hierarchical means start at the across-station averages, noise variances
    at pooled residual variances, latent spatial fields at zero, and the
    coregionalization mix at the identity. Stations whose design is singular
    fall back to zero coefficients with a warning. ``seed`` is accepted for
    interface symmetry; initialization draws no random numbers.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    n_s, n_t, w = lagset.n_stations, lagset.n_t, lagset.warmup
    p = N_REGRESSORS
    beta = np.zeros((2, n_s, p))
    gamma = [np.zeros((n_s, len(lagset.config.lags(k)))) for k in range(2)]
    sigma2 = np.ones(2)

    for k in range(2):
        n_l = gamma[k].shape[1]
        lstack = lagset.lag_stack(k)
        y_analysis = lagset.y[k][:, w:]
        observed_all = ~lagset.panel.missing[k][:, w:]
        resid_vars = []
        for i in range(n_s):
            observed = observed_all[i] & np.isfinite(y_analysis[i])
            if n_l:
                observed = observed & np.all(np.isfinite(lstack[:, i, :]), axis=0)
            coef, rvar = _station_ols(y_analysis[i], lagset.x[i], lstack[:, i, :], observed)
            if coef is None:
                warnings.warn(f"singular design for station {lagset.panel.stations[i].id}; zero-initialized")
                continue
            beta[k, i] = coef[:p]
            gamma[k][i] = coef[p:]
            resid_vars.append(rvar)
        sigma2[k] = float(np.mean(resid_vars)) if resid_vars else 1.0
        if sigma2[k] <= 0:
            sigma2[k] = 1.0

    if variant == "heteroscedastic_hourly":
        sigma2 = np.repeat(sigma2[:, None], N_HOURS_OF_DAY, axis=1)

    return ModelState(
        beta=beta,
        beta0=beta.mean(axis=1),
        sigma_beta=np.stack([np.eye(p), np.eye(p)]),
        gamma=gamma,
        gamma0=[g.mean(axis=0) for g in gamma],
        sigma_gamma=[np.eye(g.shape[1]) if g.shape[1] else np.empty((0, 0)) for g in gamma],
        sigma2=sigma2,
        v1=np.zeros(n_s),
        v2=np.zeros(n_s),
        coreg=Coregionalization(1.0, 0.0, 1.0),
    )
