"""Blocked Gibbs sampler for the hierarchical bivariate AR-CAR model.

Every block has a conjugate full conditional: Gaussians for station
coefficients, hierarchical means, latent spatial fields, the off-diagonal mix
coefficient, and missing cells; inverse-Wisharts for coefficient covariances;
inverse-gammas for noise variances and the squared field scales. The sweep
order is fixed: station regression coefficients, their hyperparameters,
station autoregressive coefficients, their hyperparameters, noise variances,
the two latent fields, the coregionalization mix, then missing cells.

The heteroscedastic variant indexes noise variances by hour of day; its
conditionals reuse the homoscedastic forms with per-hour likelihood weights.

Scale updates for the coregionalization treat the mixed effects psi as fixed:
after drawing a new squared scale, the latent fields are rescaled so that
psi1 and psi2 (and with them the whole likelihood surface) are unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .model import ModelState, PriorConfig, init_state, N_HOURS_OF_DAY, VARIANTS
from .panel import HourlyPanel, LagConfig, LagSet, build_lags
from .spatial import Coregionalization, SpatialStructure, build_car, pairwise_distances
from .transforms import TransformPair

CHAIN_FILE_VERSION = 1


@dataclass(frozen=True)
class ChainConfig:
    """MCMC run settings. ``thin`` keeps the last draw of each thin-block."""

    n_iter: int
    burn_in: int
    thin: int = 1
    variant: str = "homoscedastic"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.burn_in < 0 or self.n_iter < self.burn_in:
            raise ValueError("need n_iter >= burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def retained(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin

    @classmethod
    def desk(cls, seed: int = 0, variant: str = "homoscedastic") -> "ChainConfig":
        """Small default that runs in minutes on a laptop."""
        return cls(n_iter=6000, burn_in=1000, thin=5, variant=variant, seed=seed)

    @classmethod
    def paper_scale(cls, seed: int = 0, variant: str = "homoscedastic") -> "ChainConfig":
        """Full-length default: 10000 retained draws."""
        return cls(n_iter=110_000, burn_in=10_000, thin=10, variant=variant, seed=seed)


def sample_invgamma(rng, shape: float, rate: float):
    """Draw from InvGamma(shape, rate), density ~ x^{-shape-1} exp(-rate / x)."""
    return rate / rng.gamma(shape)


def sample_invwishart(rng, scale: np.ndarray, df: float) -> np.ndarray:
    """Bartlett-decomposition draw from the inverse-Wishart IW(scale, df).

    The mean is scale / (df - p - 1) when df > p + 1. Equivalent to inverting
    a Wishart(df, scale^{-1}) draw, but built from triangular factors.
    """
    p = scale.shape[0]
    if df < p:
        raise ValueError("inverse-Wishart needs df >= dimension")
    a = np.zeros((p, p))
    for i in range(p):
        a[i, i] = np.sqrt(rng.chisquare(df - i))
        for j in range(i):
            a[i, j] = rng.standard_normal()
    lm = np.linalg.cholesky(scale)
    # scale = lm lm'; draw = lm (a a')^{-1} lm' = (lm a^{-T})(lm a^{-T})'
    factor = lm @ np.linalg.inv(a).T
    return factor @ factor.T


def _mvn_from_precision(rng, prec: np.ndarray, linear: np.ndarray) -> np.ndarray:
    """Draw x ~ N(prec^{-1} linear, prec^{-1}) via the Cholesky factor of prec."""
    chol = np.linalg.cholesky(prec)
    mean = np.linalg.solve(prec, linear)
    z = rng.standard_normal(prec.shape[-1])
    return mean + solve_triangular(chol.T, z, lower=False)


class GibbsSampler:
    """Holds the working data and applies one full-conditional update at a time.

    Outcome matrices live on the modeling scale over the full panel (warm-up
    included); missing and held-out cells are part of the state and get
    redrawn each sweep. All kernels read/write ``self.state`` in place.
    """

    def __init__(
        self,
        lagset: LagSet,
        spatial: SpatialStructure,
        priors: PriorConfig | None = None,
        variant: str = "homoscedastic",
        holdout_mask: np.ndarray | None = None,
        rng: np.random.Generator | None = None,
        state: ModelState | None = None,
    ) -> None:
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        self.lagset = lagset
        self.priors = priors or PriorConfig()
        self.variant = variant
        self.rng = rng or np.random.default_rng(0)
        self.q = spatial.q
        self.n_s = lagset.n_stations
        self.n_t = lagset.n_t
        self.w = lagset.warmup
        self.x = lagset.x  # [n_s, n_t, p]
        self.p = self.x.shape[2]
        self.hod = np.asarray(lagset.hod, dtype=int)
        self.lags = [np.asarray(lagset.config.lags(k), dtype=int) for k in range(2)]

        analysis_missing = lagset.panel.missing[:, :, self.w :]
        if holdout_mask is not None:
            if holdout_mask.shape != analysis_missing.shape:
                raise ValueError("holdout mask must be [2, n_stations, n_analysis_hours]")
            analysis_missing = analysis_missing | holdout_mask
        self.missing_cells = []
        self.yw = []
        for k in range(2):
            y = lagset.y[k].copy()
            cells = np.argwhere(analysis_missing[k])  # (i, t) analysis-relative, row-major
            i_idx, t_idx = cells[:, 0], cells[:, 1]
            if len(i_idx):
                observed = np.where(analysis_missing[k], np.nan, y[:, self.w :])
                fill = np.nanmean(np.where(np.isfinite(observed), observed, np.nan), axis=1)
                fill = np.where(np.isfinite(fill), fill, np.nanmean(observed))
                fill = np.where(np.isfinite(fill), fill, 0.0)
                y[i_idx, self.w + t_idx] = fill[i_idx]
            if not np.all(np.isfinite(y)):
                raise ValueError("outcome matrix contains unexpected non-finite cells")
            self.missing_cells.append((i_idx, t_idx))
            self.yw.append(y)

        self._lag_cache = None
        self.state = state.copy() if state is not None else init_state(lagset, variant=variant)
        if variant == "heteroscedastic_hourly" and not self.state.heteroscedastic:
            self.state.sigma2 = np.repeat(self.state.sigma2[:, None], N_HOURS_OF_DAY, axis=1)

    # -- shared pieces --------------------------------------------------------
    @property
    def has_missing(self) -> bool:
        return any(len(i) for i, _ in self.missing_cells)

    def y_analysis(self, k: int) -> np.ndarray:
        return self.yw[k][:, self.w :]

    def lag_stack(self, k: int) -> np.ndarray:
        if self._lag_cache is None:
            self.refresh_lag_stacks()
        return self._lag_cache[k]

    def refresh_lag_stacks(self) -> None:
        self._lag_cache = [self.lagset.lag_stack(k, y=self.yw[k]) for k in range(2)]

    def weights(self, k: int) -> np.ndarray:
        """Per-analysis-hour likelihood precision 1/sigma^2."""
        st = self.state
        if st.heteroscedastic:
            return 1.0 / st.sigma2[k][self.hod]
        return np.full(self.n_t, 1.0 / st.sigma2[k])

    def regression_term(self, k: int) -> np.ndarray:
        return np.einsum("itp,ip->it", self.x, self.state.beta[k])

    def lag_term(self, k: int) -> np.ndarray:
        if len(self.lags[k]) == 0:
            return np.zeros((self.n_s, self.n_t))
        return np.einsum("jit,ij->it", self.lag_stack(k), self.state.gamma[k])

    def psi(self) -> tuple:
        return self.state.psi()

    def mean_matrix(self, k: int) -> np.ndarray:
        return self.regression_term(k) + self.lag_term(k) + self.psi()[k][:, None]

    # -- station coefficient blocks -------------------------------------------
    def _coef_update(self, design, target, prior_prec, prior_mean, w):
        """Batched conjugate Gaussian draw across stations.

        design: [n_s, n_t, d]; target: [n_s, n_t]; returns draws [n_s, d].
        """
        a = prior_prec[None, :, :] + np.einsum("itp,itq,t->ipq", design, design, w)
        b = (prior_prec @ prior_mean)[None, :] + np.einsum("itp,it,t->ip", design, target, w)
        chol = np.linalg.cholesky(a)
        mean = np.linalg.solve(a, b[..., None])[..., 0]
        z = self.rng.standard_normal(mean.shape)
        noise = np.linalg.solve(np.swapaxes(chol, 1, 2), z[..., None])[..., 0]
        return mean, noise

    def update_beta(self, k: int) -> None:
        st = self.state
        target = self.y_analysis(k) - self.lag_term(k) - self.psi()[k][:, None]
        prior_prec = np.linalg.inv(st.sigma_beta[k])
        mean, noise = self._coef_update(self.x, target, prior_prec, st.beta0[k], self.weights(k))
        st.beta[k] = mean + noise

    def update_beta_site(self, k: int, i: int) -> None:
        st = self.state
        target = self.y_analysis(k) - self.lag_term(k) - self.psi()[k][:, None]
        prior_prec = np.linalg.inv(st.sigma_beta[k])
        w = self.weights(k)
        a = prior_prec + np.einsum("tp,tq,t->pq", self.x[i], self.x[i], w)
        b = prior_prec @ st.beta0[k] + np.einsum("tp,t,t->p", self.x[i], target[i], w)
        st.beta[k][i] = _mvn_from_precision(self.rng, a, b)

    def update_gamma(self, k: int) -> None:
        st = self.state
        if len(self.lags[k]) == 0:
            return
        design = np.moveaxis(self.lag_stack(k), 0, 2)  # [n_s, n_t, n_l]
        target = self.y_analysis(k) - self.regression_term(k) - self.psi()[k][:, None]
        prior_prec = np.linalg.inv(st.sigma_gamma[k])
        mean, noise = self._coef_update(design, target, prior_prec, st.gamma0[k], self.weights(k))
        st.gamma[k] = mean + noise

    def update_gamma_site(self, k: int, i: int) -> None:
        st = self.state
        if len(self.lags[k]) == 0:
            return
        design = self.lag_stack(k)[:, i, :].T  # [n_t, n_l]
        target = (self.y_analysis(k) - self.regression_term(k) - self.psi()[k][:, None])[i]
        prior_prec = np.linalg.inv(st.sigma_gamma[k])
        w = self.weights(k)
        a = prior_prec + np.einsum("tp,tq,t->pq", design, design, w)
        b = prior_prec @ st.gamma0[k] + np.einsum("tp,t,t->p", design, target, w)
        st.gamma[k][i] = _mvn_from_precision(self.rng, a, b)

    # -- hierarchical means and covariances ------------------------------------
    def _hyper_update(self, coefs, prior_sigma_inv):
        n, d = coefs.shape
        prec = n * prior_sigma_inv + np.eye(d) / self.priors.mean_cov_scale
        linear = prior_sigma_inv @ coefs.sum(axis=0)
        return _mvn_from_precision(self.rng, prec, linear)

    def update_beta_hyper(self, k: int) -> None:
        st = self.state
        st.beta0[k] = self._hyper_update(st.beta[k], np.linalg.inv(st.sigma_beta[k]))
        dev = st.beta[k] - st.beta0[k]
        m = self.priors.iw_scale * np.eye(self.p) + dev.T @ dev
        st.sigma_beta[k] = sample_invwishart(self.rng, m, self.n_s + self.p + self.priors.iw_df_offset)

    def update_gamma_hyper(self, k: int) -> None:
        st = self.state
        n_l = len(self.lags[k])
        if n_l == 0:
            return
        st.gamma0[k] = self._hyper_update(st.gamma[k], np.linalg.inv(st.sigma_gamma[k]))
        dev = st.gamma[k] - st.gamma0[k]
        m = self.priors.iw_scale * np.eye(n_l) + dev.T @ dev
        st.sigma_gamma[k] = sample_invwishart(self.rng, m, self.n_s + n_l + self.priors.iw_df_offset)

    # -- noise variances --------------------------------------------------------
    def sigma_conditional(self, k: int):
        """(shape, rate) of the inverse-gamma conditional; per hour of day when
        heteroscedastic."""
        resid = self.y_analysis(k) - self.mean_matrix(k)
        n_cells = self.n_s * self.n_t
        pr = self.priors
        if self.variant == "homoscedastic":
            return pr.ig_shape + n_cells / 2.0, pr.ig_rate + 0.5 * float(np.sum(resid**2))
        ssq = np.bincount(self.hod, weights=np.sum(resid**2, axis=0), minlength=N_HOURS_OF_DAY)
        shape = np.full(N_HOURS_OF_DAY, pr.ig_shape + n_cells / (2.0 * N_HOURS_OF_DAY))
        return shape, pr.ig_rate + 0.5 * ssq

    def update_sigma(self) -> None:
        st = self.state
        for k in range(2):
            shape, rate = self.sigma_conditional(k)
            if self.variant == "homoscedastic":
                st.sigma2[k] = sample_invgamma(self.rng, shape, rate)
            else:
                st.sigma2[k] = rate / self.rng.gamma(shape)

    # -- latent spatial fields ----------------------------------------------------
    def v1_conditional(self):
        st = self.state
        a11, a12, a22 = st.coreg.a11, st.coreg.a12, st.coreg.a22
        w1, w2 = self.weights(0), self.weights(1)
        r1 = self.y_analysis(0) - self.regression_term(0) - self.lag_term(0)
        r2 = self.y_analysis(1) - self.regression_term(1) - self.lag_term(1) - a22 * st.v2[:, None]
        linear = a11 * (r1 * w1).sum(axis=1) + a12 * (r2 * w2).sum(axis=1)
        prec = self.q + (a11**2 * w1.sum() + a12**2 * w2.sum()) * np.eye(self.n_s)
        return prec, linear

    def v2_conditional(self):
        st = self.state
        a12, a22 = st.coreg.a12, st.coreg.a22
        w2 = self.weights(1)
        r = self.y_analysis(1) - self.regression_term(1) - self.lag_term(1) - a12 * st.v1[:, None]
        linear = a22 * (r * w2).sum(axis=1)
        prec = self.q + a22**2 * w2.sum() * np.eye(self.n_s)
        return prec, linear

    def update_v1(self) -> None:
        prec, linear = self.v1_conditional()
        self.state.v1 = _mvn_from_precision(self.rng, prec, linear)

    def update_v2(self) -> None:
        prec, linear = self.v2_conditional()
        self.state.v2 = _mvn_from_precision(self.rng, prec, linear)

    # -- coregionalization ---------------------------------------------------------
    def update_a11(self) -> None:
        """Redraw the first field scale holding psi1 and psi2 fixed."""
        st = self.state
        if not st.coreg.a11 > 0:
            raise RuntimeError("a11 must be strictly positive")
        psi1, psi2 = st.psi()
        rate = self.priors.ig_rate + 0.5 * float(psi1 @ self.q @ psi1)
        new = float(np.sqrt(sample_invgamma(self.rng, self.priors.ig_shape + self.n_s / 2.0, rate)))
        st.v1 = psi1 / new
        st.v2 = (psi2 - st.coreg.a12 * st.v1) / st.coreg.a22
        st.coreg = Coregionalization(new, st.coreg.a12, st.coreg.a22)

    def update_a22(self) -> None:
        """Redraw the second field scale holding psi2 fixed."""
        st = self.state
        if not st.coreg.a11 > 0:
            raise RuntimeError("a11 must be strictly positive")
        eta = st.coreg.a22 * st.v2  # = psi2 - (a12 / a11) psi1
        rate = self.priors.ig_rate + 0.5 * float(eta @ self.q @ eta)
        new = float(np.sqrt(sample_invgamma(self.rng, self.priors.ig_shape + self.n_s / 2.0, rate)))
        st.v2 = eta / new
        st.coreg = Coregionalization(st.coreg.a11, st.coreg.a12, new)

    def a12_conditional(self):
        st = self.state
        w2 = self.weights(1)
        r = self.y_analysis(1) - self.regression_term(1) - self.lag_term(1) - st.coreg.a22 * st.v2[:, None]
        prec = 1.0 / self.priors.mean_cov_scale + float(st.v1 @ st.v1) * w2.sum()
        linear = float(st.v1 @ (r * w2).sum(axis=1))
        return prec, linear

    def update_a12(self) -> None:
        st = self.state
        prec, linear = self.a12_conditional()
        var = 1.0 / prec
        new = var * linear + np.sqrt(var) * self.rng.standard_normal()
        st.coreg = Coregionalization(st.coreg.a11, float(new), st.coreg.a22)

    def update_coreg(self) -> None:
        self.update_a11()
        self.update_a22()
        self.update_a12()

    # -- missing / held-out cells -----------------------------------------------
    def missing_cell_conditional(self, k: int, i: int, t: int):
        """(mean, variance) of one missing cell given everything else.

        The cell enters its own likelihood row and, through the lag vectors,
        the rows at t + lag for every lag inside the analysis window; terms
        past the end of the series are dropped.
        """
        st = self.state
        mmat = self.mean_matrix(k)
        resid = self.y_analysis(k) - mmat
        sig = st.sigma2_by_hour(k, self.hod)
        y_cur = self.yw[k][i, self.w + t]
        prec = 1.0 / sig[t]
        linear = mmat[i, t] / sig[t]
        for j, lag in enumerate(self.lags[k]):
            tf = t + lag
            if tf < self.n_t:
                g = st.gamma[k][i, j]
                prec += g * g / sig[tf]
                linear += g * (resid[i, tf] + g * y_cur) / sig[tf]
        var = 1.0 / prec
        return var * linear, var

    def update_missing(self) -> None:
        from math import sqrt

        st = self.state
        for k in range(2):
            i_idx, t_idx = self.missing_cells[k]
            if len(i_idx) == 0:
                continue
            lags = [int(l) for l in self.lags[k]]
            mmat = self.mean_matrix(k)
            ymat = self.yw[k]
            resid = ymat[:, self.w :] - mmat
            sig = st.sigma2_by_hour(k, self.hod).tolist()
            z = self.rng.standard_normal(len(i_idx))
            n_t, w = self.n_t, self.w
            # plain-float row buffers: the cell loop is pure Python arithmetic
            cur_i = -1
            m_row = r_row = y_row = g_row = None
            for c in range(len(i_idx)):
                i, t = int(i_idx[c]), int(t_idx[c])
                if i != cur_i:
                    if cur_i >= 0:
                        ymat[cur_i] = y_row  # only the outcome matrix persists
                    cur_i = i
                    m_row = mmat[i].tolist()
                    r_row = resid[i].tolist()
                    y_row = ymat[i].tolist()
                    g_row = st.gamma[k][i].tolist()
                y_cur = y_row[w + t]
                s_t = sig[t]
                prec = 1.0 / s_t
                linear = m_row[t] / s_t
                for j, lag in enumerate(lags):
                    tf = t + lag
                    if tf < n_t:
                        g = g_row[j]
                        s_f = sig[tf]
                        prec += g * g / s_f
                        linear += g * (r_row[tf] + g * y_cur) / s_f
                var = 1.0 / prec
                y_new = var * linear + sqrt(var) * z[c]
                delta = y_new - y_cur
                y_row[w + t] = y_new
                r_row[t] += delta
                for j, lag in enumerate(lags):
                    tf = t + lag
                    if tf < n_t:
                        g = g_row[j]
                        m_row[tf] += g * delta
                        r_row[tf] -= g * delta
            if cur_i >= 0:
                ymat[cur_i] = y_row
        self._lag_cache = None  # lag stacks now stale

    def imputed_values(self, k: int) -> np.ndarray:
        i_idx, t_idx = self.missing_cells[k]
        return self.yw[k][i_idx, self.w + t_idx].copy()

    # -- one sweep ------------------------------------------------------------------
    def sweep(self) -> None:
        blocks = self.sweep_blocks()
        for _, fn in blocks:
            fn()

    def sweep_blocks(self) -> list:
        blocks = [
            ("beta sites (ozone)", lambda: self.update_beta(0)),
            ("beta sites (pm10)", lambda: self.update_beta(1)),
            ("beta hyper (ozone)", lambda: self.update_beta_hyper(0)),
            ("beta hyper (pm10)", lambda: self.update_beta_hyper(1)),
            ("gamma sites (ozone)", lambda: self.update_gamma(0)),
            ("gamma sites (pm10)", lambda: self.update_gamma(1)),
            ("gamma hyper (ozone)", lambda: self.update_gamma_hyper(0)),
            ("gamma hyper (pm10)", lambda: self.update_gamma_hyper(1)),
            ("sigma2", self.update_sigma),
            ("V1", self.update_v1),
            ("V2", self.update_v2),
            ("coregionalization", self.update_coreg),
            ("missing cells", self.update_missing),
        ]
        return blocks


@dataclass
class ChainOutput:
    """Thinned post-burn-in draws, stacked parameter-wise, plus imputations."""

    config: ChainConfig
    station_ids: list
    lag_config: LagConfig
    transforms: TransformPair
    beta: np.ndarray  # [m, 2, n_s, p]
    beta0: np.ndarray
    sigma_beta: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    gamma0_1: np.ndarray
    gamma0_2: np.ndarray
    sigma_gamma1: np.ndarray
    sigma_gamma2: np.ndarray
    sigma2: np.ndarray  # [m, 2] or [m, 2, 24]
    v1: np.ndarray
    v2: np.ndarray
    a: np.ndarray  # [m, 3] = (a11, a12, a22)
    imputed_cells: list  # per pollutant: (i_idx, t_idx)
    imputed: list  # per pollutant: [m, n_cells] modeling-scale draws
    diagnostics: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.beta.shape[0]

    @property
    def n_stations(self) -> int:
        return self.beta.shape[2]

    def state(self, m: int) -> ModelState:
        return ModelState(
            beta=self.beta[m].copy(),
            beta0=self.beta0[m].copy(),
            sigma_beta=self.sigma_beta[m].copy(),
            gamma=[self.gamma1[m].copy(), self.gamma2[m].copy()],
            gamma0=[self.gamma0_1[m].copy(), self.gamma0_2[m].copy()],
            sigma_gamma=[self.sigma_gamma1[m].copy(), self.sigma_gamma2[m].copy()],
            sigma2=self.sigma2[m].copy(),
            v1=self.v1[m].copy(),
            v2=self.v2[m].copy(),
            coreg=Coregionalization(*self.a[m]),
        )

    def psi_draws(self) -> tuple:
        """Spatial effects per draw: two [m, n_s] arrays."""
        a11, a12, a22 = self.a[:, 0:1], self.a[:, 1:2], self.a[:, 2:3]
        return a11 * self.v1, a12 * self.v1 + a22 * self.v2

    def sigma2_for_hour(self, k: int, hod: int) -> np.ndarray:
        if self.sigma2.ndim == 3:
            return self.sigma2[:, k, hod]
        return self.sigma2[:, k]

    def to_csv(self, path) -> None:
        """One row per retained draw, named parameter columns."""
        import csv as _csv

        with open(path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            header = [name for name, _ in self.state(0).scalar_labels()]
            writer.writerow(["draw"] + header)
            for m in range(len(self)):
                writer.writerow([m] + [repr(v) for _, v in self.state(m).scalar_labels()])

    def save(self, path) -> None:
        np.savez_compressed(
            path,
            version=np.array(CHAIN_FILE_VERSION),
            n_iter=self.config.n_iter,
            burn_in=self.config.burn_in,
            thin=self.config.thin,
            variant=self.config.variant,
            seed=self.config.seed,
            station_ids=np.array(self.station_ids),
            ozone_lags=np.array(self.lag_config.ozone_lags, dtype=int),
            pm10_lags=np.array(self.lag_config.pm10_lags, dtype=int),
            transform_ozone=self.transforms.ozone,
            transform_pm10=self.transforms.pm10,
            beta=self.beta,
            beta0=self.beta0,
            sigma_beta=self.sigma_beta,
            gamma1=self.gamma1,
            gamma2=self.gamma2,
            gamma0_1=self.gamma0_1,
            gamma0_2=self.gamma0_2,
            sigma_gamma1=self.sigma_gamma1,
            sigma_gamma2=self.sigma_gamma2,
            sigma2=self.sigma2,
            v1=self.v1,
            v2=self.v2,
            a=self.a,
            imputed_i_0=self.imputed_cells[0][0],
            imputed_t_0=self.imputed_cells[0][1],
            imputed_i_1=self.imputed_cells[1][0],
            imputed_t_1=self.imputed_cells[1][1],
            imputed_0=self.imputed[0],
            imputed_1=self.imputed[1],
            diagnostics=json.dumps(self.diagnostics),
        )

    @classmethod
    def load(cls, path) -> "ChainOutput":
        with np.load(path, allow_pickle=False) as z:
            if int(z["version"]) != CHAIN_FILE_VERSION:
                raise ValueError("unsupported chain file version")
            cfg = ChainConfig(
                n_iter=int(z["n_iter"]),
                burn_in=int(z["burn_in"]),
                thin=int(z["thin"]),
                variant=str(z["variant"]),
                seed=int(z["seed"]),
            )
            return cls(
                config=cfg,
                station_ids=[str(s) for s in z["station_ids"]],
                lag_config=LagConfig(
                    tuple(int(v) for v in z["ozone_lags"]), tuple(int(v) for v in z["pm10_lags"])
                ),
                transforms=TransformPair(str(z["transform_ozone"]), str(z["transform_pm10"])),
                beta=z["beta"],
                beta0=z["beta0"],
                sigma_beta=z["sigma_beta"],
                gamma1=z["gamma1"],
                gamma2=z["gamma2"],
                gamma0_1=z["gamma0_1"],
                gamma0_2=z["gamma0_2"],
                sigma_gamma1=z["sigma_gamma1"],
                sigma_gamma2=z["sigma_gamma2"],
                sigma2=z["sigma2"],
                v1=z["v1"],
                v2=z["v2"],
                a=z["a"],
                imputed_cells=[(z["imputed_i_0"], z["imputed_t_0"]), (z["imputed_i_1"], z["imputed_t_1"])],
                imputed=[z["imputed_0"], z["imputed_1"]],
                diagnostics=json.loads(str(z["diagnostics"])),
            )


def _ess_proxy(series: np.ndarray) -> float:
    n = len(series)
    if n < 3 or np.std(series) == 0:
        return float(n)
    x = series - series.mean()
    rho = float(x[:-1] @ x[1:] / (x @ x))
    rho = min(max(rho, -0.999), 0.999)
    return float(np.clip(n * (1 - rho) / (1 + rho), 1.0, n))


def _trace_diagnostics(out: ChainOutput) -> dict:
    diag = {}
    if len(out) == 0:
        return diag
    series = {
        "a11": out.a[:, 0],
        "a12": out.a[:, 1],
        "a22": out.a[:, 2],
    }
    if out.sigma2.ndim == 2:
        series["sigma2_o3"] = out.sigma2[:, 0]
        series["sigma2_pm"] = out.sigma2[:, 1]
    else:
        series["sigma2_o3_mean"] = out.sigma2[:, 0].mean(axis=1)
        series["sigma2_pm_mean"] = out.sigma2[:, 1].mean(axis=1)
    series["beta0_o3_int"] = out.beta0[:, 0, 0]
    series["beta0_pm_int"] = out.beta0[:, 1, 0]
    for name, s in series.items():
        diag[name] = {"mean": float(np.mean(s)), "sd": float(np.std(s)), "ess": _ess_proxy(s)}
    return diag


def _rng_state_to_json(rng: np.random.Generator) -> str:
    state = rng.bit_generator.state
    return json.dumps(state, default=str)


def _rng_state_from_json(payload: str) -> dict:
    state = json.loads(payload)

    def fix(obj):
        if isinstance(obj, dict):
            return {k: fix(v) for k, v in obj.items()}
        if isinstance(obj, list):
            return [fix(v) for v in obj]
        if isinstance(obj, str) and obj.isdigit():
            return int(obj)
        return obj

    return fix(state)


def run_chain(
    panel: HourlyPanel,
    lag_config: LagConfig,
    transforms: TransformPair,
    config: ChainConfig,
    *,
    spatial: SpatialStructure | None = None,
    priors: PriorConfig | None = None,
    holdout_mask: np.ndarray | None = None,
    init: ModelState | None = None,
    checkpoint_path=None,
    resume_from=None,
) -> ChainOutput:
    """Run the full blocked sweep and return thinned post-burn-in draws.

    Deterministic given ``config.seed``. A non-finite value in any block
    aborts with the block name and iteration. When ``checkpoint_path`` is
    given, the final sampler state (including RNG and imputed cells) is saved
    so a later call with ``resume_from`` continues the identical trajectory.
    """
    if spatial is None:
        spatial = build_car(pairwise_distances(panel.stations))
    lagset = build_lags(panel, lag_config, transforms)
    sampler = GibbsSampler(
        lagset,
        spatial,
        priors=priors,
        variant=config.variant,
        holdout_mask=holdout_mask,
        rng=np.random.default_rng(config.seed),
        state=init,
    )

    start_iter = 0
    kept: list = []
    kept_imputed: list = [[], []]
    if resume_from is not None:
        with np.load(resume_from, allow_pickle=False) as z:
            if int(z["version"]) != CHAIN_FILE_VERSION:
                raise ValueError("unsupported checkpoint version")
            start_iter = int(z["iteration"])
            sampler.yw[0][...] = z["y0"]
            sampler.yw[1][...] = z["y1"]
            sampler._lag_cache = None
            sampler.state = ModelState(
                beta=z["beta"],
                beta0=z["beta0"],
                sigma_beta=z["sigma_beta"],
                gamma=[z["gamma_0"], z["gamma_1"]],
                gamma0=[z["gamma0_0"], z["gamma0_1"]],
                sigma_gamma=[z["sigma_gamma_0"], z["sigma_gamma_1"]],
                sigma2=z["sigma2"],
                v1=z["v1"],
                v2=z["v2"],
                coreg=Coregionalization(*(float(v) for v in z["coreg"])),
            )
            sampler.rng.bit_generator.state = _rng_state_from_json(str(z["rng_state"]))
            n_kept = int(z["n_kept"])
            kept = [None] * n_kept
            _restore = {
                "beta": z["kept_beta"],
                "beta0": z["kept_beta0"],
                "sigma_beta": z["kept_sigma_beta"],
                "gamma_0": z["kept_gamma_0"],
                "gamma_1": z["kept_gamma_1"],
                "gamma0_0": z["kept_gamma0_0"],
                "gamma0_1": z["kept_gamma0_1"],
                "sigma_gamma_0": z["kept_sigma_gamma_0"],
                "sigma_gamma_1": z["kept_sigma_gamma_1"],
                "sigma2": z["kept_sigma2"],
                "v1": z["kept_v1"],
                "v2": z["kept_v2"],
                "coreg": z["kept_coreg"],
            }
            for m in range(n_kept):
                kept[m] = ModelState(
                    beta=_restore["beta"][m],
                    beta0=_restore["beta0"][m],
                    sigma_beta=_restore["sigma_beta"][m],
                    gamma=[_restore["gamma_0"][m], _restore["gamma_1"][m]],
                    gamma0=[_restore["gamma0_0"][m], _restore["gamma0_1"][m]],
                    sigma_gamma=[_restore["sigma_gamma_0"][m], _restore["sigma_gamma_1"][m]],
                    sigma2=_restore["sigma2"][m],
                    v1=_restore["v1"][m],
                    v2=_restore["v2"][m],
                    coreg=Coregionalization(*(float(v) for v in _restore["coreg"][m])),
                )
            kept_imputed = [list(z["kept_imputed_0"]), list(z["kept_imputed_1"])]

    for it in range(start_iter, config.n_iter):
        if sampler.has_missing:
            sampler.refresh_lag_stacks()
        for name, fn in sampler.sweep_blocks():
            fn()
            if not sampler.state.all_finite():
                raise RuntimeError(f"non-finite state after block '{name}' at iteration {it}")
        if it >= config.burn_in and (it - config.burn_in + 1) % config.thin == 0:
            kept.append(sampler.state.copy())
            for k in range(2):
                kept_imputed[k].append(sampler.imputed_values(k))

    m = len(kept)
    n_s, p = sampler.n_s, sampler.p
    n1, n2 = len(sampler.lags[0]), len(sampler.lags[1])
    out = ChainOutput(
        config=config,
        station_ids=panel.station_ids(),
        lag_config=lag_config,
        transforms=transforms,
        beta=np.array([s.beta for s in kept]).reshape(m, 2, n_s, p),
        beta0=np.array([s.beta0 for s in kept]).reshape(m, 2, p),
        sigma_beta=np.array([s.sigma_beta for s in kept]).reshape(m, 2, p, p),
        gamma1=np.array([s.gamma[0] for s in kept]).reshape(m, n_s, n1),
        gamma2=np.array([s.gamma[1] for s in kept]).reshape(m, n_s, n2),
        gamma0_1=np.array([s.gamma0[0] for s in kept]).reshape(m, n1),
        gamma0_2=np.array([s.gamma0[1] for s in kept]).reshape(m, n2),
        sigma_gamma1=np.array([s.sigma_gamma[0] for s in kept]).reshape(m, n1, n1),
        sigma_gamma2=np.array([s.sigma_gamma[1] for s in kept]).reshape(m, n2, n2),
        sigma2=np.array([s.sigma2 for s in kept]).reshape(
            (m, 2) if config.variant == "homoscedastic" else (m, 2, N_HOURS_OF_DAY)
        ),
        v1=np.array([s.v1 for s in kept]).reshape(m, n_s),
        v2=np.array([s.v2 for s in kept]).reshape(m, n_s),
        a=np.array([[s.coreg.a11, s.coreg.a12, s.coreg.a22] for s in kept]).reshape(m, 3),
        imputed_cells=[sampler.missing_cells[0], sampler.missing_cells[1]],
        imputed=[
            np.array(kept_imputed[0]).reshape(m, len(sampler.missing_cells[0][0])),
            np.array(kept_imputed[1]).reshape(m, len(sampler.missing_cells[1][0])),
        ],
    )
    out.diagnostics = _trace_diagnostics(out)

    if checkpoint_path is not None:
        st = sampler.state
        np.savez_compressed(
            checkpoint_path,
            version=np.array(CHAIN_FILE_VERSION),
            iteration=config.n_iter,
            y0=sampler.yw[0],
            y1=sampler.yw[1],
            beta=st.beta,
            beta0=st.beta0,
            sigma_beta=st.sigma_beta,
            gamma_0=st.gamma[0],
            gamma_1=st.gamma[1],
            gamma0_0=st.gamma0[0],
            gamma0_1=st.gamma0[1],
            sigma_gamma_0=st.sigma_gamma[0],
            sigma_gamma_1=st.sigma_gamma[1],
            sigma2=st.sigma2,
            v1=st.v1,
            v2=st.v2,
            coreg=np.array([st.coreg.a11, st.coreg.a12, st.coreg.a22]),
            rng_state=_rng_state_to_json(sampler.rng),
            n_kept=len(kept),
            kept_beta=out.beta,
            kept_beta0=out.beta0,
            kept_sigma_beta=out.sigma_beta,
            kept_gamma_0=out.gamma1,
            kept_gamma_1=out.gamma2,
            kept_gamma0_0=out.gamma0_1,
            kept_gamma0_1=out.gamma0_2,
            kept_sigma_gamma_0=out.sigma_gamma1,
            kept_sigma_gamma_1=out.sigma_gamma2,
            kept_sigma2=out.sigma2,
            kept_v1=out.v1,
            kept_v2=out.v2,
            kept_coreg=out.a,
            kept_imputed_0=out.imputed[0],
            kept_imputed_1=out.imputed[1],
        )
    return out
