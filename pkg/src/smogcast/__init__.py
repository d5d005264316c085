"""Hourly ozone/PM10 forecasting with phase-alert and exceedance inference."""

__version__ = "0.1.0"

from .alerts import Thresholds, classify_phase
from .gibbs import ChainConfig, ChainOutput, run_chain
from .model import ModelState, PriorConfig, init_state
from .panel import HourlyPanel, LagConfig, StationMeta, load_panel, nearest_station_impute, rolling_mean
from .scoring import crps_ecdf, energy_score, holdout_experiment
from .spatial import Coregionalization, build_car, coregionalize, pairwise_distances
from .synthetic import SynthSpec, generate
from .transforms import TransformPair

__all__ = [
    "ChainConfig",
    "ChainOutput",
    "Coregionalization",
    "HourlyPanel",
    "LagConfig",
    "ModelState",
    "PriorConfig",
    "StationMeta",
    "SynthSpec",
    "Thresholds",
    "TransformPair",
    "build_car",
    "classify_phase",
    "coregionalize",
    "crps_ecdf",
    "energy_score",
    "generate",
    "holdout_experiment",
    "init_state",
    "load_panel",
    "nearest_station_impute",
    "pairwise_distances",
    "rolling_mean",
    "run_chain",
]
