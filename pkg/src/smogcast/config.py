"""Plain-text key=value run configuration with per-module sections.

Unknown sections or keys are hard errors so typos cannot silently fall back
to defaults. ``default_config_text()`` prints the full default file.
"""

from __future__ import annotations

import configparser
import io

from .alerts import Thresholds
from .gibbs import ChainConfig
from .panel import LagConfig
from .transforms import TransformPair

DEFAULTS = {
    "data": {
        "stations": "stations.csv",
        "observations": "observations.csv",
        "warmup_hours": "168",
        "impute": "true",
    },
    "lags": {
        "ozone": "1,2,24,168",
        "pm10": "1,2,24,168",
    },
    "transforms": {
        "ozone": "sqrt",
        "pm10": "log",
    },
    "chain": {
        "n_iter": "110000",
        "burn_in": "10000",
        "thin": "10",
        "variant": "homoscedastic",
        "seed": "0",
    },
    "thresholds": {
        "phase1_ozone": "154",
        "phase2_ozone": "204",
        "phase1_pm10": "214",
        "phase2_pm10": "354",
        "maaqs_ozone_1h": "95",
        "maaqs_ozone_8h": "70",
        "maaqs_pm10_24h": "75",
    },
    "predict": {
        "hours": "10,15,20",
        "seed": "0",
    },
    "holdout": {
        "fraction": "0.1",
        "seed": "0",
        "candidates": "1,2 | 1,2,24 | 1,2,24,168 | 1,2,12 | 1,2,12,24 | 1,2,12,24,168",
    },
    "simulate": {
        "n_stations": "6",
        "n_hours": "720",
        "warmup_hours": "168",
        "seed": "0",
        "sigma2_ozone": "0.16",
        "sigma2_pm10": "0.04",
    },
}


class RunConfig:
    """Validated view over the merged default + user configuration."""

    def __init__(self, values: dict) -> None:
        self.values = values

    def get(self, section: str, key: str) -> str:
        return self.values[section][key]

    def get_int(self, section: str, key: str) -> int:
        return int(self.get(section, key))

    def get_float(self, section: str, key: str) -> float:
        return float(self.get(section, key))

    def get_bool(self, section: str, key: str) -> bool:
        raw = self.get(section, key).strip().lower()
        if raw in ("true", "1", "yes"):
            return True
        if raw in ("false", "0", "no"):
            return False
        raise ValueError(f"[{section}] {key}: expected a boolean, got {raw!r}")

    def get_int_list(self, section: str, key: str) -> tuple:
        raw = self.get(section, key).strip()
        if not raw:
            return ()
        return tuple(int(v.strip()) for v in raw.split(","))

    # -- typed assemblies -----------------------------------------------------
    def lag_config(self) -> LagConfig:
        return LagConfig(self.get_int_list("lags", "ozone"), self.get_int_list("lags", "pm10"))

    def transforms(self) -> TransformPair:
        return TransformPair(self.get("transforms", "ozone"), self.get("transforms", "pm10"))

    def chain_config(self, desk_scale: bool = False, seed: int | None = None) -> ChainConfig:
        use_seed = self.get_int("chain", "seed") if seed is None else seed
        if desk_scale:
            return ChainConfig.desk(seed=use_seed, variant=self.get("chain", "variant"))
        return ChainConfig(
            n_iter=self.get_int("chain", "n_iter"),
            burn_in=self.get_int("chain", "burn_in"),
            thin=self.get_int("chain", "thin"),
            variant=self.get("chain", "variant"),
            seed=use_seed,
        )

    def thresholds(self) -> Thresholds:
        return Thresholds(
            phase1_ozone=self.get_float("thresholds", "phase1_ozone"),
            phase2_ozone=self.get_float("thresholds", "phase2_ozone"),
            phase1_pm10=self.get_float("thresholds", "phase1_pm10"),
            phase2_pm10=self.get_float("thresholds", "phase2_pm10"),
            maaqs_ozone_1h=self.get_float("thresholds", "maaqs_ozone_1h"),
            maaqs_ozone_8h=self.get_float("thresholds", "maaqs_ozone_8h"),
            maaqs_pm10_24h=self.get_float("thresholds", "maaqs_pm10_24h"),
        )

    def holdout_candidates(self) -> list:
        raw = self.get("holdout", "candidates")
        return [tuple(int(v.strip()) for v in part.split(",")) for part in raw.split("|")]

    def as_text(self) -> str:
        parser = configparser.ConfigParser()
        parser.read_dict(self.values)
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


def load_config(path=None) -> RunConfig:
    """Merge a user file over the defaults; unknown sections/keys are errors."""
    merged = {s: dict(kv) for s, kv in DEFAULTS.items()}
    if path is not None:
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_file(fh)
        for section in parser.sections():
            if section not in merged:
                raise ValueError(f"unknown config section [{section}]")
            for key, value in parser.items(section):
                if key not in merged[section]:
                    raise ValueError(f"unknown config key '{key}' in section [{section}]")
                merged[section][key] = value
    return RunConfig(merged)


def default_config_text() -> str:
    return RunConfig({s: dict(kv) for s, kv in DEFAULTS.items()}).as_text()
