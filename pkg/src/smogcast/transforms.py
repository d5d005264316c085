"""Variance-stabilizing transforms between concentration and modeling scales.

Ozone is modeled on the square-root scale and PM10 on the log scale (identity
variants are kept for testing). Inverse transforms map sampler output back to
concentrations; negative square-root-scale draws are clamped to zero before
squaring so that low predictions cannot silently fold into high concentrations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OZONE_KINDS = ("identity", "sqrt")
PM10_KINDS = ("identity", "log")


@dataclass(frozen=True)
class TransformPair:
    """Per-pollutant scale choice (ozone: identity|sqrt, pm10: identity|log)."""

    ozone: str = "sqrt"
    pm10: str = "log"

    def __post_init__(self) -> None:
        if self.ozone not in OZONE_KINDS:
            raise ValueError(f"unknown ozone transform {self.ozone!r}, expected one of {OZONE_KINDS}")
        if self.pm10 not in PM10_KINDS:
            raise ValueError(f"unknown pm10 transform {self.pm10!r}, expected one of {PM10_KINDS}")

    def kind(self, pollutant: int) -> str:
        """Transform kind for pollutant index 0 (ozone) or 1 (pm10)."""
        return (self.ozone, self.pm10)[pollutant]


def forward(values, kind: str) -> np.ndarray:
    """Map concentrations to the modeling scale. NaN entries pass through."""
    x = np.asarray(values, dtype=float)
    if kind == "identity":
        return x.copy()
    if kind == "sqrt":
        if np.any(x[np.isfinite(x)] < 0):
            raise ValueError("sqrt transform requires nonnegative concentrations")
        return np.sqrt(x)
    if kind == "log":
        finite = np.isfinite(x)
        if np.any(x[finite] <= 0):
            raise ValueError("log transform requires strictly positive concentrations")
        with np.errstate(invalid="ignore"):
            return np.log(x)
    raise ValueError(f"unknown transform kind {kind!r}")


def inverse(values, kind: str) -> np.ndarray:
    """Map modeling-scale values back to concentrations.

    sqrt-scale values below zero are clamped to zero before squaring.
    """
    x = np.asarray(values, dtype=float)
    if kind == "identity":
        return x.copy()
    if kind == "sqrt":
        return np.square(np.clip(x, 0.0, None))
    if kind == "log":
        return np.exp(x)
    raise ValueError(f"unknown transform kind {kind!r}")
