"""Distance-decay spatial structure for the station network.

Builds great-circle distances, the exponential-decay proximity matrix W with
decay rate fixed at the inverse of the maximum inter-station distance, the
(intrinsic, row-sum-zero) precision Q = D_W - W, and the lower-triangular
coregionalization mix that turns two independent latent fields into correlated
per-pollutant spatial effects.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EARTH_RADIUS_KM = 6371.0


def haversine_km(lat1, lon1, lat2, lon2) -> float:
    """Great-circle distance in km on a sphere of radius EARTH_RADIUS_KM."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(lon2) - np.radians(lon1)
    a = np.sin(dphi / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2.0) ** 2
    return float(2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(a)))


def pairwise_distances(stations) -> np.ndarray:
    """Symmetric haversine distance matrix (km) with zero diagonal.

    Warns when two distinct stations share coordinates; the decay weight for
    such a pair is exp(0) = 1, which downstream code accepts.
    """
    if len(stations) < 2:
        raise ValueError("need at least 2 stations for a distance matrix")
    n = len(stations)
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = haversine_km(stations[i].lat, stations[i].lon, stations[j].lat, stations[j].lon)
            if d == 0.0:
                warnings.warn(
                    f"stations {stations[i].id} and {stations[j].id} share coordinates; "
                    "proximity weight for the pair will be 1"
                )
            dist[i, j] = dist[j, i] = d
    return dist


@dataclass
class SpatialStructure:
    """Proximity matrix, its row sums, and the implied precision Q = D_W - W."""

    dist: np.ndarray
    decay_a: float
    w: np.ndarray
    d_w: np.ndarray  # diagonal entries (row sums of w)
    q: np.ndarray

    @property
    def n_stations(self) -> int:
        return self.dist.shape[0]

    def dump_csv(self, out_dir) -> None:
        """Debug dump of W and Q."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        np.savetxt(out / "proximity_w.csv", self.w, delimiter=",")
        np.savetxt(out / "precision_q.csv", self.q, delimiter=",")


def build_car(dist: np.ndarray) -> SpatialStructure:
    """Build the distance-decay CAR structure from a distance matrix.

    The decay rate is 1 / max pairwise distance, so the farthest pair gets
    weight exp(-1). Q is intrinsic: rows sum to zero, rank n-1 on connected
    graphs; every conditional that uses it adds a positive diagonal.
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    if dist.shape != (n, n):
        raise ValueError("distance matrix must be square")
    if not np.allclose(dist, dist.T):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.diag(dist) != 0.0):
        raise ValueError("distance matrix must have a zero diagonal")
    dmax = float(dist.max())
    if dmax <= 0.0:
        raise ValueError("all distances are zero; decay rate undefined")
    a = 1.0 / dmax
    w = np.exp(-a * dist)
    np.fill_diagonal(w, 0.0)
    d_w = w.sum(axis=1)
    q = np.diag(d_w) - w
    return SpatialStructure(dist=dist, decay_a=a, w=w, d_w=d_w, q=q)


@dataclass
class Coregionalization:
    """Lower-triangular 2x2 mix of two independent spatial fields.

    psi1 = a11 * V1 ; psi2 = a12 * V1 + a22 * V2. a11 and a22 double as the
    scale parameters of the two fields.
    """

    a11: float = 1.0
    a12: float = 0.0
    a22: float = 1.0

    def __post_init__(self) -> None:
        if not (self.a11 > 0.0 and self.a22 > 0.0):
            raise ValueError("a11 and a22 must be strictly positive")

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.a11, 0.0], [self.a12, self.a22]])


def coregionalize(v1: np.ndarray, v2: np.ndarray, coreg: Coregionalization):
    """Mix two latent fields into the per-pollutant spatial effects."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.shape != v2.shape:
        raise ValueError(f"latent field length mismatch: {v1.shape} vs {v2.shape}")
    psi1 = coreg.a11 * v1
    psi2 = coreg.a12 * v1 + coreg.a22 * v2
    return psi1, psi2
