"""Box-counting estimates of the Minkowski dimension."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dde import Trajectory


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (n, D)
    metric: str = "sup"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a cloud needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("coordinates must be finite")
        if self.metric not in ("sup", "euclidean"):
            raise ValueError("metric must be 'sup' or 'euclidean'")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def lower(self) -> np.ndarray:
        return self.points.min(axis=0)

    @property
    def upper(self) -> np.ndarray:
        return self.points.max(axis=0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for row in self.points:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, metric: str = "sup") -> "PointCloud":
        with open(path, newline="") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        return cls(np.array(rows), metric)


def covering_number(cloud: PointCloud, eps: float, offset: float = 0.0) -> int:
    """Occupied half-open grid boxes of side ``eps`` anchored at the
    bounding-box corner, shifted by ``offset``·eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    idx = np.floor((cloud.points - cloud.lower) / eps + offset).astype(np.int64)
    return int(np.unique(idx, axis=0).shape[0])


@dataclass(frozen=True)
class DimensionFit:
    estimate: float
    r2: float
    scales: tuple  # (eps, K(eps))
    reliable: bool

    def to_json(self) -> dict:
        return {
            "estimate": self.estimate,
            "r2": self.r2,
            "reliable": self.reliable,
            "scales": [{"eps": e, "count": k} for e, k in self.scales],
        }


def dyadic_scales(eps_min: float, eps_max: float) -> list[float]:
    out = []
    e = eps_max
    while e >= eps_min * (1 - 1e-12):
        out.append(e)
        e /= 2
    return out


def minkowski_dim(cloud: PointCloud, eps_min: float, eps_max: float, offset: float = 0.0,
                  min_reliable: int = 5, r2_min: float = 0.98) -> DimensionFit:
    """Least-squares slope of ln K(ε) against -ln ε over dyadic ε in [eps_min, eps_max]."""
    if not 0 < eps_min < eps_max:
        raise ValueError("need 0 < eps_min < eps_max")
    eps = dyadic_scales(eps_min, eps_max)
    if len(eps) < 3:
        raise ValueError(f"only {len(eps)} dyadic scales in [{eps_min}, {eps_max}]; need at least 3")
    counts = [covering_number(cloud, e, offset) for e in eps]
    x = -np.log(eps)
    y = np.log(counts)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss == 0 else 1.0 - float((resid**2).sum()) / ss
    slope = float(slope) if abs(slope) > 1e-12 else 0.0
    return DimensionFit(slope, r2, tuple(zip(eps, counts)), len(eps) >= min_reliable and r2 >= r2_min)


def embed_trajectory(traj: Trajectory, window: float, D: int, stride: int = 1) -> PointCloud:
    """Map each node time t to (x(t - window + j·window/(D-1)))_j, j = 0..D-1."""
    if D < 1:
        raise ValueError("D must be positive")
    if traj.batched:
        raise ValueError("embed a single trajectory column")
    if traj.T - traj.t0 < window - 1e-12:
        raise ValueError("trajectory does not cover one window")
    offsets = np.array([0.0]) if D == 1 else np.linspace(-window, 0.0, D)
    times = traj.t[traj.t >= traj.t0 + window - 1e-12][::stride]
    pts = np.array([np.concatenate([traj(t + o) for o in offsets]) for t in times])
    return PointCloud(pts, "sup")


def cantor_points(depth: int) -> np.ndarray:
    """Both endpoints of the 2^depth intervals of the middle-thirds construction."""
    left = np.zeros(1)
    for _ in range(depth):
        left = np.concatenate([left / 3, left / 3 + 2 / 3])
    return np.sort(np.concatenate([left, left + 3.0**-depth]))
