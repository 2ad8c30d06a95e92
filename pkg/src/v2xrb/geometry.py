"""Vehicle layout on a rectangle: PPP sampling, random-direction mobility,
and neighborhood queries.

Positions are plain Euclidean on ``[0, l] x [0, w]``; mobility wraps
toroidally so the stationary density stays homogeneous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError

MPH_TO_KMH = 1.609344
KMH_TO_MS = 1000.0 / 3600.0

# Returned by min_neighbor_distance when the vehicle has nobody around.
NO_NEIGHBOR = math.inf

# Refuse PPP draws whose expected count cannot be materialized as objects.
MAX_EXPECTED_COUNT = 5e7

DEFAULT_DENSITY = 1e-4
HIGH_DENSITY = 15e-3


def mph_to_kmh(v_mph: float) -> float:
    return v_mph * MPH_TO_KMH


@dataclass(frozen=True)
class Region:
    length_m: float
    width_m: float

    def __post_init__(self):
        bad = [name for name in ("length_m", "width_m")
               if not (math.isfinite(getattr(self, name)) and getattr(self, name) > 0)]
        if bad:
            raise ParameterError(f"region sides must be finite and > 0: {bad}", bad)

    @property
    def area_m2(self) -> float:
        return self.length_m * self.width_m


@dataclass(frozen=True)
class VehicleState:
    id: int
    x_m: float
    y_m: float
    heading_rad: float
    speed_kmh: float
    v_ref_kmh: float


@dataclass(frozen=True)
class GeometryParams:
    density_per_m2: float = DEFAULT_DENSITY
    cs_range_m: float = 100.0
    speed_sigma_kmh: float = 8.0
    rng_seed: int = 0
    v_ref_kmh: float = mph_to_kmh(60.0)
    heading_jitter_rad: float = math.pi / 8

    def __post_init__(self):
        bad = []
        if not self.density_per_m2 > 0:
            bad.append("density_per_m2")
        if not self.cs_range_m > 0:
            bad.append("cs_range_m")
        if not self.speed_sigma_kmh >= 0:
            bad.append("speed_sigma_kmh")
        if not self.v_ref_kmh > 0:
            bad.append("v_ref_kmh")
        if not self.heading_jitter_rad >= 0:
            bad.append("heading_jitter_rad")
        if bad:
            raise ParameterError(f"invalid geometry parameters: {bad}", bad)


def realization_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent stream for realization ``index`` of a seeded experiment."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _truncated_normal(rng, mean, sigma, size):
    out = rng.normal(mean, sigma, size)
    bad = out < 0
    while bad.any():
        out[bad] = rng.normal(mean, sigma, int(bad.sum()))
        bad = out < 0
    return out


def sample_ppp(region: Region, params: GeometryParams, realization: int = 0) -> list[VehicleState]:
    """Draw one homogeneous PPP realization of vehicles.

    The count is Poisson(density * area); positions are uniform, headings
    uniform on [0, 2pi), speeds Normal(v_ref, sigma) truncated at zero.
    The result depends only on ``(params.rng_seed, realization)``.
    """
    expected = params.density_per_m2 * region.area_m2
    if not (math.isfinite(expected) and 0 < expected <= MAX_EXPECTED_COUNT):
        raise ParameterError(
            f"expected vehicle count {expected!r} outside (0, {MAX_EXPECTED_COUNT:g}]",
            ["density_per_m2"])
    rng = realization_rng(params.rng_seed, realization)
    n = int(rng.poisson(expected))
    xs = rng.uniform(0.0, region.length_m, n)
    ys = rng.uniform(0.0, region.width_m, n)
    headings = rng.uniform(0.0, 2 * math.pi, n)
    if params.speed_sigma_kmh > 0:
        speeds = _truncated_normal(rng, params.v_ref_kmh, params.speed_sigma_kmh, n)
    else:
        speeds = np.full(n, params.v_ref_kmh)
    return [
        VehicleState(i, float(xs[i]), float(ys[i]), float(headings[i]),
                     float(speeds[i]), params.v_ref_kmh)
        for i in range(n)
    ]


def step_mobility(state: VehicleState, region: Region, dt_s: float,
                  rng: np.random.Generator | None = None,
                  jitter_rad: float = math.pi / 8) -> VehicleState:
    """Advance one vehicle by ``dt_s`` along its heading, wrapping on the torus.

    The heading is then perturbed by U(-jitter_rad, +jitter_rad); with no
    ``rng`` the heading is kept.
    """
    if not dt_s > 0:
        raise ParameterError("dt_s must be > 0", ["dt_s"])
    dist = state.speed_kmh * KMH_TO_MS * dt_s
    x = (state.x_m + dist * math.cos(state.heading_rad)) % region.length_m
    y = (state.y_m + dist * math.sin(state.heading_rad)) % region.width_m
    heading = state.heading_rad
    if rng is not None and jitter_rad > 0:
        heading = (heading + rng.uniform(-jitter_rad, jitter_rad)) % (2 * math.pi)
    return replace(state, x_m=x, y_m=y, heading_rad=heading)


def positions(vehicles) -> np.ndarray:
    """(N, 2) array of vehicle coordinates."""
    if not vehicles:
        return np.empty((0, 2))
    return np.array([(v.x_m, v.y_m) for v in vehicles], dtype=float)


def _distances_from(idx, xy):
    dx = xy[:, 0] - xy[idx, 0]
    dy = xy[:, 1] - xy[idx, 1]
    return np.sqrt(dx * dx + dy * dy)


def pairwise_distances(vehicles) -> np.ndarray:
    """Full (N, N) Euclidean distance matrix; the diagonal is zero."""
    xy = positions(vehicles)
    dx = xy[:, None, 0] - xy[None, :, 0]
    dy = xy[:, None, 1] - xy[None, :, 1]
    return np.sqrt(dx * dx + dy * dy)


def _index_of(self_id, vehicles):
    for i, v in enumerate(vehicles):
        if v.id == self_id:
            return i
    raise KeyError(f"vehicle {self_id} not present")


def min_neighbor_distance(self_id, vehicles) -> float:
    """Distance to the nearest other vehicle, or NO_NEIGHBOR when alone."""
    if len(vehicles) < 2:
        return NO_NEIGHBOR
    i = _index_of(self_id, vehicles)
    d = _distances_from(i, positions(vehicles))
    d[i] = np.inf
    return float(d.min())


def count_in_cs_range(self_id, vehicles, cs_range_m: float) -> int:
    """Number of other vehicles within the closed carrier-sense ball."""
    if not cs_range_m > 0:
        raise ParameterError("cs_range_m must be > 0", ["cs_range_m"])
    if len(vehicles) < 2:
        return 0
    i = _index_of(self_id, vehicles)
    d = _distances_from(i, positions(vehicles))
    return int(np.count_nonzero(d <= cs_range_m)) - 1


def neighborhood(vehicles, cs_range_m: float):
    """Per-vehicle nearest-neighbor distance and carrier-sense adjacency.

    Returns ``(d_min, adjacency)`` where ``d_min[i]`` matches
    min_neighbor_distance for vehicle ``i`` and ``adjacency`` is a boolean
    (N, N) matrix with a False diagonal.
    """
    n = len(vehicles)
    if n == 0:
        return np.empty(0), np.zeros((0, 0), dtype=bool)
    d = pairwise_distances(vehicles)
    adjacency = d <= cs_range_m
    np.fill_diagonal(adjacency, False)
    np.fill_diagonal(d, np.inf)
    return d.min(axis=1), adjacency
