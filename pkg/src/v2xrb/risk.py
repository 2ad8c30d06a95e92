"""Context extraction, context-to-weight maps, accident risk and the
risk-driven backoff allocation.

All speeds are km/h. The closed-form weights here are the ground truth the
bandit is trying to learn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import ContractViolation, ParameterError
from .geometry import NO_NEIGHBOR, mph_to_kmh

# |S_ctx| for the implemented context set {speed, distance}.
N_CONTEXTS = 2
CONTEXT_KEYS = ("v", "d")


@dataclass(frozen=True)
class RiskParams:
    k_v: float = 2.0 / 3.0
    k_d: float = 5.0
    reaction_time_s: float = 1.5
    braking_coeff: float = 170.0
    v_ref_kmh: float = mph_to_kmh(60.0)
    c_d_max: float = 4.0

    def __post_init__(self):
        bad = [name for name in ("k_v", "k_d", "reaction_time_s", "braking_coeff",
                                 "v_ref_kmh", "c_d_max")
               if not getattr(self, name) > 0]
        if bad:
            raise ParameterError(f"risk parameters must be > 0: {bad}", bad)


@dataclass(frozen=True)
class ContextVector:
    c_v: float
    c_d: float

    def __post_init__(self):
        if not (self.c_v >= 0 and self.c_d >= 0):
            raise ContractViolation(f"contexts must be >= 0, got {self}")

    def __getitem__(self, key):
        return {"v": self.c_v, "d": self.c_d}[key]


@dataclass(frozen=True)
class WeightVector:
    w_v: float
    w_d: float

    def __post_init__(self):
        if not (0.0 <= self.w_v <= 1.0 and 0.0 <= self.w_d <= 1.0):
            raise ContractViolation(f"weights must lie in [0, 1], got {self}")

    def __iter__(self):
        yield self.w_v
        yield self.w_d

    def __getitem__(self, key):
        return {"v": self.w_v, "d": self.w_d}[key]


def context_speed_variance(v_kmh: float, v_ref_kmh: float) -> float:
    if v_kmh < 0 or v_ref_kmh < 0:
        raise ContractViolation("speeds must be >= 0")
    return abs(v_kmh - v_ref_kmh)


def weight_speed(c_v: float, k_v: float = 2.0 / 3.0) -> float:
    return math.tanh(k_v * c_v)


def safe_stopping_distance(v_kmh: float, reaction_time_s: float = 1.5,
                           braking_coeff: float = 170.0) -> float:
    """Reaction distance plus braking distance, in meters, for a km/h speed."""
    if v_kmh < 0:
        raise ContractViolation("speed must be >= 0")
    return reaction_time_s * v_kmh * 10.0 / 36.0 + v_kmh * v_kmh / braking_coeff


def context_distance_ratio(d_min_m: float, d_ref_m: float, c_d_max: float = 4.0) -> float:
    """Gap to the nearest vehicle relative to the safe stopping distance.

    A lone vehicle or a stationary one (``d_ref == 0``) gets ``c_d_max``.
    """
    if d_min_m == NO_NEIGHBOR or d_ref_m <= 0:
        return c_d_max
    return d_min_m / d_ref_m


def weight_distance(c_d: float, k_d: float = 5.0) -> float:
    x = k_d * (c_d - 1.0)
    # Two branches so neither exp() overflows.
    if x >= 0:
        e = math.exp(-x)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(x))


def accident_risk(weights: WeightVector | Iterable[float]) -> float:
    ws = list(weights)
    for w in ws:
        if not 0.0 <= w <= 1.0:
            raise ContractViolation(f"weight {w!r} outside [0, 1]")
    return float(sum(ws))


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def backoff_from_risk(ar: float, cw: int, n_ctx: int = N_CONTEXTS) -> int:
    """Backoff counter that falls linearly from CW-1 at AR=0 to 0 at AR=n_ctx."""
    if cw < 2:
        raise ContractViolation(f"cw must be >= 2, got {cw}")
    if not 0.0 <= ar <= n_ctx:
        raise ContractViolation(f"accident risk {ar!r} outside [0, {n_ctx}]")
    return round_half_away((1 - cw) / n_ctx * ar + cw - 1)


def observe_context(speed_kmh: float, v_ref_kmh: float, d_min_m: float,
                    params: RiskParams) -> ContextVector:
    c_v = context_speed_variance(speed_kmh, v_ref_kmh)
    d_ref = safe_stopping_distance(speed_kmh, params.reaction_time_s, params.braking_coeff)
    return ContextVector(c_v, context_distance_ratio(d_min_m, d_ref, params.c_d_max))
