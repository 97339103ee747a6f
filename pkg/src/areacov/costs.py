"""Cost and demand functions for servicing and deadheading travel.

Three models:

``length``
    Euclidean length, symmetric.
``ramp_time``
    Travel time of a robot that starts and stops on every edge, accelerating
    at ``a_max`` up to ``v_max``.
``directed_speed_time``
    Constant nominal speed per mode, shifted by the projection of the wind
    onto the direction of travel.  Edges become asymmetric.

Bearings follow the compass convention: 0 deg is +Y (north), 90 deg is +X
(east), and wind is given as the direction it blows *from*.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, WindTooStrong
from .geometry import Segment

MODEL_KINDS = ("length", "ramp_time", "directed_speed_time")
SERVICE = "service"
DEADHEAD = "deadhead"


@dataclass(frozen=True)
class RampParams:
    v_max: float
    a_max: float

    def __post_init__(self):
        if not (self.v_max > 0 and self.a_max > 0):
            raise InvalidParameter(f"v_max and a_max must be positive, got {self.v_max}, {self.a_max}")

    @property
    def d_a(self) -> float:
        """Distance beyond which the robot reaches v_max before decelerating."""
        return self.v_max**2 / self.a_max


@dataclass(frozen=True)
class WindParams:
    speed: float = 0.0
    from_deg: float = 0.0

    def __post_init__(self):
        if not self.speed >= 0:
            raise InvalidParameter(f"wind speed must be non-negative, got {self.speed}")

    @property
    def blow_to(self) -> tuple:
        """Unit vector the wind blows towards, in (east, north) components."""
        b = math.radians(self.from_deg + 180.0)
        return math.sin(b), math.cos(b)


def bearing_vector(bearing_deg: float) -> tuple:
    b = math.radians(bearing_deg)
    return math.sin(b), math.cos(b)


def ramp_time(d, p: RampParams):
    """Time to cover ``d`` meters from rest to rest.

    Accepts scalars or numpy arrays.
    """
    arr = np.asarray(d, dtype=float)
    if np.any(arr < 0):
        raise InvalidParameter("distance must be non-negative")
    t = np.where(arr < p.d_a, np.sqrt(4.0 * arr / p.a_max), p.v_max / p.a_max + arr / p.v_max)
    return float(t) if t.ndim == 0 else t


def directed_speed(nominal: float, wind: WindParams | None, travel_dir) -> float:
    if wind is None or wind.speed == 0:
        return float(nominal)
    if nominal <= wind.speed:
        raise WindTooStrong(f"nominal speed {nominal} does not exceed wind speed {wind.speed}")
    wx, wy = wind.blow_to
    ux, uy = travel_dir
    norm = math.hypot(ux, uy)
    if norm == 0:
        return float(nominal)
    return nominal + wind.speed * (wx * ux + wy * uy) / norm


@dataclass(frozen=True)
class CostModel:
    kind: str = "length"
    service_ramp: RampParams | None = None
    deadhead_ramp: RampParams | None = None
    service_speed: float = 1.0
    deadhead_speed: float = 1.0
    wind: WindParams | None = None
    # separate demand model; None means demand equals cost
    demand: "CostModel | None" = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvalidParameter(f"unknown cost model {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.kind == "ramp_time" and (self.service_ramp is None or self.deadhead_ramp is None):
            raise InvalidParameter("ramp_time model needs ramp parameters for both modes")
        if self.kind == "directed_speed_time":
            for name, v in (("service", self.service_speed), ("deadhead", self.deadhead_speed)):
                if not v > 0:
                    raise InvalidParameter(f"{name} speed must be positive, got {v}")
                if self.wind is not None and self.wind.speed > 0 and v <= self.wind.speed:
                    raise WindTooStrong(f"{name} speed {v} does not exceed wind speed {self.wind.speed}")

    @classmethod
    def length(cls) -> "CostModel":
        return cls("length")

    @classmethod
    def ramp(cls, v_max: float, a_max: float) -> "CostModel":
        p = RampParams(v_max, a_max)
        return cls("ramp_time", service_ramp=p, deadhead_ramp=p)

    @classmethod
    def wind_speeds(cls, service_speed: float, deadhead_speed: float, wind: WindParams | None = None) -> "CostModel":
        return cls("directed_speed_time", service_speed=service_speed, deadhead_speed=deadhead_speed, wind=wind)

    @property
    def symmetric(self) -> bool:
        own = self.kind != "directed_speed_time" or self.wind is None or self.wind.speed == 0
        return own and (self.demand is None or self.demand.symmetric)

    def directed_costs(self, p, q, mode: str) -> tuple:
        """Forward (p->q) and reverse costs for arrays of segment endpoints."""
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        q = np.asarray(q, dtype=float).reshape(-1, 2)
        d = q - p
        length = np.hypot(d[:, 0], d[:, 1])
        if self.kind == "length":
            return length, length.copy()
        if self.kind == "ramp_time":
            ramp = self.service_ramp if mode == SERVICE else self.deadhead_ramp
            t = ramp_time(length, ramp)
            return t, t.copy()
        nominal = self.service_speed if mode == SERVICE else self.deadhead_speed
        if self.wind is None or self.wind.speed == 0:
            t = length / nominal
            return t, t.copy()
        wx, wy = self.wind.blow_to
        with np.errstate(divide="ignore", invalid="ignore"):
            proj = np.where(length > 0, (d[:, 0] * wx + d[:, 1] * wy) / np.where(length > 0, length, 1.0), 0.0)
        fwd = length / (nominal + self.wind.speed * proj)
        rev = length / (nominal - self.wind.speed * proj)
        return fwd, rev


def edge_cost_demand(seg: Segment, mode: str, model: CostModel) -> tuple:
    """``(cost_fwd, cost_rev, demand_fwd, demand_rev)`` for traversing ``seg``."""
    if mode not in (SERVICE, DEADHEAD):
        raise InvalidParameter(f"mode must be 'service' or 'deadhead', got {mode!r}")
    cf, cr = model.directed_costs(seg.a, seg.b, mode)
    if model.demand is None:
        df, dr = cf, cr
    else:
        df, dr = model.demand.directed_costs(seg.a, seg.b, mode)
    return float(cf[0]), float(cr[0]), float(df[0]), float(dr[0])
