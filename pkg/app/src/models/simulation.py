"""Scenario, forecast and trace data models."""
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .optimization import ComfortInputs, TuningState
from .plant import DefrostConfig, DeviceSettings, PlantConfig
from .thermal import ThermalParams


def _hourly_profile(value: Union[float, Tuple[float, ...], List[float]], name: str) -> Tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),)
    profile = tuple(float(v) for v in value)
    if len(profile) not in (1, 24):
        raise ValueError(f"{name} must be a scalar or 24 hourly values")
    return profile


@dataclass(frozen=True)
class ReferenceSchedule:
    """Two-level day/night temperature schedule."""
    day: float = 20.0
    night: float = 18.0
    day_start: int = 6
    day_end: int = 23

    def __post_init__(self) -> None:
        if not (0 <= self.day_start <= 24 and 0 <= self.day_end <= 24):
            raise ValueError("schedule hours must lie in [0, 24]")

    def value_at(self, instant: datetime) -> float:
        hour = instant.hour + instant.minute / 60.0
        return self.day if self.day_start <= hour < self.day_end else self.night


@dataclass(frozen=True)
class Economics:
    """Horizon, prices and comfort-band settings for the supervisory planner."""
    dt_h: float = 1.0
    horizon: int = 24
    energy_price: Tuple[float, ...] = (0.15,)
    demand_price: float = 0.8
    delta: float = 3.0
    reference: ReferenceSchedule = field(default_factory=ReferenceSchedule)
    emission_price: float = 0.0
    emission_intensity: Tuple[float, ...] = (0.0,)
    tracking_tau_h: Optional[float] = None
    max_setpoint_rate: Optional[float] = None
    relax_step: float = 0.5
    relax_max: float = 2.0

    def __post_init__(self) -> None:
        object.__setattr__(self, 'energy_price', _hourly_profile(self.energy_price, 'energy_price'))
        object.__setattr__(self, 'emission_intensity',
                           _hourly_profile(self.emission_intensity, 'emission_intensity'))
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.dt_h <= 0:
            raise ValueError("dt_h must be positive")
        if self.delta < 0:
            raise ValueError("comfort half-width must be non-negative")
        if min(self.energy_price) <= 0:
            raise ValueError("energy price must be strictly positive")
        if self.demand_price < 0 or self.emission_price < 0:
            raise ValueError("prices must be non-negative")

    def energy_price_at(self, instant: datetime) -> float:
        if len(self.energy_price) == 1:
            return self.energy_price[0]
        return self.energy_price[instant.hour]

    def emission_intensity_at(self, instant: datetime) -> float:
        if len(self.emission_intensity) == 1:
            return self.emission_intensity[0]
        return self.emission_intensity[instant.hour]


@dataclass(frozen=True)
class ForecastErrorModel:
    """Standard deviations of additive Gaussian forecast errors."""
    sigma_t_out: float = 0.0
    sigma_ghi: float = 0.0
    sigma_wind: float = 0.0
    sigma_rh: float = 0.0

    def __post_init__(self) -> None:
        if min(self.sigma_t_out, self.sigma_ghi, self.sigma_wind, self.sigma_rh) < 0:
            raise ValueError("forecast error standard deviations must be non-negative")


@dataclass(frozen=True)
class ExogenousProfile:
    """Ground-truth generator for the non-HVAC heat input q_e (kW)."""
    base_kw: float = 0.5
    solar_kw_per_100wm2: float = 0.02
    diurnal_kw: float = 0.3
    peak_hour: float = 19.0
    wind_kw_per_ms: float = 0.0


@dataclass
class ForecastSlice:
    """Weather forecast over a planning horizon."""
    timestamps: pd.DatetimeIndex
    t_out: np.ndarray
    ghi: np.ndarray
    wind: np.ndarray
    rh: np.ndarray

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass
class ScenarioConfig:
    """Everything a closed-loop run needs besides the weather."""
    start: datetime
    days: int
    truth_params: ThermalParams
    controller_params: ThermalParams
    plant: PlantConfig = field(default_factory=PlantConfig)
    device: DeviceSettings = field(default_factory=DeviceSettings)
    defrost: DefrostConfig = field(default_factory=DefrostConfig)
    economics: Economics = field(default_factory=Economics)
    tuning: TuningState = field(default_factory=TuningState)
    comfort: ComfortInputs = field(default_factory=lambda: ComfortInputs(20.0, 20.0))
    policy: str = 'mpc'
    constant_setpoint: float = 20.0
    schedule: ReferenceSchedule = field(default_factory=ReferenceSchedule)
    sim_dt_h: float = 0.25
    initial_t_in: float = 20.0
    forecast_error: ForecastErrorModel = field(default_factory=ForecastErrorModel)
    truth_exogenous: ExogenousProfile = field(default_factory=ExogenousProfile)
    disturbance_model: Optional[Any] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.policy not in ('mpc', 'constant', 'schedule'):
            raise ValueError(f"unknown policy '{self.policy}'")
        if self.days < 1:
            raise ValueError("simulation needs at least one day")
        if self.sim_dt_h <= 0:
            raise ValueError("sim_dt_h must be positive")
        steps = self.economics.dt_h / self.sim_dt_h
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("planning step must be a whole multiple of the internal step")


@dataclass(frozen=True)
class TraceRecord:
    timestamp: datetime
    t_in: float
    t_out: float
    setpoint: float
    q_c: float
    p_hp: float
    p_elem: float
    stage: int
    defrost: bool
    ppd: float
    pi_t: float

    @property
    def p_total(self) -> float:
        return self.p_hp + self.p_elem


TRACE_COLUMNS = ['timestamp', 't_in', 't_out', 'setpoint', 'q_c', 'p_hp', 'p_elem',
                 'stage', 'defrost', 'ppd', 'pi_t']


@dataclass
class SimTrace:
    """Per-internal-step record of a closed-loop run."""
    policy: str
    dt_h: float
    records: List[TraceRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def to_frame(self) -> pd.DataFrame:
        rows = [[getattr(r, col) for col in TRACE_COLUMNS] for r in self.records]
        frame = pd.DataFrame(rows, columns=TRACE_COLUMNS)
        frame['timestamp'] = pd.to_datetime(frame['timestamp'])
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, policy: str, dt_h: float) -> 'SimTrace':
        records = [
            TraceRecord(
                timestamp=row.timestamp.to_pydatetime(),
                t_in=float(row.t_in), t_out=float(row.t_out), setpoint=float(row.setpoint),
                q_c=float(row.q_c), p_hp=float(row.p_hp), p_elem=float(row.p_elem),
                stage=int(row.stage), defrost=bool(row.defrost), ppd=float(row.ppd),
                pi_t=float(row.pi_t),
            )
            for row in frame.itertuples(index=False)
        ]
        return cls(policy=policy, dt_h=dt_h, records=records)
