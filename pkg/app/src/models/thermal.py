"""Thermal circuit and identification data models."""
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd


def _as_array(values: Any) -> np.ndarray:
    return np.asarray(values, dtype=float)


@dataclass(frozen=True)
class ThermalParams:
    """Physical parameters of the two-resistance, one-capacitance house model.

    Attributes:
        r_out: Envelope resistance to outdoors (°C/kW).
        r_m: Resistance to the thermal mass (°C/kW).
        c: Indoor air + furnishing capacitance (kWh/°C).
        t_m: Thermal mass temperature (°C), treated as constant.
    """
    r_out: float
    r_m: float
    c: float
    t_m: float

    def __post_init__(self) -> None:
        for name in ('r_out', 'r_m', 'c'):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be a positive finite number, got {value}")
        if not math.isfinite(self.t_m):
            raise ValueError(f"t_m must be finite, got {self.t_m}")

    @property
    def r_eff(self) -> float:
        """Parallel combination R of the two resistances."""
        return self.r_m * self.r_out / (self.r_m + self.r_out)

    def to_dict(self) -> Dict[str, float]:
        return {'r_out': self.r_out, 'r_m': self.r_m, 'c': self.c, 't_m': self.t_m}


@dataclass(frozen=True)
class EffectiveModel:
    """Discrete-time model at a fixed step: parameters plus the decay factor a."""
    params: ThermalParams
    a: float
    dt_h: float

    def __post_init__(self) -> None:
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"decay factor a must lie in (0, 1), got {self.a}")
        if self.dt_h <= 0:
            raise ValueError(f"time step must be positive, got {self.dt_h}")

    @property
    def r_eff(self) -> float:
        return self.params.r_eff


@dataclass(frozen=True)
class StateInput:
    """Inputs to one discrete step: indoor temperature, boundary temperature, heat flows."""
    t_in: float
    theta: float
    q_c: float
    q_e: float


@dataclass
class TrainingSeries:
    """Hourly (or uniform-step) measurements used for identification."""
    timestamps: pd.DatetimeIndex
    t_in: np.ndarray
    t_out: np.ndarray
    q_c: np.ndarray
    ghi: np.ndarray
    wind: np.ndarray
    dt_h: float = 1.0

    def __post_init__(self) -> None:
        self.timestamps = pd.DatetimeIndex(self.timestamps)
        for name in ('t_in', 't_out', 'q_c', 'ghi', 'wind'):
            setattr(self, name, _as_array(getattr(self, name)))
        n = len(self.timestamps)
        for name in ('t_in', 't_out', 'q_c', 'ghi', 'wind'):
            if len(getattr(self, name)) != n:
                raise ValueError(
                    f"training column {name} has {len(getattr(self, name))} samples, expected {n}")

    def __len__(self) -> int:
        return len(self.timestamps)

    def slice(self, start: int, stop: int) -> 'TrainingSeries':
        """Return the contiguous sub-series [start, stop)."""
        return TrainingSeries(
            timestamps=self.timestamps[start:stop],
            t_in=self.t_in[start:stop],
            t_out=self.t_out[start:stop],
            q_c=self.q_c[start:stop],
            ghi=self.ghi[start:stop],
            wind=self.wind[start:stop],
            dt_h=self.dt_h,
        )


@dataclass
class WeatherSeries:
    """Uniformly sampled outdoor conditions."""
    timestamps: pd.DatetimeIndex
    t_out: np.ndarray
    ghi: np.ndarray
    wind: np.ndarray
    rh: np.ndarray
    dt_h: float = 1.0

    def __post_init__(self) -> None:
        self.timestamps = pd.DatetimeIndex(self.timestamps)
        for name in ('t_out', 'ghi', 'wind', 'rh'):
            setattr(self, name, _as_array(getattr(self, name)))
            if len(getattr(self, name)) != len(self.timestamps):
                raise ValueError(f"weather column {name} does not match timestamp count")

    def __len__(self) -> int:
        return len(self.timestamps)

    def index_of(self, instant: Any) -> int:
        """Position of an exact timestamp in the series.

        Raises:
            KeyError: If the instant is not one of the sample times.
        """
        return int(self.timestamps.get_loc(pd.Timestamp(instant)))

    def slice(self, start: int, stop: int) -> 'WeatherSeries':
        return WeatherSeries(
            timestamps=self.timestamps[start:stop],
            t_out=self.t_out[start:stop],
            ghi=self.ghi[start:stop],
            wind=self.wind[start:stop],
            rh=self.rh[start:stop],
            dt_h=self.dt_h,
        )


@dataclass(frozen=True)
class SteadyWindowCriteria:
    """Selection rule for near-steady night-time samples."""
    night_start: int = 23
    night_end: int = 6
    max_drift: float = 0.1
    window_hours: float = 3.0

    def __post_init__(self) -> None:
        if not (0 <= self.night_start < 24 and 0 <= self.night_end < 24):
            raise ValueError("night hours must lie in [0, 24)")
        if self.max_drift < 0:
            raise ValueError("max_drift must be non-negative")
        if self.window_hours <= 0:
            raise ValueError("window_hours must be positive")


@dataclass
class DisturbanceModel:
    """Fitted regressor mapping weather and calendar features to q_e (kW)."""
    kind: str
    estimator: Any
    feature_names: List[str]
    dropped_features: List[str] = field(default_factory=list)
    alpha: Optional[float] = None
    gamma: Optional[float] = None
    train_rmse: Optional[float] = None


@dataclass
class FitReport:
    """Outcome of an identification run."""
    params: ThermalParams
    a: float
    rmse_t: float
    rmse_q: float
    n_train: int
    n_validation: int
    n_steady: int = 0
    alpha: Optional[float] = None
    r_m_scores: List[Tuple[float, float]] = field(default_factory=list)
    validation_start: Optional[pd.Timestamp] = None
    validation_end: Optional[pd.Timestamp] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'params': self.params.to_dict(),
            'a': float(self.a),
            'rmse_t': float(self.rmse_t),
            'rmse_q': float(self.rmse_q),
            'n_train': int(self.n_train),
            'n_validation': int(self.n_validation),
            'n_steady': int(self.n_steady),
            'alpha': None if self.alpha is None else float(self.alpha),
            'validation_start': None if self.validation_start is None else self.validation_start.isoformat(),
            'validation_end': None if self.validation_end is None else self.validation_end.isoformat(),
        }
