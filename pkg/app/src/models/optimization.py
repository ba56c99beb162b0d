"""Linear program, optimal-control and comfort data models."""
import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np


class LpStatus(str, Enum):
    OPTIMAL = 'optimal'
    INFEASIBLE = 'infeasible'
    UNBOUNDED = 'unbounded'
    ITERATION_LIMIT = 'iteration_limit'
    NUMERICAL = 'numerical'


@dataclass
class LpProblem:
    """minimize c·x subject to A_ub x ≤ b_ub, A_eq x = b_eq, lower ≤ x ≤ upper.

    Bounds may be infinite. Missing constraint blocks are given as empty
    arrays with the right number of columns.
    """
    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def build(cls, c: Sequence[float],
              a_ub: Optional[Any] = None, b_ub: Optional[Any] = None,
              a_eq: Optional[Any] = None, b_eq: Optional[Any] = None,
              lower: Optional[Any] = None, upper: Optional[Any] = None) -> 'LpProblem':
        """Fill in empty blocks and default bounds (x ≥ 0)."""
        c_arr = np.asarray(c, dtype=float)
        n = c_arr.shape[0]

        def block(a: Optional[Any], b: Optional[Any]):
            if a is None:
                return np.zeros((0, n)), np.zeros(0)
            return np.atleast_2d(np.asarray(a, dtype=float)), np.asarray(b, dtype=float)

        a_ub_arr, b_ub_arr = block(a_ub, b_ub)
        a_eq_arr, b_eq_arr = block(a_eq, b_eq)
        lo = np.zeros(n) if lower is None else np.asarray(lower, dtype=float)
        hi = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
        return cls(c_arr, a_ub_arr, b_ub_arr, a_eq_arr, b_eq_arr, lo, hi)

    @property
    def n_vars(self) -> int:
        return int(np.asarray(self.c).shape[0])


@dataclass
class LpSolution:
    """Solver outcome. ``x`` and duals are only meaningful when optimal."""
    status: LpStatus
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    duals_ub: Optional[np.ndarray] = None
    duals_eq: Optional[np.ndarray] = None
    ray: Optional[np.ndarray] = None
    iterations: int = 0
    message: str = ''

    @property
    def is_optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL


def _vector(values: Any, length: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(length, float(arr))
    if arr.shape != (length,):
        raise ValueError(f"{name} must have length {length}, got shape {arr.shape}")
    return arr


@dataclass
class OcpSpec:
    """One receding-horizon planning problem.

    Per-step arrays have length ``horizon``; scalars are broadcast. Entry ℓ
    of ``t_ref`` and ``pi_t`` refers to the temperature at the end of step ℓ.
    """
    horizon: int
    dt_h: float
    a: float
    r: float
    t0: float
    theta: np.ndarray
    q_e: np.ndarray
    eta: np.ndarray
    p_bar: float
    p_r_bar: float
    t_ref: np.ndarray
    delta: float
    pi_e: np.ndarray
    pi_d: float
    pi_t: np.ndarray
    pi_g: float = 0.0
    mu: Optional[np.ndarray] = None
    tracking_tau_h: Optional[float] = None
    max_rate: Optional[float] = None
    timestamps: Optional[List[datetime]] = None

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        n = self.horizon
        self.theta = _vector(self.theta, n, 'theta')
        self.q_e = _vector(self.q_e, n, 'q_e')
        self.eta = _vector(self.eta, n, 'eta')
        self.t_ref = _vector(self.t_ref, n, 't_ref')
        self.pi_e = _vector(self.pi_e, n, 'pi_e')
        self.pi_t = _vector(self.pi_t, n, 'pi_t')
        self.mu = _vector(0.0 if self.mu is None else self.mu, n, 'mu')

    @property
    def capacity(self) -> np.ndarray:
        """Thermal capacity η P̄ + P̄_r per step (kW)."""
        return self.eta * self.p_bar + self.p_r_bar


@dataclass
class ObjectiveBreakdown:
    demand: float = 0.0
    energy: float = 0.0
    discomfort: float = 0.0
    emission: float = 0.0

    @property
    def total(self) -> float:
        return self.demand + self.energy + self.discomfort + self.emission

    def to_dict(self) -> Dict[str, float]:
        return {'demand': self.demand, 'energy': self.energy,
                'discomfort': self.discomfort, 'emission': self.emission,
                'total': self.total}


class PlanStatus(str, Enum):
    OPTIMAL = 'optimal'
    COMFORT_RELAXED = 'comfort-relaxed'
    REFERENCE_FALLBACK = 'reference-fallback'


@dataclass
class OcpPlan:
    """Planned trajectories; ``setpoints[ℓ]`` is the temperature at the end of step ℓ."""
    status: PlanStatus
    setpoints: np.ndarray
    q_c: np.ndarray
    p: np.ndarray
    peak: float
    objective: float
    breakdown: ObjectiveBreakdown
    delta_used: float
    commands: Optional[np.ndarray] = None
    timestamps: Optional[List[datetime]] = None

    @property
    def first_setpoint(self) -> float:
        """The set-point to send to the device for the coming step."""
        if self.commands is not None:
            return float(self.commands[0])
        return float(self.setpoints[0])


@dataclass(frozen=True)
class ComfortInputs:
    """Environmental and personal factors for the PMV heat balance."""
    t_air: float
    t_radiant: float
    air_speed: float = 0.1
    rh: float = 40.0
    met: float = 1.1
    clo: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.rh <= 100.0:
            raise ValueError(f"relative humidity must lie in [0, 100], got {self.rh}")
        if self.air_speed < 0:
            raise ValueError("air speed must be non-negative")
        if not 0.8 <= self.met <= 4.0:
            raise ValueError(f"metabolic rate must lie in [0.8, 4] met, got {self.met}")
        if not 0.0 <= self.clo <= 2.0:
            raise ValueError(f"clothing insulation must lie in [0, 2] clo, got {self.clo}")
        if not (math.isfinite(self.t_air) and math.isfinite(self.t_radiant)):
            raise ValueError("temperatures must be finite")


@dataclass
class TuningState:
    """Discomfort-price tuning state and day/night modulation settings."""
    base_price: float = 0.5
    last_tuned: Optional[datetime] = None
    interval_h: float = 12.0
    grid_min: float = 0.01
    grid_max: float = 5.0
    grid_points: int = 12
    day_multiplier: float = 1.1
    night_multiplier: float = 0.2
    day_start: int = 7
    day_end: int = 22
    ppd_ceiling: float = 10.0
    modulate_sweep: bool = True
    enabled: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.grid_min < self.grid_max:
            raise ValueError("tuning grid needs 0 < min < max")
        if self.grid_points < 2:
            raise ValueError("tuning grid needs at least two points")
        if self.base_price < 0:
            raise ValueError("base discomfort price must be non-negative")
        if self.interval_h <= 0:
            raise ValueError("tuning interval must be positive")

    @property
    def grid(self) -> np.ndarray:
        return np.geomspace(self.grid_min, self.grid_max, self.grid_points)

    def is_due(self, clock: datetime) -> bool:
        if self.last_tuned is None:
            return True
        return (clock - self.last_tuned).total_seconds() / 3600.0 >= self.interval_h - 1e-9
