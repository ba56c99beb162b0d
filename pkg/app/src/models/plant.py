"""Heat pump, auxiliary element and defrost models."""
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple


@dataclass(frozen=True)
class PlantConfig:
    """Air-source heat pump with staged resistive backup.

    Attributes:
        p_bar: Heat-pump electric capacity (kW).
        stages: Total element power at each stage (kW), strictly increasing.
        cop_coeffs: (c0, c1, c2) of the quadratic COP curve in outdoor temperature.
        cop_floor: Lower bound on the COP.
        t_range: Outdoor temperature range (°C) the curve is valid for.
    """
    p_bar: float = 4.5
    stages: Tuple[float, ...] = (9.6, 14.4, 19.2)
    cop_coeffs: Tuple[float, float, float] = (2.5, 0.06, 0.0008)
    cop_floor: float = 1.2
    t_range: Tuple[float, float] = (-25.0, 20.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, 'stages', tuple(float(s) for s in self.stages))
        object.__setattr__(self, 'cop_coeffs', tuple(float(c) for c in self.cop_coeffs))
        object.__setattr__(self, 't_range', tuple(float(t) for t in self.t_range))
        if not math.isfinite(self.p_bar) or self.p_bar <= 0:
            raise ValueError(f"p_bar must be positive, got {self.p_bar}")
        if any(s <= 0 for s in self.stages):
            raise ValueError("element stages must be positive")
        if any(b <= a for a, b in zip(self.stages, self.stages[1:])):
            raise ValueError("element stages must be strictly increasing")
        if len(self.cop_coeffs) != 3:
            raise ValueError("cop_coeffs needs exactly three coefficients")
        if self.cop_floor < 1.0:
            raise ValueError("cop_floor must be at least 1")
        if self.t_range[0] >= self.t_range[1]:
            raise ValueError("t_range must be increasing")

    @property
    def p_r_bar(self) -> float:
        """Full element capacity (kW), zero when no stages are installed."""
        return self.stages[-1] if self.stages else 0.0

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def stage_power(self, level: int) -> float:
        return 0.0 if level <= 0 else self.stages[level - 1]


@dataclass(frozen=True)
class DeviceSettings:
    """Tuning of the emulated on-board device controller.

    Attributes:
        saturation_threshold: Error (°C) above which the first stage engages
            once the heat pump has run at full output for ``dwell_h``.
    """
    kp_fraction: float = 0.5
    integral_time_h: Optional[float] = 0.5
    stage_up_threshold: float = 1.0
    stage_off_threshold: float = 0.0
    dwell_h: float = 0.25
    min_on_h: float = 0.25
    min_off_h: float = 0.25
    saturation_threshold: float = 0.0

    def __post_init__(self) -> None:
        if self.kp_fraction <= 0:
            raise ValueError("kp_fraction must be positive")
        if self.integral_time_h is not None and self.integral_time_h <= 0:
            raise ValueError("integral_time_h must be positive when set")
        for name in ('dwell_h', 'min_on_h', 'min_off_h', 'saturation_threshold'):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class DeviceState:
    """Controller memory carried between internal steps.

    ``on_timers[i]`` is the time level i+1 has been active, ``off_timers[i]``
    the time since it was last deactivated. ``error_timer`` is None while the
    tracking error is below the stage-up threshold. ``saturated_h`` is how
    long the heat pump has run at full output without a break. While
    ``boost`` is set the integral is held at full heat-pump output.
    """
    level: int = 0
    on_timers: Tuple[float, ...] = ()
    off_timers: Tuple[float, ...] = ()
    error_timer: Optional[float] = None
    integral: float = 0.0
    defrost_remaining: float = 0.0
    saturated_h: float = 0.0
    boost: bool = False
    last_t_in: Optional[float] = None

    @classmethod
    def initial(cls, n_stages: int, integral: float = 0.0) -> 'DeviceState':
        return cls(
            level=0,
            on_timers=tuple(0.0 for _ in range(n_stages)),
            off_timers=tuple(math.inf for _ in range(n_stages)),
            integral=integral,
        )

    @property
    def defrost_active(self) -> bool:
        return self.defrost_remaining > 0.0


@dataclass(frozen=True)
class DeviceOutput:
    """What the device delivered over one internal step."""
    q_c: float
    q_hp: float
    p_hp: float
    p_elem: float
    level: int
    defrost: bool

    @property
    def p_total(self) -> float:
        return self.p_hp + self.p_elem


@dataclass(frozen=True)
class DefrostConfig:
    """Stochastic defrost occurrence band."""
    t_ceiling: float = 0.0
    rh_band: Tuple[float, float] = (70.0, 80.0)
    events_per_day: float = 2.7
    duration_h: float = 0.25
    stage: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, 'rh_band', tuple(float(v) for v in self.rh_band))
        if self.events_per_day < 0:
            raise ValueError("events_per_day must be non-negative")
        if self.duration_h <= 0:
            raise ValueError("duration_h must be positive")
        if self.rh_band[0] > self.rh_band[1]:
            raise ValueError("rh_band must be increasing")
        if self.stage < 0:
            raise ValueError("defrost stage must be non-negative")
