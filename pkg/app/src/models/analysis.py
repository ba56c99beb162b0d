"""Post-processing result models."""
from dataclasses import dataclass, field
from datetime import date
from typing import Dict, Optional

import numpy as np


@dataclass
class DailyRecord:
    """One calendar day of one policy."""
    day: date
    policy: str
    delta_t: float
    energy_kwh: float
    element_energy_kwh: float
    peak_kw: float
    element_hours: float = 0.0
    defrost_events: int = 0
    stage_events: Dict[float, int] = field(default_factory=dict)


@dataclass(frozen=True)
class SlopeEstimate:
    """Energy-line slope through the origin (kWh/day per °C)."""
    slope: float
    std: float
    n: int = 0
    offset: float = 8.0


@dataclass
class SavingsReport:
    """Relative savings, in percent."""
    mean: float
    ci_low: float
    ci_high: float
    point_estimate: float
    n_samples: int
    hist_edges: Optional[np.ndarray] = None
    hist_counts: Optional[np.ndarray] = None

    def to_dict(self) -> Dict[str, float]:
        return {'mean_pct': float(self.mean), 'ci_low_pct': float(self.ci_low),
                'ci_high_pct': float(self.ci_high),
                'point_estimate_pct': float(self.point_estimate),
                'n_samples': int(self.n_samples)}


@dataclass
class SeasonalReport:
    """Season-scale savings in currency and percent."""
    mean_savings: float
    ci_low: float
    ci_high: float
    baseline_mean: float
    baseline_ci_low: float
    baseline_ci_high: float
    relative_mean: float
    relative_ci_low: float
    relative_ci_high: float
    n_samples: int

    def to_dict(self) -> Dict[str, float]:
        return {key: (int(value) if key == 'n_samples' else float(value))
                for key, value in self.__dict__.items()}


@dataclass
class StageStatistics:
    """Element turn-on events of one policy, keyed by the highest stage power reached."""
    policy: str
    histogram: Dict[float, int]
    shares: Dict[float, float]
    n_events: int
    conditional_mean_kw: Optional[float]

    def top_stage_share(self, top_stage_kw: float) -> float:
        return self.shares.get(top_stage_kw, 0.0)


@dataclass(frozen=True)
class BackupSummary:
    """Mean daily backup-heat usage of one policy."""
    policy: str
    days: int
    element_kwh_per_day: float
    element_minutes_per_day: float
    defrost_events_per_day: float
