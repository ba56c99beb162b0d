"""Domain data models: thermal series, plant, planning problems, simulation traces and results."""
from .analysis import (BackupSummary, DailyRecord, SavingsReport, SeasonalReport,
                       SlopeEstimate, StageStatistics)
from .optimization import (ComfortInputs, LpProblem, LpSolution, LpStatus, ObjectiveBreakdown,
                           OcpPlan, OcpSpec, PlanStatus, TuningState)
from .plant import DefrostConfig, DeviceOutput, DeviceSettings, DeviceState, PlantConfig
from .simulation import (TRACE_COLUMNS, Economics, ExogenousProfile, ForecastErrorModel,
                         ForecastSlice, ReferenceSchedule, ScenarioConfig, SimTrace, TraceRecord)
from .thermal import (DisturbanceModel, EffectiveModel, FitReport, StateInput,
                      SteadyWindowCriteria, ThermalParams, TrainingSeries, WeatherSeries)

__all__ = [
    'BackupSummary', 'ComfortInputs', 'DailyRecord', 'DefrostConfig', 'DeviceOutput',
    'DeviceSettings', 'DeviceState', 'DisturbanceModel', 'Economics', 'EffectiveModel',
    'ExogenousProfile', 'FitReport', 'ForecastErrorModel', 'ForecastSlice', 'LpProblem',
    'LpSolution', 'LpStatus', 'ObjectiveBreakdown', 'OcpPlan', 'OcpSpec', 'PlanStatus',
    'PlantConfig', 'ReferenceSchedule', 'SavingsReport', 'ScenarioConfig', 'SeasonalReport',
    'SimTrace', 'SlopeEstimate', 'StageStatistics', 'StateInput', 'SteadyWindowCriteria',
    'TRACE_COLUMNS', 'ThermalParams', 'TraceRecord', 'TrainingSeries', 'TuningState',
    'WeatherSeries',
]
