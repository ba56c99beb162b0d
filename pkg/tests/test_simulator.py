"""
Tests for forecasts and closed-loop simulation.
"""
import sys
from dataclasses import replace
from datetime import datetime
from pathlib import Path

# Add the app/src directory to Python path
project_root = Path(__file__).parent.parent
app_src_dir = project_root / 'app' / 'src'
sys.path.insert(0, str(app_src_dir))

import numpy as np
import pandas as pd
import pytest

from models import (ComfortInputs, DefrostConfig, Economics, ExogenousProfile, ForecastErrorModel,
                    ReferenceSchedule, ScenarioConfig, ThermalParams, TuningState)
from services.analysis import daily_aggregate, fit_energy_line, stage_statistics
from services.simulator import (SimulationError, make_forecast, run_closed_loop, run_policies,
                                truth_exogenous)
from services.synthetic import synthetic_weather
from utils.random_utils import component_rng


FIELD = ThermalParams(r_out=2.04, r_m=1.06, c=6.5, t_m=20.6)
START = datetime(2023, 1, 2)


def scenario(**overrides):
    base = ScenarioConfig(
        start=START, days=1, truth_params=FIELD, controller_params=FIELD,
        economics=Economics(horizon=6, reference=ReferenceSchedule(21.5, 21.5)),
        tuning=TuningState(grid_points=4), comfort=ComfortInputs(21.5, 21.5),
        constant_setpoint=21.0, initial_t_in=21.0, policy='constant', seed=11)
    return replace(base, **overrides)


@pytest.fixture
def mild_weather():
    return synthetic_weather(START, 4 * 24, mean_t_out=3.0, amplitude=2.0, rh=60.0)


class TestExogenousAndForecast:
    """Truth generator and noisy forecasts."""

    def test_truth_exogenous_components(self):
        """Base load plus the occupancy peak at its hour, no sun or wind."""
        weather = synthetic_weather(START, 24, ghi_peak=0.0, wind_mean=0.0)
        weather.wind = np.zeros(24)
        q_e = truth_exogenous(weather, ExogenousProfile())
        assert q_e[19] == pytest.approx(0.5 + 0.3)
        assert q_e[7] == pytest.approx(0.5)

    def test_forecast_without_error_is_truth(self, mild_weather):
        """Zero error standard deviations reproduce the weather slice."""
        forecast = make_forecast(mild_weather, 5, 6, ForecastErrorModel(), component_rng(0, 'forecast'))
        assert len(forecast) == 6
        assert forecast.t_out == pytest.approx(mild_weather.t_out[5:11])

    def test_forecast_consumes_fixed_draws(self, mild_weather):
        """The generator advances equally whatever the error sizes."""
        quiet, noisy = component_rng(1, 'forecast'), component_rng(1, 'forecast')
        make_forecast(mild_weather, 0, 6, ForecastErrorModel(), quiet)
        make_forecast(mild_weather, 0, 6, ForecastErrorModel(1.0, 30.0, 0.5, 3.0), noisy)
        assert quiet.random() == noisy.random()

    def test_forecast_clips(self, mild_weather):
        """Irradiance, wind and humidity stay in their physical ranges."""
        forecast = make_forecast(mild_weather, 0, 48, ForecastErrorModel(0.0, 500.0, 10.0, 80.0),
                                 component_rng(2, 'forecast'))
        assert forecast.ghi.min() >= 0.0
        assert forecast.wind.min() >= 0.0
        assert 0.0 <= forecast.rh.min() and forecast.rh.max() <= 100.0

    def test_forecast_beyond_weather(self, mild_weather):
        """A horizon past the end of the weather is an error."""
        with pytest.raises(SimulationError):
            make_forecast(mild_weather, len(mild_weather) - 2, 6, ForecastErrorModel(),
                          component_rng(0, 'forecast'))


class TestClosedLoop:
    """Closed-loop runs."""

    def test_constant_policy_tracks(self, mild_weather):
        """The device loop holds a constant set-point in mild weather."""
        trace = run_closed_loop(scenario(), mild_weather)
        assert len(trace) == 96
        assert trace.dt_h == pytest.approx(0.25)
        frame = trace.to_frame()
        assert frame['timestamp'].iloc[1] == pd.Timestamp('2023-01-02 00:15')
        late = frame.iloc[48:]
        assert np.mean(np.abs(late['t_in'] - 21.0)) < 0.3
        assert (late['p_elem'] == 0).all()
        assert not frame['defrost'].any()

    def test_schedule_policy(self, mild_weather):
        """The schedule policy commands the day and night levels."""
        trace = run_closed_loop(scenario(policy='schedule'), mild_weather)
        frame = trace.to_frame()
        hours = frame['timestamp'].dt.hour
        assert (frame.loc[(hours >= 6) & (hours < 23), 'setpoint'] == 20.0).all()
        assert (frame.loc[hours < 6, 'setpoint'] == 18.0).all()

    def test_mpc_within_band(self, mild_weather):
        """Supervisory set-points stay within the (possibly widened) band."""
        trace = run_closed_loop(scenario(policy='mpc'), mild_weather)
        setpoints = trace.to_frame()['setpoint']
        assert np.all(np.abs(setpoints - 21.5) <= 3.0 + 2.0 + 1e-6)
        assert all(r.pi_t > 0 for r in trace.records)

    def test_indoor_temperature_within_band(self):
        """On cold nights the measured room temperature, not just the set-point, stays in the comfort band."""
        weather = synthetic_weather(START, 4 * 24, mean_t_out=-8.0, amplitude=5.0, rh=60.0)
        config = scenario(days=2, policy='mpc', initial_t_in=21.5,
                          economics=Economics(horizon=24, reference=ReferenceSchedule(21.5, 21.5)),
                          tuning=TuningState())
        frame = run_closed_loop(config, weather).to_frame()
        assert (frame['p_elem'] > 0).any()
        assert frame['t_in'].min() >= 21.5 - 3.0 - 0.2
        assert frame['t_in'].max() <= 21.5 + 3.0 + 0.2

    def test_deterministic(self, mild_weather):
        """The same seed gives an identical trace."""
        config = scenario(policy='mpc', forecast_error=ForecastErrorModel(1.0, 30.0, 0.5, 3.0))
        first = run_closed_loop(config, mild_weather)
        second = run_closed_loop(config, mild_weather)
        assert first.records == second.records

    def test_defrost_events_occur(self):
        """Cold humid weather in the band produces defrost events."""
        weather = synthetic_weather(START, 3 * 24, mean_t_out=-3.0, amplitude=1.0, rh=75.0)
        trace = run_closed_loop(scenario(days=2, defrost=DefrostConfig(events_per_day=12.0)),
                                weather)
        records = daily_aggregate(trace)
        assert sum(r.defrost_events for r in records) > 0
        assert any(r.defrost and r.stage >= 1 for r in trace.records)

    def test_run_policies(self, mild_weather):
        """Several policies run on the same scenario."""
        traces = run_policies(scenario(), mild_weather, ['constant', 'schedule'])
        assert set(traces) == {'constant', 'schedule'}
        assert traces['schedule'].policy == 'schedule'


class TestSimulationErrors:
    """Coverage and configuration problems."""

    def test_start_not_in_weather(self, mild_weather):
        """A start instant missing from the weather is rejected."""
        with pytest.raises(SimulationError, match="not in the weather"):
            run_closed_loop(scenario(start=datetime(2022, 6, 1)), mild_weather)

    def test_weather_too_short(self, mild_weather):
        """The run plus the look-ahead must be covered."""
        with pytest.raises(SimulationError, match="covers"):
            run_closed_loop(scenario(days=4, policy='mpc'), mild_weather)

    def test_step_mismatch(self, mild_weather):
        """Weather sampled at a different step than the planner is rejected."""
        with pytest.raises(SimulationError, match="differs"):
            run_closed_loop(scenario(), replace(mild_weather, dt_h=0.5))


@pytest.mark.slow
class TestColdSnap:
    """A cold week against constant and day/night schedule baselines."""

    def test_mpc_meets_savings_and_comfort_targets(self):
        """Energy slope at most 0.9 of the constant policy's, half the top-stage share of the schedule, mean PPD at most 11%."""
        weather = synthetic_weather(START, 8 * 24, mean_t_out=-3.0, amplitude=5.0, rh=60.0)
        config = scenario(days=7, constant_setpoint=23.5, initial_t_in=23.5,
                          schedule=ReferenceSchedule(23.5, 20.5, day_start=7, day_end=22),
                          economics=Economics(horizon=24, reference=ReferenceSchedule(23.5, 23.5)),
                          comfort=ComfortInputs(23.5, 23.5), tuning=TuningState())
        traces = run_policies(config, weather, ['mpc', 'constant', 'schedule'])
        records = {policy: daily_aggregate(trace) for policy, trace in traces.items()}
        assert all(len(days) == 7 for days in records.values())

        slopes = {policy: fit_energy_line(days).slope for policy, days in records.items()}
        assert slopes['mpc'] <= 0.9 * slopes['constant']

        stats = stage_statistics([r for days in records.values() for r in days])
        schedule_share = stats['schedule'].top_stage_share(19.2)
        assert schedule_share > 0.0
        assert stats['mpc'].top_stage_share(19.2) <= 0.5 * schedule_share

        assert np.mean([r.ppd for r in traces['mpc'].records]) <= 11.0
