"""Closed-loop simulation of the house, the device loop and a supervisory policy."""
import logging
import math
from dataclasses import replace
from datetime import datetime, timedelta
from typing import Callable, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from models import (ComfortInputs, DeviceState, ExogenousProfile, ForecastErrorModel,
                    ForecastSlice, ScenarioConfig, SimTrace, StateInput, TraceRecord,
                    WeatherSeries)
from services.comfort import ComfortError, pmv, ppd
from services.identification import IdentificationError
from services.lp_solver import LpError
from services.mpc import OcpError, SupervisoryController
from services.plant import PlantError, cop, defrost_step, device_controller_step
from services.thermal_model import discretize, effective_boundary_temperature, step
from utils.random_utils import component_rng


logger = logging.getLogger(__name__)


class SimulationError(Exception):
    """Raised when a run cannot proceed; wraps module errors with step context."""
    pass


def truth_exogenous(weather: WeatherSeries, profile: ExogenousProfile) -> np.ndarray:
    """Ground-truth non-HVAC heat: base load, solar gain, evening occupancy, wind loss."""
    return _exogenous(pd.DatetimeIndex(weather.timestamps), weather.ghi, weather.wind, profile)


def _exogenous(timestamps: pd.DatetimeIndex, ghi: np.ndarray, wind: np.ndarray,
               profile: ExogenousProfile) -> np.ndarray:
    hours = np.asarray(timestamps.hour + timestamps.minute / 60.0, dtype=float)
    occupancy = np.maximum(0.0, np.cos(2.0 * np.pi * (hours - profile.peak_hour) / 24.0))
    return (profile.base_kw
            + profile.solar_kw_per_100wm2 * np.asarray(ghi, dtype=float) / 100.0
            + profile.diurnal_kw * occupancy
            - profile.wind_kw_per_ms * np.asarray(wind, dtype=float))


def oracle_disturbance(profile: ExogenousProfile) -> Callable[[ForecastSlice], np.ndarray]:
    """Disturbance forecaster that knows the true generator."""
    def forecast(slice_: ForecastSlice) -> np.ndarray:
        return _exogenous(slice_.timestamps, slice_.ghi, slice_.wind, profile)
    return forecast


def make_forecast(weather: WeatherSeries, start_index: int, horizon: int,
                  error: ForecastErrorModel, rng: np.random.Generator) -> ForecastSlice:
    """Truth plus independent Gaussian errors over ``horizon`` samples.

    Irradiance and wind are clipped at zero and humidity to [0, 100].
    The generator is advanced by the same amount whatever the error sizes.

    Raises:
        SimulationError: If the weather does not cover the horizon.
    """
    stop = start_index + horizon
    if start_index < 0 or stop > len(weather):
        raise SimulationError(
            f"weather covers {len(weather)} samples, forecast needs up to index {stop}")
    noise = rng.standard_normal((4, horizon))
    return ForecastSlice(
        timestamps=weather.timestamps[start_index:stop],
        t_out=weather.t_out[start_index:stop] + error.sigma_t_out * noise[0],
        ghi=np.clip(weather.ghi[start_index:stop] + error.sigma_ghi * noise[1], 0.0, None),
        wind=np.clip(weather.wind[start_index:stop] + error.sigma_wind * noise[2], 0.0, None),
        rh=np.clip(weather.rh[start_index:stop] + error.sigma_rh * noise[3], 0.0, 100.0),
    )


def build_controller(scenario: ScenarioConfig) -> SupervisoryController:
    """Supervisory controller using the scenario's controller-side model."""
    disturbance = (scenario.disturbance_model if scenario.disturbance_model is not None
                   else oracle_disturbance(scenario.truth_exogenous))
    return SupervisoryController(
        params=scenario.controller_params,
        plant=scenario.plant,
        economics=scenario.economics,
        tuning=replace(scenario.tuning),
        comfort=scenario.comfort,
        disturbance=disturbance,
    )


def _comfort_at(template: ComfortInputs, t_in: float) -> float:
    return ppd(pmv(ComfortInputs(t_air=t_in, t_radiant=t_in, air_speed=template.air_speed,
                                 rh=template.rh, met=template.met, clo=template.clo)))


def run_closed_loop(scenario: ScenarioConfig, weather: WeatherSeries) -> SimTrace:
    """Simulate ``scenario.days`` days from ``scenario.start``.

    The supervisory policy acts once per planning step; the device loop and
    the true house advance on the finer internal step with the weather held
    over each planning step.

    Raises:
        SimulationError: On insufficient weather coverage or any failure
            inside a step, with the step and instant in the message.
    """
    dt_plan = scenario.economics.dt_h
    if abs(weather.dt_h - dt_plan) > 1e-9:
        raise SimulationError(
            f"weather step {weather.dt_h} h differs from the planning step {dt_plan} h")
    try:
        start_index = weather.index_of(scenario.start)
    except KeyError as e:
        raise SimulationError(f"simulation start {scenario.start} is not in the weather data") from e

    n_plan = int(round(scenario.days * 24.0 / dt_plan))
    substeps = int(round(dt_plan / scenario.sim_dt_h))
    lookahead = scenario.economics.horizon if scenario.policy == 'mpc' else 0
    if start_index + n_plan + lookahead > len(weather):
        raise SimulationError(
            f"weather covers {len(weather) - start_index} steps from the start, "
            f"run needs {n_plan + lookahead}")

    truth_q_e = truth_exogenous(weather, scenario.truth_exogenous)
    truth_model = discretize(scenario.truth_params, scenario.sim_dt_h)
    forecast_rng = component_rng(scenario.seed, 'forecast')
    defrost_rng = component_rng(scenario.seed, 'defrost')
    controller = build_controller(scenario) if scenario.policy == 'mpc' else None

    t_in = scenario.initial_t_in
    state = DeviceState.initial(
        scenario.plant.n_stages,
        integral=_steady_heat_pump_output(scenario, weather, start_index, truth_q_e))
    trace = SimTrace(policy=scenario.policy, dt_h=scenario.sim_dt_h)
    sub_dt = timedelta(hours=scenario.sim_dt_h)

    for k in range(n_plan):
        index = start_index + k
        clock = weather.timestamps[index].to_pydatetime()
        try:
            if controller is not None:
                forecast = make_forecast(weather, index, scenario.economics.horizon,
                                         scenario.forecast_error, forecast_rng)
                setpoint = controller.step(t_in, forecast, clock)
                pi_t = controller.last_pi_t
            elif scenario.policy == 'schedule':
                setpoint, pi_t = scenario.schedule.value_at(clock), 0.0
            else:
                setpoint, pi_t = scenario.constant_setpoint, 0.0

            t_out = float(weather.t_out[index])
            rh = float(weather.rh[index])
            eta = cop(scenario.plant, t_out)
            theta = float(effective_boundary_temperature(scenario.truth_params, t_out))
            q_e = float(truth_q_e[index])

            for j in range(substeps):
                state, _ = defrost_step(state, t_out, rh, scenario.defrost, defrost_rng,
                                        scenario.sim_dt_h)
                output, state = device_controller_step(
                    state, setpoint, t_in, scenario.plant, scenario.device, eta,
                    scenario.sim_dt_h, defrost_stage=scenario.defrost.stage)
                trace.records.append(TraceRecord(
                    timestamp=clock + j * sub_dt,
                    t_in=t_in,
                    t_out=t_out,
                    setpoint=setpoint,
                    q_c=output.q_c,
                    p_hp=output.p_hp,
                    p_elem=output.p_elem,
                    stage=output.level,
                    defrost=output.defrost,
                    ppd=_comfort_at(scenario.comfort, t_in),
                    pi_t=pi_t,
                ))
                t_in = step(truth_model, StateInput(t_in, theta, output.q_c, q_e))
                if not math.isfinite(t_in):
                    raise SimulationError(f"indoor temperature diverged at step {k}")
        except (OcpError, PlantError, ComfortError, LpError, IdentificationError) as e:
            raise SimulationError(f"step {k} ({clock.isoformat()}): {e}") from e

    energy = sum(r.p_total for r in trace.records) * scenario.sim_dt_h
    logger.info("Simulated %d days with %s policy: %.1f kWh, mean PPD %.2f%%",
                scenario.days, scenario.policy, energy,
                float(np.mean([r.ppd for r in trace.records])))
    return trace


def _steady_heat_pump_output(scenario: ScenarioConfig, weather: WeatherSeries, index: int,
                             q_e: np.ndarray) -> float:
    """Heat-pump output holding the initial indoor temperature, clipped to capacity."""
    t_out = float(weather.t_out[index])
    theta = float(effective_boundary_temperature(scenario.truth_params, t_out))
    need = (scenario.initial_t_in - theta) / scenario.truth_params.r_eff - float(q_e[index])
    return min(max(need, 0.0), cop(scenario.plant, t_out) * scenario.plant.p_bar)


def run_policies(scenario: ScenarioConfig, weather: WeatherSeries,
                 policies: Sequence[str]) -> Dict[str, SimTrace]:
    """Run the same scenario (weather, seeds, plant) under several policies."""
    return {policy: run_closed_loop(replace(scenario, policy=policy), weather)
            for policy in policies}
