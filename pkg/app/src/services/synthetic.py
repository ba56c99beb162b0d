"""Synthetic weather, training data and heating-season profiles."""
import logging
from datetime import datetime
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from models import ExogenousProfile, ThermalParams, TrainingSeries, WeatherSeries
from services.simulator import truth_exogenous
from services.thermal_model import discretize, effective_boundary_temperature
from utils.date_utils import hour_window_mask


logger = logging.getLogger(__name__)


def synthetic_weather(start: datetime, hours: int, mean_t_out: float = -2.0,
                      amplitude: float = 5.0, rh: float = 60.0, ghi_peak: float = 400.0,
                      wind_mean: float = 3.0,
                      daily_offsets: Optional[Sequence[float]] = None,
                      noise_t_out: float = 0.0,
                      rng: Optional[np.random.Generator] = None) -> WeatherSeries:
    """Hourly weather with a diurnal temperature swing peaking at 15:00.

    Args:
        start: First timestamp.
        hours: Number of hourly samples.
        mean_t_out: Daily mean outdoor temperature (°C).
        amplitude: Half the diurnal swing (°C).
        rh: Constant relative humidity (%).
        ghi_peak: Midday irradiance (W/m²), zero outside 07:00–17:00.
        wind_mean: Mean wind speed (m/s).
        daily_offsets: Optional per-day shift added to the mean, cycled.
        noise_t_out: Standard deviation of hourly temperature noise.
        rng: Generator for the noise; required when noise is non-zero.
    """
    timestamps = pd.date_range(start=start, periods=hours, freq='h')
    clock = np.asarray(timestamps.hour, dtype=float)
    day_index = np.arange(hours) // 24
    offsets = np.zeros(hours)
    if daily_offsets:
        values = np.asarray(daily_offsets, dtype=float)
        offsets = values[day_index % values.size]

    t_out = mean_t_out + offsets + amplitude * np.cos(2.0 * np.pi * (clock - 15.0) / 24.0)
    if noise_t_out > 0:
        if rng is None:
            raise ValueError("a random generator is needed for weather noise")
        t_out = t_out + rng.normal(0.0, noise_t_out, hours)
    ghi = ghi_peak * np.clip(np.sin(np.pi * (clock - 7.0) / 10.0), 0.0, None)
    ghi[(clock < 7) | (clock > 17)] = 0.0
    wind = np.clip(wind_mean + np.sin(2.0 * np.pi * clock / 24.0 + 1.0), 0.0, None)
    return WeatherSeries(timestamps=timestamps, t_out=t_out, ghi=ghi, wind=wind,
                         rh=np.full(hours, float(rh)), dt_h=1.0)


def synthesize_training_series(params: ThermalParams, weather: WeatherSeries,
                               q_e: Union[float, np.ndarray, ExogenousProfile] = 0.5,
                               night_setpoint: float = 20.0, day_amplitude: float = 1.5,
                               excitation_kw: float = 0.0, noise_c: float = 0.0,
                               night_start: int = 22, night_end: int = 7,
                               rng: Optional[np.random.Generator] = None) -> TrainingSeries:
    """Forward-simulate a house under an ideal heating controller.

    At night the controller holds ``night_setpoint`` exactly; in the day it
    follows a zero-mean sine around it, optionally with random heat
    excitation. Heat is clipped at zero. ``noise_c`` adds Gaussian noise to
    the recorded indoor temperature only.
    """
    n = len(weather)
    if isinstance(q_e, ExogenousProfile):
        q_e_arr = truth_exogenous(weather, q_e)
    else:
        q_e_arr = np.broadcast_to(np.asarray(q_e, dtype=float), (n,)).copy()
    if (excitation_kw > 0 or noise_c > 0) and rng is None:
        raise ValueError("a random generator is needed for excitation or noise")

    model = discretize(params, weather.dt_h)
    a, r = model.a, params.r_eff
    theta = effective_boundary_temperature(params, weather.t_out)
    night = hour_window_mask(weather.timestamps, night_start, night_end)
    night_length = (night_end - night_start) % 24
    day_span = 24 - night_length
    clock = np.asarray(weather.timestamps.hour, dtype=float)
    setpoints = np.where(
        night, night_setpoint,
        night_setpoint + day_amplitude * np.sin(2.0 * np.pi * ((clock - night_end) % 24) / day_span))

    temps = np.empty(n)
    q_c = np.empty(n)
    temps[0] = night_setpoint
    for k in range(n):
        needed = ((setpoints[k] - a * temps[k]) / (1.0 - a) - theta[k]) / r - q_e_arr[k]
        if excitation_kw > 0 and not night[k]:
            needed += excitation_kw * rng.standard_normal()
        q_c[k] = max(needed, 0.0)
        if k + 1 < n:
            temps[k + 1] = a * temps[k] + (1.0 - a) * (theta[k] + r * (q_c[k] + q_e_arr[k]))

    measured = temps + (rng.normal(0.0, noise_c, n) if noise_c > 0 else 0.0)
    return TrainingSeries(timestamps=weather.timestamps, t_in=measured, t_out=weather.t_out,
                          q_c=q_c, ghi=weather.ghi, wind=weather.wind, dt_h=weather.dt_h)


def seasonal_temperature_profile(days: int = 151, start_mean: float = 5.0,
                                 depth: float = 8.0) -> np.ndarray:
    """Daily mean outdoor temperature over a heating season, coldest mid-season."""
    i = np.arange(days, dtype=float)
    return start_mean - depth * np.sin(np.pi * i / max(days - 1, 1))
