"""Two-resistance, one-capacitance house model and its exact discretisation."""
import logging
import math
from typing import Sequence, Union

import numpy as np

from models import EffectiveModel, StateInput, ThermalParams


logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]


def effective_boundary_temperature(params: ThermalParams,
                                   t_out: ArrayLike) -> Union[float, np.ndarray]:
    """Resistance-weighted mix of mass and outdoor temperature.

    θ = (r_out·t_m + r_m·t_out) / (r_m + r_out); works on scalars or arrays.
    """
    weight_sum = params.r_m + params.r_out
    if np.isscalar(t_out):
        return (params.r_out * params.t_m + params.r_m * float(t_out)) / weight_sum
    t_out_arr = np.asarray(t_out, dtype=float)
    return (params.r_out * params.t_m + params.r_m * t_out_arr) / weight_sum


def effective_resistance(params: ThermalParams) -> float:
    """Envelope and mass resistances in parallel, R = R_out·R_m / (R_out + R_m), in °C/kW.

    This is the resistance the house presents to the heating input in the
    first-order model; it is always smaller than either branch.
    """
    return params.r_eff


def discretize(params: ThermalParams, dt_h: float) -> EffectiveModel:
    """Zero-order-hold discretisation: a = exp(-Δt / (R·C))."""
    if dt_h <= 0:
        raise ValueError(f"time step must be positive, got {dt_h}")
    a = math.exp(-dt_h / (params.r_eff * params.c))
    return EffectiveModel(params=params, a=a, dt_h=dt_h)


def step(model: EffectiveModel, s: StateInput) -> float:
    """Indoor temperature one step ahead with inputs held constant over the step."""
    a = model.a
    return a * s.t_in + (1.0 - a) * (s.theta + model.r_eff * (s.q_c + s.q_e))


def simulate_trajectory(model: EffectiveModel, t0: float, thetas: ArrayLike,
                        q_c: ArrayLike, q_e: ArrayLike) -> np.ndarray:
    """Roll :func:`step` forward over equal-length input sequences.

    Returns:
        Temperatures of length N+1, starting with ``t0``.
    """
    theta_arr = np.asarray(thetas, dtype=float)
    q_c_arr = np.asarray(q_c, dtype=float)
    q_e_arr = np.asarray(q_e, dtype=float)
    if not (theta_arr.shape == q_c_arr.shape == q_e_arr.shape) or theta_arr.ndim != 1:
        raise ValueError("open-loop inputs must be one-dimensional and of equal length")

    a = model.a
    r = model.r_eff
    forcing = (1.0 - a) * (theta_arr + r * (q_c_arr + q_e_arr))
    temps = np.empty(theta_arr.shape[0] + 1)
    temps[0] = t0
    for k, f in enumerate(forcing):
        temps[k + 1] = a * temps[k] + f
    return temps


def equilibrium_power(model: EffectiveModel, t_in: float, theta: float, q_e: float) -> float:
    """HVAC heat (kW) that holds ``t_in`` constant for one step; may be negative."""
    return (t_in - theta) / model.r_eff - q_e
