"""Heat pump efficiency, electric power and the emulated device controller."""
import logging
import math
from dataclasses import replace
from typing import List, Tuple

import numpy as np

from models import DefrostConfig, DeviceOutput, DeviceSettings, DeviceState, PlantConfig


logger = logging.getLogger(__name__)

_TIME_EPS = 1e-9
_COOLING_EPS = 0.01  # °C per internal step


class PlantError(Exception):
    """Raised when a requested heat rate is outside what the plant can deliver."""
    pass


def cop(cfg: PlantConfig, t_out: float) -> float:
    """Coefficient of performance at an outdoor temperature.

    Temperatures outside ``cfg.t_range`` are clamped to the nearest end with a
    warning. The result never drops below ``cfg.cop_floor``.
    """
    low, high = cfg.t_range
    t = float(t_out)
    if t < low or t > high:
        clamped = min(max(t, low), high)
        logger.warning("Outdoor temperature %.2f °C outside COP range [%.1f, %.1f], using %.1f",
                       t, low, high, clamped)
        t = clamped
    c0, c1, c2 = cfg.cop_coeffs
    return max(cfg.cop_floor, c0 + c1 * t + c2 * t * t)


def cop_profile(cfg: PlantConfig, t_out: np.ndarray) -> np.ndarray:
    return np.array([cop(cfg, t) for t in np.asarray(t_out, dtype=float)])


def plant_capacity(cfg: PlantConfig, eta: float) -> float:
    """Largest heat rate η·P̄ + P̄_r (kW) the plant can deliver."""
    return eta * cfg.p_bar + cfg.p_r_bar


def _check_demand(cfg: PlantConfig, q_c: float, eta: float) -> None:
    if eta < 1.0:
        raise PlantError(f"COP must be at least 1, got {eta}")
    cap = plant_capacity(cfg, eta)
    if q_c < -1e-12 or q_c > cap + 1e-9:
        raise PlantError(f"thermal demand {q_c:.4f} kW outside plant capacity [0, {cap:.4f}] kW")


def electric_power(cfg: PlantConfig, q_c: float, eta: float) -> float:
    """Electric draw when the heat pump runs first and elements cover the rest.

    P = q/η + (1 − 1/η)·max(0, q − η·P̄)

    Raises:
        PlantError: If q_c is negative or above η·P̄ + P̄_r.
    """
    _check_demand(cfg, q_c, eta)
    q = max(0.0, float(q_c))
    return q / eta + (1.0 - 1.0 / eta) * max(0.0, q - eta * cfg.p_bar)


def electric_power_piecewise(cfg: PlantConfig, q_c: float, eta: float) -> float:
    """Same draw written as the two-branch piecewise map."""
    _check_demand(cfg, q_c, eta)
    q = max(0.0, float(q_c))
    knee = eta * cfg.p_bar
    if q <= knee:
        return q / eta
    return cfg.p_bar + (q - knee)


def defrost_step(state: DeviceState, t_out: float, rh: float, cfg: DefrostConfig,
                 rng: np.random.Generator, dt_h: float) -> Tuple[DeviceState, bool]:
    """Possibly start a defrost event for the coming step.

    One uniform draw is consumed every call so that runs on the same weather
    stay aligned whatever the controller does.

    Returns:
        The updated state and whether a new event started.
    """
    draw = rng.random()
    if state.defrost_active:
        return state, False
    low, high = cfg.rh_band
    in_band = t_out < cfg.t_ceiling and low <= rh <= high
    if not in_band:
        return state, False
    probability = min(1.0, cfg.events_per_day * dt_h / 24.0)
    if draw < probability:
        logger.debug("Defrost started (t_out=%.1f °C, rh=%.0f%%)", t_out, rh)
        return replace(state, defrost_remaining=cfg.duration_h), True
    return state, False


def device_controller_step(state: DeviceState, setpoint: float, t_in: float,
                           cfg: PlantConfig, settings: DeviceSettings, eta: float,
                           dt_h: float, defrost_stage: int = 0) -> Tuple[DeviceOutput, DeviceState]:
    """One internal step of the on-board thermostat loop.

    The heat pump follows a PI law with gain k_p = kp_fraction·η·P̄ per °C and
    is limited to η·P̄. The integral does not unwind while the room is above
    the set-point and still cooling. Element stages engage one at a time while
    the tracking error stays above the stage-up threshold for the dwell time.
    The first stage also engages when the heat pump has been at full output
    for the dwell time, the room is not warming and the error is still above
    the saturation threshold.

    Once a stage has engaged the integral is held at full output (boost) and
    the first stage re-engages as soon as the error exceeds the saturation
    threshold again. Boost ends after a step in which the room warmed with no
    stage on, that is once the heat pump alone covers the load. All stages
    drop out once the error falls to the stage-off threshold, always honouring
    the per-stage minimum on and off times. During defrost the heat-pump
    output is drawn from the house and at least ``defrost_stage`` runs.
    """
    error = setpoint - t_in
    hp_cap = eta * cfg.p_bar
    kp = settings.kp_fraction * hp_cap

    warming = state.last_t_in is not None and t_in > state.last_t_in
    boost = state.boost
    if boost and state.level == 0 and warming:
        boost = False
        logger.debug("Heat pump covers the load, boost released at %.2f °C", t_in)
    integral = state.integral
    raw = kp * error + integral
    q_hp = min(max(raw, 0.0), hp_cap)
    if not boost:
        if settings.integral_time_h:
            saturated_high = raw >= hp_cap and error > 0
            saturated_low = raw <= 0 and error < 0
            cooling = (error < 0 and state.last_t_in is not None
                       and t_in < state.last_t_in - _COOLING_EPS)
            if not (saturated_high or saturated_low or cooling):
                ki = kp / settings.integral_time_h
                integral = min(max(integral + ki * error * dt_h, 0.0), hp_cap)

    level = state.level
    on: List[float] = list(state.on_timers)
    off: List[float] = list(state.off_timers)
    error_timer = state.error_timer
    n = cfg.n_stages

    def can_engage(target: int) -> bool:
        return off[target - 1] >= settings.min_off_h - _TIME_EPS

    if error > settings.stage_up_threshold:
        error_timer = 0.0 if error_timer is None else error_timer + dt_h
        if (error_timer >= settings.dwell_h - _TIME_EPS and level < n
                and can_engage(level + 1)):
            level += 1
            on[level - 1] = 0.0
            error_timer = 0.0
            logger.debug("Element stage %d engaged (error %.2f °C)", level, error)
    else:
        error_timer = None
        if (error <= settings.stage_off_threshold and level > 0
                and on[level - 1] >= settings.min_on_h - _TIME_EPS):
            for i in range(level):
                off[i] = 0.0
            level = 0

    saturated = state.saturated_h >= settings.dwell_h - _TIME_EPS and not warming
    if (level == 0 < n and error > settings.saturation_threshold
            and (boost or saturated) and can_engage(1)):
        level = 1
        on[0] = 0.0
        logger.debug("Element stage 1 engaged on heat-pump saturation (error %.2f °C)", error)

    if level > state.level:
        boost = True
        if settings.integral_time_h:
            integral = hp_cap
            q_hp = min(max(kp * error + integral, 0.0), hp_cap)

    defrost = state.defrost_active
    if defrost:
        target = min(defrost_stage, n)
        while level < target and can_engage(level + 1):
            level += 1
            on[level - 1] = 0.0

    for i in range(n):
        if i < level:
            on[i] += dt_h
        else:
            off[i] = off[i] + dt_h if math.isfinite(off[i]) else off[i]

    saturated_h = state.saturated_h + dt_h if q_hp >= hp_cap - 1e-9 else 0.0
    p_hp = q_hp / eta
    q_hp_delivered = -q_hp if defrost else q_hp
    p_elem = cfg.stage_power(level)
    output = DeviceOutput(
        q_c=q_hp_delivered + p_elem,
        q_hp=q_hp_delivered,
        p_hp=p_hp,
        p_elem=p_elem,
        level=level,
        defrost=defrost,
    )
    new_state = DeviceState(
        level=level,
        on_timers=tuple(on),
        off_timers=tuple(off),
        error_timer=error_timer,
        integral=integral,
        defrost_remaining=_remaining_after(state.defrost_remaining, dt_h) if defrost else 0.0,
        saturated_h=saturated_h,
        boost=boost,
        last_t_in=t_in,
    )
    return output, new_state


def _remaining_after(remaining: float, dt_h: float) -> float:
    left = remaining - dt_h
    return left if left > _TIME_EPS else 0.0
