"""Supervisory receding-horizon planner and discomfort-price tuning."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from models import (ComfortInputs, DisturbanceModel, Economics, ForecastSlice, LpProblem,
                    LpStatus, ObjectiveBreakdown, OcpPlan, OcpSpec, PlanStatus, PlantConfig,
                    ThermalParams, TuningState)
from services.comfort import mean_ppd
from services.identification import build_disturbance_features, predict_disturbance
from services.lp_solver import solve_lp
from services.plant import cop_profile
from services.thermal_model import discretize, effective_boundary_temperature
from utils.date_utils import hour_of_day, in_hour_window


logger = logging.getLogger(__name__)

VERIFY_TOL = 1e-6

DisturbanceSource = Union[DisturbanceModel, Callable[[ForecastSlice], np.ndarray]]


class OcpError(Exception):
    """Raised for malformed planning problems or plans that fail verification."""
    pass


@dataclass(frozen=True)
class OcpIndex:
    """Column layout of the planning LP."""
    horizon: int
    tracking: bool

    @property
    def t(self) -> slice:
        return slice(0, self.horizon)

    @property
    def q(self) -> slice:
        return slice(self.horizon, 2 * self.horizon)

    @property
    def p(self) -> slice:
        return slice(2 * self.horizon, 3 * self.horizon)

    @property
    def s(self) -> slice:
        return slice(3 * self.horizon, 4 * self.horizon)

    @property
    def z(self) -> int:
        return 4 * self.horizon

    @property
    def u(self) -> slice:
        return slice(4 * self.horizon + 1, 5 * self.horizon + 1)

    @property
    def n_vars(self) -> int:
        return 5 * self.horizon + 1 if self.tracking else 4 * self.horizon + 1


def validate_spec(spec: OcpSpec) -> None:
    """Check the preconditions the planner relies on.

    Raises:
        OcpError: If any price, COP or model coefficient is out of range.
    """
    if np.any(spec.pi_e <= 0):
        raise OcpError("energy price must be strictly positive at every step")
    if spec.pi_d < 0 or spec.pi_g < 0 or np.any(spec.pi_t < 0) or np.any(spec.mu < 0):
        raise OcpError("prices and emission intensities must be non-negative")
    if np.any(spec.eta < 1.0):
        raise OcpError("COP must be at least 1 at every step")
    if not 0.0 < spec.a < 1.0:
        raise OcpError(f"decay factor must lie in (0, 1), got {spec.a}")
    if spec.r <= 0 or spec.dt_h <= 0 or spec.p_bar <= 0 or spec.p_r_bar < 0:
        raise OcpError("resistance, step and capacities must be positive")
    if spec.delta < 0:
        raise OcpError("comfort half-width must be non-negative")
    if spec.tracking_tau_h is not None and spec.tracking_tau_h <= 0:
        raise OcpError("tracking time constant must be positive")
    if spec.max_rate is not None and spec.max_rate <= 0:
        raise OcpError("set-point rate limit must be positive")
    for name in ('theta', 'q_e', 't_ref', 'pi_t', 'pi_e', 'eta', 'mu'):
        if not np.all(np.isfinite(getattr(spec, name))):
            raise OcpError(f"{name} contains non-finite values")
    if not math.isfinite(spec.t0):
        raise OcpError("initial temperature must be finite")


def build_ocp_lp(spec: OcpSpec, delta: Optional[float] = None) -> Tuple[LpProblem, OcpIndex]:
    """Assemble the planning LP.

    Columns per step are temperature, heat, electric power and comfort
    slack, followed by the horizon peak (and set-point commands when a
    tracking time constant is given). Electric power is the epigraph of the
    two efficiency lines P ≥ Q/η and P ≥ Q + (1 − η)·P̄.
    """
    validate_spec(spec)
    half_width = spec.delta if delta is None else delta
    n_steps = spec.horizon
    idx = OcpIndex(n_steps, spec.tracking_tau_h is not None)
    n = idx.n_vars
    a, r = spec.a, spec.r

    c = np.zeros(n)
    c[idx.z] = spec.pi_d
    c[idx.p] = spec.dt_h * (spec.pi_e + spec.pi_g * spec.mu)
    c[idx.s] = spec.dt_h * spec.pi_t

    eq_rows: List[np.ndarray] = []
    eq_rhs: List[float] = []
    ub_rows: List[np.ndarray] = []
    ub_rhs: List[float] = []

    def row() -> np.ndarray:
        return np.zeros(n)

    t0 = idx.t.start
    q0 = idx.q.start
    p0 = idx.p.start
    s0 = idx.s.start
    for k in range(n_steps):
        dyn = row()
        dyn[t0 + k] = 1.0
        dyn[q0 + k] = -(1.0 - a) * r
        rhs = (1.0 - a) * (spec.theta[k] + r * spec.q_e[k])
        if k == 0:
            rhs += a * spec.t0
        else:
            dyn[t0 + k - 1] = -a
        eq_rows.append(dyn)
        eq_rhs.append(rhs)

        if idx.tracking:
            b = math.exp(-spec.dt_h / spec.tracking_tau_h)
            track = row()
            track[t0 + k] = 1.0
            track[idx.u.start + k] = -(1.0 - b)
            if k == 0:
                eq_rhs_track = b * spec.t0
            else:
                track[t0 + k - 1] = -b
                eq_rhs_track = 0.0
            eq_rows.append(track)
            eq_rhs.append(eq_rhs_track)

        low_line = row()
        low_line[q0 + k] = 1.0 / spec.eta[k]
        low_line[p0 + k] = -1.0
        ub_rows.append(low_line)
        ub_rhs.append(0.0)

        high_line = row()
        high_line[q0 + k] = 1.0
        high_line[p0 + k] = -1.0
        ub_rows.append(high_line)
        ub_rhs.append((spec.eta[k] - 1.0) * spec.p_bar)

        peak = row()
        peak[p0 + k] = 1.0
        peak[idx.z] = -1.0
        ub_rows.append(peak)
        ub_rhs.append(0.0)

        above = row()
        above[t0 + k] = 1.0
        above[s0 + k] = -1.0
        ub_rows.append(above)
        ub_rhs.append(spec.t_ref[k])

        below = row()
        below[t0 + k] = -1.0
        below[s0 + k] = -1.0
        ub_rows.append(below)
        ub_rhs.append(-spec.t_ref[k])

        if spec.max_rate is not None:
            limit = spec.max_rate * spec.dt_h
            rise = row()
            fall = row()
            rise[t0 + k] = 1.0
            fall[t0 + k] = -1.0
            if k == 0:
                ub_rows.extend([rise, fall])
                ub_rhs.extend([limit + spec.t0, limit - spec.t0])
            else:
                rise[t0 + k - 1] = -1.0
                fall[t0 + k - 1] = 1.0
                ub_rows.extend([rise, fall])
                ub_rhs.extend([limit, limit])

    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    lower[idx.t] = -np.inf
    upper[idx.q] = spec.capacity
    upper[idx.s] = half_width
    if idx.tracking:
        lower[idx.u] = -np.inf

    problem = LpProblem(c=c, a_ub=np.array(ub_rows), b_ub=np.array(ub_rhs),
                        a_eq=np.array(eq_rows), b_eq=np.array(eq_rhs),
                        lower=lower, upper=upper)
    return problem, idx


def electric_from_heat(q: np.ndarray, eta: np.ndarray, p_bar: float) -> np.ndarray:
    """Vectorised heat-pump-first electric power for a heat trajectory."""
    return q / eta + (1.0 - 1.0 / eta) * np.maximum(0.0, q - eta * p_bar)


def _breakdown(spec: OcpSpec, temps: np.ndarray, p: np.ndarray) -> ObjectiveBreakdown:
    return ObjectiveBreakdown(
        demand=float(spec.pi_d * np.max(p)),
        energy=float(spec.dt_h * np.sum(spec.pi_e * p)),
        discomfort=float(spec.dt_h * np.sum(spec.pi_t * np.abs(temps - spec.t_ref))),
        emission=float(spec.dt_h * np.sum(spec.pi_g * spec.mu * p)),
    )


def _verify_plan(spec: OcpSpec, temps: np.ndarray, q: np.ndarray, p: np.ndarray,
                 half_width: float) -> None:
    prev = np.concatenate([[spec.t0], temps[:-1]])
    dynamics = temps - (spec.a * prev + (1.0 - spec.a) * (spec.theta + spec.r * (q + spec.q_e)))
    if np.max(np.abs(dynamics)) > VERIFY_TOL:
        raise OcpError(f"plan violates the house dynamics by {np.max(np.abs(dynamics)):.2e}")
    if np.max(np.abs(temps - spec.t_ref)) > half_width + VERIFY_TOL:
        raise OcpError("plan leaves the comfort band")
    if np.min(q) < -VERIFY_TOL or np.any(q > spec.capacity + VERIFY_TOL):
        raise OcpError("plan heat outside plant capacity")
    expected = electric_from_heat(np.clip(q, 0.0, spec.capacity), spec.eta, spec.p_bar)
    gap = float(np.max(np.abs(p - expected)))
    if gap > VERIFY_TOL:
        raise OcpError(f"planned electric power is not tight on the efficiency curve (gap {gap:.2e})")


def _solve_with_band(spec: OcpSpec, half_width: float) -> Optional[OcpPlan]:
    problem, idx = build_ocp_lp(spec, half_width)
    solution = solve_lp(problem)
    if solution.status != LpStatus.OPTIMAL:
        logger.debug("Planning LP with band ±%.2f °C ended %s", half_width, solution.status.value)
        return None
    x = solution.x
    assert x is not None
    temps = x[idx.t].copy()
    q = np.clip(x[idx.q], 0.0, None)
    p = x[idx.p].copy()
    _verify_plan(spec, temps, q, p, half_width)
    breakdown = _breakdown(spec, temps, p)
    return OcpPlan(
        status=PlanStatus.OPTIMAL,
        setpoints=temps,
        q_c=q,
        p=p,
        peak=float(np.max(p)),
        objective=breakdown.total,
        breakdown=breakdown,
        delta_used=half_width,
        commands=x[idx.u].copy() if idx.tracking else None,
        timestamps=spec.timestamps,
    )


def reference_fallback_plan(spec: OcpSpec) -> OcpPlan:
    """Track the reference directly, saturating heat at the plant limits."""
    temps = np.empty(spec.horizon)
    q = np.empty(spec.horizon)
    t_prev = spec.t0
    a, r = spec.a, spec.r
    for k in range(spec.horizon):
        needed = ((spec.t_ref[k] - a * t_prev) / (1.0 - a) - spec.theta[k]) / r - spec.q_e[k]
        q[k] = min(max(needed, 0.0), spec.capacity[k])
        temps[k] = a * t_prev + (1.0 - a) * (spec.theta[k] + r * (q[k] + spec.q_e[k]))
        t_prev = temps[k]
    p = electric_from_heat(q, spec.eta, spec.p_bar)
    breakdown = _breakdown(spec, temps, p)
    return OcpPlan(
        status=PlanStatus.REFERENCE_FALLBACK,
        setpoints=spec.t_ref.copy(),
        q_c=q,
        p=p,
        peak=float(np.max(p)),
        objective=breakdown.total,
        breakdown=breakdown,
        delta_used=spec.delta,
        timestamps=spec.timestamps,
    )


def solve_ocp(spec: OcpSpec, relax_step: float = 0.5, relax_max: float = 2.0) -> OcpPlan:
    """Plan the horizon; widen the comfort band or fall back if it is infeasible.

    The band is widened in ``relax_step`` increments up to ``relax_max`` above
    the nominal half-width (status ``comfort-relaxed``). If that still fails
    the reference itself is returned as set-points (``reference-fallback``).

    Raises:
        OcpError: On a malformed spec or a plan that fails verification.
    """
    plan = _solve_with_band(spec, spec.delta)
    if plan is not None:
        return plan

    widening = relax_step
    while widening <= relax_max + 1e-9:
        plan = _solve_with_band(spec, spec.delta + widening)
        if plan is not None:
            logger.warning("Comfort band widened by %.1f °C to keep the plan feasible", widening)
            plan.status = PlanStatus.COMFORT_RELAXED
            return plan
        widening += relax_step

    logger.warning("No feasible plan within ±%.1f °C, falling back to the reference",
                   spec.delta + relax_max)
    return reference_fallback_plan(spec)


def day_night_modulation(price: float, instant: datetime, tuning: TuningState) -> float:
    """Scale a base discomfort price by the day or night multiplier."""
    if in_hour_window(hour_of_day(instant), tuning.day_start, tuning.day_end):
        return price * tuning.day_multiplier
    return price * tuning.night_multiplier


def discomfort_prices(base: float, instants: List[datetime], tuning: TuningState) -> np.ndarray:
    return np.array([day_night_modulation(base, t, tuning) for t in instants])


@dataclass(frozen=True)
class TuningCandidate:
    price: float
    mean_ppd: float
    energy_cost: float
    status: str

    def qualifies(self, ceiling: float) -> bool:
        return self.mean_ppd <= ceiling


def _evaluate_candidate(spec: OcpSpec, price: float, tuning: TuningState,
                        comfort: ComfortInputs, relax: Tuple[float, float]) -> TuningCandidate:
    if tuning.modulate_sweep and spec.timestamps is not None:
        pi_t = discomfort_prices(price, spec.timestamps, tuning)
    else:
        pi_t = np.full(spec.horizon, price)
    plan = solve_ocp(replace(spec, pi_t=pi_t), *relax)
    return TuningCandidate(price=float(price), mean_ppd=mean_ppd(plan.setpoints, comfort),
                           energy_cost=plan.breakdown.energy, status=plan.status.value)


def sweep_discomfort_prices(spec: OcpSpec, tuning: TuningState, comfort: ComfortInputs,
                            stop_at_first: bool = False,
                            relax: Tuple[float, float] = (0.5, 2.0)) -> List[TuningCandidate]:
    """Evaluate grid candidates in ascending order.

    With ``stop_at_first`` the sweep ends at the first candidate whose
    planned time-average PPD is within the ceiling. A thread pool is used
    when ``tuning.workers`` > 1; results keep grid order either way.
    """
    grid = [float(v) for v in tuning.grid]
    if tuning.workers > 1:
        with ThreadPoolExecutor(max_workers=tuning.workers) as pool:
            return list(pool.map(
                lambda price: _evaluate_candidate(spec, price, tuning, comfort, relax), grid))

    results: List[TuningCandidate] = []
    for price in grid:
        candidate = _evaluate_candidate(spec, price, tuning, comfort, relax)
        logger.debug("Discomfort price %.4f -> mean PPD %.2f%%", price, candidate.mean_ppd)
        results.append(candidate)
        if stop_at_first and candidate.qualifies(tuning.ppd_ceiling):
            break
    return results


def select_discomfort_price(candidates: List[TuningCandidate], tuning: TuningState) -> float:
    for candidate in candidates:
        if candidate.qualifies(tuning.ppd_ceiling):
            return candidate.price
    logger.warning("No discomfort price keeps mean PPD under %.1f%%, using grid maximum %.3f",
                   tuning.ppd_ceiling, tuning.grid_max)
    return float(tuning.grid_max)


def tune_discomfort_price(spec: OcpSpec, tuning: TuningState, comfort: ComfortInputs,
                          relax: Tuple[float, float] = (0.5, 2.0)) -> float:
    """Lowest grid price whose plan keeps time-average PPD under the ceiling."""
    candidates = sweep_discomfort_prices(spec, tuning, comfort, stop_at_first=True, relax=relax)
    return select_discomfort_price(candidates, tuning)


class SupervisoryController:
    """Hourly planner: turns the measured temperature and a forecast into a set-point."""

    def __init__(self, params: ThermalParams, plant: PlantConfig, economics: Economics,
                 tuning: TuningState, comfort: ComfortInputs, disturbance: DisturbanceSource):
        self.params = params
        self.plant = plant
        self.economics = economics
        self.tuning = tuning
        self.comfort = comfort
        self.disturbance = disturbance
        self.model = discretize(params, economics.dt_h)
        self.last_plan: Optional[OcpPlan] = None
        self.last_pi_t: float = float('nan')

    def forecast_disturbance(self, forecast: ForecastSlice) -> np.ndarray:
        if isinstance(self.disturbance, DisturbanceModel):
            features = build_disturbance_features(forecast.timestamps, forecast.t_out,
                                                  forecast.ghi, forecast.wind)
            return predict_disturbance(self.disturbance, features)
        return np.asarray(self.disturbance(forecast), dtype=float)

    def build_spec(self, t_in: float, forecast: ForecastSlice, clock: datetime,
                   base_price: Optional[float] = None) -> OcpSpec:
        horizon = self.economics.horizon
        if len(forecast) < horizon:
            raise OcpError(f"forecast covers {len(forecast)} steps, horizon needs {horizon}")
        dt = timedelta(hours=self.economics.dt_h)
        step_times = [clock + k * dt for k in range(horizon)]
        end_times = [clock + (k + 1) * dt for k in range(horizon)]
        t_out = forecast.t_out[:horizon]
        price = self.tuning.base_price if base_price is None else base_price
        return OcpSpec(
            horizon=horizon,
            dt_h=self.economics.dt_h,
            a=self.model.a,
            r=self.params.r_eff,
            t0=float(t_in),
            theta=effective_boundary_temperature(self.params, t_out),
            q_e=self.forecast_disturbance(forecast)[:horizon],
            eta=cop_profile(self.plant, t_out),
            p_bar=self.plant.p_bar,
            p_r_bar=self.plant.p_r_bar,
            t_ref=np.array([self.economics.reference.value_at(t) for t in end_times]),
            delta=self.economics.delta,
            pi_e=np.array([self.economics.energy_price_at(t) for t in step_times]),
            pi_d=self.economics.demand_price,
            pi_t=discomfort_prices(price, end_times, self.tuning),
            pi_g=self.economics.emission_price,
            mu=np.array([self.economics.emission_intensity_at(t) for t in step_times]),
            tracking_tau_h=self.economics.tracking_tau_h,
            max_rate=self.economics.max_setpoint_rate,
            timestamps=end_times,
        )

    @property
    def relax(self) -> Tuple[float, float]:
        return self.economics.relax_step, self.economics.relax_max

    def retune(self, t_in: float, forecast: ForecastSlice, clock: datetime) -> float:
        spec = self.build_spec(t_in, forecast, clock)
        self.tuning.base_price = tune_discomfort_price(spec, self.tuning, self.comfort, self.relax)
        self.tuning.last_tuned = clock
        logger.info("Discomfort price tuned to %.4f at %s", self.tuning.base_price, clock)
        return self.tuning.base_price

    def plan(self, t_in: float, forecast: ForecastSlice, clock: datetime) -> OcpPlan:
        if self.tuning.enabled and self.tuning.is_due(clock):
            self.retune(t_in, forecast, clock)
        spec = self.build_spec(t_in, forecast, clock)
        plan = solve_ocp(spec, *self.relax)
        self.last_plan = plan
        self.last_pi_t = float(spec.pi_t[0])
        return plan

    def step(self, t_in: float, forecast: ForecastSlice, clock: datetime) -> float:
        return self.plan(t_in, forecast, clock).first_setpoint


def mpc_step(controller: SupervisoryController, t_in: float, forecast: ForecastSlice,
             clock: datetime) -> float:
    """Set-point for the coming step, retuning the discomfort price when due."""
    return controller.step(t_in, forecast, clock)
