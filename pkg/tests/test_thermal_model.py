"""
Tests for the thermal circuit model: effective parameters, discretisation and stepping.
"""
import sys
import math
from dataclasses import replace
from pathlib import Path

# Add the app/src directory to Python path
project_root = Path(__file__).parent.parent
app_src_dir = project_root / 'app' / 'src'
sys.path.insert(0, str(app_src_dir))

import numpy as np
import pytest

from models import EffectiveModel, StateInput, ThermalParams
from services.thermal_model import (discretize, effective_boundary_temperature, effective_resistance,
                                    equilibrium_power, simulate_trajectory, step)


FIELD = ThermalParams(r_out=2.04, r_m=1.06, c=6.5, t_m=20.6)


def rk4_oracle(t0, theta, r, c, q, dt, substeps=10_000):
    """Classical Runge-Kutta on C·dT/dt = (θ−T)/R + q, vectorised over cases."""
    h = dt / substeps

    def slope(t):
        return ((theta - t) / r + q) / c

    t = np.array(t0, dtype=float)
    for _ in range(substeps):
        k1 = slope(t)
        k2 = slope(t + 0.5 * h * k1)
        k3 = slope(t + 0.5 * h * k2)
        k4 = slope(t + h * k3)
        t = t + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return t


class TestThermalParams:
    """Parameter validation."""

    @pytest.mark.parametrize('field_name', ['r_out', 'r_m', 'c'])
    def test_non_positive_values_rejected(self, field_name):
        """Resistances and capacitance must be positive."""
        values = FIELD.to_dict()
        values[field_name] = 0.0
        with pytest.raises(ValueError):
            ThermalParams(**values)

    def test_non_finite_mass_temperature_rejected(self):
        """The mass temperature must be finite."""
        with pytest.raises(ValueError):
            ThermalParams(r_out=1.0, r_m=1.0, c=1.0, t_m=float('nan'))


class TestEffectiveParameters:
    """θ and R algebra."""

    def test_equal_endpoints(self):
        """Equal mass and outdoor temperature give that temperature."""
        assert effective_boundary_temperature(FIELD, 20.6) == pytest.approx(20.6)

    def test_field_parameters_at_freezing(self):
        """Hand-evaluated boundary temperature for the field-test house."""
        assert effective_boundary_temperature(FIELD, 0.0) == pytest.approx(13.556, abs=1e-3)

    def test_symmetric_resistances_give_midpoint(self):
        """Equal resistances average the two temperatures."""
        p = ThermalParams(r_out=1.0, r_m=1.0, c=1.0, t_m=10.0)
        assert effective_boundary_temperature(p, 30.0) == pytest.approx(20.0)

    def test_array_input(self):
        """Arrays are mapped element-wise and stay between the endpoints."""
        t_out = np.linspace(-20.0, 15.0, 8)
        theta = effective_boundary_temperature(FIELD, t_out)
        assert theta.shape == t_out.shape
        assert np.all(theta >= t_out) and np.all(theta <= FIELD.t_m)

    def test_resistance_values(self):
        """Parallel combination of the two resistances."""
        assert effective_resistance(FIELD) == pytest.approx(0.6976, abs=1e-4)
        assert effective_resistance(ThermalParams(1.0, 1.0, 1.0, 0.0)) == pytest.approx(0.5)

    def test_open_mass_branch_limit(self):
        """A very large mass resistance leaves only the envelope."""
        p = ThermalParams(r_out=2.0, r_m=1e9, c=1.0, t_m=0.0)
        assert effective_resistance(p) == pytest.approx(2.0, rel=1e-6)

    def test_resistance_below_both_branches(self):
        """R is smaller than either resistance."""
        assert effective_resistance(FIELD) < min(FIELD.r_m, FIELD.r_out)


class TestDiscretize:
    """Exact discretisation."""

    def test_field_decay_factor(self):
        """a = exp(-1/(0.6976·6.5)) for the field-test house."""
        model = discretize(FIELD, 1.0)
        assert model.a == pytest.approx(0.8026, abs=1e-4)

    def test_unit_parameters(self):
        """R·C = 1 and Δt = 1 give exp(-1)."""
        p = ThermalParams(r_out=2.0, r_m=2.0, c=1.0, t_m=0.0)
        assert discretize(p, 1.0).a == pytest.approx(math.exp(-1.0))

    def test_small_step_approaches_one(self):
        """a tends to 1 as the step shrinks."""
        assert discretize(FIELD, 1e-6).a == pytest.approx(1.0, abs=1e-6)

    def test_non_positive_step_rejected(self):
        """The step must be positive."""
        with pytest.raises(ValueError):
            discretize(FIELD, 0.0)

    def test_effective_model_validates_a(self):
        """The decay factor must lie strictly inside (0, 1)."""
        with pytest.raises(ValueError):
            EffectiveModel(params=FIELD, a=1.0, dt_h=1.0)


class TestStep:
    """One-step and multi-step propagation."""

    def test_fixed_point(self):
        """Holding the equilibrium input keeps the temperature constant."""
        model = discretize(FIELD, 1.0)
        theta = effective_boundary_temperature(FIELD, -5.0)
        q_c = equilibrium_power(model, 20.0, theta, 0.5)
        assert step(model, StateInput(20.0, theta, q_c, 0.5)) == pytest.approx(20.0)

    def test_field_equilibrium_power(self):
        """At 0 °C outside the field house needs about 9.24 kW with no gains."""
        model = discretize(FIELD, 1.0)
        theta = effective_boundary_temperature(FIELD, 0.0)
        assert equilibrium_power(model, 20.0, theta, 0.0) == pytest.approx(
            (20.0 - theta) / FIELD.r_eff)

    def test_step_is_convex_combination(self):
        """Without heat input the next temperature lies between T and θ."""
        model = discretize(FIELD, 1.0)
        t_next = step(model, StateInput(20.0, 10.0, 0.0, 0.0))
        assert 10.0 < t_next < 20.0

    def test_matches_continuous_dynamics(self):
        """Discrete steps agree with a fine Runge-Kutta integration on 1000 random cases with exogenous heat."""
        rng = np.random.default_rng(3)
        n = 1000
        r_out, r_m = rng.uniform(0.5, 5.0, n), rng.uniform(0.5, 5.0, n)
        c, t_m = rng.uniform(1.0, 20.0, n), rng.uniform(15.0, 25.0, n)
        dt = rng.uniform(0.1, 2.0, n)
        t0, t_out = rng.uniform(10.0, 25.0, n), rng.uniform(-20.0, 10.0, n)
        q, q_e = rng.uniform(0.0, 10.0, n), rng.uniform(-1.0, 3.0, n)
        cases = [ThermalParams(r_out=r_out[i], r_m=r_m[i], c=c[i], t_m=t_m[i]) for i in range(n)]
        theta = np.array([effective_boundary_temperature(p, t_out[i]) for i, p in enumerate(cases)])
        r = np.array([p.r_eff for p in cases])

        exact = rk4_oracle(t0, theta, r, c, q + q_e, dt)
        ours = np.array([step(discretize(p, dt[i]), StateInput(t0[i], theta[i], q[i], q_e[i]))
                         for i, p in enumerate(cases)])
        assert ours == pytest.approx(exact, abs=1e-8)

    def test_step_is_a_contraction(self):
        """Two starting temperatures move closer by exactly the decay factor."""
        rng = np.random.default_rng(4)
        model = discretize(FIELD, 1.0)
        for _ in range(200):
            theta, q, q_e = rng.uniform(-5.0, 20.0), rng.uniform(0.0, 20.0), rng.uniform(-1.0, 3.0)
            t1, t2 = rng.uniform(10.0, 30.0, 2)
            gap = step(model, StateInput(t1, theta, q, q_e)) - step(model, StateInput(t2, theta, q, q_e))
            assert abs(gap) == pytest.approx(model.a * abs(t1 - t2))
            assert abs(gap) <= abs(t1 - t2)

    @pytest.mark.parametrize('field_name', ['t_in', 'theta', 'q_c', 'q_e'])
    def test_step_is_monotone(self, field_name):
        """Raising the temperature, boundary temperature or any heat input never lowers the next temperature."""
        rng = np.random.default_rng(5)
        model = discretize(FIELD, 1.0)
        for _ in range(100):
            base = StateInput(rng.uniform(10.0, 30.0), rng.uniform(-5.0, 20.0),
                              rng.uniform(0.0, 20.0), rng.uniform(-1.0, 3.0))
            raised = replace(base, **{field_name: getattr(base, field_name) + rng.uniform(0.01, 5.0)})
            assert step(model, raised) > step(model, base)

    def test_trajectory_length_and_first_value(self):
        """Rolling out N inputs returns N+1 temperatures starting at T0."""
        model = discretize(FIELD, 1.0)
        temps = simulate_trajectory(model, 19.0, np.full(5, 13.0), np.full(5, 8.0), np.zeros(5))
        assert temps.shape == (6,)
        assert temps[0] == 19.0
        assert temps[1] == pytest.approx(step(model, StateInput(19.0, 13.0, 8.0, 0.0)))

    def test_trajectory_without_inputs(self):
        """No inputs returns just the initial temperature."""
        model = discretize(FIELD, 1.0)
        temps = simulate_trajectory(model, 18.5, np.array([]), np.array([]), np.array([]))
        assert temps.tolist() == [18.5]

    def test_trajectory_length_mismatch(self):
        """Inputs of different lengths are rejected."""
        model = discretize(FIELD, 1.0)
        with pytest.raises(ValueError):
            simulate_trajectory(model, 20.0, np.zeros(3), np.zeros(2), np.zeros(3))
