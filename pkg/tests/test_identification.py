"""
Tests for steady-window detection, parameter fitting and the exogenous-heat regressor.
"""
import sys
from datetime import datetime
from pathlib import Path

# Add the app/src directory to Python path
project_root = Path(__file__).parent.parent
app_src_dir = project_root / 'app' / 'src'
sys.path.insert(0, str(app_src_dir))

import logging

import numpy as np
import pandas as pd
import pytest

from models import SteadyWindowCriteria, ThermalParams
from services.identification import (FEATURE_COLUMNS, IdentificationError, build_disturbance_features,
                                     detect_steady_windows, fit_mass_params, fit_outdoor_resistance,
                                     estimate_mass_temperature, identify_model, invert_exogenous,
                                     predict_disturbance, r_m_grid, train_disturbance_model,
                                     validate_model)
from services.synthetic import synthesize_training_series, synthetic_weather
from services.thermal_model import discretize


TRUTH = ThermalParams(r_out=2.04, r_m=1.06, c=6.5, t_m=20.6)
GRID = np.linspace(0.5, 2.0, 151)


@pytest.fixture
def weather():
    return synthetic_weather(datetime(2022, 12, 1), 21 * 24, mean_t_out=-2.0)


@pytest.fixture
def series(weather):
    return synthesize_training_series(TRUTH, weather, q_e=0.5)


class TestSteadyWindows:
    """Night windows with bounded drift."""

    def test_only_night_samples(self, series):
        """Every detected sample lies in the night window and the set is not empty."""
        steady = detect_steady_windows(series, SteadyWindowCriteria())
        assert steady.size > 0
        hours = series.timestamps[steady].hour
        assert np.all((hours >= 23) | (hours < 6))

    def test_drifting_night_rejected(self, series):
        """A trend larger than the drift bound removes every window."""
        series.t_in = series.t_in + 0.5 * np.arange(len(series))
        assert detect_steady_windows(series, SteadyWindowCriteria()).size == 0

    def test_short_series(self, series):
        """A series shorter than the window yields nothing."""
        assert detect_steady_windows(series.slice(0, 2), SteadyWindowCriteria()).size == 0


class TestParameterFit:
    """Outdoor resistance and mass grid search."""

    def test_outdoor_resistance_recovered(self, series):
        """Noise-free steady nights give R_out exactly."""
        steady = detect_steady_windows(series, SteadyWindowCriteria())
        _, r_out = fit_outdoor_resistance(series, steady)
        assert r_out == pytest.approx(TRUTH.r_out, rel=1e-6)

    def test_outdoor_resistance_needs_samples(self, series):
        """Fewer than two steady samples cannot identify R_out."""
        with pytest.raises(IdentificationError, match="unidentifiable"):
            fit_outdoor_resistance(series, [5])

    def test_outdoor_resistance_needs_variation(self, series):
        """Constant heating over the steady samples is rejected."""
        series.q_c = np.full(len(series), 3.0)
        with pytest.raises(IdentificationError, match="constant"):
            fit_outdoor_resistance(series, [0, 1, 2, 3])

    def test_mass_parameters_recovered(self, series):
        """The grid search lands on the true R_m and C when it is a candidate."""
        params, model, scores = fit_mass_params(series, TRUTH.r_out, GRID)
        assert params.r_m == pytest.approx(TRUTH.r_m, rel=0.01)
        assert params.c == pytest.approx(TRUTH.c, rel=0.01)
        assert model.a == pytest.approx(discretize(TRUTH, 1.0).a, rel=1e-4)
        assert len(scores) > 0
        assert min(score for _, score in scores) < 1e-6

    def test_mass_temperature_is_mean_indoor(self, series):
        """The mass temperature estimate is the mean indoor temperature."""
        series.t_in = np.where(np.arange(len(series)) % 2 == 0, 19.0, 21.5)
        assert estimate_mass_temperature(series) == pytest.approx(20.25)

    def test_default_grid(self):
        """Default candidates are 200 log-spaced values over [0.01, 10]."""
        grid = r_m_grid()
        assert len(grid) == 200
        assert grid[0] == pytest.approx(0.01)
        assert grid[-1] == pytest.approx(10.0)
        assert np.all(np.diff(np.log(grid)) == pytest.approx(np.log(grid[1] / grid[0])))

    def test_split_too_small(self, series):
        """A split leaving no validation pairs is refused."""
        with pytest.raises(IdentificationError):
            fit_mass_params(series.slice(0, 10), TRUTH.r_out, GRID, train_fraction=1.0)


class TestExogenousInversion:
    """Implied exogenous heat."""

    def test_inversion_recovers_profile(self, weather):
        """With the true model the inverted heat equals the simulated one."""
        q_e = 0.4 + 0.3 * np.sin(np.arange(len(weather)) / 5.0)
        data = synthesize_training_series(TRUTH, weather, q_e=q_e)
        model = discretize(TRUTH, 1.0)
        inverted = invert_exogenous(data, TRUTH, model)
        assert len(inverted) == len(data) - 1
        assert inverted == pytest.approx(q_e[:-1], abs=1e-8)

    def test_validation_with_known_heat(self, series):
        """The true exogenous heat gives near-zero one-step errors."""
        report = validate_model(TRUTH, discretize(TRUTH, 1.0), np.full(len(series), 0.5), series)
        assert report.rmse_t < 1e-9
        assert report.rmse_q < 1e-8

    def test_validation_reports_split(self, series):
        """The report carries the training count and the holdout's own time span."""
        holdout = series.slice(300, len(series))
        report = validate_model(TRUTH, discretize(TRUTH, 1.0), np.full(len(holdout), 0.5), holdout,
                                n_train=300)
        assert report.n_train == 300
        assert report.n_validation == len(series) - 300
        assert report.validation_start == series.timestamps[300]
        assert report.validation_end == series.timestamps[-1]
        assert report.to_dict()['validation_start'] == series.timestamps[300].isoformat()

    def test_negative_training_count_rejected(self, series):
        """A negative training count is refused."""
        with pytest.raises(IdentificationError, match="non-negative"):
            validate_model(TRUTH, discretize(TRUTH, 1.0), np.full(len(series), 0.5), series,
                           n_train=-1)


class TestDisturbanceModel:
    """Regressor training and prediction."""

    def _features(self, hours=240):
        w = synthetic_weather(datetime(2023, 1, 2), hours, rh=60.0)
        return build_disturbance_features(w.timestamps, w.t_out, w.ghi, w.wind)

    def test_feature_layout(self):
        """Weather columns, hour angle and a one-hot day of week."""
        stamps = pd.date_range('2023-01-02 06:00', periods=2, freq='h')
        frame = build_disturbance_features(stamps, np.zeros(2), np.zeros(2), np.zeros(2))
        assert list(frame.columns) == FEATURE_COLUMNS
        assert frame.loc[0, 'hour_sin'] == pytest.approx(1.0)
        assert frame.loc[0, 'hour_cos'] == pytest.approx(0.0, abs=1e-12)
        assert frame.loc[0, 'dow_0'] == 1.0
        assert frame.filter(like='dow_').sum(axis=1).tolist() == [1.0, 1.0]

    def test_linear_target_learned(self):
        """A target linear in irradiance is fitted closely."""
        features = self._features()
        targets = 0.3 + 0.002 * features['ghi'].to_numpy()
        model = train_disturbance_model(features, targets)
        assert model.kind == 'ridge'
        assert model.train_rmse < 0.05
        assert predict_disturbance(model, features) == pytest.approx(targets, abs=0.1)

    def test_constant_columns_dropped(self, caplog):
        """Zero-variance features are dropped with a warning."""
        features = self._features()
        features['wind'] = 2.0
        with caplog.at_level(logging.WARNING):
            model = train_disturbance_model(features, np.ones(len(features)))
        assert 'wind' in model.dropped_features
        assert 'wind' not in model.feature_names
        assert 'zero-variance' in caplog.text

    @pytest.mark.parametrize('kind', ['ridge', 'kernel'])
    def test_affine_rescaling_invariant(self, kind):
        """Predictions do not change when a feature is affinely rescaled."""
        features = self._features(120)
        targets = 0.5 + 0.01 * features['t_out'].to_numpy()
        base = train_disturbance_model(features, targets, kind=kind)
        scaled = features.copy()
        scaled['t_out'] = 1.8 * scaled['t_out'] + 32.0
        other = train_disturbance_model(scaled, targets, kind=kind)
        assert predict_disturbance(other, scaled) == pytest.approx(
            predict_disturbance(base, features), abs=1e-6)

    def test_errors(self):
        """Length mismatch, unknown kinds, too few samples and missing features."""
        features = self._features(48)
        with pytest.raises(IdentificationError, match="differ"):
            train_disturbance_model(features, np.ones(10))
        with pytest.raises(IdentificationError, match="unknown"):
            train_disturbance_model(features, np.ones(48), kind='forest')
        with pytest.raises(IdentificationError, match="fewer than twice"):
            train_disturbance_model(features.iloc[:6], np.arange(6.0))
        model = train_disturbance_model(features, np.arange(48.0))
        with pytest.raises(IdentificationError, match="feature mismatch"):
            predict_disturbance(model, features.drop(columns=['ghi']))


class TestIdentifyModel:
    """End-to-end identification."""

    def test_pipeline_on_clean_data(self, series):
        """Clean data recovers the resistances and capacitance within 1%."""
        result = identify_model(series, grid=GRID)
        assert result.params.r_out == pytest.approx(TRUTH.r_out, rel=0.01)
        assert result.params.r_m == pytest.approx(TRUTH.r_m, rel=0.01)
        assert result.params.c == pytest.approx(TRUTH.c, rel=0.01)
        assert result.report.n_steady > 0
        assert result.report.rmse_t < 0.01
        assert result.report.n_train + result.report.n_validation == len(series)
        assert result.report.validation_start == series.timestamps[result.report.n_train]
        assert result.report.validation_end == series.timestamps[-1]

    def test_noisy_data_still_close(self, weather):
        """Measurement noise and excitation leave the fit in a sensible range."""
        rng = np.random.default_rng(3)
        noisy = synthesize_training_series(TRUTH, weather, q_e=0.5, excitation_kw=0.3,
                                           noise_c=0.03, rng=rng)
        result = identify_model(noisy, criteria=SteadyWindowCriteria(max_drift=0.2))
        assert 1.0 < result.params.r_out < 3.0
        assert result.report.rmse_t < 0.2

    def test_too_short(self, series):
        """A handful of samples cannot be split."""
        with pytest.raises(IdentificationError, match="too short"):
            identify_model(series.slice(0, 4))
