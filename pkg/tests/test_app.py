"""
Command-line and application tests on a small generated workspace.
"""
import sys
from datetime import datetime
from pathlib import Path

# Add the app and app/src directories to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root / 'app'))
sys.path.insert(0, str(project_root / 'app' / 'src'))

import numpy as np
import pandas as pd
import pytest
import yaml

from app import HeatingControlApp, load_model
from config import ConfigError, load_run_config
from main import build_parser, main
from models import ThermalParams
from services.data_io import write_training_csv, write_weather_csv
from services.synthetic import synthesize_training_series, synthetic_weather


FIELD = ThermalParams(r_out=2.04, r_m=1.06, c=6.5, t_m=20.6)


@pytest.fixture
def workspace(tmp_path):
    """Weather, training data and a fast configuration in a temporary directory."""
    data = tmp_path / 'data'
    weather = synthetic_weather(datetime(2023, 1, 2), 5 * 24, mean_t_out=-4.0, rh=60.0)
    write_weather_csv(weather, data / 'weather.csv')
    training_weather = synthetic_weather(datetime(2022, 12, 1), 21 * 24, mean_t_out=-2.0)
    training = synthesize_training_series(FIELD, training_weather, q_e=0.5, excitation_kw=0.3,
                                          noise_c=0.02, rng=np.random.default_rng(0))
    write_training_csv(training, data / 'training.csv')
    seasonal = pd.DataFrame({'date': pd.date_range('2022-11-01', periods=30).strftime('%Y-%m-%d'),
                             't_out_mean_c': np.linspace(5.0, -5.0, 30)})
    seasonal.to_csv(data / 'seasonal.csv', index=False)

    config = {
        'app': {'seed': 5},
        'paths': {'weather_csv': 'data/weather.csv', 'training_csv': 'data/training.csv',
                  'output_dir': 'output', 'model_file': 'output/model.yml',
                  'seasonal_temperatures_csv': 'data/seasonal.csv'},
        'thermal': {'mode': 'fixed', 'r_out': 2.04, 'r_m': 1.06, 'c': 6.5, 't_m': 20.6},
        'identification': {'r_m_grid': {'min': 0.5, 'max': 2.0, 'points': 40}},
        'economics': {'horizon': 6, 'reference': {'day': 21.0, 'night': 19.0}},
        'tuning': {'grid': {'points': 3}},
        'simulation': {'start': '2023-01-02T00:00:00', 'days': 1, 'constant_setpoint': 20.7},
        'analysis': {'savings_samples': 10_000, 'seasonal': {'samples': 1000}},
    }
    path = tmp_path / 'config.yml'
    path.write_text(yaml.safe_dump(config))
    return path


def edit(path, section, **values):
    config = yaml.safe_load(path.read_text())
    config.setdefault(section, {}).update(values)
    path.write_text(yaml.safe_dump(config))


class TestCommands:
    """Each command writes its documented outputs."""

    def test_identify_then_use_model_file(self, workspace):
        """Identification writes a model that file mode can load."""
        assert main(['identify', '--config', str(workspace)]) == 0
        output = workspace.parent / 'output'
        assert (output / 'model.yml').exists()
        assert (output / 'disturbance.pkl').exists()
        assert '[validation]' in (output / 'fit_report.txt').read_text()
        params, disturbance = load_model(output / 'model.yml')
        assert 1.0 < params.r_out < 3.0
        assert disturbance is not None

        edit(workspace, 'thermal', mode='file')
        assert main(['plan', '--config', str(workspace)]) == 0
        assert len(pd.read_csv(output / 'plan.csv')) == 6

    def test_plan_at_instant(self, workspace):
        """A plan from an explicit instant and indoor temperature."""
        assert main(['plan', '--config', str(workspace), '--start', '2023-01-02T05:00:00',
                     '--t-in', '19.5']) == 0
        output = workspace.parent / 'output'
        plan = pd.read_csv(output / 'plan.csv')
        assert plan['timestamp_iso8601'].iloc[0] == '2023-01-02T06:00:00'
        assert 'status' in (output / 'plan_report.txt').read_text()

    def test_tune_writes_full_sweep(self, workspace):
        """The tuning table lists every grid price."""
        assert main(['tune', '--config', str(workspace)]) == 0
        table = pd.read_csv(workspace.parent / 'output' / 'tuning.csv')
        assert list(table.columns) == ['price', 'mean_ppd_pct', 'energy_cost', 'status']
        assert table['price'].tolist() == pytest.approx(np.geomspace(0.01, 5.0, 3).tolist(), abs=1e-6)

    def test_simulate(self, workspace):
        """A one-day supervisory run exports 96 quarter-hour rows."""
        assert main(['simulate', '--config', str(workspace), '--out', str(workspace.parent / 'sim')]) == 0
        trace = pd.read_csv(workspace.parent / 'sim' / 'trace_mpc.csv')
        assert len(trace) == 96
        assert (workspace.parent / 'sim' / 'daily_records.csv').exists()

    def test_compare_and_analyze_with_savings(self, workspace):
        """Three heating days per policy give slope fits and savings estimates."""
        edit(workspace, 'simulation', days=3)
        edit(workspace, 'compare', candidate='schedule', baseline='constant')
        assert main(['compare', '--config', str(workspace)]) == 0
        output = workspace.parent / 'output'
        report = (output / 'comparison_report.txt').read_text()
        assert '[savings]' in report
        assert '[seasonal]' in report
        assert len(pd.read_csv(output / 'savings_histogram.csv')) == 60

        assert main(['analyze', '--config', str(workspace),
                     '--trace', f"constant={output / 'trace_constant.csv'}",
                     '--trace', f"schedule={output / 'trace_schedule.csv'}",
                     '--baseline', 'constant']) == 0
        analysis = (output / 'analysis_report.txt').read_text()
        assert analysis.index('[policy schedule]') < analysis.index('[policy constant]')

    def test_compare_is_deterministic(self, workspace):
        """The same configuration and seed produce byte-identical outputs."""
        edit(workspace, 'compare', candidate='mpc', baseline='constant')
        first, second = workspace.parent / 'a', workspace.parent / 'b'
        assert main(['compare', '--config', str(workspace), '--out', str(first)]) == 0
        assert main(['compare', '--config', str(workspace), '--out', str(second)]) == 0
        for name in ('trace_mpc.csv', 'trace_constant.csv', 'comparison_report.txt'):
            assert (first / name).read_bytes() == (second / name).read_bytes()
        report = (first / 'comparison_report.txt').read_text()
        assert 'reduction_pct' in report


class TestApplication:
    """Direct use of the application object."""

    def test_scenario_defaults(self, workspace):
        """Without truth parameters the controller model is also the truth."""
        app = HeatingControlApp(load_run_config(str(workspace)), configure_logging=False)
        scenario = app.scenario()
        assert scenario.truth_params == scenario.controller_params == FIELD
        assert scenario.seed == 5
        assert scenario.start == datetime(2023, 1, 2)

    def test_start_outside_weather(self, workspace):
        """Planning from an instant missing in the weather is a configuration error."""
        app = HeatingControlApp(load_run_config(str(workspace)), configure_logging=False)
        with pytest.raises(ConfigError, match="not in the weather"):
            app.cmd_plan(datetime(2024, 1, 1))

    def test_unknown_baseline(self, workspace):
        """The analyze baseline must be one of the traces."""
        app = HeatingControlApp(load_run_config(str(workspace)), configure_logging=False)
        path = app.cmd_simulate()['trace']
        with pytest.raises(ConfigError, match="baseline"):
            app.cmd_analyze([('mpc', path)], baseline='constant')


class TestExitCodes:
    """Process exit statuses."""

    def test_domain_error_returns_one(self, tmp_path):
        """A missing configuration file fails with status 1."""
        assert main(['simulate', '--config', str(tmp_path / 'absent.yml')]) == 1

    def test_missing_input_returns_one(self, workspace):
        """A missing weather file fails with status 1."""
        (workspace.parent / 'data' / 'weather.csv').unlink()
        assert main(['simulate', '--config', str(workspace)]) == 1

    def test_usage_error_exits_two(self):
        """Unknown commands are usage errors."""
        with pytest.raises(SystemExit) as excinfo:
            main(['launch'])
        assert excinfo.value.code == 2

    def test_bad_trace_argument(self):
        """A --trace value without POLICY= is a usage error."""
        with pytest.raises(SystemExit) as excinfo:
            main(['analyze', '--trace', 'trace.csv'])
        assert excinfo.value.code == 2

    def test_help(self, capsys):
        """--help lists every command."""
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args(['--help'])
        assert excinfo.value.code == 0
        out = capsys.readouterr().out
        for command in ('identify', 'plan', 'tune', 'simulate', 'compare', 'analyze'):
            assert command in out
