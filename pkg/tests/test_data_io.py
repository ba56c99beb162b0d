"""
Tests for the CSV readers and writers.
"""
import sys
from datetime import date, datetime, timedelta
from pathlib import Path

# Add the app/src directory to Python path
project_root = Path(__file__).parent.parent
app_src_dir = project_root / 'app' / 'src'
sys.path.insert(0, str(app_src_dir))

import numpy as np
import pandas as pd
import pytest

from models import (DailyRecord, ObjectiveBreakdown, OcpPlan, PlanStatus, SimTrace, ThermalParams,
                    TraceRecord, WeatherSeries)
from services.data_io import (DataFormatError, PLAN_COLUMNS, TRACE_CSV_COLUMNS,
                              daily_records_frame, load_seasonal_temperatures_csv,
                              load_training_csv, load_weather_csv, read_trace_csv,
                              write_plan_csv, write_trace_csv, write_training_csv,
                              write_weather_csv)
from services.synthetic import synthesize_training_series, synthetic_weather


WEATHER_HEADER = 'timestamp_iso8601,t_out_c,ghi_wm2,wind_ms,rh_pct\n'


def write_lines(path, lines):
    path.write_text(''.join(lines))
    return path


class TestWeatherCsv:
    """Weather file schema."""

    def test_round_trip(self, tmp_path):
        """Written weather loads back with the same values and step."""
        weather = synthetic_weather(datetime(2023, 1, 2), 48)
        loaded = load_weather_csv(write_weather_csv(weather, tmp_path / 'weather.csv'))
        assert len(loaded) == 48
        assert loaded.dt_h == pytest.approx(1.0)
        assert loaded.t_out == pytest.approx(weather.t_out, abs=1e-6)
        assert loaded.timestamps[0] == pd.Timestamp('2023-01-02T00:00:00')

    def test_bad_header_names_line_one(self, tmp_path):
        """A wrong header is reported on line 1."""
        path = write_lines(tmp_path / 'w.csv', ['time,t_out_c,ghi_wm2,wind_ms,rh_pct\n',
                                               '2023-01-02T00:00:00,1,0,0,50\n'])
        with pytest.raises(DataFormatError, match="line 1"):
            load_weather_csv(path)

    def test_bad_value_names_line(self, tmp_path):
        """A non-numeric value is reported with its file line."""
        path = write_lines(tmp_path / 'w.csv', [WEATHER_HEADER,
                                               '2023-01-02T00:00:00,1,0,0,50\n',
                                               '2023-01-02T01:00:00,abc,0,0,50\n'])
        with pytest.raises(DataFormatError, match="line 3.*t_out_c"):
            load_weather_csv(path)

    def test_bad_timestamp(self, tmp_path):
        """An unparsable timestamp is reported."""
        path = write_lines(tmp_path / 'w.csv', [WEATHER_HEADER,
                                               'yesterday,1,0,0,50\n',
                                               '2023-01-02T01:00:00,1,0,0,50\n'])
        with pytest.raises(DataFormatError, match="line 2.*timestamp"):
            load_weather_csv(path)

    def test_non_uniform_step(self, tmp_path):
        """Gaps in the timestamps are rejected."""
        path = write_lines(tmp_path / 'w.csv', [WEATHER_HEADER,
                                               '2023-01-02T00:00:00,1,0,0,50\n',
                                               '2023-01-02T01:00:00,1,0,0,50\n',
                                               '2023-01-02T03:00:00,1,0,0,50\n'])
        with pytest.raises(DataFormatError, match="line 4.*non-uniform"):
            load_weather_csv(path)

    def test_humidity_range(self, tmp_path):
        """Relative humidity above 100 % is rejected."""
        path = write_lines(tmp_path / 'w.csv', [WEATHER_HEADER,
                                               '2023-01-02T00:00:00,1,0,0,50\n',
                                               '2023-01-02T01:00:00,1,0,0,120\n'])
        with pytest.raises(DataFormatError, match="rh_pct"):
            load_weather_csv(path)

    def test_missing_file(self, tmp_path):
        """A missing file is a format error, not an OSError."""
        with pytest.raises(DataFormatError, match="not found"):
            load_weather_csv(tmp_path / 'absent.csv')

    def test_header_only(self, tmp_path):
        """A file without data rows is rejected."""
        path = write_lines(tmp_path / 'w.csv', [WEATHER_HEADER])
        with pytest.raises(DataFormatError):
            load_weather_csv(path)


class TestTrainingCsv:
    """Training file schema."""

    def test_round_trip(self, tmp_path):
        """Written training data loads back unchanged."""
        weather = synthetic_weather(datetime(2022, 12, 1), 72)
        series = synthesize_training_series(ThermalParams(2.04, 1.06, 6.5, 20.6), weather)
        loaded = load_training_csv(write_training_csv(series, tmp_path / 'training.csv'))
        assert len(loaded) == 72
        assert loaded.q_c == pytest.approx(series.q_c, abs=1e-6)
        assert loaded.t_in == pytest.approx(series.t_in, abs=1e-6)

    def test_negative_heat_rejected(self, tmp_path):
        """Negative heating power is out of range."""
        path = write_lines(tmp_path / 't.csv', [
            'timestamp_iso8601,t_in_c,t_out_c,q_c_kw,ghi_wm2,wind_ms\n',
            '2023-01-02T00:00:00,20,0,1,0,0\n',
            '2023-01-02T01:00:00,20,0,-1,0,0\n'])
        with pytest.raises(DataFormatError, match="line 3.*q_c_kw"):
            load_training_csv(path)


class TestTraceCsv:
    """Trace export and re-import."""

    def _trace(self):
        start = datetime(2023, 1, 2)
        records = [TraceRecord(timestamp=start + timedelta(minutes=15 * i), t_in=20.0 + 0.1 * i,
                               t_out=-3.0, setpoint=20.5, q_c=6.0, p_hp=2.4,
                               p_elem=9.6 if i == 2 else 0.0, stage=1 if i == 2 else 0,
                               defrost=i == 3, ppd=7.5, pi_t=0.55)
                   for i in range(8)]
        return SimTrace(policy='mpc', dt_h=0.25, records=records)

    def test_round_trip_with_weather(self, tmp_path):
        """Outdoor temperature is taken from the weather, held over each hour."""
        path = write_trace_csv(self._trace(), tmp_path / 'trace.csv')
        header = path.read_text().splitlines()[0]
        assert header.split(',') == TRACE_CSV_COLUMNS
        weather = WeatherSeries(timestamps=pd.date_range('2023-01-02', periods=3, freq='h'),
                                t_out=np.array([-3.0, -4.0, -5.0]), ghi=np.zeros(3),
                                wind=np.zeros(3), rh=np.full(3, 60.0))
        trace = read_trace_csv(path, weather, 'mpc')
        assert len(trace) == 8
        assert trace.dt_h == pytest.approx(0.25)
        assert [r.t_out for r in trace.records] == [-3.0] * 4 + [-4.0] * 4
        assert trace.records[2].stage == 1
        assert trace.records[3].defrost is True
        assert trace.records[5].t_in == pytest.approx(20.5)

    def test_trace_before_weather(self, tmp_path):
        """Rows earlier than any weather sample are reported."""
        path = write_trace_csv(self._trace(), tmp_path / 'trace.csv')
        weather = WeatherSeries(timestamps=pd.date_range('2023-01-02 01:00', periods=2, freq='h'),
                                t_out=np.zeros(2), ghi=np.zeros(2), wind=np.zeros(2),
                                rh=np.full(2, 60.0))
        with pytest.raises(DataFormatError, match="line 2"):
            read_trace_csv(path, weather, 'mpc')


class TestOtherFormats:
    """Plans, daily records and seasonal temperatures."""

    def test_plan_csv(self, tmp_path):
        """Plan rows carry the step index and end-of-step timestamps."""
        stamps = [datetime(2023, 1, 2, h) for h in (1, 2)]
        plan = OcpPlan(status=PlanStatus.OPTIMAL, setpoints=np.array([20.0, 21.0]),
                       q_c=np.array([5.0, 6.0]), p=np.array([2.0, 2.4]), peak=2.4,
                       objective=1.0, breakdown=ObjectiveBreakdown(), delta_used=3.0,
                       timestamps=stamps)
        frame = pd.read_csv(write_plan_csv(plan, tmp_path / 'plan.csv'))
        assert list(frame.columns) == PLAN_COLUMNS
        assert frame['step'].tolist() == [0, 1]
        assert frame['timestamp_iso8601'].tolist() == ['2023-01-02T01:00:00', '2023-01-02T02:00:00']

    def test_daily_records_columns(self):
        """One event column per stage, zero when a stage was never reached."""
        record = DailyRecord(day=date(2023, 1, 2), policy='mpc', delta_t=25.0, energy_kwh=80.0,
                             element_energy_kwh=4.8, peak_kw=12.0, element_hours=0.5,
                             stage_events={9.6: 2})
        frame = daily_records_frame([record], (9.6, 14.4, 19.2))
        assert frame.loc[0, 'events_9.6kw'] == 2
        assert frame.loc[0, 'events_19.2kw'] == 0
        assert frame.loc[0, 'date'] == '2023-01-02'

    def test_seasonal_temperatures(self, tmp_path):
        """Daily means are read in file order."""
        path = write_lines(tmp_path / 's.csv', ['date,t_out_mean_c\n', '2022-11-01,5.0\n',
                                               '2022-11-02,4.5\n'])
        assert load_seasonal_temperatures_csv(path).tolist() == [5.0, 4.5]

    def test_seasonal_bad_value(self, tmp_path):
        """A non-numeric temperature names its line."""
        path = write_lines(tmp_path / 's.csv', ['date,t_out_mean_c\n', '2022-11-01,cold\n'])
        with pytest.raises(DataFormatError, match="line 2"):
            load_seasonal_temperatures_csv(path)
