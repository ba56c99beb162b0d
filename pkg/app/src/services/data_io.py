"""CSV formats for weather, training data, traces, plans and daily records."""
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from models import DailyRecord, OcpPlan, SimTrace, TrainingSeries, WeatherSeries
from utils.date_utils import uniform_step_hours


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TIMESTAMP_FORMAT = '%Y-%m-%dT%H:%M:%S'
FLOAT_FORMAT = '%.6f'

WEATHER_COLUMNS = ['timestamp_iso8601', 't_out_c', 'ghi_wm2', 'wind_ms', 'rh_pct']
TRAINING_COLUMNS = ['timestamp_iso8601', 't_in_c', 't_out_c', 'q_c_kw', 'ghi_wm2', 'wind_ms']
TRACE_CSV_COLUMNS = ['timestamp_iso8601', 't_in_c', 'setpoint_c', 'q_c_kw', 'p_hp_kw',
                     'p_elem_kw', 'stage', 'defrost', 'ppd_pct', 'pi_t']
PLAN_COLUMNS = ['step', 'timestamp_iso8601', 'setpoint_c', 'q_c_kw', 'p_kw']
SEASONAL_COLUMNS = ['date', 't_out_mean_c']


class DataFormatError(Exception):
    """Raised when an input file does not follow its documented schema."""
    pass


def _read_table(path: PathLike, columns: List[str], kind: str) -> pd.DataFrame:
    """Read a CSV, enforcing the exact header and numeric, timestamped rows."""
    source = Path(path)
    if not source.exists():
        raise DataFormatError(f"{kind} file not found: {source}")
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DataFormatError(f"{source}: cannot parse {kind} file: {e}") from e

    header = [str(c).strip() for c in frame.columns]
    if header != columns:
        raise DataFormatError(
            f"{source}: line 1: expected header {','.join(columns)}, got {','.join(header)}")
    frame.columns = header
    if frame.empty:
        raise DataFormatError(f"{source}: {kind} file has no data rows")

    parsed = pd.DataFrame(index=frame.index)
    stamps = pd.to_datetime(frame[columns[0]].str.strip(), format='ISO8601', errors='coerce')
    bad = stamps.isna().to_numpy()
    if bad.any():
        line = int(np.argmax(bad)) + 2
        raise DataFormatError(f"{source}: line {line}: invalid timestamp "
                              f"{frame[columns[0]].iloc[line - 2]!r}")
    parsed[columns[0]] = stamps
    for col in columns[1:]:
        values = pd.to_numeric(frame[col].str.strip(), errors='coerce')
        bad = values.isna().to_numpy() | ~np.isfinite(values.to_numpy(dtype=float))
        if bad.any():
            line = int(np.argmax(bad)) + 2
            raise DataFormatError(f"{source}: line {line}: invalid value in column {col}: "
                                  f"{frame[col].iloc[line - 2]!r}")
        parsed[col] = values.astype(float)
    return parsed


def _check_uniform(source: PathLike, stamps: pd.Series) -> float:
    index = pd.DatetimeIndex(stamps)
    if len(index) < 2:
        raise DataFormatError(f"{source}: need at least two rows to infer the time step")
    diffs = np.diff(index.asi8)
    bad = (diffs <= 0) | (diffs != diffs[0])
    if bad.any():
        line = int(np.argmax(bad)) + 3
        raise DataFormatError(f"{source}: line {line}: non-uniform timestamps")
    return uniform_step_hours(index)


def _check_range(source: PathLike, values: pd.Series, column: str, low: float, high: float) -> None:
    bad = ((values < low) | (values > high)).to_numpy()
    if bad.any():
        line = int(np.argmax(bad)) + 2
        raise DataFormatError(f"{source}: line {line}: {column}={values.iloc[line - 2]} "
                              f"outside [{low}, {high}]")


def load_weather_csv(path: PathLike) -> WeatherSeries:
    """Read ``timestamp_iso8601,t_out_c,ghi_wm2,wind_ms,rh_pct``.

    Raises:
        DataFormatError: Naming the offending line for schema, value,
            range or spacing problems.
    """
    frame = _read_table(path, WEATHER_COLUMNS, 'weather')
    dt_h = _check_uniform(path, frame['timestamp_iso8601'])
    _check_range(path, frame['ghi_wm2'], 'ghi_wm2', 0.0, np.inf)
    _check_range(path, frame['wind_ms'], 'wind_ms', 0.0, np.inf)
    _check_range(path, frame['rh_pct'], 'rh_pct', 0.0, 100.0)
    logger.debug("Loaded %d weather rows from %s", len(frame), path)
    return WeatherSeries(
        timestamps=pd.DatetimeIndex(frame['timestamp_iso8601']),
        t_out=frame['t_out_c'].to_numpy(),
        ghi=frame['ghi_wm2'].to_numpy(),
        wind=frame['wind_ms'].to_numpy(),
        rh=frame['rh_pct'].to_numpy(),
        dt_h=dt_h,
    )


def write_weather_csv(weather: WeatherSeries, path: PathLike) -> Path:
    frame = pd.DataFrame({
        'timestamp_iso8601': weather.timestamps.strftime(TIMESTAMP_FORMAT),
        't_out_c': weather.t_out, 'ghi_wm2': weather.ghi,
        'wind_ms': weather.wind, 'rh_pct': weather.rh,
    })
    return _write_frame(frame, path)


def load_training_csv(path: PathLike) -> TrainingSeries:
    """Read ``timestamp_iso8601,t_in_c,t_out_c,q_c_kw,ghi_wm2,wind_ms``."""
    frame = _read_table(path, TRAINING_COLUMNS, 'training')
    dt_h = _check_uniform(path, frame['timestamp_iso8601'])
    _check_range(path, frame['q_c_kw'], 'q_c_kw', 0.0, np.inf)
    _check_range(path, frame['ghi_wm2'], 'ghi_wm2', 0.0, np.inf)
    return TrainingSeries(
        timestamps=pd.DatetimeIndex(frame['timestamp_iso8601']),
        t_in=frame['t_in_c'].to_numpy(),
        t_out=frame['t_out_c'].to_numpy(),
        q_c=frame['q_c_kw'].to_numpy(),
        ghi=frame['ghi_wm2'].to_numpy(),
        wind=frame['wind_ms'].to_numpy(),
        dt_h=dt_h,
    )


def write_training_csv(series: TrainingSeries, path: PathLike) -> Path:
    frame = pd.DataFrame({
        'timestamp_iso8601': series.timestamps.strftime(TIMESTAMP_FORMAT),
        't_in_c': series.t_in, 't_out_c': series.t_out, 'q_c_kw': series.q_c,
        'ghi_wm2': series.ghi, 'wind_ms': series.wind,
    })
    return _write_frame(frame, path)


def write_trace_csv(trace: SimTrace, path: PathLike) -> Path:
    """Export a closed-loop trace with the fixed trace schema."""
    frame = trace.to_frame()
    out = pd.DataFrame({
        'timestamp_iso8601': frame['timestamp'].dt.strftime(TIMESTAMP_FORMAT),
        't_in_c': frame['t_in'],
        'setpoint_c': frame['setpoint'],
        'q_c_kw': frame['q_c'],
        'p_hp_kw': frame['p_hp'],
        'p_elem_kw': frame['p_elem'],
        'stage': frame['stage'].astype(int),
        'defrost': frame['defrost'].astype(int),
        'ppd_pct': frame['ppd'],
        'pi_t': frame['pi_t'],
    }, columns=TRACE_CSV_COLUMNS)
    return _write_frame(out, path)


def read_trace_csv(path: PathLike, weather: WeatherSeries, policy: str) -> SimTrace:
    """Load an exported trace, re-attaching outdoor temperature from the weather.

    Weather values are held constant until the next weather sample.
    """
    frame = _read_table(path, TRACE_CSV_COLUMNS, 'trace')
    dt_h = _check_uniform(path, frame['timestamp_iso8601'])
    stamps = pd.DatetimeIndex(frame['timestamp_iso8601'])
    outdoor = pd.Series(weather.t_out, index=weather.timestamps).reindex(stamps, method='ffill')
    if outdoor.isna().any():
        line = int(np.argmax(outdoor.isna().to_numpy())) + 2
        raise DataFormatError(f"{path}: line {line}: no weather data at or before this timestamp")
    table = pd.DataFrame({
        'timestamp': stamps,
        't_in': frame['t_in_c'].to_numpy(),
        't_out': outdoor.to_numpy(),
        'setpoint': frame['setpoint_c'].to_numpy(),
        'q_c': frame['q_c_kw'].to_numpy(),
        'p_hp': frame['p_hp_kw'].to_numpy(),
        'p_elem': frame['p_elem_kw'].to_numpy(),
        'stage': frame['stage'].to_numpy().astype(int),
        'defrost': frame['defrost'].to_numpy() > 0,
        'ppd': frame['ppd_pct'].to_numpy(),
        'pi_t': frame['pi_t'].to_numpy(),
    })
    return SimTrace.from_frame(table, policy=policy, dt_h=dt_h)


def write_plan_csv(plan: OcpPlan, path: PathLike) -> Path:
    """Export a plan as ``step,timestamp_iso8601,setpoint_c,q_c_kw,p_kw``."""
    horizon = len(plan.setpoints)
    stamps = ([t.strftime(TIMESTAMP_FORMAT) for t in plan.timestamps]
              if plan.timestamps is not None else [''] * horizon)
    frame = pd.DataFrame({
        'step': np.arange(horizon),
        'timestamp_iso8601': stamps,
        'setpoint_c': plan.setpoints,
        'q_c_kw': plan.q_c,
        'p_kw': plan.p,
    }, columns=PLAN_COLUMNS)
    return _write_frame(frame, path)


def daily_records_frame(records: Sequence[DailyRecord], stages: Sequence[float]) -> pd.DataFrame:
    rows: List[Dict[str, object]] = []
    for record in records:
        row: Dict[str, object] = {
            'date': record.day.isoformat(),
            'policy': record.policy,
            'delta_t_c': record.delta_t,
            'energy_kwh': record.energy_kwh,
            'element_energy_kwh': record.element_energy_kwh,
            'peak_kw': record.peak_kw,
            'element_hours': record.element_hours,
            'defrost_events': record.defrost_events,
        }
        for stage in stages:
            row[f'events_{stage:g}kw'] = record.stage_events.get(stage, 0)
        rows.append(row)
    return pd.DataFrame(rows)


def write_daily_records_csv(records: Sequence[DailyRecord], stages: Sequence[float],
                            path: PathLike) -> Path:
    return _write_frame(daily_records_frame(records, stages), path)


def load_seasonal_temperatures_csv(path: PathLike) -> np.ndarray:
    """Daily mean outdoor temperatures from ``date,t_out_mean_c``."""
    source = Path(path)
    if not source.exists():
        raise DataFormatError(f"seasonal temperature file not found: {source}")
    frame = pd.read_csv(source)
    if list(frame.columns) != SEASONAL_COLUMNS:
        raise DataFormatError(f"{source}: line 1: expected header {','.join(SEASONAL_COLUMNS)}")
    values = pd.to_numeric(frame['t_out_mean_c'], errors='coerce')
    if values.isna().any():
        line = int(np.argmax(values.isna().to_numpy())) + 2
        raise DataFormatError(f"{source}: line {line}: invalid temperature")
    return values.to_numpy(dtype=float)


def _write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return out
