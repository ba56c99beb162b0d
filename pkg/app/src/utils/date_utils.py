"""Date and time utilities."""
import logging
from datetime import datetime
from typing import Union

import numpy as np
import pandas as pd


logger = logging.getLogger(__name__)


def hour_of_day(instant: Union[datetime, pd.Timestamp]) -> float:
    """Fractional hour of day (0 ≤ h < 24)."""
    return instant.hour + instant.minute / 60.0 + instant.second / 3600.0


def in_hour_window(hour: float, start: float, end: float) -> bool:
    """True when ``hour`` lies in [start, end), wrapping past midnight if start > end.

    Args:
        hour: Hour of day to test.
        start: Window start hour.
        end: Window end hour (exclusive).

    Returns:
        Whether the hour is inside the window. An empty window (start == end)
        contains nothing.
    """
    if start == end:
        return False
    if start < end:
        return start <= hour < end
    return hour >= start or hour < end


def hour_window_mask(timestamps: pd.DatetimeIndex, start: float, end: float) -> np.ndarray:
    """Vectorised :func:`in_hour_window` over a timestamp index."""
    hours = np.asarray(timestamps.hour + timestamps.minute / 60.0, dtype=float)
    if start == end:
        return np.zeros(len(hours), dtype=bool)
    if start < end:
        return (hours >= start) & (hours < end)
    return (hours >= start) | (hours < end)


def hour_angle_features(timestamps: pd.DatetimeIndex) -> np.ndarray:
    """Hour of day encoded as a (sin, cos) pair, shape (n, 2)."""
    hours = np.asarray(timestamps.hour + timestamps.minute / 60.0, dtype=float)
    angle = 2.0 * np.pi * hours / 24.0
    return np.column_stack([np.sin(angle), np.cos(angle)])


def day_of_week_one_hot(timestamps: pd.DatetimeIndex) -> np.ndarray:
    """Monday-first one-hot day of week, shape (n, 7)."""
    dow = np.asarray(timestamps.dayofweek, dtype=int)
    encoded = np.zeros((len(dow), 7))
    encoded[np.arange(len(dow)), dow] = 1.0
    return encoded


def uniform_step_hours(timestamps: pd.DatetimeIndex) -> float:
    """Sample spacing in hours.

    Raises:
        ValueError: If there are fewer than two samples or spacing is not uniform
            and strictly increasing.
    """
    if len(timestamps) < 2:
        raise ValueError("need at least two timestamps to infer the step")
    diffs = np.diff(timestamps.asi8)
    if diffs[0] <= 0 or np.any(diffs != diffs[0]):
        raise ValueError("non-uniform timestamps")
    return float(diffs[0]) / 3.6e12


def parse_instant(value: Union[str, datetime]) -> datetime:
    """Parse an ISO-8601 instant into a naive local datetime."""
    if isinstance(value, datetime):
        return value
    try:
        return pd.Timestamp(value).to_pydatetime()
    except (ValueError, TypeError) as e:
        logger.error("Failed to parse instant '%s': %s", value, e)
        raise ValueError(f"invalid ISO-8601 instant: {value!r}") from e
