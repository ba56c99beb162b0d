"""Daily aggregation, energy-line fits and Monte Carlo savings estimates."""
import logging
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from models import (BackupSummary, DailyRecord, SavingsReport, SeasonalReport, SimTrace,
                    SlopeEstimate, StageStatistics)
from utils.random_utils import chunk_seeds, component_rng


logger = logging.getLogger(__name__)

BALANCE_OFFSET = 8.0
CHUNK_SIZE = 1_000_000
HISTOGRAM_BINS = 60
MIN_SAVINGS_SAMPLES = 10_000
MAX_RESAMPLE_ROUNDS = 100


class AnalysisError(Exception):
    """Raised when records cannot support the requested estimate."""
    pass


def _runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """(start, stop) of every run of True values."""
    padded = np.concatenate([[False], mask.astype(bool), [False]])
    edges = np.flatnonzero(np.diff(padded.astype(int)))
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def daily_aggregate(trace: SimTrace, indoor_source: str = 'measured') -> List[DailyRecord]:
    """Collapse a trace into one record per complete calendar day.

    Indoor temperature for ΔT is the measured one or, with
    ``indoor_source='setpoint'``, the commanded set-point. An element
    turn-on event is a run of non-zero element power; it is counted on the
    day it starts under the highest stage power reached. Incomplete days are
    dropped with a warning.
    """
    if indoor_source not in ('measured', 'setpoint'):
        raise AnalysisError(f"unknown indoor source '{indoor_source}'")
    if len(trace) == 0:
        return []

    frame = trace.to_frame()
    dt = trace.dt_h
    steps_per_day = int(round(24.0 / dt))
    indoor = frame['t_in'] if indoor_source == 'measured' else frame['setpoint']
    p_elem = frame['p_elem'].to_numpy()
    p_total = (frame['p_hp'] + frame['p_elem']).to_numpy()
    days = frame['timestamp'].dt.date.to_numpy()

    stage_events: Dict[object, Dict[float, int]] = defaultdict(lambda: defaultdict(int))
    for start, stop in _runs(p_elem > 0.0):
        stage = round(float(np.max(p_elem[start:stop])), 6)
        stage_events[days[start]][stage] += 1
    defrost_events: Dict[object, int] = defaultdict(int)
    for start, _ in _runs(frame['defrost'].to_numpy()):
        defrost_events[days[start]] += 1

    records: List[DailyRecord] = []
    delta = (indoor - frame['t_out']).to_numpy()
    for day, positions in frame.groupby(days).indices.items():
        if len(positions) < steps_per_day:
            logger.warning("Dropping partial day %s (%d of %d steps)",
                           day, len(positions), steps_per_day)
            continue
        records.append(DailyRecord(
            day=day,
            policy=trace.policy,
            delta_t=float(np.mean(delta[positions])),
            energy_kwh=float(np.sum(p_total[positions]) * dt),
            element_energy_kwh=float(np.sum(p_elem[positions]) * dt),
            peak_kw=float(np.max(p_total[positions])),
            element_hours=float(np.count_nonzero(p_elem[positions] > 0.0) * dt),
            defrost_events=int(defrost_events.get(day, 0)),
            stage_events=dict(stage_events.get(day, {})),
        ))
    records.sort(key=lambda r: r.day)
    return records


def fit_energy_line(records: Sequence[DailyRecord], offset: float = BALANCE_OFFSET) -> SlopeEstimate:
    """Slope of daily energy against ΔT − offset, through the origin.

    Only days with ΔT above the offset are used.

    Raises:
        AnalysisError: With no heating-regime days or fewer than three.
    """
    x = np.array([r.delta_t - offset for r in records], dtype=float)
    y = np.array([r.energy_kwh for r in records], dtype=float)
    heating = x > 0.0
    n = int(np.count_nonzero(heating))
    if n == 0:
        raise AnalysisError("no heating-regime data: every day has ΔT at or below the offset")
    if n < 3:
        raise AnalysisError(f"only {n} heating-regime days, need at least 3")
    x, y = x[heating], y[heating]
    sxx = float(np.dot(x, x))
    slope = float(np.dot(x, y)) / sxx
    residual = y - slope * x
    variance = float(np.dot(residual, residual)) / (n - 1)
    return SlopeEstimate(slope=slope, std=float(np.sqrt(variance / sxx)), n=n, offset=offset)


def _positive_normal(rng: np.random.Generator, mean: float, std: float, size: int) -> np.ndarray:
    """Normal draws with non-positive values redrawn."""
    if mean <= 0 and std == 0:
        raise AnalysisError("baseline slope must be positive")
    values = rng.normal(mean, std, size)
    for _ in range(MAX_RESAMPLE_ROUNDS):
        bad = values <= 0.0
        if not bad.any():
            return values
        values[bad] = rng.normal(mean, std, int(bad.sum()))
    raise AnalysisError("baseline slope distribution has too little positive mass")


def _chunks(seed: int, component: str, n: int, chunk: int) -> List[Tuple[np.random.Generator, int]]:
    sizes = [chunk] * (n // chunk)
    if n % chunk:
        sizes.append(n % chunk)
    return list(zip(chunk_seeds(component_rng(seed, component), len(sizes)), sizes))


def relative_savings_mc(mpc: SlopeEstimate, base: SlopeEstimate, n: int = 10_000_000,
                        seed: int = 0) -> SavingsReport:
    """Distribution of 1 − m/m̃ with both slopes drawn from their normal estimates.

    Values are percent. Sampling is split into fixed-size chunks, each with
    its own child stream of ``seed``. At least ``MIN_SAVINGS_SAMPLES`` draws
    are required for a stable interval.
    """
    if n < MIN_SAVINGS_SAMPLES:
        raise AnalysisError(f"need at least {MIN_SAVINGS_SAMPLES} Monte Carlo samples, got {n}")
    savings = np.empty(n)
    position = 0
    for rng, size in _chunks(seed, 'savings', n, CHUNK_SIZE):
        m = rng.normal(mpc.slope, mpc.std, size)
        m_base = _positive_normal(rng, base.slope, base.std, size)
        savings[position:position + size] = 100.0 * (1.0 - m / m_base)
        position += size

    low, high = np.percentile(savings, [2.5, 97.5])
    counts, edges = np.histogram(savings, bins=HISTOGRAM_BINS)
    report = SavingsReport(
        mean=float(np.mean(savings)),
        ci_low=float(low),
        ci_high=float(high),
        point_estimate=100.0 * (1.0 - mpc.slope / base.slope),
        n_samples=n,
        hist_edges=edges,
        hist_counts=counts,
    )
    logger.info("Relative savings %.2f%% (95%% CI %.2f to %.2f) from %d samples",
                report.mean, report.ci_low, report.ci_high, n)
    return report


def gamma_from_ci99(low: float, high: float) -> Tuple[float, float]:
    """Normal mean and standard deviation matching a symmetric 99% interval."""
    if high < low:
        raise AnalysisError("interval bounds are reversed")
    z = float(stats.norm.ppf(0.995))
    return (low + high) / 2.0, (high - low) / (2.0 * z)


def heating_degree_sum(temps: np.ndarray, setpoint: float, reduction: np.ndarray,
                       offset: float = BALANCE_OFFSET) -> np.ndarray:
    """Σ_days max(0, setpoint − reduction − θ̄ − offset) for each reduction value."""
    margin = setpoint - offset - np.asarray(temps, dtype=float)[None, :]
    return np.maximum(0.0, margin - np.asarray(reduction, dtype=float)[:, None]).sum(axis=1)


def seasonal_savings_mc(temps: Sequence[float], setpoint: float, gamma: Tuple[float, float],
                        mpc: SlopeEstimate, base: SlopeEstimate, price: float,
                        n: int = 1_000_000, seed: int = 0,
                        offset: float = BALANCE_OFFSET) -> SeasonalReport:
    """Season cost with and without supervisory control.

    Baseline daily energy is m̃·max(0, T̃ − θ̄ − offset); with control the
    mean indoor temperature drops by γ, giving m·max(0, T̃ − γ − θ̄ − offset).
    ``gamma`` is (mean, std) of the normal reduction.
    """
    daily = np.asarray(temps, dtype=float)
    if daily.size == 0:
        raise AnalysisError("no daily temperatures supplied")
    if n < 1:
        raise AnalysisError("need at least one Monte Carlo sample")

    baseline_degrees = float(heating_degree_sum(daily, setpoint, np.zeros(1), offset)[0])
    chunk = max(1, CHUNK_SIZE // max(daily.size, 1))
    saved = np.empty(n)
    baseline = np.empty(n)
    position = 0
    for rng, size in _chunks(seed, 'seasonal', n, chunk):
        g = rng.normal(gamma[0], gamma[1], size)
        m = rng.normal(mpc.slope, mpc.std, size)
        m_base = _positive_normal(rng, base.slope, base.std, size)
        base_cost = price * m_base * baseline_degrees
        mpc_cost = price * m * heating_degree_sum(daily, setpoint, g, offset)
        baseline[position:position + size] = base_cost
        saved[position:position + size] = base_cost - mpc_cost
        position += size

    with np.errstate(divide='ignore', invalid='ignore'):
        relative = np.where(baseline > 0, 100.0 * saved / baseline, 0.0)
    s_low, s_high = np.percentile(saved, [2.5, 97.5])
    b_low, b_high = np.percentile(baseline, [2.5, 97.5])
    r_low, r_high = np.percentile(relative, [2.5, 97.5])
    report = SeasonalReport(
        mean_savings=float(np.mean(saved)), ci_low=float(s_low), ci_high=float(s_high),
        baseline_mean=float(np.mean(baseline)), baseline_ci_low=float(b_low),
        baseline_ci_high=float(b_high),
        relative_mean=float(np.mean(relative)), relative_ci_low=float(r_low),
        relative_ci_high=float(r_high), n_samples=n,
    )
    logger.info("Seasonal savings %.2f (95%% CI %.2f to %.2f), %.1f%% of baseline %.2f",
                report.mean_savings, report.ci_low, report.ci_high,
                report.relative_mean, report.baseline_mean)
    return report


def stage_statistics(records: Sequence[DailyRecord]) -> Dict[str, StageStatistics]:
    """Turn-on event histogram, shares and mean element power while on, per policy."""
    grouped: Dict[str, List[DailyRecord]] = defaultdict(list)
    for record in records:
        grouped[record.policy].append(record)

    result: Dict[str, StageStatistics] = {}
    for policy, items in grouped.items():
        histogram: Dict[float, int] = defaultdict(int)
        for record in items:
            for stage, count in record.stage_events.items():
                histogram[stage] += count
        total = sum(histogram.values())
        hours = sum(r.element_hours for r in items)
        energy = sum(r.element_energy_kwh for r in items)
        result[policy] = StageStatistics(
            policy=policy,
            histogram=dict(sorted(histogram.items())),
            shares={stage: count / total for stage, count in sorted(histogram.items())} if total else {},
            n_events=total,
            conditional_mean_kw=energy / hours if hours > 0 else None,
        )
    return result


def backup_summary(records: Sequence[DailyRecord]) -> Dict[str, BackupSummary]:
    """Mean daily element energy, element runtime and defrost count per policy."""
    grouped: Dict[str, List[DailyRecord]] = defaultdict(list)
    for record in records:
        grouped[record.policy].append(record)
    summary: Dict[str, BackupSummary] = {}
    for policy, items in grouped.items():
        days = len(items)
        summary[policy] = BackupSummary(
            policy=policy,
            days=days,
            element_kwh_per_day=sum(r.element_energy_kwh for r in items) / days,
            element_minutes_per_day=60.0 * sum(r.element_hours for r in items) / days,
            defrost_events_per_day=sum(r.defrost_events for r in items) / days,
        )
    return summary


def relative_reduction(candidate: float, baseline: float) -> Optional[float]:
    """Percent reduction of ``candidate`` against ``baseline``; None for a zero baseline."""
    if baseline == 0:
        return None
    return 100.0 * (1.0 - candidate / baseline)


def savings_histogram_frame(report: SavingsReport) -> pd.DataFrame:
    if report.hist_edges is None or report.hist_counts is None:
        raise AnalysisError("report carries no histogram")
    return pd.DataFrame({
        'bin_left_pct': report.hist_edges[:-1],
        'bin_right_pct': report.hist_edges[1:],
        'count': report.hist_counts,
    })
