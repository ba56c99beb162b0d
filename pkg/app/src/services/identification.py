"""Grey-box identification of the house model and the exogenous-heat regressor."""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.kernel_ridge import KernelRidge
from sklearn.linear_model import Ridge
from sklearn.model_selection import GridSearchCV, KFold
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from models import (DisturbanceModel, EffectiveModel, FitReport, SteadyWindowCriteria,
                    ThermalParams, TrainingSeries)
from services.thermal_model import effective_boundary_temperature
from utils.date_utils import day_of_week_one_hot, hour_angle_features, hour_window_mask


logger = logging.getLogger(__name__)

DEFAULT_ALPHAS = (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)
DEFAULT_GAMMAS = (0.01, 0.1, 1.0)
FEATURE_COLUMNS = (['t_out', 'ghi', 'wind', 'hour_sin', 'hour_cos']
                   + [f'dow_{d}' for d in range(7)])


class IdentificationError(Exception):
    """Raised when the training data cannot support a fit."""
    pass


@dataclass
class IdentificationResult:
    params: ThermalParams
    model: EffectiveModel
    disturbance: DisturbanceModel
    report: FitReport


def _require_samples(s: TrainingSeries, minimum: int = 1) -> None:
    if len(s) < minimum:
        if len(s) == 0:
            raise IdentificationError("empty training series")
        raise IdentificationError(f"training series has {len(s)} samples, need at least {minimum}")


def estimate_mass_temperature(s: TrainingSeries) -> float:
    """Long-run mean indoor temperature, used as the mass temperature."""
    _require_samples(s)
    return float(np.mean(s.t_in))


def detect_steady_windows(s: TrainingSeries, criteria: SteadyWindowCriteria) -> np.ndarray:
    """Indices k at night whose next ``window_hours`` stay within the drift bound.

    A sample qualifies when its local hour falls in the night window and
    |t_in(k+j) − t_in(k)| ≤ max_drift·j·Δt for every step j of the window.
    """
    _require_samples(s)
    window = int(round(criteria.window_hours / s.dt_h))
    n = len(s)
    if n <= window:
        return np.zeros(0, dtype=int)

    candidates = hour_window_mask(s.timestamps, criteria.night_start, criteria.night_end)[:n - window]
    base = s.t_in[:n - window]
    for j in range(1, window + 1):
        drift = np.abs(s.t_in[j:n - window + j] - base)
        candidates &= drift <= criteria.max_drift * j * s.dt_h + 1e-12
    return np.flatnonzero(candidates)


def fit_outdoor_resistance(s: TrainingSeries, steady: Sequence[int]) -> Tuple[float, float]:
    """Least squares of t_in − t_out = α + R_out·q_c over steady samples.

    Returns:
        (α, R_out).

    Raises:
        IdentificationError: With fewer than two steady samples, constant
            q_c across them, or a non-positive R_out.
    """
    idx = np.asarray(steady, dtype=int)
    if idx.size < 2:
        raise IdentificationError(f"unidentifiable R_out: only {idx.size} steady samples")
    design = np.column_stack([np.ones(idx.size), s.q_c[idx]])
    if np.linalg.matrix_rank(design) < 2:
        raise IdentificationError("unidentifiable R_out: heating power constant over steady samples")
    target = s.t_in[idx] - s.t_out[idx]
    (alpha, r_out), *_ = np.linalg.lstsq(design, target, rcond=None)
    if r_out <= 0:
        raise IdentificationError(f"unidentifiable R_out: fitted value {r_out:.4f} is not positive")
    logger.info("Outdoor resistance %.4f °C/kW from %d steady samples (alpha=%.3f)",
                r_out, idx.size, alpha)
    return float(alpha), float(r_out)


def r_m_grid(minimum: float = 0.01, maximum: float = 10.0, points: int = 200) -> np.ndarray:
    """Log-spaced candidate mass resistances."""
    return np.geomspace(minimum, maximum, points)


def _boundary_and_resistance(r_out: float, r_m: float, t_m: float,
                            t_out: np.ndarray) -> Tuple[np.ndarray, float]:
    theta = (r_out * t_m + r_m * t_out) / (r_m + r_out)
    return theta, r_m * r_out / (r_m + r_out)


def fit_mass_params(s: TrainingSeries, r_out: float, grid: Sequence[float],
                    t_m: Optional[float] = None,
                    train_fraction: float = 2.0 / 3.0) -> Tuple[ThermalParams, EffectiveModel,
                                                               List[Tuple[float, float]]]:
    """Grid search over R_m with an autoregressive fit of (β, a) per candidate.

    For each R_m, T(k+1) − θ − R·q_c = β + a·(T(k) − θ − R·q_c) is fitted on
    the first ``train_fraction`` of step pairs and scored by one-step RMSE on
    the rest. Candidates with a outside (0, 1) are discarded.

    Returns:
        (params, model, scores) where scores lists (R_m, validation RMSE) of
        every stable candidate.
    """
    _require_samples(s, 4)
    if t_m is None:
        t_m = estimate_mass_temperature(s)
    pairs = len(s) - 1
    n_train = int(round(train_fraction * pairs))
    if n_train < 2 or n_train >= pairs:
        raise IdentificationError(f"cannot split {pairs} step pairs into training and validation")

    t_now, t_next = s.t_in[:-1], s.t_in[1:]
    q_c = s.q_c[:-1]
    best: Optional[Tuple[float, float, float, float]] = None
    scores: List[Tuple[float, float]] = []
    for r_m in grid:
        theta, r = _boundary_and_resistance(r_out, float(r_m), t_m, s.t_out[:-1])
        offset = theta + r * q_c
        x = t_now - offset
        y = t_next - offset
        design = np.column_stack([np.ones(n_train), x[:n_train]])
        if np.linalg.matrix_rank(design) < 2:
            continue
        (beta, a), *_ = np.linalg.lstsq(design, y[:n_train], rcond=None)
        if not 0.0 < a < 1.0:
            continue
        residual = y[n_train:] - (beta + a * x[n_train:])
        rmse = float(np.sqrt(np.mean(residual ** 2)))
        scores.append((float(r_m), rmse))
        if best is None or rmse < best[3]:
            best = (float(r_m), float(a), float(beta), rmse)

    if best is None:
        raise IdentificationError("no stable fit: every R_m candidate gave a outside (0, 1)")

    r_m_best, a_best, _, rmse_best = best
    r_eff = r_m_best * r_out / (r_m_best + r_out)
    c = -s.dt_h / (r_eff * math.log(a_best))
    params = ThermalParams(r_out=r_out, r_m=r_m_best, c=c, t_m=t_m)
    model = EffectiveModel(params=params, a=a_best, dt_h=s.dt_h)
    logger.info("Selected R_m=%.4f (a=%.5f, C=%.3f kWh/°C, validation RMSE %.4f °C)",
                r_m_best, a_best, c, rmse_best)
    return params, model, scores


def invert_exogenous(s: TrainingSeries, p: ThermalParams, m: EffectiveModel) -> np.ndarray:
    """Exogenous heat implied by the model for each step pair (length N−1)."""
    _require_samples(s, 2)
    theta = effective_boundary_temperature(p, s.t_out[:-1])
    a = m.a
    implied = (s.t_in[1:] - a * s.t_in[:-1]) / (1.0 - a)
    return (implied - theta) / p.r_eff - s.q_c[:-1]


def build_disturbance_features(timestamps: pd.DatetimeIndex, t_out: np.ndarray,
                               ghi: np.ndarray, wind: np.ndarray) -> pd.DataFrame:
    """Weather plus calendar features: hour as a sin/cos pair, day of week one-hot."""
    timestamps = pd.DatetimeIndex(timestamps)
    frame = pd.DataFrame({
        't_out': np.asarray(t_out, dtype=float),
        'ghi': np.asarray(ghi, dtype=float),
        'wind': np.asarray(wind, dtype=float),
    })
    hours = hour_angle_features(timestamps)
    frame['hour_sin'] = hours[:, 0]
    frame['hour_cos'] = hours[:, 1]
    dow = day_of_week_one_hot(timestamps)
    for d in range(7):
        frame[f'dow_{d}'] = dow[:, d]
    return frame


def train_disturbance_model(features: pd.DataFrame, targets: np.ndarray, kind: str = 'ridge',
                            alphas: Sequence[float] = DEFAULT_ALPHAS,
                            gammas: Sequence[float] = DEFAULT_GAMMAS) -> DisturbanceModel:
    """Fit the exogenous-heat regressor with two-fold cross-validated regularisation.

    Zero-variance columns are dropped with a warning. Features are
    standardised inside the pipeline, so predictions do not depend on
    affine rescaling of any input.

    Raises:
        IdentificationError: On length mismatch, unknown kind or fewer than
            two samples per remaining feature.
    """
    y = np.asarray(targets, dtype=float)
    if len(features) != y.shape[0]:
        raise IdentificationError(
            f"feature rows ({len(features)}) and targets ({y.shape[0]}) differ in length")
    if kind not in ('ridge', 'kernel'):
        raise IdentificationError(f"unknown regressor kind '{kind}'")

    variances = features.var(axis=0, ddof=0).to_numpy()
    dropped = [str(col) for col, var in zip(features.columns, variances) if not var > 0.0]
    if dropped:
        logger.warning("Dropping zero-variance features: %s", ', '.join(dropped))
    kept = [str(col) for col in features.columns if str(col) not in dropped]
    if not kept:
        raise IdentificationError("no informative features left after dropping constant columns")
    if y.shape[0] < 2 * len(kept):
        raise IdentificationError(
            f"{y.shape[0]} samples is fewer than twice the {len(kept)} features")

    X = features[kept].to_numpy(dtype=float)
    if kind == 'ridge':
        pipeline = make_pipeline(StandardScaler(), Ridge())
        grid = {'ridge__alpha': list(alphas)}
    else:
        pipeline = make_pipeline(StandardScaler(), KernelRidge(kernel='rbf'))
        grid = {'kernelridge__alpha': list(alphas), 'kernelridge__gamma': list(gammas)}

    search = GridSearchCV(pipeline, grid, cv=KFold(n_splits=2),
                          scoring='neg_root_mean_squared_error')
    search.fit(X, y)
    estimator = search.best_estimator_
    train_rmse = float(np.sqrt(np.mean((estimator.predict(X) - y) ** 2)))
    params = search.best_params_
    model = DisturbanceModel(
        kind=kind,
        estimator=estimator,
        feature_names=kept,
        dropped_features=dropped,
        alpha=params.get('ridge__alpha', params.get('kernelridge__alpha')),
        gamma=params.get('kernelridge__gamma'),
        train_rmse=train_rmse,
    )
    logger.info("Trained %s disturbance model on %d samples (alpha=%s, training RMSE %.4f kW)",
                kind, y.shape[0], model.alpha, train_rmse)
    return model


def predict_disturbance(model: DisturbanceModel, features: pd.DataFrame) -> np.ndarray:
    """Exogenous heat (kW) predicted for each feature row.

    Raises:
        IdentificationError: If a feature the model was trained on is missing.
    """
    missing = [name for name in model.feature_names if name not in features.columns]
    if missing:
        raise IdentificationError(f"feature mismatch: missing {', '.join(missing)}")
    return np.asarray(model.estimator.predict(features[model.feature_names].to_numpy(dtype=float)),
                      dtype=float)


def series_features(s: TrainingSeries) -> pd.DataFrame:
    return build_disturbance_features(s.timestamps, s.t_out, s.ghi, s.wind)


def validate_model(p: ThermalParams, m: EffectiveModel,
                   d: Union[DisturbanceModel, np.ndarray],
                   holdout: TrainingSeries, n_train: int = 0) -> FitReport:
    """One-step-ahead temperature and heating-power RMSE on held-out data.

    ``d`` may be a fitted disturbance model or the exogenous heat itself
    (length N or N−1). ``n_train`` is the number of samples that preceded
    the holdout in the fit; the report carries it together with the
    holdout's first and last timestamps.
    """
    if n_train < 0:
        raise IdentificationError(f"training sample count must be non-negative, got {n_train}")
    _require_samples(holdout, 2)
    pairs = len(holdout) - 1
    if isinstance(d, DisturbanceModel):
        q_e = predict_disturbance(d, series_features(holdout))[:pairs]
    else:
        q_e = np.asarray(d, dtype=float)[:pairs]
        if q_e.shape[0] != pairs:
            raise IdentificationError("exogenous heat sequence shorter than the holdout")

    theta = effective_boundary_temperature(p, holdout.t_out[:-1])
    a = m.a
    r = p.r_eff
    t_now, t_next = holdout.t_in[:-1], holdout.t_in[1:]
    predicted_t = a * t_now + (1.0 - a) * (theta + r * (holdout.q_c[:-1] + q_e))
    predicted_q = ((t_next - a * t_now) / (1.0 - a) - theta) / r - q_e
    rmse_t = float(np.sqrt(np.mean((predicted_t - t_next) ** 2)))
    rmse_q = float(np.sqrt(np.mean((predicted_q - holdout.q_c[:-1]) ** 2)))
    return FitReport(params=p, a=a, rmse_t=rmse_t, rmse_q=rmse_q,
                     n_train=n_train, n_validation=len(holdout),
                     validation_start=holdout.timestamps[0],
                     validation_end=holdout.timestamps[-1])


def identify_model(series: TrainingSeries,
                   criteria: SteadyWindowCriteria = SteadyWindowCriteria(),
                   grid: Optional[Sequence[float]] = None,
                   train_fraction: float = 2.0 / 3.0,
                   kind: str = 'ridge',
                   alphas: Sequence[float] = DEFAULT_ALPHAS,
                   gammas: Sequence[float] = DEFAULT_GAMMAS) -> IdentificationResult:
    """Full pipeline on a chronological split of one training series.

    The leading ``train_fraction`` of samples fits the thermal parameters and
    the disturbance model; the remainder is used only for the fit report.
    """
    _require_samples(series)
    n_train = int(round(train_fraction * len(series)))
    if n_train < 4 or len(series) - n_train < 2:
        raise IdentificationError(
            f"series of {len(series)} samples is too short for a training/validation split")
    train = series.slice(0, n_train)
    holdout = series.slice(n_train, len(series))

    t_m = estimate_mass_temperature(train)
    steady = detect_steady_windows(train, criteria)
    alpha, r_out = fit_outdoor_resistance(train, steady)
    params, model, scores = fit_mass_params(
        train, r_out, r_m_grid() if grid is None else grid, t_m=t_m, train_fraction=train_fraction)

    q_e = invert_exogenous(train, params, model)
    features = series_features(train).iloc[:-1].reset_index(drop=True)
    disturbance = train_disturbance_model(features, q_e, kind=kind, alphas=alphas, gammas=gammas)

    report = validate_model(params, model, disturbance, holdout, n_train=len(train))
    report.n_steady = int(steady.size)
    report.alpha = alpha
    report.r_m_scores = scores
    logger.info("Validation RMSE: %.4f °C temperature, %.4f kW heating power",
                report.rmse_t, report.rmse_q)
    return IdentificationResult(params=params, model=model, disturbance=disturbance, report=report)
