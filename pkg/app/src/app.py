"""Main application orchestrator."""
import logging
import pickle
from dataclasses import replace
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml

from config import ConfigError, RunConfig
from models import (DailyRecord, DisturbanceModel, ForecastSlice, ScenarioConfig, SimTrace,
                    SlopeEstimate, ThermalParams, WeatherSeries)
from services.analysis import (AnalysisError, backup_summary, daily_aggregate, fit_energy_line,
                               gamma_from_ci99, relative_reduction, relative_savings_mc,
                               savings_histogram_frame, seasonal_savings_mc, stage_statistics)
from services.data_io import (load_seasonal_temperatures_csv, load_training_csv,
                              load_weather_csv, read_trace_csv, write_daily_records_csv,
                              write_plan_csv, write_trace_csv)
from services.identification import IdentificationResult, identify_model, r_m_grid
from services.mpc import (SupervisoryController, select_discomfort_price,
                          sweep_discomfort_prices)
from services.simulator import build_controller, make_forecast, run_closed_loop, run_policies
from utils.logging_utils import setup_logging
from utils.random_utils import component_rng
from utils.text_utils import flatten, format_report


logger = logging.getLogger(__name__)

MODEL_FILE = 'model.yml'
DISTURBANCE_FILE = 'disturbance.pkl'


class HeatingControlApp:
    """Runs one command of the supervisory heating toolkit from a loaded configuration."""

    def __init__(self, config: RunConfig, configure_logging: bool = True):
        self.config = config
        if configure_logging:
            setup_logging(log_file=str(config.log_file) if config.log_file else None,
                          file_logging=config.log_file is not None, debug=config.debug)
        self.output_dir = Path(config.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self._weather: Optional[WeatherSeries] = None
        logger.debug("Output directory %s", self.output_dir)

    # -- inputs ---------------------------------------------------------

    @property
    def weather(self) -> WeatherSeries:
        if self._weather is None:
            self._weather = load_weather_csv(self.config.require_file('weather_csv'))
        return self._weather

    def identify(self) -> IdentificationResult:
        series = load_training_csv(self.config.require_file('training_csv'))
        low, high, points = self.config.r_m_grid
        return identify_model(series, criteria=self.config.criteria,
                              grid=r_m_grid(low, high, points),
                              train_fraction=self.config.train_fraction,
                              kind=self.config.regressor,
                              alphas=self.config.alphas, gammas=self.config.gammas)

    def controller_model(self) -> Tuple[ThermalParams, Optional[DisturbanceModel]]:
        """Thermal parameters and disturbance regressor the planner should use."""
        mode = self.config.thermal_mode
        if mode == 'fixed':
            return self.config.thermal_params, None
        if mode == 'identify':
            result = self.identify()
            return result.params, result.disturbance
        return load_model(self.config.require_file('model_file'))

    def scenario(self, policy: Optional[str] = None) -> ScenarioConfig:
        params, disturbance = self.controller_model()
        cfg = self.config
        start = cfg.start or self.weather.timestamps[0].to_pydatetime()
        return ScenarioConfig(
            start=start,
            days=cfg.days,
            truth_params=cfg.truth_params or params,
            controller_params=params,
            plant=cfg.plant,
            device=cfg.device,
            defrost=cfg.defrost,
            economics=cfg.economics,
            tuning=replace(cfg.tuning),
            comfort=cfg.comfort,
            policy=policy or cfg.policy,
            constant_setpoint=cfg.constant_setpoint,
            schedule=cfg.schedule,
            sim_dt_h=cfg.sim_dt_h,
            initial_t_in=cfg.initial_t_in,
            forecast_error=cfg.forecast_error,
            truth_exogenous=cfg.truth_exogenous,
            disturbance_model=disturbance,
            seed=cfg.seed,
        )

    def _planning_inputs(self, start: Optional[datetime]
                         ) -> Tuple[SupervisoryController, ForecastSlice, datetime]:
        scenario = self.scenario(policy='mpc')
        clock = start or scenario.start
        try:
            index = self.weather.index_of(clock)
        except KeyError as e:
            raise ConfigError(f"start instant {clock} is not in the weather data") from e
        forecast = make_forecast(self.weather, index, self.config.economics.horizon,
                                 self.config.forecast_error,
                                 component_rng(self.config.seed, 'forecast'))
        return build_controller(scenario), forecast, clock

    # -- commands -------------------------------------------------------

    def cmd_identify(self) -> Dict[str, Path]:
        """Fit the thermal model and disturbance regressor from the training file."""
        result = self.identify()
        model_path = save_model(result, self.output_dir)
        report = result.report
        text = format_report([
            ('parameters', result.params.to_dict()),
            ('derived', {'r_eff': result.params.r_eff, 'a': report.a, 'alpha': report.alpha}),
            ('validation', {'rmse_t_c': report.rmse_t, 'rmse_q_kw': report.rmse_q,
                            'n_train': report.n_train, 'n_validation': report.n_validation,
                            'validation_from': report.validation_start.isoformat(),
                            'validation_to': report.validation_end.isoformat(),
                            'n_steady_windows': report.n_steady}),
            ('disturbance', {'kind': result.disturbance.kind,
                             'alpha': result.disturbance.alpha,
                             'gamma': result.disturbance.gamma,
                             'dropped': ','.join(result.disturbance.dropped_features) or '-'}),
        ])
        report_path = self._write_text('fit_report.txt', text)
        logger.info("Model written to %s", model_path)
        return {'model': model_path, 'report': report_path}

    def cmd_plan(self, start: Optional[datetime] = None,
                 t_in: Optional[float] = None) -> Dict[str, Path]:
        """Solve one planning problem from ``start`` and export the trajectory."""
        controller, forecast, clock = self._planning_inputs(start)
        initial = self.config.initial_t_in if t_in is None else t_in
        plan = controller.plan(initial, forecast, clock)
        plan_path = write_plan_csv(plan, self.output_dir / 'plan.csv')
        report_path = self._write_text('plan_report.txt', format_report([
            ('plan', {'start': clock.isoformat(), 't_in_c': float(initial),
                      'status': plan.status.value, 'delta_used_c': plan.delta_used,
                      'discomfort_price': controller.tuning.base_price,
                      'peak_kw': plan.peak, 'objective': plan.objective}),
            ('objective', plan.breakdown.to_dict()),
        ]))
        return {'plan': plan_path, 'report': report_path}

    def cmd_tune(self, start: Optional[datetime] = None,
                 t_in: Optional[float] = None) -> Dict[str, Path]:
        """Evaluate the whole discomfort-price grid at ``start`` and report the choice."""
        controller, forecast, clock = self._planning_inputs(start)
        initial = self.config.initial_t_in if t_in is None else t_in
        spec = controller.build_spec(initial, forecast, clock)
        candidates = sweep_discomfort_prices(spec, controller.tuning, controller.comfort,
                                             stop_at_first=False, relax=controller.relax)
        chosen = select_discomfort_price(candidates, controller.tuning)
        table = pd.DataFrame([{'price': c.price, 'mean_ppd_pct': c.mean_ppd,
                               'energy_cost': c.energy_cost, 'status': c.status}
                              for c in candidates])
        table_path = self._write_csv('tuning.csv', table)
        report_path = self._write_text('tuning_report.txt', format_report([
            ('tuning', {'start': clock.isoformat(), 'selected_price': chosen,
                        'ppd_ceiling_pct': controller.tuning.ppd_ceiling,
                        'candidates': len(candidates)}),
        ]))
        return {'table': table_path, 'report': report_path}

    def cmd_simulate(self) -> Dict[str, Path]:
        """Closed-loop run of the configured policy."""
        scenario = self.scenario()
        trace = run_closed_loop(scenario, self.weather)
        trace_path = write_trace_csv(trace, self.output_dir / f'trace_{trace.policy}.csv')
        records = daily_aggregate(trace)
        report_path = self._write_text('simulation_report.txt',
                                       format_report([('simulation', _trace_summary(trace))]))
        if records:
            write_daily_records_csv(records, self.config.plant.stages,
                                    self.output_dir / 'daily_records.csv')
        return {'trace': trace_path, 'report': report_path}

    def cmd_compare(self) -> Dict[str, Path]:
        """Run the candidate and baseline policies on the same weather and seeds."""
        candidate, baseline = self.config.compare_candidate, self.config.compare_baseline
        policies = [candidate] if candidate == baseline else [candidate, baseline]
        traces = run_policies(self.scenario(), self.weather, policies)
        paths: Dict[str, Path] = {}
        for policy, trace in traces.items():
            paths[f'trace_{policy}'] = write_trace_csv(trace, self.output_dir / f'trace_{policy}.csv')
        pairs = [(candidate, traces[candidate]), (baseline, traces[baseline])]
        paths.update(self._analyze_traces(pairs, 'comparison'))
        return paths

    def cmd_analyze(self, traces: Sequence[Tuple[str, Path]],
                    baseline: Optional[str] = None) -> Dict[str, Path]:
        """Aggregate exported traces and estimate savings against ``baseline``.

        Args:
            traces: (policy, trace CSV) pairs; the first is the candidate.
            baseline: Policy name treated as the baseline; defaults to the last trace.
        """
        if not traces:
            raise ConfigError("analyze needs at least one trace")
        loaded = [(policy, read_trace_csv(path, self.weather, policy)) for policy, path in traces]
        if baseline is not None:
            names = [p for p, _ in loaded]
            if baseline not in names:
                raise ConfigError(f"baseline policy '{baseline}' is not among the traces")
            loaded.sort(key=lambda item: item[0] == baseline)
        return self._analyze_traces(loaded, 'analysis')

    # -- helpers --------------------------------------------------------

    def _analyze_traces(self, traces: List[Tuple[str, SimTrace]], name: str) -> Dict[str, Path]:
        cfg = self.config
        records: List[DailyRecord] = []
        for _, trace in traces:
            records.extend(daily_aggregate(trace))
        paths = {'daily': write_daily_records_csv(records, cfg.plant.stages,
                                                  self.output_dir / 'daily_records.csv')}
        sections: List[Tuple[str, Dict[str, object]]] = []
        for policy, trace in traces:
            sections.append((f'policy {policy}', _trace_summary(trace)))
        for policy, stats_ in stage_statistics(records).items():
            top = cfg.plant.stages[-1] if cfg.plant.stages else 0.0
            sections.append((f'stages {policy}', {
                'turn_on_events': stats_.n_events,
                'top_stage_share': stats_.top_stage_share(top),
                'conditional_mean_kw': (stats_.conditional_mean_kw
                                        if stats_.conditional_mean_kw is not None else '-'),
                **{f'events_{k:g}kw': v for k, v in stats_.histogram.items()},
            }))
        for policy, summary in backup_summary(records).items():
            sections.append((f'backup {policy}', {
                'days': summary.days,
                'element_kwh_per_day': summary.element_kwh_per_day,
                'element_minutes_per_day': summary.element_minutes_per_day,
                'defrost_events_per_day': summary.defrost_events_per_day,
            }))

        slopes = self._slopes(records, [p for p, _ in traces])
        if slopes is not None:
            candidate, base = slopes
            report = relative_savings_mc(candidate, base, n=cfg.savings_samples, seed=cfg.seed)
            sections.append(('savings', {'slope_candidate': candidate.slope,
                                         'slope_candidate_std': candidate.std,
                                         'slope_baseline': base.slope,
                                         'slope_baseline_std': base.std,
                                         **report.to_dict()}))
            paths['histogram'] = self._write_csv('savings_histogram.csv',
                                                 savings_histogram_frame(report))
            seasonal = self._seasonal(candidate, base)
            if seasonal is not None:
                sections.append(('seasonal', seasonal))
        elif len(traces) > 1:
            energies = [sum(r.energy_kwh for r in records if r.policy == p) for p, _ in traces[:2]]
            reduction = relative_reduction(energies[0], energies[1])
            sections.append(('savings', {'energy_candidate_kwh': energies[0],
                                         'energy_baseline_kwh': energies[1],
                                         'reduction_pct': reduction if reduction is not None else '-'}))
        paths['report'] = self._write_text(f'{name}_report.txt', format_report(sections))
        return paths

    def _slopes(self, records: List[DailyRecord],
                policies: List[str]) -> Optional[Tuple[SlopeEstimate, SlopeEstimate]]:
        if len(policies) < 2:
            return None
        offset = self.config.balance_offset
        try:
            fits = [fit_energy_line([r for r in records if r.policy == p], offset)
                    for p in (policies[0], policies[-1])]
        except AnalysisError as e:
            logger.warning("Energy-line fit skipped: %s", e)
            return None
        return fits[0], fits[1]

    def _seasonal(self, candidate: SlopeEstimate, base: SlopeEstimate) -> Optional[Dict[str, object]]:
        cfg = self.config
        if cfg.seasonal_temperatures_csv is None:
            return None
        temps = load_seasonal_temperatures_csv(cfg.require_file('seasonal_temperatures_csv'))
        settings = cfg.seasonal
        report = seasonal_savings_mc(
            temps, settings.setpoint, gamma_from_ci99(*settings.gamma_ci99),
            settings.slope_mpc or candidate, settings.slope_baseline or base,
            price=settings.energy_price, n=settings.samples, seed=cfg.seed,
            offset=cfg.balance_offset)
        return report.to_dict()

    def _write_text(self, name: str, text: str) -> Path:
        path = self.output_dir / name
        path.write_text(text, encoding='utf-8')
        return path

    def _write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.output_dir / name
        frame.to_csv(path, index=False, float_format='%.6f', lineterminator='\n')
        return path


def _trace_summary(trace: SimTrace) -> Dict[str, object]:
    frame = trace.to_frame()
    if frame.empty:
        return {'steps': 0}
    power = frame['p_hp'] + frame['p_elem']
    return {
        'steps': len(frame),
        'energy_kwh': float(power.sum() * trace.dt_h),
        'element_energy_kwh': float(frame['p_elem'].sum() * trace.dt_h),
        'peak_kw': float(power.max()),
        'mean_t_in_c': float(frame['t_in'].mean()),
        'mean_ppd_pct': float(frame['ppd'].mean()),
        'defrost_steps': int(frame['defrost'].sum()),
    }


def save_model(result: IdentificationResult, directory: Path) -> Path:
    """Write ``model.yml`` and, next to it, the pickled disturbance regressor."""
    directory.mkdir(parents=True, exist_ok=True)
    document = {
        'params': result.params.to_dict(),
        'dt_h': result.model.dt_h,
        'report': flatten('', result.report.to_dict()),
        'disturbance_file': DISTURBANCE_FILE,
    }
    path = directory / MODEL_FILE
    with open(path, 'w', encoding='utf-8') as file:
        yaml.safe_dump(_plain(document), file, sort_keys=True)
    with open(directory / DISTURBANCE_FILE, 'wb') as file:
        pickle.dump(result.disturbance, file)
    return path


def load_model(path: Path) -> Tuple[ThermalParams, Optional[DisturbanceModel]]:
    """Read a model file written by :func:`save_model`."""
    try:
        with open(path, 'r', encoding='utf-8') as file:
            document = yaml.load(file, Loader=yaml.SafeLoader)
        params = ThermalParams(**{k: float(v) for k, v in document['params'].items()})
    except (OSError, yaml.YAMLError, KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"cannot read model file {path}: {e}") from e
    disturbance = None
    pickled = Path(path).parent / document.get('disturbance_file', DISTURBANCE_FILE)
    if pickled.exists():
        with open(pickled, 'rb') as file:
            disturbance = pickle.load(file)
    else:
        logger.warning("No disturbance regressor next to %s, using the configured profile", path)
    return params, disturbance


def _plain(value: object) -> object:
    """Convert numpy scalars and tuples so that safe_dump accepts them."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value
