"""Configuration management for the application."""
import os
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, TypeVar

import yaml

from models import (ComfortInputs, DefrostConfig, DeviceSettings, Economics, ExogenousProfile,
                    ForecastErrorModel, PlantConfig, ReferenceSchedule, SlopeEstimate,
                    SteadyWindowCriteria, ThermalParams, TuningState)
from utils.date_utils import parse_instant


logger = logging.getLogger(__name__)

T = TypeVar('T')

REQUIRED_SECTIONS = ('paths', 'economics')
KNOWN_SECTIONS = ('app', 'paths', 'thermal', 'identification', 'plant', 'device', 'defrost',
                  'economics', 'tuning', 'comfort', 'simulation', 'compare', 'analysis')
THERMAL_MODES = ('fixed', 'identify', 'file')
REGRESSORS = ('ridge', 'kernel')


class ConfigError(Exception):
    """Raised when configuration errors occur."""
    pass


class ConfigManager:
    """Loads and validates the YAML configuration file."""

    def __init__(self, config_path: Optional[str] = None):
        """Initialize the configuration manager.

        Args:
            config_path: Path to the configuration file.
                        If None, uses CONFIGPATH environment variable.
        """
        self.config_path = self._get_config_path(config_path)
        self.config_dir = self.config_path.parent
        self.template_path = self.config_path.with_suffix('.yml.template')
        self._config: Optional[Dict[str, Any]] = None

    def _get_config_path(self, config_path: Optional[str]) -> Path:
        if config_path:
            return Path(config_path)

        env_path = os.environ.get('CONFIGPATH')
        if not env_path:
            raise ConfigError("no --config given and CONFIGPATH environment variable not set")

        return Path(env_path)

    def load_config(self) -> Dict[str, Any]:
        """Load configuration from file.

        Returns:
            Configuration dictionary.

        Raises:
            ConfigError: If configuration cannot be loaded.
        """
        if self._config is not None:
            return self._config

        if not self.config_path.exists():
            self._handle_missing_config()

        try:
            with open(self.config_path, 'r', encoding='utf-8') as file:
                self._config = yaml.load(file, Loader=yaml.SafeLoader)
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML in config file: {e}") from e
        except IOError as e:
            raise ConfigError(f"Cannot read config file: {e}") from e

        self._validate_config()
        logger.info("Configuration loaded successfully from %s", self.config_path)
        return self._config

    def _handle_missing_config(self) -> None:
        logger.critical("Configuration file not found: %s", self.config_path)
        if self.template_path.exists():
            logger.info("Template found at %s", self.template_path)
        logger.critical("Create a config.yml using config.yml.template as an example.")
        raise ConfigError(f"configuration file not found: {self.config_path}")

    def _validate_config(self) -> None:
        if not self._config:
            raise ConfigError("Configuration is empty")
        if not isinstance(self._config, dict):
            raise ConfigError("Configuration must be a mapping of sections")

        for section in REQUIRED_SECTIONS:
            if section not in self._config:
                raise ConfigError(f"Missing required configuration section: {section}")

        for section, body in self._config.items():
            if section not in KNOWN_SECTIONS:
                logger.warning("Ignoring unknown configuration section '%s'", section)
            elif body is not None and not isinstance(body, dict):
                raise ConfigError(f"Configuration section '{section}' must be a mapping")

    def get_config(self) -> Dict[str, Any]:
        if self._config is None:
            return self.load_config()
        return self._config

    def get_section(self, section: str) -> Dict[str, Any]:
        """Get a configuration section, empty when the file omits it."""
        config = self.get_config()
        return config.get(section) or {}

    def resolve_path(self, value: Optional[str]) -> Optional[Path]:
        """Resolve a path setting against the config file directory."""
        if value is None or value == '':
            return None
        path = Path(os.path.expanduser(str(value)))
        if not path.is_absolute():
            path = self.config_dir / path
        return path


@dataclass
class SeasonalSettings:
    """Inputs for the seasonal cost projection."""
    setpoint: float = 20.7
    gamma_ci99: Tuple[float, float] = (0.7, 1.7)
    samples: int = 1_000_000
    energy_price: float = 0.15
    slope_mpc: Optional[SlopeEstimate] = None
    slope_baseline: Optional[SlopeEstimate] = None


@dataclass
class RunConfig:
    """Typed view of every configuration section."""
    config_path: Path
    debug: bool = False
    log_file: Optional[Path] = None
    seed: int = 0

    weather_csv: Optional[Path] = None
    training_csv: Optional[Path] = None
    output_dir: Path = Path('output')
    model_file: Optional[Path] = None
    seasonal_temperatures_csv: Optional[Path] = None

    thermal_mode: str = 'fixed'
    thermal_params: Optional[ThermalParams] = None

    criteria: SteadyWindowCriteria = field(default_factory=SteadyWindowCriteria)
    r_m_grid: Tuple[float, float, int] = (0.01, 10.0, 200)
    train_fraction: float = 2.0 / 3.0
    regressor: str = 'ridge'
    alphas: List[float] = field(default_factory=lambda: [0.01, 0.1, 1.0, 10.0, 100.0])
    gammas: List[float] = field(default_factory=lambda: [0.01, 0.1, 1.0])

    plant: PlantConfig = field(default_factory=PlantConfig)
    device: DeviceSettings = field(default_factory=DeviceSettings)
    defrost: DefrostConfig = field(default_factory=DefrostConfig)
    economics: Economics = field(default_factory=Economics)
    tuning: TuningState = field(default_factory=TuningState)
    comfort: ComfortInputs = field(default_factory=lambda: ComfortInputs(20.0, 20.0))

    start: Optional[datetime] = None
    days: int = 7
    sim_dt_h: float = 0.25
    initial_t_in: float = 20.0
    policy: str = 'mpc'
    constant_setpoint: float = 20.0
    schedule: ReferenceSchedule = field(default_factory=ReferenceSchedule)
    forecast_error: ForecastErrorModel = field(default_factory=ForecastErrorModel)
    truth_exogenous: ExogenousProfile = field(default_factory=ExogenousProfile)
    truth_params: Optional[ThermalParams] = None

    compare_baseline: str = 'constant'
    compare_candidate: str = 'mpc'

    balance_offset: float = 8.0
    savings_samples: int = 10_000_000
    seasonal: SeasonalSettings = field(default_factory=SeasonalSettings)

    def require_file(self, name: str) -> Path:
        """Return the path setting ``name``, failing if unset or missing on disk."""
        path = getattr(self, name)
        if path is None:
            raise ConfigError(f"paths.{name} is not configured")
        if not Path(path).exists():
            raise ConfigError(f"paths.{name} does not exist: {path}")
        return Path(path)


def _build(section: str, factory: Callable[..., T], **kwargs: Any) -> T:
    """Construct a settings object, reporting bad values against their section."""
    try:
        return factory(**{k: v for k, v in kwargs.items() if v is not None})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{section}] {e}") from e


def _number(section: str, key: str, value: Any, minimum: Optional[float] = None,
            maximum: Optional[float] = None, integer: bool = False) -> Any:
    if value is None:
        return None
    try:
        number = int(value) if integer else float(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{section}] {key} must be a number, got {value!r}") from e
    if minimum is not None and number < minimum:
        raise ConfigError(f"[{section}] {key} must be at least {minimum}, got {number}")
    if maximum is not None and number > maximum:
        raise ConfigError(f"[{section}] {key} must be at most {maximum}, got {number}")
    return number


def _tuple(value: Any) -> Optional[Tuple[Any, ...]]:
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return (value,)


def _profile(value: Any) -> Any:
    if value is None or isinstance(value, (int, float)):
        return value
    return tuple(value)


def _schedule(section: str, raw: Optional[Dict[str, Any]]) -> Optional[ReferenceSchedule]:
    if not raw:
        return None
    return _build(section, ReferenceSchedule, day=raw.get('day'), night=raw.get('night'),
                  day_start=raw.get('day_start'), day_end=raw.get('day_end'))


def _thermal_params(section: str, raw: Dict[str, Any]) -> Optional[ThermalParams]:
    keys = ('r_out', 'r_m', 'c', 't_m')
    if not any(raw.get(k) is not None for k in keys):
        return None
    missing = [k for k in keys if raw.get(k) is None]
    if missing:
        raise ConfigError(f"[{section}] missing thermal parameters: {', '.join(missing)}")
    return _build(section, ThermalParams, **{k: _number(section, k, raw[k]) for k in keys})


def _slope(section: str, raw: Any) -> Optional[SlopeEstimate]:
    if raw is None:
        return None
    if not isinstance(raw, dict) or 'slope' not in raw or 'std' not in raw:
        raise ConfigError(f"[{section}] slope settings need 'slope' and 'std'")
    return _build(section, SlopeEstimate, slope=_number(section, 'slope', raw['slope']),
                  std=_number(section, 'std', raw['std'], minimum=0.0))


def build_run_config(manager: ConfigManager, seed: Optional[int] = None,
                     output_dir: Optional[str] = None, debug: Optional[bool] = None) -> RunConfig:
    """Turn the loaded YAML into a :class:`RunConfig`.

    Command-line overrides win over the file. Relative paths resolve against
    the directory holding the config file.

    Raises:
        ConfigError: On a missing section or an out-of-range value.
    """
    manager.load_config()
    app = manager.get_section('app')
    paths = manager.get_section('paths')
    thermal = manager.get_section('thermal')
    ident = manager.get_section('identification')
    plant_raw = manager.get_section('plant')
    device_raw = manager.get_section('device')
    defrost_raw = manager.get_section('defrost')
    econ = manager.get_section('economics')
    tuning_raw = manager.get_section('tuning')
    comfort_raw = manager.get_section('comfort')
    sim = manager.get_section('simulation')
    compare = manager.get_section('compare')
    analysis = manager.get_section('analysis')

    cfg = RunConfig(config_path=manager.config_path)
    cfg.debug = bool(app.get('debug', False)) if debug is None else debug
    cfg.log_file = manager.resolve_path(app.get('log_file'))
    cfg.seed = _number('app', 'seed', seed if seed is not None else app.get('seed', 0),
                       minimum=0, integer=True)

    cfg.weather_csv = manager.resolve_path(paths.get('weather_csv'))
    cfg.training_csv = manager.resolve_path(paths.get('training_csv'))
    cfg.output_dir = (Path(output_dir) if output_dir
                      else manager.resolve_path(paths.get('output_dir')) or manager.config_dir / 'output')
    cfg.model_file = manager.resolve_path(paths.get('model_file'))
    cfg.seasonal_temperatures_csv = manager.resolve_path(paths.get('seasonal_temperatures_csv'))

    cfg.thermal_mode = thermal.get('mode', 'fixed')
    if cfg.thermal_mode not in THERMAL_MODES:
        raise ConfigError(f"[thermal] mode must be one of {', '.join(THERMAL_MODES)}")
    cfg.thermal_params = _thermal_params('thermal', thermal)
    if cfg.thermal_mode == 'fixed' and cfg.thermal_params is None:
        raise ConfigError("[thermal] mode 'fixed' needs r_out, r_m, c and t_m")
    if cfg.thermal_mode == 'file' and cfg.model_file is None:
        raise ConfigError("[thermal] mode 'file' needs paths.model_file")

    cfg.criteria = _build(
        'identification', SteadyWindowCriteria,
        night_start=_number('identification', 'night_start', ident.get('night_start'), 0, 23, True),
        night_end=_number('identification', 'night_end', ident.get('night_end'), 0, 23, True),
        max_drift=_number('identification', 'max_temp_drift', ident.get('max_temp_drift'), 0.0),
        window_hours=_number('identification', 'window_hours', ident.get('window_hours'), 0.0),
    )
    grid = ident.get('r_m_grid') or {}
    grid_min = _number('identification', 'r_m_grid.min', grid.get('min', 0.01), 0.0)
    grid_max = _number('identification', 'r_m_grid.max', grid.get('max', 10.0), 0.0)
    grid_points = _number('identification', 'r_m_grid.points', grid.get('points', 200), 2, integer=True)
    if not 0 < grid_min < grid_max:
        raise ConfigError("[identification] r_m_grid needs 0 < min < max")
    cfg.r_m_grid = (grid_min, grid_max, grid_points)
    cfg.train_fraction = _number('identification', 'train_fraction',
                                 ident.get('train_fraction', 2.0 / 3.0), 0.1, 0.95)
    cfg.regressor = ident.get('regressor', 'ridge')
    if cfg.regressor not in REGRESSORS:
        raise ConfigError(f"[identification] regressor must be one of {', '.join(REGRESSORS)}")
    if ident.get('alphas'):
        cfg.alphas = [float(a) for a in ident['alphas']]
    if ident.get('gammas'):
        cfg.gammas = [float(g) for g in ident['gammas']]

    cfg.plant = _build('plant', PlantConfig, p_bar=plant_raw.get('p_bar'),
                       stages=_tuple(plant_raw.get('stages')),
                       cop_coeffs=_tuple(plant_raw.get('cop_coeffs')),
                       cop_floor=plant_raw.get('cop_floor'),
                       t_range=_tuple(plant_raw.get('t_range')))
    cfg.device = _build('device', DeviceSettings, **{k: device_raw.get(k) for k in (
        'kp_fraction', 'integral_time_h', 'stage_up_threshold', 'stage_off_threshold',
        'dwell_h', 'min_on_h', 'min_off_h', 'saturation_threshold')})
    cfg.defrost = _build('defrost', DefrostConfig, t_ceiling=defrost_raw.get('t_ceiling'),
                         rh_band=_tuple(defrost_raw.get('rh_band')),
                         events_per_day=defrost_raw.get('events_per_day'),
                         duration_h=defrost_raw.get('duration_h'),
                         stage=defrost_raw.get('stage'))

    cfg.economics = _build(
        'economics', Economics,
        dt_h=_number('economics', 'dt_h', econ.get('dt_h'), 0.0),
        horizon=_number('economics', 'horizon', econ.get('horizon'), 1, integer=True),
        energy_price=_profile(econ.get('energy_price')),
        demand_price=econ.get('demand_price'),
        delta=econ.get('delta'),
        reference=_schedule('economics', econ.get('reference')),
        emission_price=econ.get('emission_price'),
        emission_intensity=_profile(econ.get('emission_intensity')),
        tracking_tau_h=_number('economics', 'tracking_tau_h', econ.get('tracking_tau_h'), 0.0),
        max_setpoint_rate=_number('economics', 'max_setpoint_rate', econ.get('max_setpoint_rate'), 0.0),
        relax_step=_number('economics', 'relax_step', econ.get('relax_step'), 0.0),
        relax_max=_number('economics', 'relax_max', econ.get('relax_max'), 0.0),
    )

    tuning_grid = tuning_raw.get('grid') or {}
    cfg.tuning = _build(
        'tuning', TuningState,
        base_price=tuning_raw.get('initial_price'),
        interval_h=tuning_raw.get('interval_h'),
        grid_min=tuning_grid.get('min'),
        grid_max=tuning_grid.get('max'),
        grid_points=_number('tuning', 'grid.points', tuning_grid.get('points'), 2, integer=True),
        day_multiplier=_number('tuning', 'day_multiplier', tuning_raw.get('day_multiplier'), 0.0),
        night_multiplier=_number('tuning', 'night_multiplier', tuning_raw.get('night_multiplier'), 0.0),
        day_start=_number('tuning', 'day_start', tuning_raw.get('day_start'), 0, 24, True),
        day_end=_number('tuning', 'day_end', tuning_raw.get('day_end'), 0, 24, True),
        ppd_ceiling=_number('tuning', 'ppd_ceiling', tuning_raw.get('ppd_ceiling'), 5.0, 100.0),
        modulate_sweep=tuning_raw.get('modulate_sweep'),
        enabled=tuning_raw.get('enabled'),
        workers=_number('tuning', 'workers', tuning_raw.get('workers'), 1, integer=True),
    )

    cfg.comfort = _build('comfort', ComfortInputs, t_air=20.0, t_radiant=20.0,
                         air_speed=comfort_raw.get('air_speed'), rh=comfort_raw.get('rh'),
                         met=comfort_raw.get('met'), clo=comfort_raw.get('clo'))

    if sim.get('start') is not None:
        try:
            cfg.start = parse_instant(sim['start'])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"[simulation] start is not a valid instant: {sim['start']!r}") from e
    cfg.days = _number('simulation', 'days', sim.get('days', cfg.days), 1, integer=True)
    cfg.sim_dt_h = _number('simulation', 'sim_dt_h', sim.get('sim_dt_h', cfg.sim_dt_h), 0.0)
    steps = cfg.economics.dt_h / cfg.sim_dt_h if cfg.sim_dt_h else 0.0
    if cfg.sim_dt_h <= 0 or abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
        raise ConfigError("[simulation] sim_dt_h must divide economics.dt_h")
    cfg.initial_t_in = _number('simulation', 'initial_t_in', sim.get('initial_t_in', cfg.initial_t_in))
    cfg.policy = sim.get('policy', cfg.policy)
    if cfg.policy not in ('mpc', 'constant', 'schedule'):
        raise ConfigError(f"[simulation] unknown policy '{cfg.policy}'")
    cfg.constant_setpoint = _number('simulation', 'constant_setpoint',
                                    sim.get('constant_setpoint', cfg.constant_setpoint))
    cfg.schedule = _schedule('simulation', sim.get('schedule')) or cfg.economics.reference
    errors = sim.get('forecast_error') or {}
    cfg.forecast_error = _build('simulation', ForecastErrorModel,
                                sigma_t_out=errors.get('t_out'), sigma_ghi=errors.get('ghi'),
                                sigma_wind=errors.get('wind'), sigma_rh=errors.get('rh'))
    cfg.truth_exogenous = _build('simulation', ExogenousProfile, **(sim.get('truth_exogenous') or {}))
    cfg.truth_params = _thermal_params('simulation', sim.get('truth_params') or {})

    cfg.compare_baseline = compare.get('baseline', cfg.compare_baseline)
    if cfg.compare_baseline not in ('constant', 'schedule'):
        raise ConfigError("[compare] baseline must be 'constant' or 'schedule'")
    cfg.compare_candidate = compare.get('candidate', cfg.compare_candidate)
    if cfg.compare_candidate not in ('mpc', 'constant', 'schedule'):
        raise ConfigError(f"[compare] unknown candidate policy '{cfg.compare_candidate}'")

    cfg.balance_offset = _number('analysis', 'balance_offset',
                                 analysis.get('balance_offset', cfg.balance_offset))
    cfg.savings_samples = _number('analysis', 'savings_samples',
                                  analysis.get('savings_samples', cfg.savings_samples), 10_000, integer=True)
    seasonal = analysis.get('seasonal') or {}
    ci = seasonal.get('gamma_ci99', cfg.seasonal.gamma_ci99)
    if not isinstance(ci, (list, tuple)) or len(ci) != 2 or float(ci[0]) > float(ci[1]):
        raise ConfigError("[analysis] seasonal.gamma_ci99 must be [low, high]")
    cfg.seasonal = SeasonalSettings(
        setpoint=_number('analysis', 'seasonal.setpoint', seasonal.get('setpoint', 20.7)),
        gamma_ci99=(float(ci[0]), float(ci[1])),
        samples=_number('analysis', 'seasonal.samples', seasonal.get('samples', 1_000_000), 1, integer=True),
        energy_price=_number('analysis', 'seasonal.energy_price', seasonal.get('energy_price', 0.15), 0.0),
        slope_mpc=_slope('analysis', seasonal.get('slope_mpc')),
        slope_baseline=_slope('analysis', seasonal.get('slope_baseline')),
    )
    return cfg


def load_run_config(config_path: Optional[str] = None, seed: Optional[int] = None,
                    output_dir: Optional[str] = None, debug: Optional[bool] = None) -> RunConfig:
    return build_run_config(ConfigManager(config_path), seed=seed, output_dir=output_dir, debug=debug)
