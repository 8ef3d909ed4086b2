"""Loading and validation of experiment configurations.

Settings are layered on a :class:`flask.Config`: the package defaults, then an
optional site-wide settings file named by ``SGCONTROL_SETTINGS``, then the JSON
file of the run. Every key is checked before any computation starts.
"""
import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from flask import Config

from ..builders import FieldBuilder
from ..dynamics import IntegratorConfig
from ..enums import Scheme
from ..errors import ConfigError
from ..pipeline import PipelineConfig
from ..saturation import BASE_ORDER
from ..torus import ModeIndex, SobolevParams, SpectralField, TorusGeometry, helmholtz, sobolev_norm

logger = logging.getLogger(__name__)

SETTINGS_ENVVAR = 'SGCONTROL_SETTINGS'

MAX_SEED = 2 ** 64


def _load_json(fd) -> dict:
    data = json.load(fd)
    if not isinstance(data, dict):
        raise ConfigError('The configuration file must hold a JSON object')
    return {str(key).upper(): value for key, value in data.items()}


def load_config(path: Optional[str] = None, seed: Optional[int] = None) -> Config:
    """Build the layered configuration of one run.

    Args:
          path (str): Optional. JSON file of the run; keys are matched case-insensitively.
          seed (int): Optional. Overrides ``SEED``.
    Returns:
          flask.Config: The merged settings
    Raises:
          ConfigError: The file is missing, is not valid JSON or holds unknown keys.
    """
    config = Config(os.getcwd())
    config.from_object('sgcontrol.default_settings')
    known = set(config)
    config.from_envvar(SETTINGS_ENVVAR, silent=True)
    if path is not None:
        try:
            config.from_file(os.path.abspath(path), load=_load_json)
        except OSError as e:
            raise ConfigError('Cannot read configuration {}: {}'.format(path, e.strerror or e))
        except json.JSONDecodeError as e:
            raise ConfigError('Configuration {} is not valid JSON: {}'.format(path, e))
    unknown = sorted(set(config) - known)
    if unknown:
        raise ConfigError('Unknown configuration keys: {}'.format(', '.join(unknown)))
    if seed is not None:
        config['SEED'] = seed
    return config


def _number(config, key: str, positive: bool = True, allow_zero: bool = False) -> float:
    value = config[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ConfigError('{} must be a finite number, got {!r}'.format(key, value))
    if positive and not (value > 0 or (allow_zero and value == 0)):
        raise ConfigError('{} must be {}, got {!r}'.format(key, 'nonnegative' if allow_zero else 'positive', value))
    return float(value)


def _integer(config, key: str, minimum: int = 1) -> int:
    value = config[key]
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError('{} must be an integer ≥ {}, got {!r}'.format(key, minimum, value))
    return value


def _mode(value, key: str) -> ModeIndex:
    try:
        return ModeIndex.of(value)
    except (TypeError, ValueError) as e:
        raise ConfigError('{}: invalid mode {!r} ({})'.format(key, value, e))


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated experiment.

    Use :meth:`from_config` rather than the constructor; it performs the checks.
    """
    geometry: TorusGeometry
    params: SobolevParams
    trunc: int
    horizon: float
    dt: Optional[float]
    scheme: Scheme
    blowup_factor: float
    seed: int
    dt_fraction: float = 1e-3
    initial_state: Optional[SpectralField] = None
    target_state: Optional[SpectralField] = None
    random_max_order: int = 3
    random_amplitude: float = 1.0
    forcing: Optional[SpectralField] = None
    control: Optional[SpectralField] = None
    snapshot_every: int = 0
    relax_ks: Optional[Tuple[int, ...]] = None
    relax_directions: int = 2
    relax_dt: float = 1e-2
    ladder_order: int = 6
    preferred_pairs: Dict[ModeIndex, Tuple[ModeIndex, ModeIndex]] = field(default_factory=dict)
    epsilon: Optional[float] = None
    epsilon_relative: float = 0.1
    schedule: Dict[str, float] = field(default_factory=dict)
    control_samples: int = 1000

    @classmethod
    def from_config(cls, config) -> 'ExperimentConfig':
        """Validate a mapping of UPPERCASE settings.

        Raises:
              ConfigError: Any value is missing, of the wrong type or out of range.
        """
        try:
            geometry = TorusGeometry.of(config['Q'])
        except (TypeError, ValueError) as e:
            raise ConfigError('Q must be two positive radii: {}'.format(e))
        try:
            params = SobolevParams(alpha=_number(config, 'ALPHA'), nu=_number(config, 'NU'))
        except ValueError as e:
            raise ConfigError(str(e))
        try:
            scheme = Scheme(config['SCHEME'])
        except ValueError:
            raise ConfigError('SCHEME must be one of {}, got {!r}'.format(
                ', '.join(s.value for s in Scheme), config['SCHEME']))
        seed = config['SEED']
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < MAX_SEED:
            raise ConfigError('SEED must be a 64-bit unsigned integer, got {!r}'.format(seed))
        if _number(config, 'BLOWUP_FACTOR') <= 1:
            raise ConfigError('BLOWUP_FACTOR must exceed 1')

        trunc = _integer(config, 'TRUNC')
        horizon = _number(config, 'HORIZON')
        dt = None if config['DT'] is None else _number(config, 'DT')
        if dt is not None and dt > horizon:
            raise ConfigError('DT {} exceeds the horizon {}'.format(dt, horizon))
        dt_fraction = _number(config, 'DT_FRACTION')
        if dt_fraction > 1:
            raise ConfigError('DT_FRACTION must not exceed 1, got {}'.format(dt_fraction))

        def field_of(key):
            data = config[key]
            if data is None:
                return None
            if not isinstance(data, dict) or not isinstance(data.get('modes', []), list):
                raise ConfigError('{} must be an object {{"modes": [...]}}'.format(key))
            try:
                return FieldBuilder(geometry, trunc).modes(data.get('modes', [])).finalize()
            except (KeyError, TypeError, ValueError) as e:
                raise ConfigError('{}: {}'.format(key, e))

        ks = config['RELAX_KS']
        if ks is not None:
            if not isinstance(ks, list) or not ks or any(isinstance(k, bool) or not isinstance(k, int) or k < 1
                                                         for k in ks):
                raise ConfigError('RELAX_KS must be a nonempty list of positive integers, got {!r}'.format(ks))
            ks = tuple(ks)

        ladder_order = _integer(config, 'LADDER_ORDER', BASE_ORDER)
        preferred = {}
        for item in config['LADDER_PREFERRED_PAIRS'] or []:
            try:
                target = _mode(item['target'], 'LADDER_PREFERRED_PAIRS').canonical()[0]
                m, n = item['pair']
            except (KeyError, TypeError, ValueError):
                raise ConfigError('LADDER_PREFERRED_PAIRS entries are {{"target": [l1, l2], "pair": [m, n]}}, '
                                  'got {!r}'.format(item))
            preferred[target] = (_mode(m, 'LADDER_PREFERRED_PAIRS'), _mode(n, 'LADDER_PREFERRED_PAIRS'))

        epsilon = None if config['EPSILON'] is None else _number(config, 'EPSILON')
        schedule = {
            'k_project': _integer(config, 'K_PROJECT', BASE_ORDER),
            'segments': _integer(config, 'SEGMENTS'),
            'oscillation_start': _integer(config, 'OSCILLATION_START'),
            'oscillation_cap': _integer(config, 'OSCILLATION_CAP'),
            'ramp_fraction': _number(config, 'RAMP_FRACTION'),
            'lift_per_oscillation': _number(config, 'LIFT_PER_OSCILLATION'),
            'ramp_substeps': _integer(config, 'RAMP_SUBSTEPS'),
            'high_mode_fraction': _number(config, 'HIGH_MODE_FRACTION'),
        }

        experiment = cls(
            geometry=geometry,
            params=params,
            trunc=trunc,
            horizon=horizon,
            dt=dt,
            dt_fraction=dt_fraction,
            scheme=scheme,
            blowup_factor=float(config['BLOWUP_FACTOR']),
            seed=seed,
            initial_state=field_of('INITIAL_STATE'),
            target_state=field_of('TARGET_STATE'),
            random_max_order=_integer(config, 'RANDOM_MAX_ORDER'),
            random_amplitude=_number(config, 'RANDOM_AMPLITUDE', allow_zero=True),
            forcing=field_of('FORCING'),
            control=field_of('CONTROL'),
            snapshot_every=_integer(config, 'SNAPSHOT_EVERY', 0),
            relax_ks=ks,
            relax_directions=_integer(config, 'RELAX_DIRECTIONS'),
            relax_dt=_number(config, 'RELAX_DT'),
            ladder_order=ladder_order,
            preferred_pairs=preferred,
            epsilon=epsilon,
            epsilon_relative=_number(config, 'EPSILON_RELATIVE'),
            schedule=schedule,
            control_samples=_integer(config, 'CONTROL_SAMPLES'),
        )
        logger.debug('Configuration: q=%s, alpha=%g, nu=%g, N=%d, T=%g, seed=%d', config['Q'],
                     params.alpha, params.nu, trunc, horizon, seed)
        return experiment

    def require(self, command: str):
        """Check the settings a command cannot run without.

        Raises:
              ConfigError: A required setting is missing or inconsistent.
        """
        if command == 'relax' and self.relax_ks is None:
            raise ConfigError('The relax command needs RELAX_KS')
        if command == 'control':
            if self.target_state is None:
                raise ConfigError('The control command needs TARGET_STATE')
            try:
                self.pipeline(self.resolve_epsilon(self.initial_field()))
            except ValueError as e:
                raise ConfigError(str(e))

    def integrator(self, **changes) -> IntegratorConfig:
        cfg = IntegratorConfig(self.params, dt=self.dt, dt_fraction=self.dt_fraction, scheme=self.scheme,
                               blowup_factor=self.blowup_factor)
        return replace(cfg, **changes) if changes else cfg

    @property
    def step(self) -> float:
        """Nominal integration step over the horizon."""
        return self.integrator().step(self.horizon)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def initial_field(self, rng: Optional[np.random.Generator] = None) -> SpectralField:
        """INITIAL_STATE, or a random draw when it is absent and ``rng`` is given; zero otherwise."""
        if self.initial_state is not None:
            return self.initial_state
        builder = FieldBuilder(self.geometry, self.trunc)
        if rng is not None:
            builder.random(rng, min(self.random_max_order, self.trunc), self.random_amplitude)
        return builder.finalize()

    def resolve_epsilon(self, u0: SpectralField) -> float:
        """EPSILON, or EPSILON_RELATIVE times the V¹ distance of the transformed end points."""
        if self.epsilon is not None:
            return self.epsilon
        scale = sobolev_norm(helmholtz(self.target_state, self.params), 1)
        if scale == 0.0:
            scale = sobolev_norm(helmholtz(u0, self.params), 1)
        if scale == 0.0:
            raise ConfigError('EPSILON is required when both states vanish')
        return self.epsilon_relative * scale

    def pipeline(self, epsilon: float) -> PipelineConfig:
        return PipelineConfig(T=self.horizon, epsilon=epsilon, trunc=self.trunc, integrator=self.integrator(),
                              **self.schedule)

    def to_dict(self) -> dict:
        """The settings in their JSON form, for run manifests."""
        def field_dict(f):
            return None if f is None else {'modes': f.to_dict()['modes']}

        out = {
            'Q': [self.geometry.q1, self.geometry.q2],
            'ALPHA': self.params.alpha,
            'NU': self.params.nu,
            'TRUNC': self.trunc,
            'HORIZON': self.horizon,
            'DT': self.dt,
            'DT_FRACTION': self.dt_fraction,
            'SCHEME': self.scheme.value,
            'BLOWUP_FACTOR': self.blowup_factor,
            'SEED': self.seed,
            'INITIAL_STATE': field_dict(self.initial_state),
            'TARGET_STATE': field_dict(self.target_state),
            'RANDOM_MAX_ORDER': self.random_max_order,
            'RANDOM_AMPLITUDE': self.random_amplitude,
            'FORCING': field_dict(self.forcing),
            'CONTROL': field_dict(self.control),
            'SNAPSHOT_EVERY': self.snapshot_every,
            'RELAX_KS': list(self.relax_ks) if self.relax_ks else None,
            'RELAX_DIRECTIONS': self.relax_directions,
            'RELAX_DT': self.relax_dt,
            'LADDER_ORDER': self.ladder_order,
            'LADDER_PREFERRED_PAIRS': [{'target': list(t), 'pair': [list(m), list(n)]}
                                       for t, (m, n) in sorted(self.preferred_pairs.items())],
            'EPSILON': self.epsilon,
            'EPSILON_RELATIVE': self.epsilon_relative,
            'CONTROL_SAMPLES': self.control_samples,
        }
        out.update({key.upper(): value for key, value in self.schedule.items()})
        return out
