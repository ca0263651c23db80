"""
Run configuration manager
Loads the JSON run configuration, applies command-line overrides and writes
the provenance manifests that accompany every artifact
"""

import copy
import json
import logging
import os
import time
from typing import Dict, Optional

from . import __version__
from .exceptions import ConfigurationError
from .forecaster import ForecastConfig
from .interpolator import DEFAULT_SPATIAL_COUNTS, DEFAULT_TEMPORAL_COUNTS, DEFAULT_ARCH
from .nn_core import TrainConfig
from .simulator import SimulationSpec

logger = logging.getLogger(__name__)

CONFIG_ENV = 'STDK_CONFIG'
DATA_DIR_ENV = 'STDK_DATA_DIR'

DEFAULTS = {
    'simulation': dict(SimulationSpec().to_dict(), preset=None),
    'embedding': {
        'spatial_counts': list(DEFAULT_SPATIAL_COUNTS),
        'temporal_counts': list(DEFAULT_TEMPORAL_COUNTS),
    },
    'network': {
        'arch': list(DEFAULT_ARCH),
        'taus': [0.05, 0.5, 0.95],
        'lambda': None,
        'point_loss': 'check',
    },
    'training': TrainConfig().to_dict(),
    'forecast': dict(ForecastConfig().to_dict(), variant='qlstm', horizon=5, taus=[0.05, 0.5, 0.95]),
    'evaluation': {
        'alpha': 0.1,
        'k': 10,
        'scenario': 2,
        'holdout_fraction': 0.1,
        'idw': {'power': 2.0, 'k_neighbors': 8, 'time_scale': 1.0},
    },
}


class RunConfigManager:
    """Resolves run configuration: built-in defaults < JSON file < command-line flags"""

    def __init__(self, config_file: Optional[str] = None):
        self.config_file = config_file or os.getenv(CONFIG_ENV)
        self.config = self._load_config()

    def _load_config(self) -> Dict:
        """Load configuration from JSON file, falling back to the defaults"""
        config = copy.deepcopy(DEFAULTS)
        if not self.config_file:
            return config
        if not os.path.exists(self.config_file):
            raise ConfigurationError('config file not found: {}'.format(self.config_file))

        with open(self.config_file, 'r', encoding='utf-8') as f:
            try:
                loaded = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigurationError('{} is not valid JSON: {}'.format(self.config_file, e))

        for section, values in loaded.items():
            if section not in DEFAULTS:
                raise ConfigurationError('unknown config section {!r} in {}'.format(section, self.config_file))
            if not isinstance(values, dict):
                raise ConfigurationError('config section {!r} must be an object'.format(section))
            config[section].update(values)
        logger.debug('loaded run configuration from %s', self.config_file)
        return config

    def section(self, name: str) -> Dict:
        """Get a copy of one configuration section"""
        if name not in self.config:
            raise ConfigurationError('unknown config section {!r}'.format(name))
        return copy.deepcopy(self.config[name])

    def override(self, name: str, **values):
        """Apply command-line values to a section; None means 'not given'"""
        section = self.config[name]
        for key, value in values.items():
            if value is not None:
                section[key] = value

    def resolved(self) -> Dict:
        return copy.deepcopy(self.config)

    def train_config(self, **overrides) -> TrainConfig:
        self.override('training', **overrides)
        return self._build(TrainConfig, self.section('training'), 'training')

    def forecast_config(self, **overrides) -> ForecastConfig:
        self.override('forecast', **overrides)
        values = self.section('forecast')
        for key in ('variant', 'horizon', 'taus'):
            values.pop(key, None)
        return self._build(ForecastConfig, values, 'forecast')

    def simulation_spec(self, **overrides) -> SimulationSpec:
        self.override('simulation', **overrides)
        values = self.section('simulation')
        values.pop('preset', None)
        return self._build(SimulationSpec.from_dict, values, 'simulation')

    @staticmethod
    def _build(factory, values, name):
        try:
            if isinstance(factory, type):
                return factory(**values)
            return factory(values)
        except (TypeError, ValueError) as e:
            raise ConfigurationError('invalid {} configuration: {}'.format(name, e))

    @staticmethod
    def data_path(path: str) -> str:
        """Resolve a relative path against STDK_DATA_DIR when it is set"""
        base = os.getenv(DATA_DIR_ENV)
        if base and path and not os.path.isabs(path):
            return os.path.join(base, path)
        return path

    def write_manifest(self, artifact: str, command: str, seed: Optional[int], extra: Optional[Dict] = None) -> str:
        """
        Write the resolved configuration and seed next to an artifact:
        ``<dir>/run_manifest.json`` for directories, ``<file>.manifest.json`` for files
        (``seed`` is None for deterministic commands)
        """
        if os.path.isdir(artifact):
            path = os.path.join(artifact, 'run_manifest.json')
        else:
            path = artifact + '.manifest.json'
        document = {
            'command': command,
            'seed': seed,
            'version': __version__,
            'created': time.strftime('%Y-%m-%dT%H:%M:%S'),
            'config_file': self.config_file,
            'config': self.resolved(),
        }
        if extra:
            document.update(extra)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(document, f, indent=2)
        logger.debug('wrote manifest %s', path)
        return path
