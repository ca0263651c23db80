import json
import os

import pytest

from st_deepkriging.config import RunConfigManager
from st_deepkriging.exceptions import ConfigurationError
from st_deepkriging.presets import PresetsManager, presets


@pytest.fixture
def clean_env(monkeypatch):
    monkeypatch.delenv('STDK_CONFIG', raising=False)
    monkeypatch.delenv('STDK_DATA_DIR', raising=False)


def _write(path, document):
    with open(str(path), 'w', encoding='utf-8') as f:
        json.dump(document, f)
    return str(path)


def test_defaults(clean_env):
    manager = RunConfigManager()
    assert manager.section('network')['taus'] == [0.05, 0.5, 0.95]
    assert manager.train_config().epochs > 0
    assert manager.simulation_spec().n_locations == 100


def test_file_then_flags(clean_env, tmp_path):
    path = _write(tmp_path / 'run.json', {'training': {'epochs': 7, 'seed': 3}, 'simulation': {'nu': 0.5}})
    manager = RunConfigManager(path)
    assert manager.train_config().epochs == 7
    # None means the flag was not given
    config = manager.train_config(epochs=None, seed=9)
    assert config.epochs == 7 and config.seed == 9
    assert manager.simulation_spec().nu == 0.5


def test_config_file_from_the_environment(monkeypatch, tmp_path):
    path = _write(tmp_path / 'run.json', {'evaluation': {'k': 4}})
    monkeypatch.setenv('STDK_CONFIG', path)
    assert RunConfigManager().section('evaluation')['k'] == 4


def test_bad_config_files(clean_env, tmp_path):
    with pytest.raises(ConfigurationError):
        RunConfigManager(str(tmp_path / 'missing.json'))
    with pytest.raises(ConfigurationError):
        RunConfigManager(_write(tmp_path / 'bad.json', {'labels': {}}))
    broken = tmp_path / 'broken.json'
    broken.write_text('{not json', encoding='utf-8')
    with pytest.raises(ConfigurationError):
        RunConfigManager(str(broken))


def test_invalid_values_become_configuration_errors(clean_env, tmp_path):
    manager = RunConfigManager(_write(tmp_path / 'run.json', {'simulation': {'alpha': 2.0}}))
    with pytest.raises(ConfigurationError):
        manager.simulation_spec()
    with pytest.raises(ConfigurationError):
        RunConfigManager().forecast_config(radius=4)


def test_data_dir(monkeypatch):
    monkeypatch.setenv('STDK_DATA_DIR', '/data')
    assert RunConfigManager.data_path('field.csv') == os.path.join('/data', 'field.csv')
    assert RunConfigManager.data_path('/abs/field.csv') == '/abs/field.csv'


def test_manifests(clean_env, tmp_path):
    manager = RunConfigManager()
    artifact = tmp_path / 'pred.csv'
    artifact.write_text('', encoding='utf-8')
    path = manager.write_manifest(str(artifact), 'predict', 5, {'model': 'm'})
    assert path == str(artifact) + '.manifest.json'
    with open(path, encoding='utf-8') as f:
        manifest = json.load(f)
    assert manifest['seed'] == 5 and manifest['model'] == 'm'
    assert set(manifest['config']) == {'simulation', 'embedding', 'network', 'training', 'forecast', 'evaluation'}
    assert manager.write_manifest(str(tmp_path), 'train', 0) == os.path.join(str(tmp_path), 'run_manifest.json')


def test_presets():
    assert presets == ['competition', 'nonstationary', 'smoke']
    manager = PresetsManager()
    assert manager.get('nonstationary').spec.nonstationary_mean
    assert manager.get('competition').spec.n_points == 5000
    with pytest.raises(ConfigurationError):
        manager.get('unknown')


def test_registering_presets():
    from st_deepkriging.presets import SimulationPreset
    from st_deepkriging.simulator import SimulationSpec
    manager = PresetsManager()
    tiny = SimulationPreset('tiny', '4 x 4', SimulationSpec(n_locations=4, n_times=4))
    manager.register(tiny)
    assert manager.get('tiny') is tiny
    manager.register(tiny)
    assert manager.identifiers().count('tiny') == 1
    manager.deregister(tiny)
    assert 'tiny' not in manager.identifiers()
    assert 'tiny' not in PresetsManager().identifiers()
