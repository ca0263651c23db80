#!/usr/bin/env python

# Python standard library

import json
import logging
import os
from contextlib import contextmanager

# external dependencies
import click
import numpy as np
import pandas as pd

# imports from this very package
from st_deepkriging.exceptions import DeepKrigingError, ModelNotFoundError, SchemaError
from st_deepkriging.presets import presets


logger = logging.getLogger('st_deepkriging')

VARIANTS = ('qlstm', 'qconvlstm')


def parse_arch(text):
    """ ``'100x8,50x4,1'`` -> [100] * 8 + [50] * 4 + [1]. """
    sizes = []
    for item in str(text).split(','):
        item = item.strip()
        if not item:
            continue
        width, _, repeat = item.partition('x')
        sizes.extend([int(width)] * (int(repeat) if repeat else 1))
    if not sizes:
        raise click.BadParameter('empty architecture')
    return sizes


def parse_ints(text):
    return [int(x) for x in str(text).split(',') if x.strip()]


@contextmanager
def command_scope(ctx, name):
    """ Telemetry around a command; library errors become a clean nonzero exit. """
    from st_deepkriging.telemetry import get_telemetry
    try:
        with get_telemetry().measure_command(name):
            yield
    except (DeepKrigingError, ValueError) as e:
        if isinstance(e, SchemaError) and e.rows:
            raise click.ClickException('{} (column {}, rows {})'.format(e, e.column, e.rows[:20]))
        raise click.ClickException(str(e))


@click.group()
@click.option('-c', '--config', 'config_file', metavar='CONFIG_JSON', envvar='STDK_CONFIG',
              help='JSON run configuration; command-line flags override its values.')
@click.option('--debug', is_flag=True)
@click.version_option(package_name='st_deepkriging')
@click.pass_context
def cli(ctx, *args, **kwargs):
    """ Command line interface for space-time DeepKriging. """

    debug = kwargs.get('debug')
    logging.basicConfig(level='DEBUG' if debug else 'INFO')

    from st_deepkriging.config import RunConfigManager
    from st_deepkriging.telemetry import init_telemetry
    init_telemetry()
    try:
        ctx.meta['CONFIG'] = RunConfigManager(kwargs.get('config_file'))
    except DeepKrigingError as e:
        raise click.ClickException(str(e))


@cli.command(short_help='Simulate a space-time field')
@click.option('-p', '--preset', type=click.Choice(presets), help='Named layout; run `stdk info presets` for the list.')
@click.option('--spec', 'spec_file', type=click.Path(dir_okay=False), help='JSON file with simulation fields.')
@click.option('-o', '--out', required=True, help='Dataset CSV to write.')
@click.option('--n-locations', type=int)
@click.option('--n-times', type=int)
@click.option('--cap', type=int, help='Upper bound on stations x times for exact sampling.')
@click.option('--seed', type=int)
@click.option('--split', 'with_split', is_flag=True,
              help='Also write OUT.train.csv and OUT.test.csv for a missing-data scenario.')
@click.option('--scenario', type=click.IntRange(1, 3),
              help="Scenario for --split (default: the preset's, else the configured one).")
@click.pass_context
def simulate(ctx, preset, spec_file, out, n_locations, n_times, cap, seed, with_split, scenario):
    """ Draw a field and write it in the canonical dataset schema, with the spec JSON alongside. """
    from st_deepkriging.presets import PresetsManager
    from st_deepkriging.simulator import simulate as draw
    manager = ctx.meta['CONFIG']
    with command_scope(ctx, 'simulate'):
        preset = preset or manager.section('simulation').get('preset')
        if preset:
            chosen = PresetsManager().get(preset)
            manager.override('simulation', **chosen.spec.to_dict())
            manager.override('evaluation', scenario=chosen.scenario)
        if spec_file:
            with open(manager.data_path(spec_file), 'r', encoding='utf-8') as f:
                manager.override('simulation', **json.load(f))
        spec = manager.simulation_spec(n_locations=n_locations, n_times=n_times, cap=cap, seed=seed)
        out = manager.data_path(out)
        dataset = draw(spec)
        dataset.to_csv(out)
        with open(out + '.spec.json', 'w', encoding='utf-8') as f:
            json.dump(spec.to_dict(), f, indent=2)
        manager.write_manifest(out, 'simulate', spec.seed, {'preset': preset})
        if with_split:
            manager.override('evaluation', scenario=scenario)
            settings = manager.section('evaluation')
            _write_split(manager, dataset, settings['scenario'], settings['holdout_fraction'], spec.seed,
                         os.path.splitext(out)[0], out)


@cli.command(short_help='Split a dataset for a missing-data scenario')
@click.argument('data')
@click.option('--scenario', type=click.IntRange(1, 3),
              help='1: whole stations, 2: random cells, 3: the last 10 time stamps.')
@click.option('--holdout-fraction', type=float, help='Share held out in scenarios 1 and 2.')
@click.option('--seed', type=int)
@click.option('--column-map')
@click.option('-o', '--out', required=True, help='Prefix for PREFIX.train.csv, PREFIX.test.csv (and PREFIX.truth.csv).')
@click.pass_context
def split(ctx, data, scenario, holdout_fraction, seed, column_map, out):
    """
    Hold out part of DATA. Scenario 3 also writes PREFIX.truth.csv keyed
    location_id,horizon,z so `forecast` output can be scored with `evaluate`.
    """
    from st_deepkriging.dataset import SpaceTimeDataset
    manager = ctx.meta['CONFIG']
    with command_scope(ctx, 'split'):
        manager.override('evaluation', scenario=scenario, holdout_fraction=holdout_fraction)
        settings = manager.section('evaluation')
        seed = seed if seed is not None else manager.train_config().seed
        dataset = SpaceTimeDataset.read_csv(manager.data_path(data), column_map)
        paths = _write_split(manager, dataset, settings['scenario'], settings['holdout_fraction'], seed,
                             manager.data_path(out), data)
        for path in paths:
            print(path)


def _write_split(manager, dataset, scenario, holdout_fraction, seed, prefix, source):
    """ Write PREFIX.train.csv and PREFIX.test.csv, plus PREFIX.truth.csv keyed for forecasts in scenario 3. """
    from st_deepkriging.simulator import forecast_truth, make_scenario
    train, test = make_scenario(dataset, scenario, holdout_fraction, seed)
    extra = {'data': source, 'scenario': scenario, 'holdout_fraction': holdout_fraction}
    paths = []
    for part, name in ((train, 'train'), (test, 'test')):
        path = '{}.{}.csv'.format(prefix, name)
        part.to_csv(path)
        manager.write_manifest(path, 'split', seed, dict(extra, part=name))
        paths.append(path)
    if scenario == 3:
        path = prefix + '.truth.csv'
        forecast_truth(train, test).to_csv(path, index=False, encoding='utf-8')
        manager.write_manifest(path, 'split', seed, dict(extra, part='truth'))
        paths.append(path)
    return paths


def _training_options(func):
    for option in reversed([
        click.option('--epochs', type=int),
        click.option('--batch-size', type=int),
        click.option('--lr', 'learning_rate', type=float),
        click.option('--patience', type=int),
        click.option('--seed', type=int, help='Seed for initialisation, shuffling and splits.'),
    ]):
        func = option(func)
    return func


@cli.command(name='train-interp', short_help='Train the interpolator')
@click.argument('data')
@click.option('-o', '--out', required=True, help='Model directory to write.')
@click.option('-t', '--tau', help='Comma list of quantile levels, e.g. 0.05,0.5,0.95.')
@click.option('--arch', help='Layer sizes such as 100x8,50x4,1.')
@click.option('--spatial-counts', help='Anchor counts per spatial resolution, e.g. 25,81,144.')
@click.option('--temporal-counts', help='Anchor counts per temporal resolution, e.g. 10,15,45.')
@click.option('--point-loss', type=click.Choice(('check', 'mse')))
@click.option('--lambda', 'lam', type=float, help='Width scale of the quantile transform (default: data range / 2).')
@click.option('--column-map', help='Map external columns onto the schema, e.g. s1=lon,s2=lat,t=time,z=pm25.')
@_training_options
@click.pass_context
def train_interp(ctx, data, out, tau, arch, spatial_counts, temporal_counts, point_loss, lam, column_map, **train):
    """ Fit the median and quantile networks on DATA and save them to a model directory. """
    from st_deepkriging import interpolator
    from st_deepkriging.dataset import SpaceTimeDataset
    from st_deepkriging.quantile import parse_taus
    manager = ctx.meta['CONFIG']
    with command_scope(ctx, 'train-interp'):
        manager.override('network', taus=parse_taus(tau) if tau else None, arch=parse_arch(arch) if arch else None,
                         point_loss=point_loss, **{'lambda': lam})
        manager.override('embedding', spatial_counts=parse_ints(spatial_counts) if spatial_counts else None,
                         temporal_counts=parse_ints(temporal_counts) if temporal_counts else None)
        config = manager.train_config(**train)
        network = manager.section('network')
        embedding = manager.section('embedding')
        dataset = SpaceTimeDataset.read_csv(manager.data_path(data), column_map)
        model = interpolator.fit(dataset, network['arch'], config, network['taus'], embedding['spatial_counts'],
                                 embedding['temporal_counts'], network['lambda'], network['point_loss'])
        out = manager.data_path(out)
        model.save(out)
        manager.write_manifest(out, 'train-interp', config.seed, {'data': data, 'final_risk': {
            repr(k): v for k, v in model.final_risk.items()}})


@cli.command(short_help='Predict with a trained interpolator')
@click.option('-m', '--model', 'model_dir', required=True, help='Interpolator model directory.')
@click.option('-q', '--query', help='CSV with s1,s2,t (and covariates) columns.')
@click.option('--grid', type=int, help='Predict on an N x N lattice over the training domain instead.')
@click.option('--time', 'grid_time', type=float, help='Time stamp for --grid.')
@click.option('-t', '--tau', help='Comma list of levels (default: every trained level).')
@click.option('--alpha', type=float, default=0.1, show_default=True, help='Interval level for --grid.')
@click.option('--column-map')
@click.option('-o', '--out', required=True, help='Predictions CSV to write.')
@click.pass_context
def predict(ctx, model_dir, query, grid, grid_time, tau, alpha, column_map, out):
    """ Write predictions as rows s1,s2,t,tau,value (or a grid table with --grid). """
    from st_deepkriging.dataset import SpaceTimeDataset
    from st_deepkriging.interpolator import DeepKrigingModel, predict_grid
    from st_deepkriging.quantile import parse_taus
    manager = ctx.meta['CONFIG']
    with command_scope(ctx, 'predict'):
        model = DeepKrigingModel.load(manager.data_path(model_dir))
        out = manager.data_path(out)
        if grid:
            if grid_time is None:
                raise click.UsageError('--grid needs --time')
            predict_grid(model, grid, grid_time, alpha).to_csv(out, index=False, encoding='utf-8')
        else:
            if not query:
                raise click.UsageError('give either --query or --grid')
            points = SpaceTimeDataset.read_csv(manager.data_path(query), column_map, require_z=False)
            if points.n_covariates != model.embedding.n_covariates:
                raise SchemaError('query has {} covariate columns, model expects {}'.format(
                    points.n_covariates, model.embedding.n_covariates), column=','.join(points.covariate_names or []))
            taus = parse_taus(tau) if tau else model.taus
            values = np.stack([model.predict_many(points.s, points.t, level, points.covariates) for level in taus])
            m = len(taus)
            frame = pd.DataFrame({'s1': np.repeat(points.s[:, 0], m), 's2': np.repeat(points.s[:, 1], m),
                                  't': np.repeat(points.t, m), 'tau': np.tile(taus, len(points)),
                                  'value': values.T.ravel()})
            frame.to_csv(out, index=False, encoding='utf-8')
        manager.write_manifest(out, 'predict', model.seed, {'model': model_dir})


def _read_locations(path, dataset, limit):
    """ (location_id, s1, s2) rows from a CSV, or the stations of the dataset. """
    if path:
        if not os.path.exists(path):
            raise ModelNotFoundError('locations file not found: {}'.format(path))
        frame = pd.read_csv(path, encoding='utf-8')
        for column in ('location_id', 's1', 's2'):
            if column not in frame.columns:
                raise SchemaError('locations file lacks column {!r}'.format(column), column=column)
        rows = [(str(r.location_id), float(r.s1), float(r.s2)) for r in frame.itertuples(index=False)]
    else:
        coords, _ = dataset.stations()
        rows = [(str(i), float(c[0]), float(c[1])) for i, c in enumerate(coords)]
    return rows[:limit] if limit else rows


def _train_location(job):
    """ Worker for one location; module level so it can run in a process pool. """
    from st_deepkriging.convforecaster import NeighborhoodSeries, fit_qconvlstm
    from st_deepkriging.forecaster import ForecastConfig, fit_qlstm
    from st_deepkriging.nn_core import TrainConfig
    config = ForecastConfig.from_dict(job['config'])
    train = TrainConfig.from_dict(job['train'])
    if job['variant'] == 'qlstm':
        model = fit_qlstm(job['series'], job['taus'], config, train, job['lambda'])
    else:
        model = fit_qconvlstm(NeighborhoodSeries(**job['neigh']), job['taus'], config, train, job['lambda'])
    model.save(os.path.join(job['out'], job['location_id']))
    return job['location_id'], model.final_risk


@cli.command(name='train-forecast', short_help='Train per-location forecasters')
@click.option('-m', '--interp', 'interp_dir', required=True, help='Interpolator model directory.')
@click.option('-d', '--data', required=True, help='Dataset CSV; its time stamps form the training series.')
@click.option('--locations', help='CSV with location_id,s1,s2 (default: every station in --data).')
@click.option('--limit', type=int, help='Only the first N locations.')
@click.option('--variant', type=click.Choice(VARIANTS))
@click.option('-t', '--tau')
@click.option('--window', type=int)
@click.option('--layers', 'n_layers', type=int)
@click.option('--hidden', type=int)
@click.option('--filters', type=int)
@click.option('--radius', type=int, help='Neighbourhood side r for qconvlstm (odd).')
@click.option('--spacing', type=float, help='Lattice spacing (default: median station spacing).')
@click.option('--jobs', type=int, default=1, show_default=True, help='Worker processes.')
@click.option('--column-map')
@click.option('-o', '--out', required=True, help='Directory receiving one model per location.')
@_training_options
@click.pass_context
def train_forecast(ctx, interp_dir, data, locations, limit, variant, tau, window, n_layers, hidden, filters, radius,
                   spacing, jobs, column_map, out, **train):
    """ Train a QLSTM or QConvLSTM on the interpolated series of every location. """
    from st_deepkriging.convforecaster import grid_neighborhood
    from st_deepkriging.dataset import SpaceTimeDataset, median_station_spacing
    from st_deepkriging.forecaster import map_locations
    from st_deepkriging.interpolator import DeepKrigingModel
    from st_deepkriging.quantile import parse_taus
    manager = ctx.meta['CONFIG']
    with command_scope(ctx, 'train-forecast'):
        manager.override('forecast', variant=variant, taus=parse_taus(tau) if tau else None)
        config = manager.forecast_config(window=window, n_layers=n_layers, hidden=hidden, filters=filters,
                                         radius=radius, spacing=spacing)
        settings = manager.section('forecast')
        train_config = manager.train_config(**train)
        interp = DeepKrigingModel.load(manager.data_path(interp_dir))
        dataset = SpaceTimeDataset.read_csv(manager.data_path(data), column_map)
        times = dataset.times()
        delta = config.spacing
        if settings['variant'] == 'qconvlstm' and delta is None:
            delta = median_station_spacing(dataset)
        out = manager.data_path(out)
        os.makedirs(out, exist_ok=True)
        rows = _read_locations(manager.data_path(locations) if locations else None, dataset, limit)
        jobs_list = []
        for location_id, s1, s2 in rows:
            job = {'variant': settings['variant'], 'location_id': location_id, 'taus': settings['taus'],
                   'config': config.to_dict(), 'train': train_config.to_dict(), 'lambda': None, 'out': out}
            if settings['variant'] == 'qlstm':
                job['series'] = interp.interpolate_series((s1, s2), times)
            else:
                neigh = grid_neighborhood(interp, (s1, s2), times, config.radius, delta)
                job['neigh'] = {'frames': neigh.frames, 'times': neigh.times, 'center': neigh.center,
                                'spacing': neigh.spacing}
            jobs_list.append(job)
        results = map_locations(_train_location, jobs_list, jobs)
        pd.DataFrame(rows, columns=['location_id', 's1', 's2']).to_csv(
            os.path.join(out, 'locations.csv'), index=False, encoding='utf-8')
        with open(os.path.join(out, 'index.json'), 'w', encoding='utf-8') as f:
            json.dump({'variant': settings['variant'], 'interp': os.path.abspath(manager.data_path(interp_dir)),
                       'times': times.tolist(), 'radius': config.radius, 'spacing': delta,
                       'seed': train_config.seed}, f, indent=2)
        for location_id, risk in results:
            logger.info('location %s: final risk %s', location_id,
                        ', '.join('tau={} {:.4g}'.format(k, v) for k, v in sorted(risk.items())))
        manager.write_manifest(out, 'train-forecast', train_config.seed, {'interp': interp_dir, 'data': data})


@cli.command(short_help='Forecast with trained per-location models')
@click.option('-m', '--models', 'models_dir', required=True, help='Directory written by train-forecast.')
@click.option('-u', '--horizon', type=int)
@click.option('--future-times', help='Comma list of upcoming time stamps to re-grid frames at (qconvlstm).')
@click.option('--dump-frames', type=click.Path(file_okay=False), help='Write the neighbourhood frames (qconvlstm).')
@click.option('-o', '--out', required=True, help='Forecast CSV to write (location_id,horizon,tau,value).')
@click.pass_context
def forecast(ctx, models_dir, horizon, future_times, dump_frames, out):
    """ Recursive multi-step forecasts for every trained location. """
    from st_deepkriging.convforecaster import QConvLstmModel, grid_neighborhood
    from st_deepkriging.forecaster import QlstmModel, forecast_frame
    from st_deepkriging.interpolator import DeepKrigingModel
    manager = ctx.meta['CONFIG']
    with command_scope(ctx, 'forecast'):
        manager.override('forecast', horizon=horizon)
        horizon = manager.section('forecast')['horizon']
        models_dir = manager.data_path(models_dir)
        index_path = os.path.join(models_dir, 'index.json')
        if not os.path.exists(index_path):
            raise ModelNotFoundError('no forecaster index in {}'.format(models_dir))
        with open(index_path, 'r', encoding='utf-8') as f:
            index = json.load(f)
        interp = DeepKrigingModel.load(index['interp'])
        times = np.asarray(index['times'])
        future = np.asarray([float(x) for x in future_times.split(',')]) if future_times else None
        locations = pd.read_csv(os.path.join(models_dir, 'locations.csv'), dtype={'location_id': str})
        parts = []
        seed = index.get('seed')
        for row in locations.itertuples(index=False):
            model_dir = os.path.join(models_dir, row.location_id)
            s0 = (float(row.s1), float(row.s2))
            if index['variant'] == 'qlstm':
                model = QlstmModel.load(model_dir)
                result = model.forecast(interp.interpolate_series(s0, times), horizon)
            else:
                model = QConvLstmModel.load(model_dir)
                neigh = grid_neighborhood(interp, s0, times, index['radius'], index['spacing'])
                future_frames = None
                if future is not None:
                    future_frames = grid_neighborhood(interp, s0, future, index['radius'], index['spacing']).frames
                if dump_frames:
                    neigh.dump_frames(os.path.join(dump_frames, row.location_id))
                result = model.forecast(neigh, horizon, future_frames)
            if seed is None:
                seed = model.train_config.seed
            parts.append(forecast_frame(row.location_id, result))
        out = manager.data_path(out)
        pd.concat(parts, ignore_index=True).to_csv(out, index=False, encoding='utf-8')
        manager.write_manifest(out, 'forecast', seed, {'models': models_dir, 'horizon': horizon})


@cli.command(short_help='Score predictions against the truth')
@click.argument('predictions')
@click.argument('truth')
@click.option('--alpha', type=float, help='Interval level: scores the alpha/2 and 1 - alpha/2 rows.')
@click.option('--method', default='deepkriging', show_default=True)
@click.option('-o', '--out', help='EvalReport JSON to write.')
@click.option('--csv', 'csv_out', help='One-row EvalReport CSV to write.')
@click.pass_context
def evaluate(ctx, predictions, truth, alpha, method, out, csv_out):
    """
    Compare PREDICTIONS (s1,s2,t,tau,value or location_id,horizon,tau,value)
    with TRUTH (the same keys plus z).
    """
    from st_deepkriging.evaluation import report_from_frames
    from st_deepkriging.output_helpers import textual_report_description
    manager = ctx.meta['CONFIG']
    with command_scope(ctx, 'evaluate'):
        manager.override('evaluation', alpha=alpha)
        alpha = manager.section('evaluation')['alpha']
        frames = []
        for path in (predictions, truth):
            path = manager.data_path(path)
            if not os.path.exists(path):
                raise ModelNotFoundError('file not found: {}'.format(path))
            frames.append(pd.read_csv(path, encoding='utf-8'))
        report = report_from_frames(frames[0], frames[1], alpha, method)
        print(textual_report_description([report]))
        sources = {'predictions': predictions, 'truth': truth}
        if out:
            report.to_json(manager.data_path(out))
            manager.write_manifest(manager.data_path(out), 'evaluate', None, sources)
        if csv_out:
            report.to_csv(manager.data_path(csv_out))
            manager.write_manifest(manager.data_path(csv_out), 'evaluate', None, sources)


@cli.command(short_help='k-fold comparison against the IDW baseline')
@click.argument('data')
@click.option('-k', '--folds', 'k', type=int)
@click.option('--alpha', type=float)
@click.option('--arch')
@click.option('--column-map')
@click.option('-o', '--out', help='JSON file with one EvalReport per method.')
@_training_options
@click.pass_context
def crossval(ctx, data, k, alpha, arch, column_map, out, **train):
    """ Cross-validate the interpolator on DATA and report MSPE per method. """
    from st_deepkriging.dataset import SpaceTimeDataset
    from st_deepkriging.evaluation import cross_validate
    from st_deepkriging.output_helpers import log_fold_reports, textual_report_description
    from st_deepkriging.quantile import interval_levels
    manager = ctx.meta['CONFIG']
    with command_scope(ctx, 'crossval'):
        manager.override('evaluation', k=k, alpha=alpha)
        manager.override('network', arch=parse_arch(arch) if arch else None)
        settings = manager.section('evaluation')
        network = manager.section('network')
        embedding = manager.section('embedding')
        config = manager.train_config(**train)
        lo, hi = interval_levels(settings['alpha'])
        fit_kwargs = {'arch': network['arch'], 'train': config, 'taus': sorted({lo, 0.5, hi}),
                      'spatial_counts': embedding['spatial_counts'], 'temporal_counts': embedding['temporal_counts'],
                      'lam': network['lambda'], 'point_loss': network['point_loss']}
        dataset = SpaceTimeDataset.read_csv(manager.data_path(data), column_map)
        reports = cross_validate(dataset, settings['k'], config.seed, settings['alpha'], fit_kwargs, settings['idw'])
        log_fold_reports(reports['deepkriging'])
        print(textual_report_description(reports.values()))
        if out:
            out = manager.data_path(out)
            with open(out, 'w', encoding='utf-8') as f:
                json.dump({name: r.to_dict() for name, r in reports.items()}, f, indent=2)
            manager.write_manifest(out, 'crossval', config.seed, {'data': data})


@cli.group()
@click.pass_context
def info(ctx, *args, **kwargs):
    """ list presets, environment etc. """

@info.command(name='presets')
@click.pass_context
def presets_cmd(ctx, *args, **kwargs):
    """
    List the choices for simulate --preset
    """
    from st_deepkriging.output_helpers import textual_preset_description
    from st_deepkriging.presets import PresetsManager
    print(textual_preset_description(PresetsManager().iter_elements()))

@info.command()
@click.pass_context
def env(ctx, *args, **kwargs):
    """
    print debug info about running environment
    """
    import sys, platform, shutil
    from importlib import metadata
    print("\n##################\n")
    print("Information about the running environment of st_deepkriging.")
    print("(Please provide this information when reporting any issue.)\n")
    print("About the computer:")
    for attr in ('platform', 'processor', 'release', 'system', 'machine', 'architecture'):
        print('  * '+attr.title()+':', getattr(platform, attr)())
    print("About the installed Python version:")
    py_version = str(sys.version).replace('\n', ' ')
    print("  *", py_version)
    print("About the st_deepkriging package:")
    try:
        print("  * package version: ", metadata.version('st_deepkriging'))
    except metadata.PackageNotFoundError:
        print("  * package version:  not installed")
    print("  * stdk CLI path:", shutil.which('stdk') or 'unknown')
    print("About the configuration:")
    for var in ('STDK_CONFIG', 'STDK_DATA_DIR', 'OTEL_ENABLED', 'OTEL_EXPORTER_OTLP_ENDPOINT'):
        print("  * {}: {}".format(var, os.getenv(var, '(unset)')))
    print("About the requirements of st_deepkriging:")
    fmt = "  {req:22s} | {ins_vers:17s}"
    print(fmt.format(req='requirement', ins_vers='installed version'))
    print(fmt.format(req='-' * 22, ins_vers='-'*17))
    for req in ('numpy', 'scipy', 'pandas', 'scikit-learn', 'click', 'attrs', 'opentelemetry-sdk'):
        try:
            version = metadata.version(req)
        except metadata.PackageNotFoundError:
            version = 'missing'
        print(fmt.format(req=req, ins_vers=version))
    print("\n##################\n")

if __name__ == '__main__':
    cli()
