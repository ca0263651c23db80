"""
Versioned JSON checkpoints for parameter arrays.

Floats are written with Python's shortest round-trip repr, so a save/load
cycle reproduces every parameter bit for bit.
"""

import json
import logging
import os

import numpy as np

from .exceptions import ConfigurationError, ModelNotFoundError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def encode_array(array):
    array = np.asarray(array, dtype=float)
    return {'shape': list(array.shape), 'data': array.ravel().tolist()}


def decode_array(item):
    return np.asarray(item['data'], dtype=float).reshape(item['shape'])


def write_json(path, document):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=1)


def read_json(path):
    if not os.path.exists(path):
        raise ModelNotFoundError('not found: {}'.format(path))
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def write_checkpoint(path, kind, payload):
    """ Write ``payload`` (a JSON-able dict) tagged with its kind and the format version. """
    document = {'format_version': FORMAT_VERSION, 'kind': kind}
    document.update(payload)
    write_json(path, document)
    logger.debug('wrote %s checkpoint %s', kind, path)


def read_checkpoint(path, kind):
    document = read_json(path)
    version = document.get('format_version')
    if version != FORMAT_VERSION:
        raise ConfigurationError('{}: unsupported checkpoint format version {!r}'.format(path, version))
    if document.get('kind') != kind:
        raise ConfigurationError('{}: expected a {} checkpoint, found {!r}'.format(path, kind, document.get('kind')))
    return document
