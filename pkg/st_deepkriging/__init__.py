__version__ = '0.1.0'

from .exceptions import *

from .dataset import SpaceTimeDataset

from .interpolator import DeepKrigingModel
