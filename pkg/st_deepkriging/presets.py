from attr import attrs, attrib

import copy

from .helpers import ElementsManager
from .simulator import SimulationSpec

@attrs
class SimulationPreset(object):
    """
    A named simulation layout. The spec carries every covariance and layout
    parameter; ``scenario`` is the missing-data split used by default when
    the preset drives an evaluation.
    """
    #: A string identifier such as 'competition'.
    identifier = attrib(type=str)
    #: One-line description for ``info presets``.
    description = attrib(type=str)
    spec = attrib(type=SimulationSpec)
    #: Default missing-data scenario (1, 2 or 3).
    scenario = attrib(type=int, default=2)

ALL_PRESETS = [
  SimulationPreset('competition',
                   'stationary field, 100 stations x 50 times on [0, 1]',
                   SimulationSpec(sigma2=1.0, nu=1.5, alpha=0.5, a_s=0.25, a_t=5.0, beta=0.5, nugget_var=0.05,
                                  n_locations=100, n_times=50, time_layout='unit')),
  # time lags are in stamp units here: a_t = 0.02 gives correlation 1/1.2 at a lag of 10
  SimulationPreset('nonstationary',
                   'nonstationary mean, 100 stations x 50 stamps every 10th of 1..500',
                   SimulationSpec(sigma2=1.0, nu=1.5, alpha=0.5, a_s=0.25, a_t=0.02, beta=0.5, nugget_var=0.05,
                                  nonstationary_mean=True, n_locations=100, n_times=50,
                                  time_layout='index', time_span=500.0)),
  SimulationPreset('smoke',
                   'tiny stationary field for quick checks, 16 stations x 12 times',
                   SimulationSpec(n_locations=16, n_times=12, time_layout='unit'),
                   scenario=2),
]

class PresetsManager(ElementsManager):
    DEFAULT_ELEMENTS = copy.copy(ALL_PRESETS)
    ELEMENT_NAME = 'preset'

presets = [preset.identifier for preset in ALL_PRESETS]
