"""Regularly varying processes on grids: tail measures, tail processes,
max-stable simulation and the diagnostics that check them."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .grid import CadlagPath, GridSpec, TimeChange  # noqa: E402
from .mc import MCEstimate  # noqa: E402
from .tail import (ParetoSampler, RepresenterSampler, SpectralTailFamily,  # noqa: E402
                   TailProcessFamily, build_representer_ZN, compact_boundedness_check,
                   constant_representer, exceedance_e_K, family_from_representer,
                   measure_functional_local, representer_functional, shift, spectral_from_Y,
                   tilt_sample_Y, y_from_spectral)
