"""
Named experiment presets. Each JSON file fixes the protocol of one denoising experiment: the noise level σ, the
exponent q, the asymptotic weight α^∞ and the cut-off M.
"""

from functools import cache
from importlib import resources

from ..util import TVPhiConfigError

PRESET_DIR = resources.files(__package__ or __name__)

PROTOCOL_KEYS = frozenset({'name', 'sigma', 'q', 'alpha_infty', 'M'})


@cache
def load_presets():
    """JSON text of every preset keyed by file stem, in name order."""
    return {f.stem: f.read_text() for f in sorted(PRESET_DIR.glob('*.json'))}


@cache
def get_preset_list():
    return list(load_presets())


def get_preset(name):
    """JSON text of one preset.

    Raises:
        TVPhiConfigError: No preset of that name
    """
    presets = load_presets()
    if name not in presets:
        raise TVPhiConfigError(f'Unrecognized preset {name}. Please select from one of {get_preset_list()}')
    return presets[name]
