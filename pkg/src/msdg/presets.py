"""Shipped interface-flux presets and default model parameters.

Flux presets are plain weight dictionaries (missing weights default to
zero inside ``ModelDescriptor.normalize_flux``).  The names are the ones
the command line prints and the sweep CSV records.
"""

from .errors import InvalidConfigError

FLUX_PRESETS = {
    "wave": {
        "central": {},
        "alternating": {"alpha13": 0.5},
        "alternating-weak": {"alpha13": 0.125},
        "penalized": {"alpha11": 1.0, "alpha33": -1.0},
        "time-flux": {"beta": 1.0},
    },
    "kdv": {
        "central": {},
        "alternating-plus": {"alpha2": 0.5},
        "alternating-minus": {"alpha2": -0.5},
    },
    "bbm": {
        "central": {},
        "alternating-pair": {"alpha1": 0.5},
        "coupled-jumps": {"alpha0": 0.25},
    },
    "ch": {
        "central": {},
        "coupled-jumps": {"alpha0": 3.0},
    },
    "nls": {
        "central": {},
        "alternating-plus": {"a": 0.5},
        "alternating-minus": {"a": -0.5},
    },
    "bbm_kdv": {
        "central": {},
    },
}

# Nonlinear-coefficient choices used when an experiment or sweep needs "a"
# representative instance of each model rather than a table-specific one.
DEFAULT_MODEL_PARAMS = {
    "wave": {"V": "cubic"},
    "kdv": {"eta": 6.0, "eps": 0.7},
    "bbm": {"sigma": 0.8, "Vcubic": 1.0 / 6.0},
    "ch": {},
    "nls": {"alpha": 2.0},
    "bbm_kdv": {"sigma": 0.5, "nu": 0.3, "Vcubic": -1.0 / 6.0},
}


def flux_preset(model_id, name):
    """Weight dictionary of a named preset (a copy, safe to mutate)."""
    try:
        table = FLUX_PRESETS[model_id]
    except KeyError:
        raise InvalidConfigError(
            f"unknown model {model_id!r}; expected one of {sorted(FLUX_PRESETS)}"
        ) from None
    try:
        return dict(table[name])
    except KeyError:
        raise InvalidConfigError(
            f"{model_id}: unknown flux preset {name!r}; "
            f"shipped presets: {sorted(table)}") from None
