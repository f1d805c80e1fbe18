"""Named tolerances and seed defaults shared by every module.

Values are read at call time, so :func:`override_tolerances` (used by the CLI
``--tol-<name>`` flags) takes effect globally.
"""
import os
from contextlib import contextmanager

DEFAULT_TOLERANCES = {
    "sing": 1e-12,  # resolvent: sigma_min < sing * (1 + ||T||) means lambda is in the spectrum
    "root": 1e-10,
    "cluster": 1e-7,
    "remove": 1e-6,
    "quad": 1e-12,
    "clearance": 1e-1,
    "hypothesis": 1e-8,
}
QUAD_START_NODES = 64
QUAD_MAX_NODES = 16384

TOL = dict(DEFAULT_TOLERANCES)


def tol(name):
    return TOL[name]


def override_tolerances(**values):
    for key, val in values.items():
        if key not in TOL:
            raise KeyError(f"unknown tolerance {key!r}; known: {sorted(TOL)}")
        TOL[key] = float(val)


def reset_tolerances():
    TOL.clear()
    TOL.update(DEFAULT_TOLERANCES)


@contextmanager
def tolerances(**values):
    saved = dict(TOL)
    try:
        override_tolerances(**values)
        yield TOL
    finally:
        TOL.clear()
        TOL.update(saved)


def default_seed():
    raw = os.environ.get("RESOLVENT_LAB_SEED")
    return int(raw) if raw not in (None, "") else 42
