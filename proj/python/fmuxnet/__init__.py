"""Python front end for the fmuxnet native core.

Graphs, schedules, tree lists and experiment configs are plain dicts in the
same JSON layout the command-line tool reads.
"""

import json as _json

from . import _core
from ._core import FmuxError, Function

__all__ = ["FmuxError", "Function", "analyze", "simulate", "sweep", "verify", "detect_stability"]


def _dump(doc):
    return None if doc is None else _json.dumps(doc)


def analyze(graph, schedules=None, trees=None, function="parity", k=2, alphabet_size=16,
            rate_units="packets"):
    return _json.loads(_core.analyze(_dump(graph), _dump(schedules), _dump(trees), function, k,
                                     alphabet_size, rate_units))


def simulate(config, lam, seed, base_dir=""):
    """Returns (summary dict, CSV text) for one (lambda, seed) point."""
    summary, csv = _core.simulate(_json.dumps(config), lam, seed, base_dir)
    return _json.loads(summary), csv


def sweep(config, base_dir=""):
    return _json.loads(_core.sweep(_json.dumps(config), base_dir))


def verify(suite="all", seed=1):
    return _json.loads(_core.verify(suite, seed))


def detect_stability(times, totals, lam, node_count, window_samples=100, cap_factor=50.0):
    return _core.detect_stability(list(times), list(totals), lam, node_count, window_samples,
                                  cap_factor)
