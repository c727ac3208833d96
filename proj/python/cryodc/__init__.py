"""Memristor-based cryogenic DC source and double-quantum-dot simulator."""

import json as _json

from . import _core
from ._core import (
    Error,
    __version__,
    boundary_resistance,
    charging_energies,
    ideal_resolution as _ideal_resolution,
    max_power as _max_power,
    occupation as _occupation,
    relax_resistance,
    switching_rate,
    voltage_range as _voltage_range,
)


def _dump(value):
    return "" if value is None else _json.dumps(value)


def params_4k():
    return _json.loads(_core.params_4k())


def default_config():
    return _json.loads(_core.default_config())


def voltage_range(spec=None, params=None):
    return _voltage_range(_dump(spec), _dump(params))


def ideal_resolution(spec=None, params=None):
    return _ideal_resolution(_dump(spec), _dump(params))


def max_power(spec=None, params=None):
    return _max_power(_dump(spec), _dump(params))


def sources_within_budget(budget, overhead, spec=None, params=None):
    return _core.sources_within_budget(budget, overhead, _dump(spec), _dump(params))


def enumerate_outputs(n_m, n_s, params=None):
    """Sorted outputs of one source and their gap statistics."""
    voltages, stats = _core.enumerate_outputs(n_m, n_s, _dump(params))
    return voltages, _json.loads(stats)


def occupation(v_g1, v_g2, dqd=None):
    return _occupation(v_g1, v_g2, _dump(dqd))


def run_scan(config, out):
    """Runs a scan, writes its files into `out` and returns the manifest."""
    return _json.loads(_core.run_scan(_dump(config), str(out)))


def run_experiment(name, config, out):
    return _json.loads(_core.run_experiment(name, _dump(config), str(out)))


def synthesize_trace(path, protocol=None, params=None, seed=1):
    _core.synthesize_trace(str(path), _dump(protocol), _dump(params), seed)


def fit_params(trace, protocol=None):
    return _json.loads(_core.fit_params(str(trace), _dump(protocol)))
