"""Multi-core AIMC system simulator.

Experiments are plain dicts with the same keys as sweep-file entries; reports
come back as dicts in the same layout the CLI writes.
"""

import json

from . import _core
from ._core import (
    ConfigError,
    DeadlockError,
    ModelError,
    TraceParseError,
    UsageError,
    decode,
    encode,
    mvm,
    pack4,
    quantize,
    saturate_acc,
    unpack4,
)

__all__ = [
    "ConfigError",
    "DeadlockError",
    "ModelError",
    "TraceParseError",
    "UsageError",
    "decode",
    "encode",
    "mvm",
    "pack4",
    "quantize",
    "replay",
    "run",
    "saturate_acc",
    "trace",
    "unpack4",
    "validate",
]


def run(spec=None, **kwargs):
    """Runs one experiment and returns its report."""
    spec = dict(spec or {}, **kwargs)
    return json.loads(_core.run_json(json.dumps(spec)))


def trace(spec=None, **kwargs):
    """Program trace text of the workload an experiment would simulate."""
    spec = dict(spec or {}, **kwargs)
    return _core.trace(json.dumps(spec))


def replay(trace_text, config=None):
    """Simulates a program trace and returns the run statistics."""
    return json.loads(_core.replay_json(trace_text, json.dumps(config or {})))


def validate(what, seed=1):
    """Runs a built-in check suite; returns a list of check dicts."""
    return [
        {"name": n, "expected": e, "actual": a, "pass": p}
        for n, e, a, p in _core.validate(what, seed)
    ]
