"""JSON experiment configs: validation and construction of the run objects.

Every error is a :class:`ConfigError` whose message starts with the dotted
path of the offending field, e.g. ``measure.sigma[2]: ...``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .exceptions import ContractError
from .measure import NORMS, AnalyticMeasure1D, SpectralGaussian
from .modes import RadiusSchedule
from .om_solver import Posterior
from .potential import (Potential, constant_potential, cubic_misfit, quadratic_misfit,
                        unbounded_below_example, zero_potential)

OPERATIONS = ("estimate-map", "ball-prob", "verify-anderson", "classify-mode", "amf-track",
              "m-property", "verify-potential")
FORMATS = ("csv", "json")
TOP_KEYS = {"operation", "measure", "potential", "schedule", "mc", "output", "params"}


class ConfigError(ContractError):
    """Invalid experiment configuration."""


def _fail(path, msg):
    raise ConfigError(f"{path}: {msg}")


def _obj(v, path) -> dict:
    if not isinstance(v, dict):
        _fail(path, f"expected an object, got {type(v).__name__}")
    return v


def _keys(d: dict, path: str, allowed, required=()):
    for k in required:
        if k not in d:
            _fail(f"{path}.{k}" if path else k, "required field is missing")
    for k in d:
        if k not in allowed:
            _fail(f"{path}.{k}" if path else k, "unknown field")


def _num(v, path, positive=False, nonneg=False, lo=None, hi=None) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(path, f"expected a number, got {json.dumps(v)}")
    v = float(v)
    if not math.isfinite(v):
        _fail(path, "must be finite")
    if positive and not v > 0:
        _fail(path, f"must be positive, got {v!r}")
    if nonneg and v < 0:
        _fail(path, f"must be nonnegative, got {v!r}")
    if lo is not None and v < lo:
        _fail(path, f"must be at least {lo!r}, got {v!r}")
    if hi is not None and v > hi:
        _fail(path, f"must be at most {hi!r}, got {v!r}")
    return v


def _int(v, path, minimum=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(path, f"expected an integer, got {json.dumps(v)}")
    if minimum is not None and v < minimum:
        _fail(path, f"must be at least {minimum}, got {v}")
    return int(v)


def _bool(v, path) -> bool:
    if not isinstance(v, bool):
        _fail(path, f"expected true or false, got {json.dumps(v)}")
    return v


def _choice(v, path, options):
    if v not in options:
        _fail(path, f"must be one of {list(options)}, got {json.dumps(v)}")
    return v


def _vector(v, path, dim=None) -> np.ndarray:
    if not isinstance(v, list) or not v:
        _fail(path, "expected a nonempty list of numbers")
    out = np.array([_num(e, f"{path}[{i}]") for i, e in enumerate(v)])
    if dim is not None and out.size != dim:
        _fail(path, f"has length {out.size}, expected {dim}")
    return out


def _random_normal(spec, path, shape):
    spec = _obj(spec, path)
    _keys(spec, path, {"seed", "scale", "rows"}, required=("seed",))
    seed = _int(spec["seed"], f"{path}.seed", 0)
    scale = _num(spec.get("scale", 1.0), f"{path}.scale", positive=True)
    return scale * np.random.default_rng(seed).standard_normal(shape)


def _matrix(v, path, dim) -> np.ndarray:
    if v == "identity":
        return np.eye(dim)
    if isinstance(v, dict):
        if set(v) != {"random_normal"}:
            _fail(path, "expected \"identity\", a matrix or {\"random_normal\": {...}}")
        spec = _obj(v["random_normal"], f"{path}.random_normal")
        rows = _int(spec.get("rows", dim), f"{path}.random_normal.rows", 1)
        return _random_normal(spec, f"{path}.random_normal", (rows, dim))
    if not isinstance(v, list) or not v:
        _fail(path, "expected \"identity\", a matrix or {\"random_normal\": {...}}")
    rows = [_vector(row, f"{path}[{i}]", dim) for i, row in enumerate(v)]
    return np.array(rows)


def _observation(v, path, rows) -> np.ndarray:
    if isinstance(v, dict):
        if set(v) != {"random_normal"}:
            _fail(path, "expected a list or {\"random_normal\": {...}}")
        return _random_normal(v["random_normal"], f"{path}.random_normal", (rows,))
    return _vector(v, path, rows)


def build_measure(spec, path="measure"):
    spec = _obj(spec, path)
    kind = _choice(spec.get("type"), f"{path}.type", ("gaussian", "power_law", "uniform_unit"))
    if kind == "uniform_unit":
        _keys(spec, path, {"type"})
        return AnalyticMeasure1D.uniform_unit()
    norm = _choice(spec.get("ambient_norm", "l2"), f"{path}.ambient_norm", NORMS)
    if kind == "gaussian":
        _keys(spec, path, {"type", "sigma", "ambient_norm"}, required=("sigma",))
        sigma = _vector(spec["sigma"], f"{path}.sigma")
        for i, s in enumerate(sigma):
            if not s > 0:
                _fail(f"{path}.sigma[{i}]",
                      f"entries must be strictly positive (the Gaussian must be nondegenerate), "
                      f"got {float(s)!r}")
        return SpectralGaussian(sigma, norm)
    _keys(spec, path, {"type", "dim", "decay", "scale", "ambient_norm"}, required=("dim",))
    dim = _int(spec["dim"], f"{path}.dim", 1)
    decay = _num(spec.get("decay", 1.0), f"{path}.decay", nonneg=True)
    scale = _num(spec.get("scale", 1.0), f"{path}.scale", positive=True)
    return SpectralGaussian.power_law(dim, decay, scale, norm)


def build_potential(spec, dim: int, norm: str, path="potential") -> Potential:
    spec = _obj(spec, path)
    kind = _choice(spec.get("type"), f"{path}.type",
                   ("zero", "constant", "quadratic_misfit", "cubic_misfit", "neg_norm"))
    if kind == "zero":
        _keys(spec, path, {"type"})
        return zero_potential(dim)
    if kind == "constant":
        _keys(spec, path, {"type", "value"}, required=("value",))
        return constant_potential(_num(spec["value"], f"{path}.value"), dim)
    if kind == "neg_norm":
        _keys(spec, path, {"type", "a"}, required=("a",))
        return unbounded_below_example(_num(spec["a"], f"{path}.a", positive=True), norm)
    noise = _num(spec.get("noise_sd", 1.0), f"{path}.noise_sd", positive=True)
    if kind == "cubic_misfit":
        _keys(spec, path, {"type", "y", "noise_sd"}, required=("y",))
        return cubic_misfit(_observation(spec["y"], f"{path}.y", dim), noise)
    _keys(spec, path, {"type", "G", "y", "noise_sd"}, required=("y",))
    G = _matrix(spec.get("G", "identity"), f"{path}.G", dim)
    y = _observation(spec["y"], f"{path}.y", G.shape[0])
    return quadratic_misfit(G, y, noise)


def build_schedule(spec, path="schedule") -> RadiusSchedule:
    spec = _obj(spec, path)
    _keys(spec, path, {"r0", "factor", "count"})
    r0 = _num(spec.get("r0", 0.5), f"{path}.r0", positive=True)
    factor = _num(spec.get("factor", 0.5), f"{path}.factor", positive=True)
    if not factor < 1:
        _fail(f"{path}.factor", f"must lie in (0, 1), got {factor!r}")
    count = _int(spec.get("count", 8), f"{path}.count", 1)
    return RadiusSchedule(r0, factor, count)


@dataclass
class ExperimentConfig:
    operation: str
    measure: Any
    potential: Optional[Potential]
    schedule: RadiusSchedule
    n: int
    seed: int
    output_format: str
    output_path: Optional[str]
    params: dict
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def target(self):
        """The measure, or the posterior when a potential is configured."""
        if self.potential is None:
            return self.measure
        return Posterior(self.measure, self.potential)

    @property
    def dim(self) -> int:
        return self.measure.dim


@dataclass
class BatchConfig:
    operation: str
    runs: list
    output_format: str
    output_path: Optional[str]
    raw: dict = field(repr=False, default_factory=dict)


def _output(spec, path="output"):
    spec = _obj(spec, path)
    _keys(spec, path, {"path", "format"})
    fmt = _choice(spec.get("format", "json"), f"{path}.format", FORMATS)
    out = spec.get("path")
    if out is not None and not isinstance(out, str):
        _fail(f"{path}.path", "expected a string")
    return fmt, out


def parse_config(raw, operation: Optional[str] = None, seed: Optional[int] = None, path=""):
    """Validate a config dict; returns an ExperimentConfig or a BatchConfig."""
    raw = _obj(raw, path or "config")
    pre = f"{path}." if path else ""
    if "runs" in raw:
        _keys(raw, path, {"runs", "operation", "output"}, required=("runs",))
        if not isinstance(raw["runs"], list) or not raw["runs"]:
            _fail(f"{pre}runs", "expected a nonempty list of configs")
        op = raw.get("operation", operation)
        fmt, out = _output(raw.get("output", {}), f"{pre}output")
        if fmt != "json":
            _fail(f"{pre}output.format", "batch configs write json")
        runs = []
        for i, sub in enumerate(raw["runs"]):
            sub = dict(_obj(sub, f"{pre}runs[{i}]"))
            if "output" in sub:
                _fail(f"{pre}runs[{i}].output", "set the output on the batch, not per run")
            runs.append(parse_config(sub, op, seed, f"{pre}runs[{i}]"))
        ops = {r.operation for r in runs}
        if len(ops) != 1:
            _fail(f"{pre}runs", "all runs must use the same operation")
        return BatchConfig(ops.pop(), runs, fmt, out, raw)

    _keys(raw, path, TOP_KEYS, required=("mc",))
    op = raw.get("operation", operation)
    if op is None:
        _fail(f"{pre}operation", "required field is missing")
    _choice(op, f"{pre}operation", OPERATIONS)
    if operation is not None and op != operation:
        _fail(f"{pre}operation", f"config requests {op!r} but the subcommand is {operation!r}")
    if "measure" not in raw:
        _fail(f"{pre}measure", "required field is missing")
    measure = build_measure(raw["measure"], f"{pre}measure")
    potential = None
    if raw.get("potential") is not None:
        if isinstance(measure, AnalyticMeasure1D):
            _fail(f"{pre}potential", "potentials need a Gaussian prior")
        potential = build_potential(raw["potential"], measure.dim, measure.ambient_norm,
                                    f"{pre}potential")
    schedule = build_schedule(raw.get("schedule", {}), f"{pre}schedule")
    mc = _obj(raw["mc"], f"{pre}mc")
    _keys(mc, f"{pre}mc", {"n", "seed"}, required=("seed",))
    n = _int(mc.get("n", 100_000), f"{pre}mc.n", 1)
    cfg_seed = _int(mc["seed"], f"{pre}mc.seed", 0)
    if seed is not None:
        cfg_seed = seed
    fmt, out = _output(raw.get("output", {}), f"{pre}output")
    params = _obj(raw.get("params", {}), f"{pre}params")
    if isinstance(measure, AnalyticMeasure1D) and op != "classify-mode":
        _fail(f"{pre}measure.type", "uniform_unit is only supported by classify-mode")
    return ExperimentConfig(op, measure, potential, schedule, n, cfg_seed, fmt, out, params, raw)


def load_config(path: str, operation: Optional[str] = None, seed: Optional[int] = None):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from exc
    return parse_config(raw, operation, seed), raw


# helpers for operation parameters, shared with the CLI

def param(params: dict, key, path, default=None, kind="num", **kw):
    if key not in params:
        return default
    v = params[key]
    p = f"{path}.{key}"
    if kind == "num":
        return _num(v, p, **kw)
    if kind == "int":
        return _int(v, p, **kw)
    if kind == "bool":
        return _bool(v, p)
    if kind == "choice":
        return _choice(v, p, kw["options"])
    if kind == "vector":
        return _vector(v, p, kw.get("dim"))
    if kind == "obj":
        return _obj(v, p)
    if kind == "list":
        if not isinstance(v, list):
            _fail(p, "expected a list")
        return v
    raise ValueError(kind)


def check_param_keys(params: dict, path: str, allowed):
    _keys(params, path, set(allowed))
