"""Command line entry point: ``gmap <subcommand> --config <file> [--out] [--seed] [--strict]``.

The results payload is written to the output file (CSV or JSON) and is a
deterministic function of the config and seed.  A run record with the
config hash, tool version, seed and wall time is printed to stdout.

Exit codes: 0 success, 2 invalid config, 3 numerical failure,
4 inconclusive or low-confidence results under ``--strict``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__
from ._workers import instance_seed
from .config import (OPERATIONS, BatchConfig, ConfigError, ExperimentConfig, check_param_keys,
                     load_config, param)
from .exceptions import ContractError, PotentialEvaluationError, UndefinedRatioError
from .measure import AnalyticMeasure1D, Ball, SpectralGaussian, ambient_norm
from .modes import (MonteCarloMasses, amf_track, classify_mode, dichotomy_report,
                    m_property_decay, mass_model)
from .om_solver import Posterior, minimize_om, om_gradient, om_value
from .potential import finite_difference_gradient, gradient_check, relative_error, verify_bound, \
    verify_coercivity
from .smallball import (KKT_TOL, METHODS, anderson_check, check_variational_inequality,
                        estimate_ball_prob, explicit_anderson_check, min_cm_in_ball)

CURVE_HEADER = ("r", "estimate", "stderr", "bound", "pass")
INSTANCE_HEADER = ("instance", "x", "r", "estimate", "stderr", "bound", "pass")
GRAD_TOL = 1e-4


class NumericalFailure(RuntimeError):
    """Non-convergence or an undefined ratio; exit code 3."""


@dataclass
class RunRecord:
    config_hash: str
    version: str
    seed: object
    wall_time: float
    payload: dict
    inconclusive: int = 0

    @property
    def payload_hash(self) -> str:
        return hashlib.sha256(dump_json(self.payload).encode()).hexdigest()

    def summary(self) -> dict:
        return {"config_sha256": self.config_hash, "version": self.version, "seed": self.seed,
                "wall_time_s": round(self.wall_time, 3), "payload_sha256": self.payload_hash,
                "inconclusive": self.inconclusive}


# ---------------------------------------------------------------------------
# serialisation


def jsonable(v):
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [jsonable(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def dump_json(payload) -> str:
    return json.dumps(jsonable(payload), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def csv_text(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(row.get(h)) for h in header])
    return buf.getvalue()


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def emit_curve(record, path) -> None:
    """Write per-radius evidence as CSV ``r,estimate,stderr,bound,pass``."""
    rows = record.payload.get("curve", []) if isinstance(record, RunRecord) else record
    _write(path, csv_text(rows, CURVE_HEADER))


def x_summary(x) -> str:
    x = np.asarray(x, dtype=float)
    if x.size <= 3:
        return ";".join(repr(float(v)) for v in x)
    return f"d={x.size};l2={float(np.linalg.norm(x))!r}"


# ---------------------------------------------------------------------------
# operations


def _require_gaussian(cfg: ExperimentConfig, what):
    if not isinstance(cfg.measure, SpectralGaussian):
        raise ConfigError(f"measure.type: {what} needs a Gaussian measure")


def _instances(cfg: ExperimentConfig, params, path, center_key):
    """Explicit instances followed by random ones: x = sigma * z * s, r uniform."""
    m = cfg.measure
    out = []
    for i, inst in enumerate(param(params, "instances", path, [], "list")):
        p = f"{path}.instances[{i}]"
        if not isinstance(inst, dict) or set(inst) != {center_key, "r"}:
            raise ConfigError(f"{p}: expected an object with fields {center_key!r} and 'r'")
        x = param(inst, center_key, p, kind="vector", dim=m.dim)
        r = param(inst, "r", p, positive=True)
        out.append((x, r))
    rnd = param(params, "random", path, None, "obj")
    if rnd is not None:
        p = f"{path}.random"
        check_param_keys(rnd, p, {"count", "seed", "scale", "radius"})
        count = param(rnd, "count", p, 0, "int", minimum=0)
        if "seed" not in rnd:
            raise ConfigError(f"{p}.seed: required field is missing")
        seed = param(rnd, "seed", p, kind="int", minimum=0)
        s_lo, s_hi = _range(rnd, "scale", p, (0.0, 2.0), nonneg=True)
        r_lo, r_hi = _range(rnd, "radius", p, (0.05, 0.5), positive=True)
        rng = np.random.default_rng(seed)
        for _ in range(count):
            z = rng.standard_normal(m.dim)
            s = rng.uniform(s_lo, s_hi)
            r = rng.uniform(r_lo, r_hi)
            out.append((m.sigma * z * s, float(r)))
    if not out:
        raise ConfigError(f"{path}: no instances (give 'instances' or 'random')")
    return out


def _range(d, key, path, default, **kw):
    if key not in d:
        return default
    v = d[key]
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(f"{path}.{key}: expected [low, high]")
    lo = param({"v": v[0]}, "v", f"{path}.{key}[0]", **kw)
    hi = param({"v": v[1]}, "v", f"{path}.{key}[1]", **kw)
    if hi < lo:
        raise ConfigError(f"{path}.{key}: high is below low")
    return lo, hi


def op_estimate_map(cfg: ExperimentConfig):
    params = cfg.params
    check_param_keys(params, "params", {"multistarts", "tol_grad", "max_iter"})
    if cfg.potential is None:
        raise ConfigError("potential: estimate-map needs a potential")
    _require_gaussian(cfg, "estimate-map")
    post = cfg.target
    res = minimize_om(
        post, tol_grad=param(params, "tol_grad", "params", 1e-8, positive=True),
        max_iter=param(params, "max_iter", "params", 10_000, "int", minimum=1),
        multistarts=param(params, "multistarts", "params", 4, "int", minimum=1), seed=cfg.seed)
    payload = {"minimizer": res.minimizer, "value": res.value, "iterations": res.iterations,
               "grad_norm_final": res.grad_norm_final, "converged": res.converged,
               "message": res.message, "multistart_values": res.multistart_values}
    if cfg.raw.get("potential", {}).get("type") == "quadratic_misfit":
        # the OM gradient is affine here, so unit-vector differences give the normal matrix
        g0 = om_gradient(post, np.zeros(cfg.dim))
        A = np.column_stack([om_gradient(post, e) - g0 for e in np.eye(cfg.dim)])
        exact = np.linalg.solve(A, -g0)
        payload["normal_equations_solution"] = exact
        payload["normal_equations_error"] = float(np.max(np.abs(res.minimizer - exact)))
    if not res.converged:
        raise NumericalFailure(f"estimate-map: optimiser did not converge ({res.message})")
    return payload, []


def op_ball_prob(cfg: ExperimentConfig):
    params = cfg.params
    check_param_keys(params, "params", {"instances", "random", "methods", "projection", "probes"})
    if isinstance(cfg.measure, AnalyticMeasure1D):
        raise ConfigError("measure.type: ball-prob needs a Gaussian measure")
    methods = param(params, "methods", "params", ["direct"], "list")
    if not methods or len(methods) > 2:
        raise ConfigError("params.methods: give one or two estimators")
    for i, mth in enumerate(methods):
        param({f"methods[{i}]": mth}, f"methods[{i}]", "params", kind="choice",
              options=METHODS)
    projection = param(params, "projection", "params", False, "bool")
    probes = param(params, "probes", "params", 1000, "int", minimum=1)
    if projection and cfg.potential is not None:
        raise ConfigError("params.projection: projections are defined for the prior only")
    m = cfg.measure
    rows, bad = [], 0
    for i, (x, r) in enumerate(_instances(cfg, params, "params", "center")):
        ball = Ball(x, r, m.ambient_norm)
        ests = [estimate_ball_prob(cfg.target, ball, cfg.n, instance_seed(cfg.seed, i), mth)
                for mth in methods]
        row = {"instance": i, "x": x_summary(x), "center": x, "r": r,
               "estimate": ests[0].value, "stderr": ests[0].stderr,
               "estimates": [{"method": e.method, "value": e.value, "stderr": e.stderr,
                              "hits": e.hits, "ess": e.ess, "low_confidence": e.low_confidence}
                             for e in ests]}
        if len(ests) == 2:
            se = math.hypot(ests[0].stderr, ests[1].stderr)
            row.update(stderr=se, bound=ests[1].value,
                       **{"pass": abs(ests[0].value - ests[1].value) <= 3.0 * se})
        else:
            row["pass"] = not ests[0].low_confidence
        if any(e.low_confidence for e in ests):
            bad += 1
        if projection:
            proj = min_cm_in_ball(m, ball)
            vi = check_variational_inequality(m, ball, proj, probes, instance_seed(cfg.seed, i, 1))
            row["projection"] = {"minimizer": proj.minimizer, "value": proj.value,
                                 "dual_coefficients": proj.dual_coefficients,
                                 "active": proj.active, "kkt_residual": proj.kkt_residual,
                                 "vi_min_slack": vi.min_slack, "vi_probes": vi.n_probes,
                                 "vi_passed": vi.passed}
            row["pass"] = bool(row["pass"] and vi.passed and proj.kkt_residual <= KKT_TOL)
        rows.append(row)
    payload = {"methods": methods, "rows": rows,
               "summary": {"total": len(rows), "passed": sum(bool(r["pass"]) for r in rows)}}
    return payload, [bad]


def op_verify_anderson(cfg: ExperimentConfig):
    params = cfg.params
    check_param_keys(params, "params", {"instances", "random", "bound", "method"})
    _require_gaussian(cfg, "verify-anderson")
    if cfg.potential is not None:
        raise ConfigError("potential: Anderson's inequality concerns the centred prior only")
    kind = param(params, "bound", "params", "explicit", "choice",
                 options=("anderson", "explicit"))
    method = param(params, "method", "params", "auto", "choice",
                   options=("auto",) + METHODS)
    check = explicit_anderson_check if kind == "explicit" else anderson_check
    rows, low = [], 0
    for i, (x, r) in enumerate(_instances(cfg, params, "params", "x")):
        try:
            rep = check(cfg.measure, x, r, cfg.n, instance_seed(cfg.seed, i), method)
        except UndefinedRatioError as exc:
            raise NumericalFailure(f"params instance {i}: {exc}") from exc
        low += rep.low_confidence
        rows.append({"instance": i, "x": x_summary(x), "center": x, "r": r,
                     "estimate": rep.ratio.value, "stderr": rep.ratio.stderr,
                     "bound": rep.bound, "pass": rep.passed, "method": rep.ratio.method,
                     "low_confidence": rep.low_confidence,
                     "min_cm_value": None if rep.projection is None else rep.projection.value})
    payload = {"bound": kind, "rows": rows,
               "summary": {"total": len(rows), "passed": sum(r["pass"] for r in rows),
                           "low_confidence": low}}
    return payload, [low]


def _model_for(cfg, choice):
    if choice in ("auto", "exact", "quadrature"):
        return mass_model(cfg.target, cfg.n, cfg.seed, "auto" if choice == "exact" else choice)
    method = "auto" if choice == "monte_carlo" else choice
    return MonteCarloMasses(cfg.target, cfg.n, cfg.seed, method)


def _rows(rows):
    return [{"r": e.r, "estimate": e.estimate, "stderr": e.stderr, "bound": e.bound,
             "pass": e.passed, **({} if e.center is None else {"center": e.center})}
            for e in rows]


MODEL_CHOICES = ("auto", "exact", "quadrature", "monte_carlo") + METHODS


def op_classify_mode(cfg: ExperimentConfig):
    params = cfg.params
    check_param_keys(params, "params", {"points", "challengers", "tol", "last", "starts",
                                        "mass_model", "ratio_law"})
    if cfg.output_format != "json":
        raise ConfigError("output.format: classify-mode writes json (curves are inside)")
    dim = cfg.dim
    pts = param(params, "points", "params", None, "list")
    if not pts:
        raise ConfigError("params.points: give at least one candidate point")
    points = [param({"p": p}, "p", f"params.points[{i}]", kind="vector", dim=dim)
              for i, p in enumerate(pts)]
    chal = param(params, "challengers", "params", None, "list")
    tol = param(params, "tol", "params", 0.05, positive=True, hi=0.5)
    last = param(params, "last", "params", 3, "int", minimum=1)
    starts = param(params, "starts", "params", 3, "int", minimum=0)
    choice = param(params, "mass_model", "params", "auto", "choice", options=MODEL_CHOICES)
    if last > cfg.schedule.count:
        raise ConfigError("params.last: exceeds schedule.count")
    model = _model_for(cfg, choice)
    if chal is not None:
        chal = [param({"p": p}, "p", f"params.challengers[{i}]", kind="vector", dim=dim)
                for i, p in enumerate(chal)]
    verdicts = []
    for x in points:
        cands = None if chal is None else chal + [p for p in points if p is not x]
        verdicts.append(classify_mode(model, x, cfg.schedule, tol, cfg.n, cfg.seed,
                                      challengers=cands, last=last, starts=starts))
    dich = dichotomy_report(verdicts)
    payload = {
        "label": "numerical evidence",
        "tolerance": tol, "radii": cfg.schedule.radii,
        "verdicts": [{
            "point": v.point, "classification": v.classification,
            "weak_passed": v.weak_passed, "strong_passed": v.strong_passed,
            "generalized_passed": v.generalized_passed, "note": v.note,
            "dropped_radii": v.dropped_radii, "curve": _rows(v.evidence),
            "weak": _rows(v.weak), "strong": _rows(v.strong),
            "generalized": _rows(v.generalized)} for v in verdicts],
        "dichotomy": {"strong_points": dich.strong_points,
                      "contradictions": dich.contradictions, "passed": dich.passed},
    }
    law = param(params, "ratio_law", "params", None, "obj")
    if law is not None:
        payload["ratio_law"] = _ratio_law(cfg, model, law)
    bad = sum(v.classification == "Inconclusive" for v in verdicts)
    return payload, [bad]


def _ratio_law(cfg, model, law):
    """Max |mass ratio - exp(I(x') - I(x))| over candidate pairs, per radius."""
    p = "params.ratio_law"
    check_param_keys(law, p, {"points", "radii"})
    if not isinstance(cfg.target, Posterior):
        raise ConfigError(f"{p}: needs a posterior (measure plus potential)")
    pts = [param({"v": v}, "v", f"{p}.points[{i}]", kind="vector", dim=cfg.dim)
           for i, v in enumerate(param(law, "points", p, [], "list"))]
    radii = [param({"v": v}, "v", f"{p}.radii[{i}]", positive=True)
             for i, v in enumerate(param(law, "radii", p, [], "list"))]
    if len(pts) < 2 or not radii:
        raise ConfigError(f"{p}: needs at least two points and one radius")
    post = cfg.target
    I = np.array([om_value(post, x) for x in pts])
    out = []
    for k, r in enumerate(radii):
        lm = model.evaluate(k, r, np.array(pts)).log_mass
        worst = 0.0
        for a in range(len(pts)):
            for b in range(len(pts)):
                worst = max(worst, abs(math.exp(lm[a] - lm[b]) - math.exp(I[b] - I[a])))
        out.append({"r": r, "max_abs_error": worst})
    errs = [o["max_abs_error"] for o in out]
    return {"rows": out,
            "monotone_decreasing": all(b < a for a, b in zip(errs, errs[1:]))}


def op_amf_track(cfg: ExperimentConfig):
    params = cfg.params
    check_param_keys(params, "params", {"starts", "tol", "last", "mass_model", "om_start"})
    if not isinstance(cfg.target, Posterior):
        raise ConfigError("potential: amf-track needs a posterior (measure plus potential)")
    tol = param(params, "tol", "params", 0.05, positive=True)
    last = param(params, "last", "params", 3, "int", minimum=1)
    starts = param(params, "starts", "params", 3, "int", minimum=0)
    choice = param(params, "mass_model", "params", "auto", "choice", options=MODEL_CHOICES)
    om_start = param(params, "om_start", "params", True, "bool")
    model = _model_for(cfg, choice)
    tr = amf_track(model, cfg.schedule, cfg.n, cfg.seed, starts=starts, tol=tol,
                   last=last, om_start=om_start)
    curve = [{"r": e.r, "estimate": e.deficiency, "stderr": e.deficiency_stderr, "bound": tol,
              "pass": bool(e.deficiency <= tol), "center": e.center, "mass": e.mass}
             for e in tr.entries]
    final = tr.entries[-1]
    om = tr.om_minimizer
    final_dist = None if om is None else float(ambient_norm(final.center - om, model.norm))
    payload = {"curve": curve, "limit_point": tr.limit_point, "om_minimizer": om,
               "limit_om_distance": tr.om_distance, "diagnostic": tr.diagnostic,
               "trend_violations": tr.trend_violations,
               "final": {"r": final.r, "center": final.center, "deficiency": final.deficiency,
                         "om_distance": final_dist,
                         "pass": bool(final.deficiency <= tol and final_dist is not None
                                      and final_dist <= tol)}}
    return payload, [int(tr.limit_point is None)]


def op_m_property(cfg: ExperimentConfig):
    params = cfg.params
    check_param_keys(params, "params", {"x", "method"})
    _require_gaussian(cfg, "m-property")
    if cfg.potential is not None:
        raise ConfigError("potential: m-property concerns the centred prior only")
    if "x" not in params:
        raise ConfigError("params.x: required field is missing")
    x = param(params, "x", "params", kind="vector", dim=cfg.dim)
    method = param(params, "method", "params", "auto", "choice",
                   options=("auto",) + METHODS)
    try:
        rep = m_property_decay(cfg.measure, x, cfg.schedule, cfg.n, cfg.seed, method)
    except UndefinedRatioError as exc:
        raise NumericalFailure(f"m-property: {exc}") from exc
    curve = [{"r": row.r, "estimate": row.ratio, "stderr": row.ratio * row.log_ratio_stderr,
              "bound": row.bound, "pass": row.passed, "log_ratio": row.log_ratio,
              "min_cm_value": row.min_value, "method": row.method} for row in rep.rows]
    payload = {"x": x, "curve": curve, "value_increasing": rep.value_increasing,
               "all_passed": rep.passed}
    return payload, [0]


def op_verify_potential(cfg: ExperimentConfig):
    params = cfg.params
    check_param_keys(params, "params", {"bounds", "coercivity", "gradient_points"})
    _require_gaussian(cfg, "verify-potential")
    if cfg.potential is None:
        raise ConfigError("potential: verify-potential needs a potential")
    m, p = cfg.measure, cfg.potential
    rows = []
    for i, b in enumerate(param(params, "bounds", "params", [], "list")):
        path = f"params.bounds[{i}]"
        if not isinstance(b, dict):
            raise ConfigError(f"{path}: expected an object")
        check_param_keys(b, path, {"eta", "K"})
        eta = param(b, "eta", path, None, positive=True)
        K = param(b, "K", path, None)
        if eta is None or K is None:
            raise ConfigError(f"{path}: needs eta and K")
        rep = verify_bound(p, m, eta, K, cfg.n, cfg.seed)
        worst = rep.worst
        rows.append({"instance": f"bound[{i}]", "check": "bound", "eta": eta, "bound": K,
                     "pass": rep.holds, "estimate": rep.min_margin,
                     "n_checked": rep.n_checked, "witnessed_on": rep.witnessed_on,
                     "violations": len(rep.violations),
                     "x": "" if worst is None else x_summary(worst),
                     "worst_point": worst,
                     "worst_norm": None if worst is None else float(m.norm(worst))})
    for i, c in enumerate(param(params, "coercivity", "params", [], "list")):
        path = f"params.coercivity[{i}]"
        if not isinstance(c, dict):
            raise ConfigError(f"{path}: expected an object")
        check_param_keys(c, path, {"A", "c"})
        A = param(c, "A", path, None)
        cc = param(c, "c", path, None, positive=True)
        if A is None or cc is None:
            raise ConfigError(f"{path}: needs A and c")
        rep = verify_coercivity(p, m, A, cc, cfg.n, cfg.seed)
        rows.append({"instance": f"coercivity[{i}]", "check": "coercivity", "A": A, "c": cc,
                     "pass": rep.holds, "estimate": rep.min_margin,
                     "n_checked": rep.n_checked, "violations": len(rep.violations)})
    npts = param(params, "gradient_points", "params", 0, "int", minimum=0)
    if npts:
        pts = np.random.default_rng(instance_seed(cfg.seed, 1)).standard_normal((npts, m.dim)) * m.sigma
        err_p = gradient_check(p, pts)
        post = cfg.target
        err_om = max(relative_error(om_gradient(post, u),
                                    finite_difference_gradient(lambda v: om_value(post, v), u))
                     for u in pts)
        for name, err in (("potential_gradient", err_p), ("om_gradient", err_om)):
            rows.append({"instance": name, "check": "gradient", "estimate": err,
                         "bound": GRAD_TOL, "pass": err <= GRAD_TOL, "points": npts})
    if not rows:
        raise ConfigError("params: give bounds, coercivity or gradient_points")
    return {"rows": rows}, [0]


OPS = {
    "estimate-map": op_estimate_map,
    "ball-prob": op_ball_prob,
    "verify-anderson": op_verify_anderson,
    "classify-mode": op_classify_mode,
    "amf-track": op_amf_track,
    "m-property": op_m_property,
    "verify-potential": op_verify_potential,
}
CURVE_OPS = ("amf-track", "m-property")


# ---------------------------------------------------------------------------
# orchestration


def _config_hash(raw, seed) -> str:
    canon = json.dumps({"config": raw, "seed": seed}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def run(cfg, raw=None) -> RunRecord:
    """Execute a parsed config (single or batch) and return its record."""
    t0 = time.perf_counter()
    if isinstance(cfg, BatchConfig):
        payloads, bad = [], 0
        for sub in cfg.runs:
            pl, flags = OPS[sub.operation](sub)
            payloads.append({"operation": sub.operation, "seed": sub.seed, **pl})
            bad += sum(flags)
        payload = {"operation": cfg.operation, "runs": payloads}
        seed = [r.seed for r in cfg.runs]
    else:
        pl, flags = OPS[cfg.operation](cfg)
        payload = {"operation": cfg.operation, "seed": cfg.seed, **pl}
        bad = sum(flags)
        seed = cfg.seed
    payload = jsonable(payload)
    return RunRecord(_config_hash(raw if raw is not None else cfg.raw, seed), __version__, seed,
                     time.perf_counter() - t0, payload, bad)


def render(record: RunRecord, fmt: str, op: str) -> str:
    if fmt == "json":
        return dump_json(record.payload)
    if op in CURVE_OPS:
        return csv_text(record.payload["curve"], CURVE_HEADER)
    return csv_text(record.payload["rows"], INSTANCE_HEADER)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gmap", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"gmap {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for op in OPERATIONS:
        sp = sub.add_parser(op)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", help="output path (overrides output.path)")
        sp.add_argument("--seed", type=int, help="override mc.seed (unsigned 64-bit)")
        sp.add_argument("--strict", action="store_true",
                        help="exit 4 on inconclusive or low-confidence results")
    return ap


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed: must be an unsigned 64-bit integer")
        try:
            cfg, raw = load_config(args.config, args.command, args.seed)
        except FileNotFoundError as exc:
            raise ConfigError(f"--config: {exc}") from exc
        record = run(cfg, raw)
        text = render(record, cfg.output_format, cfg.operation)
        out = args.out or cfg.output_path
        if out:
            _write(out, text)
        else:
            sys.stdout.write(text)
        summary = record.summary()
        summary["output"] = out
        print(json.dumps(summary, sort_keys=True), file=sys.stdout if out else sys.stderr)
    except ConfigError as exc:
        print(f"gmap: invalid config: {exc}", file=sys.stderr)
        return 2
    except ContractError as exc:
        print(f"gmap: invalid input: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, UndefinedRatioError, PotentialEvaluationError,
            FloatingPointError) as exc:
        print(f"gmap: numerical failure: {exc}", file=sys.stderr)
        return 3
    if args.strict and record.inconclusive:
        print(f"gmap: {record.inconclusive} inconclusive or low-confidence result(s)",
              file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
