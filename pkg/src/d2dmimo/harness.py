"""Experiment driver: sweeps, Monte Carlo trials, CSV/JSON outputs.

An experiment is described by an ExperimentSpec (JSON-serializable): a
recipe id, one swept SystemConfig field with its value list, a trial
count, and a base config.  Each trial draws a fresh topology, large-scale
fading and (where the recipe needs it) fast fading, from a per-trial
substream that depends only on the root seed and the trial index, never
on the sweep value.  Sweep points therefore share common random numbers,
which keeps sweep curves smooth at desk-scale trial counts, and results
are independent of sweep order and worker count.

Recipes:
  fig1   cellular sum SE, Monte Carlo vs lower bound (sweep bs_antennas)
  fig2   D2D sum SE, Monte Carlo vs lower bound (sweep pilot_len)
  fig3   estimation sum MSE per scheduler (sweep pilot_len)
  fig45  power-control convergence statistics
  fig6..fig9, custom   full pipeline with joint power control

CSV schema: sweep,metric,mean,ci95,trials (one file per experiment),
plus a deterministic manifest JSON alongside.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .scenario import SystemConfig, generate_topology, compute_large_scale, substream, trial_seed, FADING, NOISE
from .channel import PowerProfile, estimation_coeffs, draw_fast_fading, simulate_pilot_phase, mmse_estimate
from .receivers import (DegenerateSpanError, select_cancellation, rate_coeffs, rate_lower_bounds,
                        bound_sinrs, instantaneous_sinr_cell, instantaneous_sinr_d2d)
from .pilot_scheduling import psa, random_assignment, exhaustive_search, sum_mse_objective
from .power_control import jdpc, dpcc, dpcd


class SpecError(ValueError):
    """Experiment-spec validation failure, tagged with the offending field."""

    def __init__(self, spec_field, message):
        super().__init__(f"{spec_field}: {message}")
        self.field = spec_field


_METRICS = {
    "bounds_mc": ("sum_se_cell", "sum_se_cell_lb", "sum_se_d2d", "sum_se_d2d_lb"),
    "mse": ("sum_mse_psa", "sum_mse_rps", "sum_mse_es", "sum_mse_lb"),
    "jdpc": ("sum_se_cell", "sum_se_d2d", "iterations", "infeasible_fraction"),
}

# experiment id -> (pipeline kind, default metrics)
EXPERIMENTS = {
    "fig1": ("bounds_mc", ["sum_se_cell", "sum_se_cell_lb"]),
    "fig2": ("bounds_mc", ["sum_se_d2d", "sum_se_d2d_lb"]),
    "fig3": ("mse", ["sum_mse_psa", "sum_mse_rps", "sum_mse_lb"]),
    "fig45": ("jdpc", ["sum_se_d2d", "sum_se_cell", "iterations", "infeasible_fraction"]),
    "fig6": ("jdpc", ["sum_se_cell", "sum_se_d2d", "infeasible_fraction"]),
    "fig7": ("jdpc", ["sum_se_d2d", "infeasible_fraction"]),
    "fig8": ("jdpc", ["sum_se_d2d", "infeasible_fraction"]),
    "fig9": ("jdpc", ["sum_se_d2d", "infeasible_fraction"]),
    "custom": ("jdpc", ["sum_se_cell", "sum_se_d2d", "infeasible_fraction"]),
}

_ES_GUARD = 250_000   # enumeration budget for the fig3 exhaustive baseline


@dataclass
class ExperimentSpec:
    experiment: str
    sweep_variable: str
    sweep_values: list
    trials: int
    config: SystemConfig = field(default_factory=SystemConfig)
    output: str | None = None
    metrics: list | None = None

    def resolved_metrics(self):
        if self.metrics is not None:
            return list(self.metrics)
        kind, defaults = EXPERIMENTS[self.experiment]
        metrics = list(defaults)
        if self.experiment == "fig3":
            k = self.config.n_d2d
            if all((v - self.config.n_cu) ** k <= _ES_GUARD for v in self.sweep_values):
                metrics.insert(1, "sum_mse_es")
        return metrics

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "sweep": {"variable": self.sweep_variable, "values": list(self.sweep_values)},
            "trials": self.trials,
            "config": self.config.to_dict(),
            "output": self.output,
            "metrics": self.metrics,
        }


@dataclass
class ResultRow:
    sweep: object
    metric: str
    mean: float
    ci95: float
    trials: int


def spec_from_dict(doc):
    if not isinstance(doc, dict):
        raise SpecError("spec", "top-level document must be a JSON object")
    for key in ("experiment", "sweep", "trials"):
        if key not in doc:
            raise SpecError(key, "missing required field")
    unknown = set(doc) - {"experiment", "sweep", "trials", "config", "output", "metrics"}
    if unknown:
        raise SpecError(sorted(unknown)[0], "unknown field")
    sweep = doc["sweep"]
    if not isinstance(sweep, dict) or "variable" not in sweep or "values" not in sweep:
        raise SpecError("sweep", "must be an object with 'variable' and 'values'")
    try:
        config = SystemConfig.from_dict(doc.get("config", {}))
    except (TypeError, ValueError) as exc:
        raise SpecError("config", str(exc)) from exc
    spec = ExperimentSpec(
        experiment=doc["experiment"],
        sweep_variable=sweep["variable"],
        sweep_values=list(sweep["values"]),
        trials=doc["trials"],
        config=config,
        output=doc.get("output"),
        metrics=doc.get("metrics"),
    )
    validate_spec(spec)
    return spec


def load_spec(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError("spec", f"not valid JSON: {exc}") from exc
    return spec_from_dict(doc)


def validate_spec(spec):
    if spec.experiment not in EXPERIMENTS:
        raise SpecError("experiment", f"unknown experiment {spec.experiment!r}; "
                                      f"known: {', '.join(sorted(EXPERIMENTS))}")
    if spec.sweep_variable not in SystemConfig.__dataclass_fields__:
        raise SpecError("sweep.variable", f"{spec.sweep_variable!r} is not a SystemConfig field")
    if not spec.sweep_values:
        raise SpecError("sweep.values", "must be a nonempty list")
    if not isinstance(spec.trials, int) or spec.trials < 1:
        raise SpecError("trials", "must be an integer >= 1")
    kind, _ = EXPERIMENTS[spec.experiment]
    allowed = set(_METRICS[kind])
    for m in spec.resolved_metrics():
        if m not in allowed:
            raise SpecError("metrics", f"{m!r} is not produced by {spec.experiment!r} "
                                       f"(allowed: {', '.join(sorted(allowed))})")
    for v in spec.sweep_values:
        try:
            apply_sweep(spec.config, spec.sweep_variable, v)
        except (TypeError, ValueError) as exc:
            raise SpecError("sweep.values", f"value {v!r}: {exc}") from exc
    return spec


def apply_sweep(config, variable, value):
    """Config with one field replaced; PZF degrees are clamped back into
    their feasibility windows when the sweep moves them out (the window
    depends on pilot_len, n_cu, and the antenna counts)."""
    d = config.to_dict()
    d[variable] = value
    n, tau = d["n_cu"], d["pilot_len"]
    b_c, b_d = d["pzf_bs"]
    b_c = min(b_c, n - 1)
    b_d = min(b_d, tau - n)
    b_c = min(b_c, d["bs_antennas"] - 1 - b_d)
    d["pzf_bs"] = [b_c, b_d]
    m_c, m_d = d["pzf_d2d"]
    m_c = min(m_c, n)
    m_d = min(m_d, tau - n - 1)
    m_c = min(m_c, d["d2drx_antennas"] - 1 - m_d)
    d["pzf_d2d"] = [m_c, m_d]
    return SystemConfig.from_dict(d)


def _scenario_pipeline(cfg):
    topo = generate_topology(cfg)
    ls = compute_large_scale(topo, cfg)
    pa = psa(ls, cfg)
    pp = PowerProfile.max_power(cfg)
    coeffs = estimation_coeffs(ls, pa, pp, cfg.noise_power)
    sets = select_cancellation(ls, pa, cfg)
    rc = rate_coeffs(ls, pa, coeffs, sets, pp, cfg)
    return topo, ls, pa, pp, coeffs, sets, rc


def _mc_rates(cfg, ls, pa, pp, coeffs, sets, want_cell, want_d2d):
    """One fast-fading draw worth of instantaneous rates; degenerate PZF
    draws (measure zero) are redrawn from follow-up substreams."""
    prefactor = 1.0 - cfg.pilot_len / cfg.coherence_len
    for attempt in range(5):
        real = draw_fast_fading(cfg, substream(cfg.rng_seed, FADING, attempt))
        obs = simulate_pilot_phase(real, ls, pa, pp, cfg, substream(cfg.rng_seed, NOISE, attempt))
        est = mmse_estimate(obs, ls, pa, pp, cfg)
        try:
            out = {}
            if want_cell:
                etas = [instantaneous_sinr_cell(n, est, coeffs, ls, pa, pp, sets, cfg)
                        for n in range(cfg.n_cu)]
                out["sum_se_cell"] = prefactor * float(np.sum(np.log2(1.0 + np.array(etas))))
            if want_d2d:
                etas = [instantaneous_sinr_d2d(k, est, coeffs, ls, pa, pp, sets, cfg)
                        for k in range(cfg.n_d2d)]
                out["sum_se_d2d"] = prefactor * float(np.sum(np.log2(1.0 + np.array(etas))))
            return out
        except DegenerateSpanError:
            continue
    raise RuntimeError("fast-fading draw kept a degenerate PZF span after 5 attempts")


def _trial_bounds_mc(cfg, metrics):
    _, ls, pa, pp, coeffs, sets, rc = _scenario_pipeline(cfg)
    out = {}
    if "sum_se_cell_lb" in metrics or "sum_se_d2d_lb" in metrics:
        r_c, r_d = rate_lower_bounds(rc, pp, cfg)
        out["sum_se_cell_lb"] = float(r_c.sum())
        out["sum_se_d2d_lb"] = float(r_d.sum())
    want_cell = "sum_se_cell" in metrics
    want_d2d = "sum_se_d2d" in metrics
    if want_cell or want_d2d:
        out.update(_mc_rates(cfg, ls, pa, pp, coeffs, sets, want_cell, want_d2d))
    return {m: out[m] for m in metrics}


def _trial_mse(cfg, metrics):
    topo = generate_topology(cfg)
    ls = compute_large_scale(topo, cfg)
    objective = sum_mse_objective(ls, cfg)
    out = {}
    if "sum_mse_psa" in metrics:
        out["sum_mse_psa"] = objective(psa(ls, cfg))
    if "sum_mse_rps" in metrics:
        out["sum_mse_rps"] = objective(random_assignment(cfg))
    if "sum_mse_es" in metrics:
        out["sum_mse_es"] = objective(exhaustive_search(ls, cfg, objective))
    if "sum_mse_lb" in metrics:
        # contamination-free floor: every pair alone on its pilot
        p = cfg.pilot_len * cfg.max_power_d2d
        s = p * np.diag(ls.v_d)
        out["sum_mse_lb"] = float(cfg.d2drx_antennas * np.sum(1.0 - s / (s + cfg.noise_power)))
    return {m: out[m] for m in metrics}


def _trial_jdpc(cfg, metrics):
    _, ls, pa, pp, coeffs, sets, rc = _scenario_pipeline(cfg)
    prefactor = 1.0 - cfg.pilot_len / cfg.coherence_len
    res = jdpc(rc, cfg.sinr_target, cfg.max_power_cu, cfg.max_power_d2d,
               tol_power=cfg.tol_power, tol_wmmse=cfg.tol_wmmse, prefactor=prefactor)
    if not res.feasible:
        return {"infeasible_fraction": 1.0}
    out = {"infeasible_fraction": 0.0, "iterations": float(res.outer_iterations)}
    eta_c, eta_d = bound_sinrs(rc, res.q_s, res.p_s)
    out["sum_se_cell"] = prefactor * float(np.sum(np.log2(1.0 + eta_c)))
    out["sum_se_d2d"] = prefactor * float(np.sum(np.log2(1.0 + eta_d)))
    return {m: out[m] for m in metrics if m in out}


_TRIALS = {"bounds_mc": _trial_bounds_mc, "mse": _trial_mse, "jdpc": _trial_jdpc}


def _run_one(task):
    cfg_dict, kind, metrics, tseed = task
    cfg = SystemConfig.from_dict({**cfg_dict, "rng_seed": tseed})
    return _TRIALS[kind](cfg, metrics)


def _aggregate(values):
    n = len(values)
    if n == 0:
        return math.nan, math.nan
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, 1.96 * math.sqrt(var / n)


def run_experiment(spec, workers=1):
    """Execute the spec; returns (rows, manifest) and writes CSV + manifest
    when spec.output is set."""
    validate_spec(spec)
    kind, _ = EXPERIMENTS[spec.experiment]
    metrics = spec.resolved_metrics()
    root = spec.config.rng_seed
    seeds = [trial_seed(root, t) for t in range(spec.trials)]

    rows = []
    for value in spec.sweep_values:
        cfg_v = apply_sweep(spec.config, spec.sweep_variable, value)
        tasks = [(cfg_v.to_dict(), kind, tuple(metrics), s) for s in seeds]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
        else:
            results = [_run_one(t) for t in tasks]
        for metric in metrics:
            vals = [r[metric] for r in results if metric in r]
            mean, ci = _aggregate(vals)
            rows.append(ResultRow(sweep=value, metric=metric, mean=mean, ci95=ci, trials=len(vals)))

    manifest = {
        "experiment": spec.experiment,
        "sweep_variable": spec.sweep_variable,
        "sweep_values": list(spec.sweep_values),
        "trials": spec.trials,
        "seed": root,
        "metrics": metrics,
        "config": spec.config.to_dict(),
        "spec_hash": hashlib.sha256(
            json.dumps(spec.to_dict(), sort_keys=True).encode()).hexdigest(),
        "version": __version__,
    }
    if spec.output:
        write_outputs(spec.output, rows, manifest)
    return rows, manifest


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def write_outputs(path, rows, manifest):
    out_dir = os.path.dirname(path)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("sweep,metric,mean,ci95,trials\n")
        for r in rows:
            fh.write(f"{_fmt(r.sweep)},{r.metric},{_fmt(r.mean)},{_fmt(r.ci95)},{r.trials}\n")
    stem, _ = os.path.splitext(path)
    with open(stem + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def convergence_traces(cfg, max_draws=50):
    """Per-solver iteration traces on one seeded instance (for the
    convergence figures): inner fixed-point and WMMSE passes of the first
    outer round, plus the outer-loop trace.  Draws trial substreams of
    cfg.rng_seed until a QoS-feasible instance appears (deterministic:
    the first feasible trial index wins)."""
    root = cfg.rng_seed
    chosen = 0
    for t in range(max_draws):
        cfg_t = SystemConfig.from_dict({**cfg.to_dict(), "rng_seed": trial_seed(root, t)})
        probe = _trial_jdpc(cfg_t, ("infeasible_fraction",))
        if probe["infeasible_fraction"] == 0.0:
            cfg, chosen = cfg_t, t
            break
    _, ls, pa, pp, coeffs, sets, rc = _scenario_pipeline(cfg)
    prefactor = 1.0 - cfg.pilot_len / cfg.coherence_len
    p0 = np.full(cfg.n_d2d, cfg.max_power_d2d)
    cell = dpcc(rc, p0, cfg.sinr_target, cfg.max_power_cu, tol=cfg.tol_power, record_trace=True)
    cell_trace = [
        {"iteration": i, "objective": prefactor * float(np.sum(np.log2(1.0 + bound_sinrs(rc, q, p0)[1]))),
         "residual": None if i == 0 else float(np.max(np.abs(q - cell.trace[i - 1])))}
        for i, q in enumerate(cell.trace)
    ]
    d2d = dpcd(rc, cell.q_s, cfg.sinr_target, cfg.max_power_d2d,
               tol_wmmse=cfg.tol_wmmse, bisect_rtol=cfg.tol_power)
    d2d_trace = [{"iteration": i + 1, "objective": prefactor * obj, "residual": None}
                 for i, obj in enumerate(d2d.objective_trace)]
    joint = jdpc(rc, cfg.sinr_target, cfg.max_power_cu, cfg.max_power_d2d,
                 tol_power=cfg.tol_power, tol_wmmse=cfg.tol_wmmse, prefactor=prefactor)
    joint_trace = [{"iteration": i + 1, "objective": obj, "residual": None}
                   for i, obj in enumerate(joint.trace)]
    return {"cellular": cell_trace, "d2d": d2d_trace, "joint": joint_trace,
            "feasible": joint.feasible, "trial": chosen}
