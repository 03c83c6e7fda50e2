"""Job execution: turn a validated JobConfig into output files.

Exit-code contract (mirrored by the CLI process code):
  0  success
  2  configuration rejected (bad field values, inconsistent blocks)
  3  numerical failure (quadrature, linear algebra, simulation)
  4  diagnostics ran but flagged the model/dynamics (|z| > 4 or a
     one-sided check failed)
"""
from __future__ import annotations

import dataclasses
import io
import json
import math
import warnings
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from . import conditioned_sim as sim
from . import resolvent
from .errors import ConfigError, LevyCondError, ModelError
from .harmonic import HarmonicFn, phi_bounded_set
from .hitting import PointSet
from .levy_model import check_condition_A, check_lattice_condition, tail_order
from .schemas import JobConfig, OutputFile, RunRequest, RunResponse

try:
    TOOL_VERSION = version("levy-conditioner")
except PackageNotFoundError:  # running from a source tree
    TOOL_VERSION = "0.1.0"

_Z_GATE = 4.0


def _fmt(v) -> str:
    # repr of a Python float is the shortest round-trip decimal
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _meta_lines(cfg: JobConfig, seed: int) -> list[str]:
    return [
        f"# tool: levy-conditioner {TOOL_VERSION}",
        f"# job: {cfg.job}",
        f"# model: {cfg.model.label()}",
        f"# gamma: {cfg.gamma!r}",
        f"# seed: {seed}",
        f"# abs_tol: {cfg.quad.abs_tol!r}",
        f"# rel_tol: {cfg.quad.rel_tol!r}",
    ]


def _csv(cfg: JobConfig, seed: int, header: list[str], rows) -> str:
    buf = io.StringIO()
    for line in _meta_lines(cfg, seed):
        buf.write(line + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    return obj


def _report(cfg: JobConfig, seed: int, body: dict) -> str:
    head = {
        "tool": f"levy-conditioner {TOOL_VERSION}",
        "job": cfg.job,
        "model": cfg.model.label(),
        "gamma": cfg.gamma,
        "seed": seed,
        "abs_tol": cfg.quad.abs_tol,
        "rel_tol": cfg.quad.rel_tol,
    }
    return json.dumps(_json_safe({**head, **body}), indent=2) + "\n"


# --- per-job handlers -----------------------------------------------------

def _job_tabulate_h(cfg, seed, threads):
    model = cfg.model.build()
    quad = cfg.quad.build()
    rows = [
        (x, resolvent.h_gamma(model, cfg.gamma, x, quad))
        for x in cfg.grid.values()
    ]
    return [OutputFile(
        name="h_table.csv", kind="csv",
        content=_csv(cfg, seed, ["x", "h"], rows),
    )], []


def _job_tabulate_phi(cfg, seed, threads):
    model = cfg.model.build()
    quad = cfg.quad.build()
    avoid = cfg.set.build()
    xs = cfg.grid.values()
    rows = []
    if avoid.kind == "intervals":
        mc = cfg.mc.build()
        kind = "BoundedSet"
        for x in xs:
            est = phi_bounded_set(model, avoid, x, mc=mc, cfg=quad,
                                  threads=threads)
            rows.append((x, est.value, est.stderr, kind, cfg.gamma,
                         cfg.model.kind))
    else:
        fn = HarmonicFn(model, avoid, cfg.gamma, cfg=quad)
        for x in xs:
            val, err = fn.eval(x)
            rows.append((x, val, err, fn.kind, cfg.gamma, cfg.model.kind))
    header = ["x", "phi", "stderr", "kind", "gamma", "model"]
    return [OutputFile(
        name="phi_table.csv", kind="csv",
        content=_csv(cfg, seed, header, rows),
    )], []


def _job_verify_clocks(cfg, seed, threads):
    model = cfg.model.build()
    quad = cfg.quad.build()
    A = PointSet(tuple(sorted(cfg.set.points)))
    _check_x0(lambda v: any(abs(v - p) < 1e-12 for p in A.points), cfg.x0)
    block = cfg.clock
    if block.kind == "exponential":
        clock = sim.ClockSpec.exponential(block.grid[0])
    elif block.kind == "one_point":
        clock = sim.ClockSpec.one_point_hit(block.grid[0])
    elif block.kind == "two_point":
        clock = sim.ClockSpec.two_point_hit(block.grid[0],
                                            gamma_target=cfg.gamma)
    else:
        clock = sim.ClockSpec.inverse_local_time(block.grid[0], block.u)
    table = sim.verify_clock_limit(
        model, A, cfg.x0, clock, cfg.gamma, block.grid, quad
    )
    final = float(table.value[-1])
    rel_gap = abs(final - table.target) / max(abs(table.target), 1e-300)
    body = {
        "x0": cfg.x0,
        "clock": block.kind,
        "target": table.target,
        "final": final,
        "rel_gap": rel_gap,
        "rows": table.rows(),
    }
    return [OutputFile(
        name="clock.report.json", kind="json",
        content=_report(cfg, seed, body),
    )], []


def _check_x0(avoid_contains, x0) -> None:
    if avoid_contains(x0):
        raise ValueError(f"x0: {x0!r} lies inside the avoided set")


def _build_harmonic(cfg, quad, mc, threads):
    model = cfg.model.build()
    avoid = cfg.set.build()
    _check_x0(avoid.contains, cfg.x0)
    return model, HarmonicFn(model, avoid, cfg.gamma, cfg=quad, mc=mc,
                             threads=threads)


def _job_simulate(cfg, seed, threads):
    quad = cfg.quad.build()
    mc = dataclasses.replace(cfg.mc.build(), root_seed=seed)
    model, fn = _build_harmonic(cfg, quad, mc, threads)
    times = sorted(cfg.times)
    ens = sim.simulate_conditioned(model, fn, cfg.x0, times, mc, threads)
    rows = []
    for i in range(ens.n_paths):
        for j, tj in enumerate(ens.times):
            rows.append((i, float(tj), float(ens.values[i, j]),
                         float(ens.survival[i, j]), float(ens.weights[i, j])))
    csv = _csv(cfg, seed, ["path", "t", "value", "survival", "weight"], rows)
    mean_w, se_w = ens.mean_weight()
    summary = {
        "x0": ens.x,
        "phi_x0": ens.phi_x,
        "n_paths": ens.n_paths,
        "n_absorbed": int(ens.absorbed.sum()),
        "times": [float(t) for t in ens.times],
        "mean_weight": mean_w,
        "mean_weight_stderr": se_w,
        "biased": ens.biased,
    }
    warns = []
    if ens.biased:
        warns.append(
            "survival weights use skeleton absorption for this model; "
            "snapshot expectations carry discretization bias"
        )
    return [
        OutputFile(name="ensemble.csv", kind="csv", content=csv),
        OutputFile(name="summary.report.json", kind="json",
                   content=_report(cfg, seed, summary)),
    ], warns


def _job_diagnose(cfg, seed, threads):
    quad = cfg.quad.build()
    mc = dataclasses.replace(cfg.mc.build(), root_seed=seed)
    model, fn = _build_harmonic(cfg, quad, mc, threads)
    times = sorted(cfg.times) if cfg.times else [0.5, 1.0, 2.0]
    rows = sim.martingale_check(model, fn, cfg.x0, times, mc, threads)
    trans_times = sorted(set(times) | {2.0 * max(times)})
    rows += sim.transience_diagnostic(model, fn, cfg.x0, mc, threads,
                                      times=trans_times)
    flagged = [
        r["check"]
        for r in rows
        if (r.get("z") is not None and abs(r["z"]) > _Z_GATE)
        or r.get("passed") is False
    ]
    body = {
        "x0": cfg.x0,
        "times": times,
        "rows": rows,
        "flagged": flagged,
        "passed": not flagged,
    }
    out = OutputFile(name="diagnostic.report.json", kind="json",
                     content=_report(cfg, seed, body))
    warns = []
    if flagged:
        warns.append("diagnostics flagged: " + ", ".join(sorted(set(flagged))))
    return [out], warns, (4 if flagged else 0)


def _job_check_model(cfg, seed, threads):
    model = cfg.model.build()
    rows = []
    p = tail_order(model)
    rows.append({"check": "exponent_tail_order", "params": {},
                 "estimate": p, "stderr": None,
                 "target": None, "z": None, "passed": bool(p > 1.02)})
    m2 = model.m2
    rows.append({"check": "second_moment", "params":
                 {"infinite": not math.isfinite(m2)},
                 "estimate": m2 if math.isfinite(m2) else None,
                 "stderr": None, "target": None, "z": None})
    rep = check_condition_A(model, 1.0)
    rows.append({"check": "resolvent_integrability", "params": {"q": 1.0},
                 "estimate": rep.condition_A_integral_estimate,
                 "stderr": None, "target": None, "z": None,
                 "passed": rep.condition_A})
    if cfg.set is not None and cfg.set.kind == "lattice":
        ok = check_lattice_condition(model, cfg.set.spacing, 1e-3)
        rows.append({"check": "lattice_summability",
                     "params": {"spacing": cfg.set.spacing, "q": 1e-3},
                     "estimate": None, "stderr": None, "target": None,
                     "z": None, "passed": ok})
    body = {"rows": rows,
            "passed": all(r.get("passed", True) for r in rows)}
    return [OutputFile(name="model.report.json", kind="json",
                       content=_report(cfg, seed, body))], []


_HANDLERS = {
    "TabulateH": _job_tabulate_h,
    "TabulatePhi": _job_tabulate_phi,
    "VerifyClocks": _job_verify_clocks,
    "Simulate": _job_simulate,
    "Diagnose": _job_diagnose,
    "CheckModel": _job_check_model,
}


def execute(request: RunRequest) -> RunResponse:
    """Run one job; never raises, all failures land in the response."""
    cfg = request.config
    seed = (request.seed_override if request.seed_override is not None
            else cfg.mc.root_seed)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = _HANDLERS[cfg.job](cfg, seed, request.threads)
        if len(result) == 3:
            outputs, warns, code = result
        else:
            outputs, warns = result
            code = 0
        warns = [str(w.message) for w in caught] + warns
        return RunResponse(job=cfg.job, ok=code == 0, exit_code=code,
                           outputs=outputs, warnings=warns)
    except (ConfigError, ModelError, ValueError) as exc:
        return RunResponse(job=cfg.job, ok=False, exit_code=2,
                           error=f"{type(exc).__name__}: {exc}")
    except LevyCondError as exc:
        return RunResponse(job=cfg.job, ok=False, exit_code=3,
                           error=f"{type(exc).__name__}: {exc}")
