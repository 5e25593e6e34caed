"""Scenario documents, built-in presets and the experiment runner.

A scenario is a JSON document. Metrics are named; each segment of a tack
curve uses ``order[i % len(order)]``. Numbers in ``A``/``B`` may be given as
constant expressions such as ``"5*pi"``.
"""

from __future__ import annotations

import copy
import json
import os
import time as _time
from dataclasses import dataclass, field, fields, asdict
from typing import Any, Optional

import numpy as np

from . import __version__
from .expressions import Expr, ExpressionError
from .georce import SolverConfig, SolverError, solve
from .io import render_svg, write_trajectory_csv
from .metrics import (
    EllipticZermelo,
    EllipticZermeloParams,
    FinslerMetric,
    MetricDomainError,
    Reversed,
    rollout,
)
from .tacking import OptimizerConfig, TackingError, TackProblem, optimize_tacks, total_time


class ScenarioError(ValueError):
    pass


ELLIPTIC_KEYS = ("a", "b", "c1", "c2", "theta")
TOP_KEYS = {
    "preset", "name", "metrics", "A", "B", "order", "n_tacks", "solver", "optimizer", "seeds",
    "frozen_axes", "random_seeds", "seed", "threads", "baselines", "straight_steps", "tack_scan",
    "output",
}

PRESETS: dict = {
    "constant-table2": {
        "description": "constant bi-metric, (0,0) to (2,8), 1 to 4 tacks",
        "doc": {
            "metrics": {
                "alpha": {"family": "elliptic", "a": "2", "b": "2", "c1": "(3/2)*cos(pi/10)",
                          "c2": "(3/2)*sin(pi/10)", "theta": "pi"},
                "beta": {"family": "elliptic", "a": "1", "b": "1", "c1": "3/4", "c2": "0", "theta": "0"},
            },
            "A": [0, 0], "B": [2, 8], "n_tacks": [1, 2, 3, 4],
        },
    },
    "time-only": {
        "description": "time-only alpha against constant beta, (0,0) to (5pi,0), beta first",
        "doc": {
            "metrics": {
                "alpha": {"family": "elliptic", "a": "2 + (1/2)*sin(t)", "b": "(3/4)*(2 + (1/2)*sin(t))",
                          "c1": "-cos(t*pi/4)", "c2": "-sin(t*pi/4)", "theta": "0"},
                "beta": {"family": "elliptic", "a": "7", "b": "7/4", "c1": "-(3/2)", "c2": "0", "theta": "pi/4"},
            },
            "A": [0, 0], "B": ["5*pi", 0], "order": ["beta", "alpha"], "n_tacks": [1],
        },
    },
    "time-and-position": {
        "description": "symmetric time- and position-dependent circles, (0,1) to (10,1), one tack",
        "doc": {
            "metrics": {
                "alpha": {"family": "elliptic", "a": "1 + t + x^2 + y^2", "b": "1 + t + x^2 + y^2",
                          "c1": "1/2", "c2": "1/2", "theta": "0"},
                "beta": {"family": "elliptic", "a": "1 + t + x^2 + y^2", "b": "1 + t + x^2 + y^2",
                         "c1": "1/2", "c2": "-1/2", "theta": "0"},
            },
            "A": [0, 1], "B": [10, 1], "n_tacks": [1],
        },
    },
    "position-only": {
        "description": "R(y) = 3 arctan(y) shifted circles, (0,1) to (40,1), T = 100, 1 to 4 tacks",
        "doc": {
            "metrics": {
                "alpha": {"family": "elliptic", "a": "3*arctan(y)", "b": "3*arctan(y)",
                          "c1": "(1/2)*3*arctan(y)", "c2": "(1/2)*3*arctan(y)", "theta": "0"},
                "beta": {"family": "elliptic", "a": "3*arctan(y)", "b": "3*arctan(y)",
                         "c1": "(1/2)*3*arctan(y)", "c2": "-(1/2)*3*arctan(y)", "theta": "0"},
            },
            "A": [0, 1], "B": [40, 1], "n_tacks": [1, 2, 3, 4], "solver": {"T": 100},
        },
    },
    "counterexample-1": {
        "description": "unit circle then radius 1 - sin(t)/2, tack constrained to the x-axis, two seeds",
        "doc": {
            "metrics": {
                "alpha": {"family": "elliptic", "a": "1", "b": "1", "c1": "0", "c2": "0", "theta": "0"},
                "beta": {"family": "elliptic", "a": "1 - 0.5*sin(t)", "b": "1 - 0.5*sin(t)", "c1": "0",
                         "c2": "0", "theta": "0"},
            },
            "A": [0, 0], "B": ["5*pi", 0], "n_tacks": [1], "seeds": [[[2, 0]], [[8, 0]]],
            "frozen_axes": [1],
        },
    },
    "counterexample-2": {
        "description": "(2 + cos x)|v| then 2|v|, tack constrained to the x-axis, two seeds",
        "doc": {
            "metrics": {
                "alpha": {"family": "elliptic", "a": "1/(2 + cos(x))", "b": "1/(2 + cos(x))", "c1": "0",
                          "c2": "0", "theta": "0"},
                "beta": {"family": "elliptic", "a": "1/2", "b": "1/2", "c1": "0", "c2": "0", "theta": "0"},
            },
            "A": [0, 0], "B": ["5*pi", 0], "n_tacks": [1], "seeds": [[[4, 0]], [[11, 0]]],
            "frozen_axes": [1], "tack_scan": 100,
        },
    },
}


@dataclass(frozen=True)
class Scenario:
    name: str
    metrics: tuple          # ((name, spec-dict-as-sorted-tuple), ...)
    A: tuple
    B: tuple
    order: tuple = ("alpha", "beta")
    n_tacks: tuple = (1,)
    solver: SolverConfig = field(default_factory=SolverConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    seeds: Optional[tuple] = None
    frozen_axes: tuple = ()
    random_seeds: int = 0
    seed: int = 0
    threads: int = 1
    baselines: bool = True
    straight_steps: int = 100000
    tack_scan: int = 0
    output: str = "out"

    @property
    def A_vec(self) -> np.ndarray:
        return np.array([_number(v) for v in self.A])

    @property
    def B_vec(self) -> np.ndarray:
        return np.array([_number(v) for v in self.B])

    def metric_specs(self) -> dict:
        return {k: dict(v) for k, v in self.metrics}

    def build_metrics(self) -> dict:
        specs = self.metric_specs()
        return {k: _build_metric(k, specs[k], specs) for k in specs}

    def sequence(self, n_tacks: int) -> list:
        return [self.order[i % len(self.order)] for i in range(n_tacks + 1)]


def _number(v) -> float:
    if isinstance(v, bool):
        raise ScenarioError("booleans are not coordinates")
    if isinstance(v, (int, float)):
        return float(v)
    e = Expr(v)
    if not e.is_constant:
        raise ScenarioError(f"coordinate {v!r} must be constant")
    return float(e.value(0.0, 0.0, 0.0))


def _build_metric(name, spec, specs, depth=0) -> FinslerMetric:
    if depth > 8:
        raise ScenarioError("reversed metrics nest too deeply")
    fam = spec["family"]
    if fam == "elliptic":
        params = EllipticZermeloParams(**{k: spec.get(k, "0") for k in ELLIPTIC_KEYS})
        return EllipticZermelo(params, name=name)
    inner = spec["metric"]
    if isinstance(inner, str):
        m = _build_metric(inner, specs[inner], specs, depth + 1)
    else:
        m = _build_metric(f"{name}.inner", dict(inner), specs, depth + 1)
    out = Reversed(m)
    out.name = name
    return out


# ---------------------------------------------------------------------------
# parsing


def _reject_unknown(d: dict, allowed, where):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ScenarioError(f"unknown key(s) {extra} in {where}")


def _freeze(obj):
    if isinstance(obj, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in obj.items()))
    if isinstance(obj, list):
        return tuple(_freeze(v) for v in obj)
    return obj


def _check_metric_spec(name, spec, names):
    if not isinstance(spec, dict):
        raise ScenarioError(f"metric {name!r} must be an object")
    fam = spec.get("family")
    if fam == "elliptic":
        _reject_unknown(spec, ("family",) + ELLIPTIC_KEYS, f"metric {name!r}")
        for k in ("a", "b", "c1", "c2"):
            if k not in spec:
                raise ScenarioError(f"metric {name!r} is missing {k!r}")
        out = {"family": "elliptic"}
        for k in ELLIPTIC_KEYS:
            v = spec.get(k, "0")
            if isinstance(v, bool) or not isinstance(v, (str, int, float)):
                raise ScenarioError(f"metric {name!r}: {k} must be an expression string or number")
            try:
                Expr(v)
            except ExpressionError as exc:
                raise ScenarioError(f"metric {name!r}, field {k}: {exc}") from None
            out[k] = v if isinstance(v, str) else repr(v)
        return out
    if fam == "reversed":
        _reject_unknown(spec, ("family", "metric"), f"metric {name!r}")
        inner = spec.get("metric")
        if isinstance(inner, str):
            if inner not in names:
                raise ScenarioError(f"metric {name!r} reverses unknown metric {inner!r}")
            return {"family": "reversed", "metric": inner}
        return {"family": "reversed", "metric": _check_metric_spec(f"{name}.metric", inner, names)}
    raise ScenarioError(f"unknown metric family {fam!r} in metric {name!r} (expected 'elliptic' or 'reversed')")


def _config(cls, d, where):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ScenarioError(f"{where} must be an object")
    _reject_unknown(d, [f.name for f in fields(cls)], where)
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def _point(v, where):
    if not isinstance(v, list) or len(v) != 2:
        raise ScenarioError(f"{where} must be a list of two coordinates")
    try:
        [_number(c) for c in v]
    except (ExpressionError, ScenarioError) as exc:
        raise ScenarioError(f"{where}: {exc}") from None
    return tuple(v)


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    _reject_unknown(doc, TOP_KEYS, "scenario")
    doc = copy.deepcopy(doc)
    if "preset" in doc:
        name = doc.pop("preset")
        if name not in PRESETS:
            raise ScenarioError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
        base = copy.deepcopy(PRESETS[name]["doc"])
        base["name"] = name
        for k, v in doc.items():
            if k in ("solver", "optimizer") and isinstance(v, dict):
                base[k] = {**base.get(k, {}), **v}
            else:
                base[k] = v
        doc = base
    for req in ("metrics", "A", "B"):
        if req not in doc:
            raise ScenarioError(f"scenario is missing {req!r}")
    metrics = doc["metrics"]
    if not isinstance(metrics, dict) or not metrics:
        raise ScenarioError("'metrics' must be a non-empty object")
    specs = {k: _check_metric_spec(k, v, set(metrics)) for k, v in metrics.items()}
    order = doc.get("order", [k for k in ("alpha", "beta") if k in specs] or sorted(specs))
    if not isinstance(order, list) or not order:
        raise ScenarioError("'order' must be a non-empty list of metric names")
    for k in order:
        if k not in specs:
            raise ScenarioError(f"'order' names unknown metric {k!r}")
    n_tacks = doc.get("n_tacks", [1])
    if isinstance(n_tacks, int):
        n_tacks = [n_tacks]
    if not isinstance(n_tacks, list) or any(isinstance(n, bool) or not isinstance(n, int) or n < 0 for n in n_tacks):
        raise ScenarioError("'n_tacks' must be a non-negative integer or a list of them")
    seeds = doc.get("seeds")
    if seeds is not None:
        try:
            seeds = tuple(tuple(tuple(float(c) for c in p) for p in s) for s in seeds)
        except (TypeError, ValueError):
            raise ScenarioError("'seeds' must be a list of tack lists [[x, y], ...]") from None
    frozen_axes = doc.get("frozen_axes", [])
    if not isinstance(frozen_axes, list) or any(a not in (0, 1) for a in frozen_axes):
        raise ScenarioError("'frozen_axes' must be a list drawn from [0, 1]")
    scalars = {}
    for key, typ, default in (("random_seeds", int, 0), ("seed", int, 0), ("threads", int, 1),
                              ("straight_steps", int, 100000), ("tack_scan", int, 0)):
        v = doc.get(key, default)
        if isinstance(v, bool) or not isinstance(v, typ) or v < 0:
            raise ScenarioError(f"'{key}' must be a non-negative integer")
        scalars[key] = v
    if scalars["threads"] < 1 or scalars["straight_steps"] < 1:
        raise ScenarioError("'threads' and 'straight_steps' must be positive")
    baselines = doc.get("baselines", True)
    if not isinstance(baselines, bool):
        raise ScenarioError("'baselines' must be true or false")
    s = Scenario(
        name=str(doc.get("name", "scenario")),
        metrics=_freeze(specs),
        A=_point(doc["A"], "A"),
        B=_point(doc["B"], "B"),
        order=tuple(order),
        n_tacks=tuple(n_tacks),
        solver=_config(SolverConfig, doc.get("solver"), "solver"),
        optimizer=_config(OptimizerConfig, doc.get("optimizer"), "optimizer"),
        seeds=seeds,
        frozen_axes=tuple(frozen_axes),
        baselines=baselines,
        output=str(doc.get("output", "out")),
        **scalars,
    )
    validate_scenario(s)
    return s


def validate_scenario(s: Scenario):
    """Build every metric and check its invariants at A and B at the departure time."""
    if np.array_equal(s.A_vec, s.B_vec):
        raise ScenarioError("A and B must differ")
    try:
        metrics = s.build_metrics()
    except (ExpressionError, KeyError) as exc:
        raise ScenarioError(str(exc)) from None
    for name, m in metrics.items():
        base = m.inner if isinstance(m, Reversed) else m
        while isinstance(base, Reversed):
            base = base.inner
        for P in (s.A_vec, s.B_vec):
            try:
                base.params.validate(0.0, P, where=f"t=0, x={P.tolist()}")
            except MetricDomainError as exc:
                raise ScenarioError(f"metric {name!r}: {exc}") from None
    if s.seeds:
        for seed in s.seeds:
            if len(seed) not in s.n_tacks:
                raise ScenarioError(f"seed with {len(seed)} tacks matches no entry of n_tacks {list(s.n_tacks)}")
    return metrics


def parse_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(doc)


def load_scenario(path_or_preset: str) -> Scenario:
    if not os.path.exists(path_or_preset) and path_or_preset in PRESETS:
        return scenario_from_dict({"preset": path_or_preset})
    with open(path_or_preset) as fh:
        return parse_scenario(fh.read())


def scenario_to_dict(s: Scenario) -> dict:
    def thaw(obj):
        if isinstance(obj, tuple) and obj and all(isinstance(p, tuple) and len(p) == 2 and isinstance(p[0], str)
                                                  for p in obj):
            return {k: thaw(v) for k, v in obj}
        return obj

    doc = {
        "name": s.name,
        "metrics": {k: thaw(v) for k, v in s.metrics},
        "A": list(s.A),
        "B": list(s.B),
        "order": list(s.order),
        "n_tacks": list(s.n_tacks),
        "solver": asdict(s.solver),
        "optimizer": asdict(s.optimizer),
        "frozen_axes": list(s.frozen_axes),
        "random_seeds": s.random_seeds,
        "seed": s.seed,
        "threads": s.threads,
        "baselines": s.baselines,
        "straight_steps": s.straight_steps,
        "tack_scan": s.tack_scan,
        "output": s.output,
    }
    if s.seeds is not None:
        doc["seeds"] = [[list(p) for p in seed] for seed in s.seeds]
    return doc


def serialize_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# running


def straight_line_time(metric: FinslerMetric, A, B, steps: int, t0: float = 0.0) -> float:
    v = np.tile((np.asarray(B, float) - np.asarray(A, float)) / steps, (steps, 1))
    traj = rollout(metric, A, t0, v)
    return float(traj.t[-1] - t0)


def _problem(s: Scenario, metrics: dict, n: int, seeds) -> TackProblem:
    frozen = None
    if s.frozen_axes:
        frozen = np.zeros((n, 2), bool)
        frozen[:, list(s.frozen_axes)] = True
    return TackProblem(
        metrics=[metrics[k] for k in s.sequence(n)],
        A=s.A_vec, B=s.B_vec, solver=s.solver, optimizer=s.optimizer,
        seeds=seeds, frozen=frozen, threads=s.threads,
    )


def _seeds_for(s: Scenario, n: int, previous, rng) -> list:
    A, B = s.A_vec, s.B_vec
    u = np.arange(1, n + 1)[:, None] / (n + 1)
    uniform = A + u * (B - A)
    given = [np.array(seed) for seed in (s.seeds or ()) if len(seed) == n]
    out = given or [uniform]
    if previous is not None and len(previous) == n - 1 and not given:
        # previous optimum with the extra tack parked at B: never worse than n - 1 tacks
        out.append(np.vstack([previous, B[None, :]]))
    scale = np.linalg.norm(B - A)
    for _ in range(s.random_seeds):
        jitter = rng.normal(scale=0.1 * scale, size=(n, 2))
        if s.frozen_axes:
            jitter[:, list(s.frozen_axes)] = 0.0
        out.append(uniform + jitter)
    return out


def run_scenario(s: Scenario, out_dir: Optional[str] = None, write: bool = True, log=None) -> dict:
    """Baselines and tack optimizations for every requested n_tacks; writes CSV/JSON/SVG."""
    say = log or (lambda msg: None)
    out_dir = out_dir or s.output
    if write:
        os.makedirs(out_dir, exist_ok=True)
    metrics = validate_scenario(s)
    names = list(s.metric_specs())
    A, B = s.A_vec, s.B_vec
    report: dict[str, Any] = {
        "version": __version__,
        "scenario": scenario_to_dict(s),
        "baselines": {"straight": {}, "pregeodesic": {}},
        "runs": [],
        "files": [],
    }
    base_trajs = []
    if s.baselines:
        for k in dict.fromkeys(s.order):
            t0 = _time.perf_counter()
            report["baselines"]["straight"][k] = {
                "time": straight_line_time(metrics[k], A, B, s.straight_steps), "steps": s.straight_steps,
                "seconds": _time.perf_counter() - t0}
            t0 = _time.perf_counter()
            entry: dict[str, Any] = {}
            try:
                traj, diag = solve(metrics[k], A, B, 0.0, s.solver)
                entry.update(time=float(traj.t[-1]), iterations=diag.iterations, converged=diag.converged,
                             residual=diag.residual, status="ok")
                base_trajs.append((names.index(k), traj, float(traj.t[-1])))
                if write:
                    fn = f"pregeodesic_{k}.csv"
                    write_trajectory_csv(os.path.join(out_dir, fn), [traj])
                    entry["csv"] = fn
                    report["files"].append(fn)
            except (SolverError, MetricDomainError, ValueError) as exc:
                entry.update(status="error", error=str(exc))
            entry["seconds"] = _time.perf_counter() - t0
            report["baselines"]["pregeodesic"][k] = entry
            say(f"baseline {k}: straight {report['baselines']['straight'][k]['time']:.6g}, "
                f"pregeodesic {entry.get('time', float('nan')):.6g}")
    rng = np.random.default_rng(s.seed)
    previous = None
    for n in s.n_tacks:
        t0 = _time.perf_counter()
        run: dict[str, Any] = {"n_tacks": n, "sequence": s.sequence(n)}
        try:
            if n == 0:
                tot, segs = total_time(_problem(s, metrics, 0, None), np.zeros((0, 2)))
                run.update(status="ok", total_time=tot, tacks=[], segment_times=[float(g.t[-1] - g.t[0]) for g in segs])
                previous = np.zeros((0, 2))
            else:
                seeds = _seeds_for(s, n, previous, rng)
                sol = optimize_tacks(_problem(s, metrics, n, seeds))
                segs = sol.segments
                run.update(status="ok", **sol.summary())
                previous = sol.tacks
            if write:
                fn = f"tacks_{n}.csv"
                write_trajectory_csv(os.path.join(out_dir, fn), segs)
                svg = f"tacks_{n}.svg"
                idx = [names.index(k) for k in s.sequence(n)]
                with open(os.path.join(out_dir, svg), "w") as fh:
                    fh.write(render_svg(f"{s.name}: {n} tack(s)", names, segs, idx, run["total_time"], base_trajs))
                run.update(csv=fn, svg=svg)
                report["files"] += [fn, svg]
        except (TackingError, SolverError, MetricDomainError, ValueError) as exc:
            run.update(status="error", error=str(exc))
        run["seconds"] = _time.perf_counter() - t0
        report["runs"].append(run)
        say(f"n_tacks={n}: {run.get('status')} total {run.get('total_time', float('nan')):.6g} "
            f"({run['seconds']:.1f} s)")
    if s.tack_scan:
        report["tack_scan"] = tack_scan(s, metrics, s.tack_scan)
    if write:
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True, default=float)
        report["files"].append("report.json")
    return report


def tack_scan(s: Scenario, metrics: dict, count: int) -> dict:
    """Total time with a single tack at interior points of the segment AB."""
    A, B = s.A_vec, s.B_vec
    problem = _problem(s, metrics, 1, None)
    frac = np.linspace(0.0, 1.0, count + 2)[1:-1]
    times = []
    warm = None
    for f in frac:
        tot, warm = total_time(problem, (A + f * (B - A))[None, :], warm=warm)
        times.append(tot)
    return {"fraction": frac.tolist(), "tacks": [(A + f * (B - A)).tolist() for f in frac], "total_time": times}
