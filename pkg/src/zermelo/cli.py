"""Command line interface: ``zermelo run|presets|validate|bench``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time

import numpy as np

from .scenario import PRESETS, ScenarioError, load_scenario, run_scenario, serialize_scenario


def _load(args):
    s = load_scenario(args.config)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        changes["threads"] = args.threads
    if getattr(args, "out", None) is not None:
        changes["output"] = args.out
    return dataclasses.replace(s, **changes) if changes else s


def cmd_run(args) -> int:
    s = _load(args)
    report = run_scenario(s, log=lambda m: print(m, flush=True))
    failed = [r for r in report["runs"] if r.get("status") != "ok"]
    print(f"wrote {len(report['files'])} files to {s.output}" + (f"; {len(failed)} run(s) failed" if failed else ""))
    return 0


def cmd_presets(args) -> int:
    for name in sorted(PRESETS):
        print(f"{name:20s} {PRESETS[name]['description']}")
    return 0


def cmd_validate(args) -> int:
    s = _load(args)
    if args.print:
        print(serialize_scenario(s))
    else:
        print(f"ok: {s.name} ({len(s.metrics)} metrics, n_tacks {list(s.n_tacks)})")
    return 0


def cmd_bench(args) -> int:
    from .georce import SolverConfig, solve
    from .metrics import eval_jet, rollout
    from .scenario import scenario_from_dict

    s = scenario_from_dict({"preset": "position-only"})
    m = s.build_metrics()["alpha"]
    A, B = s.A_vec, s.B_vec
    rng = np.random.default_rng(args.seed or 0)
    x = np.column_stack([rng.uniform(0, 40, 10000), rng.uniform(0.5, 10, 10000)])
    v = rng.normal(size=(10000, 2))
    rows = []

    def timed(label, fn, repeat=3):
        best = np.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        rows.append((label, best))

    timed("jet, 1e4 points", lambda: eval_jet(m, 0.0, x, v, full=False))
    vs = np.tile((B - A) / 100000, (100000, 1))
    timed("rollout, 1e5 steps", lambda: rollout(m, A, 0.0, vs))
    timed("GEORCE-H solve, T=100", lambda: solve(m, A, B, 0.0, SolverConfig(T=100)), repeat=1)
    for label, sec in rows:
        print(f"{label:28s} {sec * 1e3:10.2f} ms")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zermelo", description="Time-dependent Zermelo navigation with tacking.")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("config", help="scenario JSON file or preset name")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="random seed for extra multi-start seeds")
        sp.add_argument("--threads", type=int, help="worker threads for gradient evaluations")

    r = sub.add_parser("run", help="run a scenario and write CSV/JSON/SVG")
    common(r)
    r.set_defaults(fn=cmd_run)
    pr = sub.add_parser("presets", help="list built-in scenarios")
    pr.set_defaults(fn=cmd_presets)
    v = sub.add_parser("validate", help="parse and validate a scenario")
    common(v)
    v.add_argument("--print", action="store_true", help="print the normalized scenario")
    v.set_defaults(fn=cmd_validate)
    b = sub.add_parser("bench", help="time the solver kernels")
    common(b, config=False)
    b.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
