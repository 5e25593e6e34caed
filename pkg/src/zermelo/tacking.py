"""Tack-point optimization for a fixed sequence of metrics.

Each outer iteration solves every segment pregeodesic with a capped number
of warm-started GEORCE-H iterations, differentiates the total arrival time
with respect to the tack points by central differences and takes one ADAM
step. Segment clocks are stitched: segment i departs at the absolute arrival
time of segment i-1.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .georce import SolverConfig, solve
from .metrics import DiscreteTrajectory, FinslerMetric

COALESCE_TOL = 1e-4


class TackingError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_outer: int = 10000
    sub_iterations: int = 10
    tol: float = 1e-4
    fd_step: float = 1e-5
    patience: int = 50
    polish: bool = True
    polish_iterations: int = 30

    def __post_init__(self):
        if self.lr <= 0 or self.tol <= 0 or self.fd_step <= 0:
            raise ValueError("lr, tol and fd_step must be positive")
        if self.max_outer < 1 or self.sub_iterations < 1 or self.patience < 1 or self.polish_iterations < 0:
            raise ValueError("iteration caps must be positive")


@dataclass
class TackProblem:
    """Metric sequence F^0, ..., F^k between A and B with k = n_tacks tack points.

    ``seeds`` is a list of initial tack arrays of shape (k, n); the default
    is the uniform subdivision of the segment AB. ``frozen`` is a boolean
    mask of the same shape marking coordinates held fixed.
    """

    metrics: Sequence[FinslerMetric]
    A: np.ndarray
    B: np.ndarray
    solver: SolverConfig = field(default_factory=SolverConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    seeds: Optional[list] = None
    frozen: Optional[np.ndarray] = None
    t0: float = 0.0
    threads: int = 1

    def __post_init__(self):
        self.metrics = list(self.metrics)
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        if not self.metrics:
            raise ValueError("at least one metric is required")
        k, n = self.n_tacks, self.A.shape[0]
        if self.seeds is not None:
            self.seeds = [np.asarray(s, dtype=float).reshape(k, n) for s in self.seeds]
        if self.frozen is not None:
            self.frozen = np.asarray(self.frozen, dtype=bool).reshape(k, n)

    @property
    def n_tacks(self) -> int:
        return len(self.metrics) - 1

    @property
    def scale(self) -> float:
        return float(np.linalg.norm(self.B - self.A))

    def uniform_seed(self) -> np.ndarray:
        k = self.n_tacks
        s = np.arange(1, k + 1)[:, None] / (k + 1)
        return self.A + s * (self.B - self.A)

    def initial_seeds(self) -> list:
        return list(self.seeds) if self.seeds else [self.uniform_seed()]


@dataclass
class TackSolution:
    tacks: np.ndarray
    segments: list
    metric_ids: list
    total_time: float
    iterations: int = 0
    history: list = field(default_factory=list)
    converged: bool = False
    seed_index: int = 0
    coalesced: list = field(default_factory=list)
    runs: list = field(default_factory=list)

    @property
    def durations(self) -> list:
        return [float(s.t[-1] - s.t[0]) for s in self.segments]

    def summary(self) -> dict:
        return {
            "n_tacks": int(len(self.tacks)),
            "tacks": self.tacks.tolist(),
            "metric_ids": list(self.metric_ids),
            "total_time": float(self.total_time),
            "segment_times": self.durations,
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "seed_index": int(self.seed_index),
            "coalesced": list(self.coalesced),
            "runs": list(self.runs),
        }


def _degenerate(P, t) -> DiscreteTrajectory:
    return DiscreteTrajectory(t=np.array([t]), x=np.asarray(P, float)[None, :], v=np.zeros((0, len(P))))


def _waypoints(problem, z):
    return [problem.A, *np.asarray(z, dtype=float), problem.B]


def _solve_range(problem: TackProblem, way, first, last, t_start, warm, max_iter):
    """Solve segments first..last-1 along ``way`` departing at absolute time t_start."""
    out = []
    t = t_start
    tiny = 1e-12 * max(1.0, problem.scale)
    for i in range(first, last):
        P, Q = way[i], way[i + 1]
        if np.linalg.norm(Q - P) <= tiny:
            out.append(_degenerate(P, t))
            continue
        w = None
        if warm is not None and warm[i] is not None and warm[i].T == problem.solver.T:
            w = warm[i].v
        try:
            traj, _ = solve(problem.metrics[i], P, Q, t, problem.solver, v_init=w, max_iter=max_iter,
                            compute_residual=False)
        except Exception as exc:
            raise TackingError(f"segment {i} solve failed: {exc}") from exc
        out.append(traj)
        t = float(traj.t[-1])
    return out


def total_time(problem: TackProblem, z, warm=None, max_iter: Optional[int] = None):
    """Arrival time at B through tack points ``z`` and the segment trajectories."""
    z = np.asarray(z, dtype=float).reshape(problem.n_tacks, problem.A.shape[0])
    segs = _solve_range(problem, _waypoints(problem, z), 0, len(problem.metrics), problem.t0, warm, max_iter)
    return float(segs[-1].t[-1]), segs


def _time_dependent(problem) -> bool:
    return any(m.time_dependent for m in problem.metrics)


def _gradient(problem: TackProblem, z, segs, max_iter, pool):
    """Central-difference gradient of the total time, re-solving only affected segments."""
    k, n = z.shape
    h = problem.optimizer.fd_step * max(problem.scale, 1e-12)
    mask = np.ones((k, n), bool) if problem.frozen is None else ~problem.frozen
    coupled = _time_dependent(problem)
    base = float(segs[-1].t[-1])

    def perturbed(j, c, sign):
        zz = z.copy()
        zz[j, c] += sign * h
        way = _waypoints(problem, zz)
        # tack j joins segments j and j+1; with time dependence every later
        # departure time moves too
        last = len(problem.metrics) if coupled else j + 2
        new = _solve_range(problem, way, j, last, float(segs[j].t[0]), segs, max_iter)
        if coupled:
            return float(new[-1].t[-1])
        old = sum(float(s.t[-1] - s.t[0]) for s in segs[j:last])
        return base - old + sum(float(s.t[-1] - s.t[0]) for s in new)

    jobs = [(j, c, sgn) for j in range(k) for c in range(n) if mask[j, c] for sgn in (1.0, -1.0)]
    values = list(pool.map(lambda a: perturbed(*a), jobs)) if pool else [perturbed(*a) for a in jobs]
    g = np.zeros((k, n))
    for idx in range(0, len(jobs), 2):
        j, c, _ = jobs[idx]
        g[j, c] = (values[idx] - values[idx + 1]) / (2 * h)
    return g


def coalescence(problem: TackProblem, z, tol=COALESCE_TOL) -> list:
    """Pairs of waypoints closer than ``tol`` (A and B included)."""
    way = _waypoints(problem, z)
    names = ["A"] + [f"z{i + 1}" for i in range(len(z))] + ["B"]
    out = []
    for i in range(len(way)):
        for j in range(i + 1, len(way)):
            if (i, j) == (0, len(way) - 1):
                continue
            if np.linalg.norm(way[i] - way[j]) < tol:
                out.append(f"{names[i]}~{names[j]}")
    return out


def _optimize_one(problem: TackProblem, z0, pool):
    cfg = problem.optimizer
    z = np.array(z0, dtype=float)
    m1 = np.zeros_like(z)
    m2 = np.zeros_like(z)
    segs = None
    best = None
    history = []
    best_trace = []
    converged = False
    it = 0
    for it in range(1, cfg.max_outer + 1):
        total, segs = total_time(problem, z, warm=segs, max_iter=cfg.sub_iterations)
        if not np.isfinite(total):
            raise TackingError("non-finite total time")
        history.append(total)
        if best is None or total < best[0]:
            best = (total, z.copy(), segs)
        best_trace.append(best[0])
        # change of the best time over the last `patience` outer iterations
        if len(best_trace) > cfg.patience and abs(best_trace[-1 - cfg.patience] - best_trace[-1]) < cfg.tol:
            converged = True
            break
        g = _gradient(problem, z, segs, cfg.sub_iterations, pool)
        if not np.all(np.isfinite(g)):
            raise TackingError("non-finite gradient")
        m1 = cfg.beta1 * m1 + (1 - cfg.beta1) * g
        m2 = cfg.beta2 * m2 + (1 - cfg.beta2) * g * g
        mh = m1 / (1 - cfg.beta1**it)
        vh = m2 / (1 - cfg.beta2**it)
        z = z - cfg.lr * mh / (np.sqrt(vh) + cfg.eps)
    return best, history, it, converged


def _polish(problem: TackProblem, z, total, segs):
    """Quasi-Newton refinement of the ADAM result with fully converged segments.

    ADAM with a fixed learning rate stalls at a tack accuracy of roughly the
    square root of its time tolerance; BFGS on the same objective (central
    differences, full solves) restores first-order optimality at the tacks.
    """
    mask = np.ones(z.shape, bool) if problem.frozen is None else ~problem.frozen
    if not mask.any():
        return z, total, segs
    state = {"segs": segs, "best": (total, z.copy(), segs)}

    def unpack(free):
        zz = z.copy()
        zz[mask] = free
        return zz

    def fun(free):
        zz = unpack(free)
        try:
            tot, new = total_time(problem, zz, warm=state["segs"])
        except TackingError:
            return np.inf
        state["segs"] = new
        if tot < state["best"][0]:
            state["best"] = (tot, zz.copy(), new)
        return tot

    def jac(free):
        zz = unpack(free)
        tot, new = total_time(problem, zz, warm=state["segs"])
        return _gradient(problem, zz, new, None, None)[mask]

    try:
        minimize(fun, z[mask], jac=jac, method="BFGS",
                 options={"maxiter": problem.optimizer.polish_iterations, "gtol": 1e-9})
    except TackingError:
        pass
    best_total, best_z, best_segs = state["best"]
    return best_z, best_total, best_segs


def optimize_tacks(problem: TackProblem) -> TackSolution:
    """ADAM over tack points from every seed; the best observed solution wins."""
    if problem.n_tacks < 1:
        raise ValueError("optimize_tacks needs at least one tack")
    pool = ThreadPoolExecutor(problem.threads) if problem.threads > 1 else None
    try:
        results = []
        for idx, seed in enumerate(problem.initial_seeds()):
            best, history, iters, conv = _optimize_one(problem, seed, pool)
            results.append((best, history, iters, conv, idx))
    finally:
        if pool:
            pool.shutdown()
    # lowest time; ties broken by seed order
    best, history, iters, conv, idx = min(results, key=lambda r: (r[0][0], r[4]))
    total, z, segs = best
    # converge the segments at the best tack points, then refine them
    total, segs = total_time(problem, z, warm=segs)
    if problem.optimizer.polish:
        z, total, segs = _polish(problem, z, total, segs)
    runs = [
        {"seed_index": r[4], "best_time": float(r[0][0]), "tacks": r[0][1].tolist(), "iterations": r[2],
         "converged": r[3]}
        for r in results
    ]
    return TackSolution(
        tacks=z,
        segments=segs,
        metric_ids=[m.name for m in problem.metrics],
        total_time=total,
        iterations=iters,
        history=history,
        converged=conv,
        seed_index=idx,
        coalesced=coalescence(problem, z),
        runs=runs,
    )
