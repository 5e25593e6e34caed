"""GEORCE-H: fixed-point solver for pregeodesics of time-dependent Finsler metrics.

The boundary value problem is posed as a discrete control problem
minimizing the squared travel time sum_s F(t_s, x_s, v_s)^2 under the
forward equations x+ = x + v and t+ = t + F. Each iteration freezes the
metric quantities at the current iterate, runs the backward time-dual
recursion, solves the necessary conditions for the controls in closed form
and backtracks along the segment between old and new controls.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .metrics import (
    DiscreteTrajectory,
    FinslerJet,
    FinslerMetric,
    MetricDomainError,
    energy,
    eval_jet,
    rollout,
)

COND_LIMIT = 1e12


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-4
    T: int = 1000
    rho: float = 0.5
    max_iter: int = 10000
    max_backtracks: int = 60

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.T) != self.T or self.T < 2:
            raise ValueError("T must be an integer >= 2")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.max_iter < 1 or self.max_backtracks < 0:
            raise ValueError("iteration caps must be positive")


@dataclass
class GeorceState:
    iteration: int
    trajectory: DiscreteTrajectory
    jets: FinslerJet
    pi: np.ndarray
    mu_last: np.ndarray
    energies: list


@dataclass
class Diagnostics:
    iterations: int = 0
    converged: bool = False
    line_search_failed: bool = False
    energies: list = field(default_factory=list)
    backtracks: list = field(default_factory=list)
    step_sizes: list = field(default_factory=list)
    control_changes: list = field(default_factory=list)
    residual: float = float("nan")
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "line_search_failed": self.line_search_failed,
            "energies": [float(e) for e in self.energies],
            "backtracks": [int(b) for b in self.backtracks],
            "step_sizes": [float(a) for a in self.step_sizes],
            "control_changes": [float(c) for c in self.control_changes],
            "residual": float(self.residual),
            "message": self.message,
        }


def backward_duals(jets: FinslerJet) -> np.ndarray:
    """Time dual prices: pi[T-1] = 0, pi[s-1] = xi[s] + pi[s] * (1 + dF/dt[s])."""
    xi = np.asarray(jets.xi, dtype=float)
    growth = 1.0 + np.asarray(jets.dF_dt, dtype=float)
    T = len(xi)
    pi = np.zeros(T)
    acc = 0.0
    for s in range(T - 1, 0, -1):
        acc = xi[s] + acc * growth[s]
        pi[s - 1] = acc
    return pi


def inverse_spd(G):
    """Inverse of a batch of SPD matrices; raises when the condition number exceeds 1e12."""
    if G.shape[-1] == 2:
        # closed form for the planar case
        p, q, r = G[..., 0, 0], G[..., 0, 1], G[..., 1, 1]
        half_tr = 0.5 * (p + r)
        det = p * r - q * q
        disc = np.sqrt(np.maximum(half_tr * half_tr - det, 0.0))
        lo, hi = half_tr - disc, half_tr + disc
    else:
        w = np.linalg.eigvalsh(G)
        lo, hi = w[..., 0], w[..., -1]
    if np.any(~(lo > 0)) or np.any(hi > COND_LIMIT * lo):
        raise SolverError("fundamental tensor is singular or ill-conditioned (condition number > 1e12)")
    if G.shape[-1] == 2:
        inv = np.empty_like(G)
        inv[..., 0, 0] = r / det
        inv[..., 1, 1] = p / det
        inv[..., 0, 1] = inv[..., 1, 0] = -q / det
        return inv
    return np.linalg.inv(G)


def _update(jets: FinslerJet, pi, A, B):
    Ginv = inverse_spd(jets.G)
    r = jets.nu + pi[:, None] * jets.dF_dx
    # suffix sums over j > s, accumulated once in reverse
    tail = np.cumsum(r[::-1], axis=0)[::-1] - r
    w = tail + jets.zeta + pi[:, None] * jets.dF_dv
    Gw = np.einsum("sij,sj->si", Ginv, w)
    mu_last = np.linalg.solve(Ginv.sum(axis=0), 2.0 * (A - B) - Gw.sum(axis=0))
    v = -0.5 * (np.einsum("sij,j->si", Ginv, mu_last) + Gw)
    return v, mu_last


def update_controls(jets: FinslerJet, pi, A, B) -> np.ndarray:
    """Closed-form control update from the necessary conditions with frozen jets."""
    return _update(jets, np.asarray(pi, dtype=float), np.asarray(A, float), np.asarray(B, float))[0]


def position_duals(jets: FinslerJet, pi, mu_last) -> np.ndarray:
    """All position duals from mu[s-1] = nu[s] + pi[s] dF/dx[s] + mu[s]."""
    T = len(pi)
    mu = np.empty((T, len(mu_last)))
    mu[-1] = mu_last
    for s in range(T - 1, 0, -1):
        mu[s - 1] = jets.nu[s] + pi[s] * jets.dF_dx[s] + mu[s]
    return mu


def stationarity_residual(jets: FinslerJet, pi, mu, v) -> np.ndarray:
    """2 G v + zeta + mu + pi dF/dv per step."""
    return 2.0 * np.einsum("sij,sj->si", jets.G, v) + jets.zeta + mu + pi[:, None] * jets.dF_dv


def necessary_conditions_residual(metric: FinslerMetric, traj: DiscreteTrajectory, A, B) -> float:
    """Max-norm residual of the necessary conditions at a trajectory.

    The duals are those implied by the trajectory's own jets; the control
    equations are then checked step by step together with feasibility.
    """
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    jets = eval_jet(metric, traj.t[:-1], traj.x[:-1], traj.v, full=False)
    pi = backward_duals(jets)
    _, mu_last = _update(jets, pi, A, B)
    mu = position_duals(jets, pi, mu_last)
    res = stationarity_residual(jets, pi, mu, traj.v)
    feas = np.abs(traj.v.sum(axis=0) - (B - A)).max()
    return float(max(np.abs(res).max(), feas))


def _project(v, A, B):
    return v + (B - A - v.sum(axis=0)) / len(v)


def _rollout_to(metric, A, B, t0, v):
    traj = rollout(metric, A, t0, v)
    # the cumulative sum lands on B only up to round-off
    traj.x[-1] = B
    return traj


def solve(
    metric: FinslerMetric,
    A,
    B,
    t0: float = 0.0,
    cfg: SolverConfig = SolverConfig(),
    v_init=None,
    max_iter: Optional[int] = None,
    callback: Optional[Callable[[GeorceState], None]] = None,
    compute_residual: bool = True,
):
    """Pregeodesic from A (at time t0) to B.

    ``v_init`` warm-starts the controls (projected onto the feasible set);
    ``max_iter`` overrides ``cfg.max_iter`` for capped sub-iterations.
    Returns ``(trajectory, diagnostics)``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError("A and B must have the same dimension")
    if np.array_equal(A, B):
        raise ValueError("A and B must differ")
    T = cfg.T
    if v_init is None:
        v = np.tile((B - A) / T, (T, 1))
    else:
        v = np.array(v_init, dtype=float)
        if v.shape != (T, A.shape[0]):
            raise ValueError(f"v_init must have shape {(T, A.shape[0])}")
        v = _project(v, A, B)
    traj = _rollout_to(metric, A, B, t0, v)
    E = energy(metric, traj)
    if not np.isfinite(E):
        raise SolverError("non-finite energy at initialization")
    diag = Diagnostics(energies=[E])
    cap = cfg.max_iter if max_iter is None else max_iter
    for it in range(1, cap + 1):
        jets = eval_jet(metric, traj.t[:-1], traj.x[:-1], traj.v, full=False)
        pi = backward_duals(jets) if metric.time_dependent else np.zeros(T)
        v_new, mu_last = _update(jets, pi, A, B)
        alpha = 1.0
        accepted = None
        if float(np.abs(v_new - traj.v).max()) < cfg.tol:
            # the full step is already below tolerance: take it only if it does
            # not raise the energy (round-off), and stop either way
            try:
                ctraj = _rollout_to(metric, A, B, t0, _project(v_new, A, B))
                Ec = energy(metric, ctraj)
            except MetricDomainError:
                Ec = np.inf
            if Ec <= E:
                diag.energies.append(Ec)
                diag.backtracks.append(0)
                diag.step_sizes.append(1.0)
                diag.control_changes.append(float(np.abs(ctraj.v - traj.v).max()))
                traj, E = ctraj, Ec
            diag.iterations = it
            diag.converged = True
            diag.message = "converged"
            break
        for k in range(cfg.max_backtracks + 1):
            cand = _project(alpha * v_new + (1.0 - alpha) * traj.v, A, B)
            try:
                ctraj = _rollout_to(metric, A, B, t0, cand)
                Ec = energy(metric, ctraj)
            except MetricDomainError:
                Ec = np.inf
            if np.isfinite(Ec) and not Ec > E:
                accepted = (ctraj, Ec, k)
                break
            alpha *= cfg.rho
        if accepted is None:
            diag.line_search_failed = True
            diag.message = f"line search failed after {cfg.max_backtracks} backtracks"
            break
        ctraj, Ec, k = accepted
        change = float(np.abs(ctraj.v - traj.v).max())
        traj, E = ctraj, Ec
        diag.iterations = it
        diag.energies.append(E)
        diag.backtracks.append(k)
        diag.step_sizes.append(alpha)
        diag.control_changes.append(change)
        if callback is not None:
            callback(GeorceState(it, traj, jets, pi, mu_last, diag.energies))
        if change < cfg.tol:
            diag.converged = True
            diag.message = "converged"
            break
    else:
        diag.message = "iteration cap reached"
    if compute_residual:
        diag.residual = necessary_conditions_residual(metric, traj, A, B)
    return traj, diag
