import numpy as np
import pytest

from conftest import elliptic
from zermelo import Euclidean, OptimizerConfig, SolverConfig, TackProblem, optimize_tacks, solve, total_time
from zermelo.multiconvex import optimal_tack_constant, snell_residual
from zermelo.tacking import coalescence

TABLE_ALPHA = dict(a="2", b="2", c1="(3/2)*cos(pi/10)", c2="(3/2)*sin(pi/10)", theta="pi")
TABLE_BETA = dict(a="1", b="1", c1="3/4", c2="0", theta="0")


def _F(m, v):
    return float(m.F(0.0, np.zeros(2), np.asarray(v, float)))


@pytest.mark.parametrize("kwargs", [dict(lr=0), dict(tol=-1), dict(fd_step=0), dict(max_outer=0),
                                    dict(sub_iterations=0), dict(patience=0), dict(polish_iterations=-1)])
def test_optimizer_config_validation(kwargs):
    with pytest.raises(ValueError):
        OptimizerConfig(**kwargs)


def test_zero_tacks_equals_plain_solve(general_metric):
    cfg = SolverConfig(T=50)
    p = TackProblem([general_metric], [0, 0], [1, 1], solver=cfg)
    t, segs = total_time(p, np.zeros((0, 2)))
    traj, _ = solve(general_metric, [0, 0], [1, 1], cfg=cfg)
    assert t == traj.t[-1] and len(segs) == 1
    with pytest.raises(ValueError):
        optimize_tacks(p)


def test_constant_closed_form_on_the_segment():
    a, b = elliptic(**TABLE_ALPHA), elliptic(**TABLE_BETA)
    B = np.array([2.0, 8.0])
    p = TackProblem([a, b], [0, 0], B, solver=SolverConfig(T=40))
    for s in (0.2, 0.5, 0.9):
        z = s * B
        t, _ = total_time(p, z[None])
        assert t == pytest.approx(_F(a, z) + _F(b, B - z), abs=1e-8)


def test_segments_are_stitched_in_space_and_time():
    m1 = elliptic("1.5 + 0.5*sin(t)", "1.5 + 0.5*sin(t)", "0.3*cos(x)", "0", name="m1")
    m2 = elliptic("1", "1", "0.4*sin(t)", "0.2", name="m2")
    p = TackProblem([m1, m2, m1], [0, 0], [3, 1], solver=SolverConfig(T=30), t0=0.25)
    t, segs = total_time(p, np.array([[1.0, 0.5], [2.0, 1.5]]))
    assert segs[0].t[0] == 0.25
    for prev, nxt in zip(segs, segs[1:]):
        assert nxt.t[0] == prev.t[-1]
        assert np.array_equal(nxt.x[0], prev.x[-1])
    assert t == segs[-1].t[-1]


def test_degenerate_segment_has_zero_duration():
    p = TackProblem([Euclidean(), Euclidean(scale=2.0)], [0, 0], [1, 0], solver=SolverConfig(T=10))
    t, segs = total_time(p, np.array([[0.0, 0.0]]))
    assert segs[0].t[-1] - segs[0].t[0] == 0
    assert t == pytest.approx(2.0)
    assert coalescence(p, np.array([[0.0, 0.0]])) == ["A~z1"]
    assert coalescence(p, np.array([[0.5, 0.0]])) == []


def test_fd_gradient_matches_analytic_gradient():
    from zermelo.tacking import _gradient
    a, b = elliptic(**TABLE_ALPHA), elliptic(**TABLE_BETA)
    A, B = np.zeros(2), np.array([2.0, 8.0])
    p = TackProblem([a, b], A, B, solver=SolverConfig(T=20))
    z = np.array([[0.7, 3.1]])
    _, segs = total_time(p, z)
    g = _gradient(p, z, segs, None, None)
    exact = a.derivatives(0.0, A, z[0] - A)[3] - b.derivatives(0.0, A, B - z[0])[3]
    assert np.allclose(g[0], exact, atol=1e-7)


def test_shifted_circles_single_tack_matches_oracle():
    # unit circles shifted by +-(0, 1/2): tacking up and down beats the straight line
    a = elliptic("1", "1", "0", "1/2", name="up")
    b = elliptic("1", "1", "0", "-1/2", name="down")
    A, B = np.zeros(2), np.array([2.0, 0.0])
    p_star, t_star, kind = optimal_tack_constant(a, b, A, B)
    assert kind == "unique"
    prob = TackProblem([a, b], A, B, solver=SolverConfig(T=20),
                       optimizer=OptimizerConfig(max_outer=400))
    sol = optimize_tacks(prob)
    assert sol.total_time == pytest.approx(t_star, rel=1e-6)
    assert np.allclose(sol.tacks[0], p_star, atol=1e-4)
    r = snell_residual(a, b, sol.segments[0].t[-1], sol.tacks[0], sol.segments[0].v[-1], sol.segments[1].v[0])
    assert np.abs(r).max() < 1e-4
    assert sol.total_time < min(_F(a, B), _F(b, B))
    summary = sol.summary()
    assert summary["n_tacks"] == 1 and summary["metric_ids"] == ["up", "down"]


def test_best_so_far_is_monotone_and_frozen_axes_hold():
    a = elliptic("1", "1", "0", "1/2", name="up")
    b = elliptic("1", "1", "0", "-1/2", name="down")
    prob = TackProblem([a, b], [0, 0], [2, 0], solver=SolverConfig(T=10),
                       optimizer=OptimizerConfig(max_outer=60, polish=False),
                       seeds=[[[0.5, 0.2]]], frozen=[[False, True]])
    sol = optimize_tacks(prob)
    assert sol.tacks[0, 1] == 0.2
    best = np.minimum.accumulate(sol.history)
    assert best[-1] <= sol.history[0]
    assert np.all(np.diff(best) <= 0)


def test_multi_start_reports_every_seed():
    a = elliptic("1", "1", "0", "1/2", name="up")
    b = elliptic("1", "1", "0", "-1/2", name="down")
    prob = TackProblem([a, b], [0, 0], [2, 0], solver=SolverConfig(T=10),
                       optimizer=OptimizerConfig(max_outer=30, polish=False),
                       seeds=[[[1.0, 0.4]], [[1.0, -0.4]]])
    sol = optimize_tacks(prob)
    assert [r["seed_index"] for r in sol.summary()["runs"]] == [0, 1]
    assert sol.total_time == min(r["best_time"] for r in sol.runs) or prob.optimizer.polish


def test_snell_residual_converges_at_position_only_single_tack():
    from zermelo.scenario import scenario_from_dict
    s = scenario_from_dict({"preset": "position-only"})
    m = s.build_metrics()
    a, b = (m[k] for k in s.sequence(1))
    res = []
    for T in (500, 2000):
        p = TackProblem([a, b], s.A_vec, s.B_vec, solver=SolverConfig(T=T), seeds=[[[19.72, 10.15]]])
        sol = optimize_tacks(p)
        sg = sol.segments
        res.append(np.abs(snell_residual(a, b, sg[0].t[-1], sol.tacks[0], sg[0].v[-1], sg[1].v[0])).max())
    # endpoint velocities carry an O(1/T) bias
    assert res[1] < 1e-4
    assert res[0] / res[1] > 2.5
