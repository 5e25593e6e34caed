"""Tacking between two constant Zermelo metrics.

Three independent routes to the same answer for the constant bi-metric
going from (0, 0) to (2, 8):

* the convex-hull construction on the union of the two unit balls,
* the single-tack search along the curve of candidate tack points,
* the generic tack optimizer driving the pregeodesic solver.

Run:  python demos/01_constant_tacking.py
"""

import numpy as np

from zermelo import OptimizerConfig, SolverConfig, TackProblem, optimize_tacks
from zermelo.multiconvex import (
    ConvexIndicatrix,
    MultiConvexIndicatrix,
    min_time_multiconvex,
    optimal_tack_constant,
    snell_residual,
)
from zermelo.scenario import scenario_from_dict

s = scenario_from_dict({"preset": "constant-table2"})
m = s.build_metrics()
alpha, beta = m["alpha"], m["beta"]
A, B = s.A_vec, s.B_vec

print("straight line under alpha:", float(alpha.F(0, A, B - A)))
print("straight line under beta: ", float(beta.F(0, A, B - A)))

# the union of both unit balls; its convex hull decides the optimum
sigma = MultiConvexIndicatrix([ConvexIndicatrix.from_metric(alpha), ConvexIndicatrix.from_metric(beta)])
t_hull, witness = min_time_multiconvex(sigma, A, B)
print(f"\nhull construction: time {t_hull:.9f}, {witness.n_tacks} tack(s)")
for row in witness.rows():
    print("  leg", row[0], "from", np.round(row[1:3], 6), "velocity", np.round(row[3:5], 6), "for", round(row[5], 6))

p, t_tack, kind = optimal_tack_constant(alpha, beta, A, B)
print(f"\nsingle-tack search: time {t_tack:.9f} at p = {np.round(p, 6)} ({kind})")
d = snell_residual(alpha, beta, 0.0, p, p - A, B - p)
print("Snell residual at the tack:", d)

prob = TackProblem([alpha, beta], A, B, solver=SolverConfig(T=100), optimizer=OptimizerConfig(max_outer=500))
sol = optimize_tacks(prob)
print(f"\noptimizer (T = 100): time {sol.total_time:.9f} at z = {np.round(sol.tacks[0], 6)}")
print("all three agree on the tack point and beat both straight lines")
