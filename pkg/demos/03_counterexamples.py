"""Two one-dimensional counterexamples to naive tacking intuition.

1. A unit circle followed by a circle of radius 1 - sin(t)/2: the best tack
   on the x-axis is not unique. Both pi and 3 pi give the total time 5 pi.
2. (2 + cos x)|v| followed by 2|v|: along the axis the total time is
   sin(c) + 10 pi, so the tack has two local optima, 3 pi/2 and 7 pi/2.

Run:  python demos/03_counterexamples.py
"""

import numpy as np

from zermelo import SolverConfig, TackProblem, optimize_tacks, total_time
from zermelo.scenario import _problem, scenario_from_dict

s = scenario_from_dict({"preset": "counterexample-1", "solver": {"T": 400}})
m = s.build_metrics()
for seed in s.seeds:
    sol = optimize_tacks(_problem(s, m, 1, [np.array(seed)]))
    print(f"seed {seed[0][0]:g}: tack at x = {sol.tacks[0, 0]:.4f}, time - 5 pi = {sol.total_time - 5 * np.pi:+.1e}")

s2 = scenario_from_dict({"preset": "counterexample-2"})
m2 = s2.build_metrics()
prob = TackProblem([m2["alpha"], m2["beta"]], s2.A_vec, s2.B_vec, solver=SolverConfig(T=4000))
print("\n   c      total time   sin(c) + 10 pi")
for c in np.linspace(0, 5 * np.pi, 11):
    t, _ = total_time(prob, np.array([[c, 0.0]]))
    print(f"{c:6.3f}  {t:12.6f}  {np.sin(c) + 10 * np.pi:12.6f}")
