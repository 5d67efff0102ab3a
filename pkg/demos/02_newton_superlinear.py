"""Inexact Newton on a nonconvex test function, watching the gradient tail.

The inexactness tolerance of the inner solver is tied to the current
gradient norm, so the last few iterations contract faster than linearly.
The printed log-ratios of consecutive gradient norms grow once the iterates
enter the basin.
"""
import math

import numpy as np

from minresls import ScheduleParams, SolverConfig, build_problem, solve

spec = build_problem("toy_sine", n=200)
obj = spec.make_objective()
x0 = spec.start(np.random.default_rng(41))

cfg = SolverConfig(schedule=ScheduleParams(mode="newton_mr"), grad_tol=1e-10)
trace = solve(obj, x0, cfg)

print(f"status={trace.status} iters={trace.iters} oracles={trace.oracles:.0f}")
print(f"f_final={trace.f_final:.6e} gnorm_final={trace.gnorm_final:.3e}")
print()
print(" k   flag      gnorm      log10 contraction")

gnorms = [r.gnorm for r in trace.records] + [trace.gnorm_final]
for k, rec in enumerate(trace.records):
    g_now, g_next = gnorms[k], gnorms[k + 1]
    ratio = math.inf if g_next == 0.0 else math.log10(g_now / g_next)
    print(f"{rec.k:2d}   {rec.flag:3s}   {g_now:10.3e}   {ratio:8.2f}")

assert trace.status == "CONVERGED"
tail = [math.log10(gnorms[i] / gnorms[i + 1]) if gnorms[i + 1] > 0 else math.inf
        for i in range(len(gnorms) - 3, len(gnorms) - 1)]
print()
print("last two contraction exponents:", [f"{t:.2f}" for t in tail])
