# Start next to a strict saddle and escape it through certified negative
# curvature. Gradient-only methods crawl here because the gradient is tiny
# near the saddle; the certificate direction is not gradient-scaled, and the
# forward linesearch is allowed to take steps longer than 1.

import numpy as np

from minresls import SolverConfig, build_problem, solve

spec = build_problem("quartic_saddle", n=10)
obj = spec.make_objective()

rng = np.random.default_rng(909)
x0 = spec.start(rng)
print("start distance from saddle:", np.linalg.norm(x0))

trace = solve(obj, x0, SolverConfig(grad_tol=1e-10, check_invariants=True))

print(f"status={trace.status} iters={trace.iters}")
print(f"f_final={trace.f_final:.12f} (target {spec.f_opt})")
print()
print(" k   flag    step      gnorm        f")
for r in trace.records:
    mark = " <- certificate step" if r.flag == "NPC" else ""
    print(f"{r.k:2d}   {r.flag:3s}  {r.step:7.3f}  {r.gnorm:.3e}  {r.f: .6e}{mark}")

npc_steps = [r.step for r in trace.records if r.flag == "NPC"]
print()
print("certificate steps taken:", len(npc_steps))
print("longest certificate step:", max(npc_steps) if npc_steps else None)

assert trace.status == "CONVERGED"
assert abs(trace.f_final - spec.f_opt) <= 1e-8

# confirm the endpoint is a minimizer, not another stationary point: the
# Hessian there must be positive semidefinite
x = trace.x_final
H = np.column_stack([obj.hvp(x, e) for e in np.eye(spec.dim)])
lam_min = np.linalg.eigvalsh(0.5 * (H + H.T)).min()
print("smallest Hessian eigenvalue at the endpoint:", lam_min)
assert lam_min >= -1e-6
