# Run the inner solver on a small indefinite system and verify the
# curvature certificate against a dense eigendecomposition.

import numpy as np

from minresls import NPC, SOL, minres_npc

rng = np.random.default_rng(7)
n = 8

# symmetric matrix with three negative eigenvalues planted by hand
Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
eigs = np.array([2.5, 1.8, 1.1, 0.9, 0.4, -0.3, -0.7, -1.2])
A = Q @ np.diag(eigs) @ Q.T
A = 0.5 * (A + A.T)
b = rng.standard_normal(n)

out = minres_npc(A, b, tol=1e-10, max_inner=200)
print("flag:", out.flag)
print("inner iterations:", out.inner_iters)

if out.flag == NPC:
    d = out.direction
    quad = d @ A @ d
    print("certified curvature  d'Ad =", out.curvature)
    print("dense recomputation  d'Ad =", quad)
    print("descent check        d'b  =", d @ b, "(must be > 0)")
    assert quad <= 1e-10 * (d @ d)
    assert d @ b > 0.0
    # the certificate found negative curvature without ever forming A's
    # spectrum; compare with what an eigensolver would report
    lam_min = np.linalg.eigvalsh(A).min()
    print("smallest eigenvalue of A  =", lam_min)
    print("Rayleigh quotient of d    =", quad / (d @ d))
elif out.flag == SOL:
    x = out.direction
    print("residual norm:", np.linalg.norm(b - A @ x))

# shifting A by a large multiple of the identity makes it positive definite,
# so the same right-hand side now yields a solution instead of a certificate
shifted = A + 5.0 * np.eye(n)
out2 = minres_npc(shifted, b, tol=1e-10, max_inner=200)
print()
print("shifted system flag:", out2.flag)
print("shifted residual norm:", out2.residual_norm)
assert out2.flag == SOL
