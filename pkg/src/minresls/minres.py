"""MINRES for symmetric, possibly indefinite systems, with curvature screening.

The kernel runs the classical three-term Lanczos recurrence together with the
Givens-QR update of the tridiagonal least-squares problem. On top of the
standard iterate updates it watches the sign of the scalar product
``c_{t-1} * gamma1_t`` formed from the rotation bookkeeping. Two identities of
the residual recurrence make that product meaningful:

    r_{t-1}' A r_{t-1} = -phi_{t-1}^2 * c_{t-1} * gamma1_t
    r_t' b             = ||r_t||^2

so ``c_{t-1} * gamma1_t >= 0`` certifies, with no extra matrix product, that
the previous residual is a direction of non-positive curvature which is also a
descent direction for a right-hand side ``b = -g``. The solver returns that
certificate (flag ``NPC``) instead of grinding on, or the usual inexact
solution (flag ``SOL``) once the residual estimate ``phi_t`` drops below
``tol * ||b||``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    NumericalBreakdown,
    SymmetricOperator,
    ZeroRightHandSide,
    as_vector,
    ensure_operator,
)

__all__ = [
    "SOL",
    "NPC",
    "MAXITER",
    "MinresTrace",
    "MinresOutcome",
    "minres_npc",
    "krylov_lsq_oracle",
]

SOL = "SOL"
NPC = "NPC"
MAXITER = "MAXITER"

# Lanczos vectors whose norm falls below this multiple of the running norm
# estimate of A close an (numerically) invariant subspace: the recurrence has
# reached its grade and the tridiagonal least-squares problem is solved exactly.
_BREAKDOWN_FACTOR = 64.0

# Relative-residual floor: phi below this multiple of machine epsilon (times
# ||b||) is round-off, not signal, so even tol = 0 stops there. This is the
# floating-point reading of "terminates at the grade": past it the recurrence
# only grinds noise (beta stalls near sqrt(eps) instead of collapsing).
_TOL_FLOOR = 64.0


@dataclass
class MinresTrace:
    """Per-iteration diagnostics, recorded only when requested.

    Entries indexed by iteration t = 1, 2, ... The ``phi``/``x``/``r`` lists
    cover completed iterations only; an iteration that exits with the curvature
    certificate stops before producing them.
    """

    alphas: list = field(default_factory=list)
    betas: list = field(default_factory=list)        # beta_{t+1}
    gamma1s: list = field(default_factory=list)
    gamma2s: list = field(default_factory=list)
    c_prevs: list = field(default_factory=list)      # c_{t-1}
    phi_prevs: list = field(default_factory=list)    # phi_{t-1}
    cs: list = field(default_factory=list)
    ss: list = field(default_factory=list)
    taus: list = field(default_factory=list)
    phis: list = field(default_factory=list)
    vs: list = field(default_factory=list)           # Lanczos vectors v_t
    xs: list = field(default_factory=list)           # iterates x_t
    rs: list = field(default_factory=list)           # residual recursions r_t


@dataclass
class MinresOutcome:
    """Result of one inner solve.

    ``curvature`` is the quadratic form d'Ad of the returned direction,
    obtained from the recurrence identities rather than an extra product. For
    an ``NPC`` outcome it is nonpositive by construction; ``residual`` then
    holds the certifying residual r_{t-1} itself.
    """

    flag: str
    direction: np.ndarray
    residual: np.ndarray
    inner_iters: int
    curvature: float
    rhs_norm: float
    residual_norm: float
    trace: MinresTrace | None = None


def minres_npc(A, b, tol: float, max_inner: int, *, collect: bool = False) -> MinresOutcome:
    """Run MINRES on ``A x = b`` until solution, curvature certificate, or cap.

    Parameters
    ----------
    A : SymmetricOperator or square ndarray
        Symmetric map; indefinite is fine, that is the point.
    b : ndarray
        Right-hand side, nonzero.
    tol : float
        Relative residual target in [0, 1): stop with ``SOL`` once
        ``phi_t <= tol * ||b||``. Values below the round-off floor (a small
        multiple of machine epsilon) are clamped to it, so ``tol = 0`` means
        "solve to working precision", not an infinite loop.
    max_inner : int
        Iteration cap; hitting it returns flag ``MAXITER`` with the current
        iterate and residual.
    collect : bool
        Record a :class:`MinresTrace` for diagnostics and tests.

    Notes
    -----
    The curvature test compares ``c_{t-1} * gamma1_t`` against zero exactly,
    no epsilon: ties (zero curvature) are certificates. Past that test the
    rotation norm ``gamma2`` cannot vanish, and a zero ``beta_{t+1}`` forces
    ``phi_t = 0`` and therefore the solution exit; both facts are asserted
    rather than branched on.
    """
    op = ensure_operator(A)
    b = as_vector(b, "b")
    if b.size != op.dim:
        raise ValueError(f"rhs has size {b.size}, operator dimension is {op.dim}")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if max_inner < 1:
        raise ValueError("max_inner must be at least 1")

    beta1 = float(np.linalg.norm(b))
    if beta1 == 0.0:
        raise ZeroRightHandSide("zero right-hand side: nothing to solve")

    eps = np.finfo(float).eps
    stop_tol = max(tol, _TOL_FLOOR * eps)
    n = b.size
    v = b / beta1
    v_prev = np.zeros(n)
    d_prev = np.zeros(n)
    d_prev2 = np.zeros(n)
    x = np.zeros(n)
    r_prev = b.copy()
    c_prev = -1.0
    s_prev = 0.0
    delta1 = 0.0        # delta_t^(1), carried into iteration t
    eps_t = 0.0         # epsilon_t, carried into iteration t
    phi_prev = beta1    # phi_{t-1}
    beta_t = 0.0        # beta_t (zero pairs with v_prev = 0 at t = 1)
    anorm_est = 0.0
    trace = MinresTrace() if collect else None

    for t in range(1, max_inner + 1):
        # Lanczos step
        p = op(v)
        alpha = float(v @ p)
        p = p - beta_t * v_prev
        p = p - alpha * v
        beta_next = float(np.linalg.norm(p))
        if not (math.isfinite(alpha) and math.isfinite(beta_next)):
            raise NumericalBreakdown(t, "non-finite Lanczos coefficients")
        anorm_est = max(anorm_est, abs(alpha) + beta_t + beta_next)
        if beta_next <= _BREAKDOWN_FACTOR * eps * anorm_est:
            # numerically invariant subspace: the grade is reached
            beta_next = 0.0

        # fold the previous rotation into column t of the tridiagonal
        delta2 = c_prev * delta1 + s_prev * alpha
        gamma1 = s_prev * delta1 - c_prev * alpha
        eps_next = s_prev * beta_next
        delta1_next = -c_prev * beta_next

        if trace is not None:
            trace.vs.append(v.copy())
            trace.alphas.append(alpha)
            trace.betas.append(beta_next)
            trace.gamma1s.append(gamma1)
            trace.c_prevs.append(c_prev)
            trace.phi_prevs.append(phi_prev)

        if c_prev * gamma1 >= 0.0:
            # non-positive curvature certificate: return the previous residual,
            # rescaled to the right-hand side norm
            r_norm = float(np.linalg.norm(r_prev))
            direction = (beta1 / r_norm) * r_prev
            curvature = -(beta1 * beta1) * (c_prev * gamma1)
            return MinresOutcome(NPC, direction, r_prev.copy(), t, curvature,
                                 beta1, phi_prev, trace)

        gamma2 = math.hypot(gamma1, beta_next)
        # gamma1 != 0 on this side of the curvature test, so the rotation exists
        assert gamma2 > 0.0
        c = gamma1 / gamma2
        s = beta_next / gamma2
        tau = c * phi_prev
        phi = s * phi_prev

        d_t = (v - delta2 * d_prev - eps_t * d_prev2) / gamma2
        x = x + tau * d_t

        if beta_next > 0.0:
            v_next = p / beta_next
            r_t = (s * s) * r_prev - (phi * c) * v_next
        else:
            v_next = None
            r_t = np.zeros(n)   # s = 0 makes phi exactly zero here

        if trace is not None:
            trace.gamma2s.append(gamma2)
            trace.cs.append(c)
            trace.ss.append(s)
            trace.taus.append(tau)
            trace.phis.append(phi)
            trace.xs.append(x.copy())
            trace.rs.append(r_t.copy())

        if phi <= stop_tol * beta1:
            curvature = float(x @ (b - r_t))
            return MinresOutcome(SOL, x, r_t, t, curvature, beta1, phi, trace)

        # beta_{t+1} = 0 would have zeroed phi and taken the solution exit
        assert beta_next > 0.0

        v_prev = v
        v = v_next
        r_prev = r_t
        d_prev2 = d_prev
        d_prev = d_t
        c_prev, s_prev = c, s
        phi_prev = phi
        beta_t = beta_next
        delta1 = delta1_next
        eps_t = eps_next

    curvature = float(x @ (b - r_prev))
    return MinresOutcome(MAXITER, x, r_prev.copy(), max_inner, curvature,
                         beta1, phi_prev, trace)


def krylov_lsq_oracle(A: np.ndarray, b: np.ndarray, t: int) -> float:
    """Dense reference for the optimal residual over the order-t Krylov space.

    Returns ``min_p ||b - A p||`` over ``p in span{b, Ab, ..., A^(t-1) b}``,
    computed by orthonormalizing the Krylov basis and solving a dense least
    squares problem. Intended for verification at small sizes; independent of
    the recurrence-based kernel above.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("oracle expects a dense square matrix")
    b = as_vector(b, "b")
    if t < 1:
        raise ValueError("Krylov order t must be at least 1")
    nb = np.linalg.norm(b)
    if nb == 0.0:
        raise ZeroRightHandSide("zero right-hand side")

    eps = np.finfo(float).eps
    scale = max(1.0, float(np.linalg.norm(A, 2)))
    basis = [b / nb]
    for _ in range(1, t):
        w = A @ basis[-1]
        for _ in range(2):              # modified Gram-Schmidt, twice
            for q in basis:
                w = w - (q @ w) * q
        nw = np.linalg.norm(w)
        if nw <= 100.0 * eps * scale:
            break                       # grade reached, basis is complete
        basis.append(w / nw)
    Q = np.column_stack(basis)
    M = A @ Q
    y, *_ = np.linalg.lstsq(M, b, rcond=None)
    return float(np.linalg.norm(b - M @ y))
