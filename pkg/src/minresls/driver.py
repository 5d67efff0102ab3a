"""Outer loop: regularized Newton / quasi-Newton steps from the inner solver.

Each iteration shifts the model matrix B_k by zeta_k, hands ``-g_k`` to the
inner MINRES kernel with relative tolerance theta_k, screens the returned
direction with a small-curvature test, and picks the stepsize with the search
matching the direction's flag. Tolerance and shift shrink with the gradient
norm, which is what produces the superlinear tail.

Schedules use natural log of (k + 1) wherever a log of the iteration counter
appears, so the k = 1 values stay positive.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    DegenerateMiddleMatrix,
    NoHessianOracle,
    NumericalBreakdown,
    Objective,
    StepsizeStagnation,
    as_vector,
)
from .hessians import LbfgsStore, exact_hvp_operator, regularized
from .linesearch import LinesearchConfig, armijo_backtrack, npc_linesearch
from .minres import MAXITER, NPC, SOL, minres_npc

__all__ = [
    "GD",
    "CONVERGED",
    "STAGNATED",
    "BUDGET",
    "DIVERGED",
    "ScheduleParams",
    "SolverConfig",
    "IterateRecord",
    "RunTrace",
    "schedule_eval",
    "curvature_test_basic",
    "curvature_test_refined",
    "solve",
]

GD = "GD"

CONVERGED = "CONVERGED"
STAGNATED = "STAGNATED"
BUDGET = "BUDGET"
DIVERGED = "DIVERGED"

_SCHEDULE_MODES = ("newton_mr", "lbfgs_mr", "coupled")


@dataclass(frozen=True)
class ScheduleParams:
    """Per-iteration rules for the inner tolerance, shift, and curvature floor.

    Modes:
      * ``newton_mr``: theta_k = min(tol_cap, sqrt(||g||))
      * ``lbfgs_mr``:  theta_k = min(tol_cap, ln(k+1) * sqrt(k ||g||))
      * ``coupled``:   theta_k = min(tol_cap, ||g||^beta), zeta_k = zeta_mult * theta_k

    The first two modes draw the shift from min(shift_cap, z_k ||g||^zeta_exp)
    with z_k = (k ln(k+1)^2)^zeta_exp. The curvature floor sequence is always
    a_k = (k ln(k+1)^2)^alpha / 2.
    """

    curvature_floor: float = 0.5e-12      # cap on the small-curvature threshold
    tol_cap: float = 0.1                  # cap on the inner relative tolerance
    shift_cap: float = 1e-12              # cap on the regularization shift
    alpha: float = 1.0
    beta: float = 1.0                     # gradient exponent, coupled mode only
    zeta_exp: float = 1.0
    npc_curvature_cap: float = 1e8        # refined test bound on |d'Bd| / ||d||^2
    mode: str = "newton_mr"
    zeta_mult: float = 1.0                # shift-to-tolerance ratio, coupled mode

    def __post_init__(self):
        if self.mode not in _SCHEDULE_MODES:
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if not (0.0 < self.curvature_floor):
            raise ValueError("curvature_floor must be positive")
        if not (0.0 < self.tol_cap < 1.0):
            raise ValueError("tol_cap must lie in (0, 1)")
        if self.shift_cap <= 0.0:
            raise ValueError("shift_cap must be positive")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if not (0.0 < self.zeta_exp <= 1.0):
            raise ValueError("zeta_exp must lie in (0, 1]")
        if self.beta <= 0.0 or self.zeta_mult <= 0.0:
            raise ValueError("beta and zeta_mult must be positive")


def schedule_eval(k: int, gnorm: float, sp: ScheduleParams):
    """Evaluate (theta_k, zeta_k, a_k) at outer iteration k >= 1."""
    if k < 1:
        raise ValueError("outer iteration index starts at 1")
    if not (gnorm > 0.0):
        raise ValueError("schedules need a positive gradient norm")
    base = k * math.log(k + 1.0) ** 2
    a_k = base ** sp.alpha / 2.0
    if sp.mode == "newton_mr":
        theta = min(sp.tol_cap, math.sqrt(gnorm))
        zeta = min(sp.shift_cap, base ** sp.zeta_exp * gnorm ** sp.zeta_exp)
    elif sp.mode == "lbfgs_mr":
        theta = min(sp.tol_cap, math.log(k + 1.0) * math.sqrt(k * gnorm))
        zeta = min(sp.shift_cap, base ** sp.zeta_exp * gnorm ** sp.zeta_exp)
    else:   # coupled
        theta = min(sp.tol_cap, gnorm ** sp.beta)
        zeta = sp.zeta_mult * theta
    return theta, zeta, a_k


def curvature_test_basic(ptBp: float, p_sq: float, gnorm: float,
                         a_k: float, sp: ScheduleParams) -> bool:
    """Accept a solution-path direction iff p'Bp >= min(floor, a_k ||g||^alpha) ||p||^2."""
    thresh = min(sp.curvature_floor, a_k * gnorm ** sp.alpha)
    return ptBp >= thresh * p_sq


def curvature_test_refined(ptBp: float, p_sq: float, gnorm_sq: float,
                           dtBd: float, d_sq: float, flag: str,
                           a_k: float, sp: ScheduleParams) -> bool:
    """Sharper acceptance used with quasi-Newton models.

    Solution-path directions must clear the floor against
    max(||p||^2, ||g||^2); curvature certificates must not be violently
    negative, |d'Bd| < cap * ||d||^2. Failing either demotes the step to
    plain gradient descent.
    """
    if flag == NPC:
        return abs(dtBd) < sp.npc_curvature_cap * d_sq
    gnorm = math.sqrt(gnorm_sq)
    thresh = min(sp.curvature_floor, a_k * gnorm ** sp.alpha)
    return ptBp >= thresh * max(p_sq, gnorm_sq)


@dataclass(frozen=True)
class SolverConfig:
    schedule: ScheduleParams = ScheduleParams()
    linesearch: LinesearchConfig = LinesearchConfig()
    max_inner: int = 1000
    grad_tol: float = 1e-10
    max_oracles: float = 1e5
    hessian: str = "exact"                # "exact" | "lbfgs"
    curvature_test: str = "auto"          # "auto" | "basic" | "refined"
    lbfgs_memory: int = 10
    check_invariants: bool = False

    def __post_init__(self):
        if self.hessian not in ("exact", "lbfgs"):
            raise ValueError(f"unknown hessian mode {self.hessian!r}")
        if self.curvature_test not in ("auto", "basic", "refined"):
            raise ValueError(f"unknown curvature test {self.curvature_test!r}")
        if self.max_inner < 1:
            raise ValueError("max_inner must be at least 1")
        if self.grad_tol < 0 or self.max_oracles <= 0:
            raise ValueError("grad_tol must be >= 0 and max_oracles > 0")

    @property
    def resolved_curvature_test(self) -> str:
        if self.curvature_test != "auto":
            return self.curvature_test
        return "basic" if self.hessian == "exact" else "refined"


@dataclass
class IterateRecord:
    k: int
    f: float
    gnorm: float
    flag: str               # SOL | NPC | GD
    step: float
    inner_iters: int
    theta: float
    zeta: float
    oracles: float          # cumulative, after this iteration
    time_ms: float          # cumulative wall clock
    capped: bool = False    # forward search hit its cap


@dataclass
class RunTrace:
    status: str
    records: list
    f_final: float
    gnorm_final: float
    x_final: np.ndarray | None
    iters: int
    oracles: float
    time_ms: float
    problem: str = ""
    config: str = ""
    seed: int | None = None
    repeat: int | None = None


class _InvariantViolation(AssertionError):
    pass


def _assert_direction_properties(flag, d, g, gnorm, theta, zeta, a_k, sp,
                                 Bbar, obj, curvature_bar):
    """Direction-quality assertions, enabled by ``check_invariants``.

    Descent and norm bounds for each flag; the constant-bearing lower bound
    for solution-path directions uses a dense operator norm and is only
    affordable (and only checked) at small dimension.
    """
    d_sq = float(d @ d)
    minus_dg = -float(d @ g)
    if flag == GD:
        if not np.array_equal(d, -g):
            raise _InvariantViolation("fallback direction is not the negative gradient")
        return
    if flag == NPC:
        if not (minus_dg > theta * gnorm * gnorm):
            raise _InvariantViolation("certificate direction lost its descent margin")
        if abs(math.sqrt(d_sq) - gnorm) > 1e-10 * (1.0 + gnorm):
            raise _InvariantViolation("certificate direction norm drifted from ||g||")
        with obj.counter.paused():
            true_quad = float(d @ Bbar(d))
        if not (true_quad - zeta * d_sq <= -zeta * d_sq + 1e-8):
            raise _InvariantViolation("certificate direction has positive model curvature")
        return
    # solution path (SOL, or accepted MAXITER iterate)
    bound = max(gnorm / sp.curvature_floor, gnorm ** (1.0 - sp.alpha) / a_k)
    if not (math.sqrt(d_sq) <= bound + 1e-10):
        raise _InvariantViolation("solution-path direction norm exceeds its bound")
    if Bbar.dim <= 50:
        with obj.counter.paused():
            dense = Bbar.to_dense()
        nb = float(np.linalg.norm(dense, 2))
        c_k = 1.0 / (nb + nb * nb)
        thresh = min(sp.curvature_floor, a_k * gnorm ** sp.alpha)
        if not (minus_dg > c_k * thresh * gnorm * gnorm):
            raise _InvariantViolation("solution-path direction lost its descent margin")


def solve(obj: Objective, x0, cfg: SolverConfig = SolverConfig()) -> RunTrace:
    """Minimize ``obj`` from ``x0``; returns the full run trace.

    Terminates CONVERGED when the gradient norm reaches ``grad_tol``,
    STAGNATED when a linesearch collapses, BUDGET when the oracle tally
    reaches ``max_oracles`` (checked once per iteration, so the total can
    overshoot by at most one iteration's work), and DIVERGED when the
    objective or gradient stops being finite.
    """
    x = as_vector(x0, "x0")
    if x.size != obj.dim:
        raise ValueError(f"x0 has size {x.size}, objective dimension is {obj.dim}")
    if cfg.hessian == "exact" and not obj.has_hvp:
        raise NoHessianOracle("exact mode needs a Hessian-vector oracle")

    sp = cfg.schedule
    ls = cfg.linesearch
    test_kind = cfg.resolved_curvature_test
    store = LbfgsStore(obj.dim, cfg.lbfgs_memory) if cfg.hessian == "lbfgs" else None

    t0 = time.perf_counter()
    records: list[IterateRecord] = []
    status = None
    gnorm = math.inf
    pending = None          # (s_vec, g_old) awaiting the next gradient

    f_x = obj.f(x)
    k = 0
    while True:
        k += 1
        g = obj.grad(x)
        gnorm = float(np.linalg.norm(g))
        if not (math.isfinite(f_x) and math.isfinite(gnorm)):
            status = DIVERGED
            break
        if store is not None and pending is not None:
            s_vec, g_old = pending
            store.update(s_vec, g - g_old)
            pending = None
        if gnorm <= cfg.grad_tol:
            status = CONVERGED
            break
        if obj.oracle_count >= cfg.max_oracles:
            status = BUDGET
            break

        theta, zeta, a_k = schedule_eval(k, gnorm, sp)
        base_op = exact_hvp_operator(obj, x) if store is None else store.operator()
        Bbar = regularized(base_op, zeta)
        b = -g

        d_curv = 0.0
        try:
            out = minres_npc(Bbar, b, theta, cfg.max_inner)
        except NumericalBreakdown:
            status = DIVERGED
            break
        except DegenerateMiddleMatrix:
            out = None

        if out is None:
            d = -g
            flag = GD
            inner = 0
        else:
            d = out.direction
            inner = out.inner_iters
            if out.flag == NPC:
                flag = NPC
                d_sq = float(d @ d)
                d_curv = out.curvature - zeta * d_sq
                if test_kind == "refined" and not curvature_test_refined(
                        0.0, 0.0, gnorm * gnorm, d_curv, d_sq, NPC, a_k, sp):
                    d = -g
                    flag = GD
            else:
                # SOL, or the iterate left standing at the inner cap
                flag = SOL
                ptBp = out.curvature
                p_sq = float(d @ d)
                if test_kind == "refined":
                    ok = curvature_test_refined(ptBp, p_sq, gnorm * gnorm,
                                                0.0, 1.0, SOL, a_k, sp)
                else:
                    ok = curvature_test_basic(ptBp, p_sq, gnorm, a_k, sp)
                if not ok:
                    d = -g
                    flag = GD

        if cfg.check_invariants:
            _assert_direction_properties(flag, d, g, gnorm, theta, zeta, a_k, sp,
                                         Bbar, obj, out.curvature if out else 0.0)

        g_dot_d = float(g @ d)
        try:
            if flag == NPC:
                res = npc_linesearch(obj, x, d, g_dot_d, d_curv, f_x, ls)
            else:
                res = armijo_backtrack(obj, x, d, g_dot_d, f_x, ls)
        except StepsizeStagnation:
            status = STAGNATED
            break

        x = x + res.step * d
        if store is not None:
            pending = (res.step * d, g)
        records.append(IterateRecord(
            k=k, f=f_x, gnorm=gnorm, flag=flag, step=res.step,
            inner_iters=inner, theta=theta, zeta=zeta,
            oracles=obj.oracle_count,
            time_ms=(time.perf_counter() - t0) * 1e3,
            capped=res.capped,
        ))
        f_x = res.f_new

    return RunTrace(
        status=status,
        records=records,
        f_final=f_x,
        gnorm_final=gnorm,
        x_final=x,
        iters=len(records),
        oracles=obj.oracle_count,
        time_ms=(time.perf_counter() - t0) * 1e3,
    )
