"""Brute-force reference implementations used to verify the fast paths.

Everything here is deliberately naive: dense recursive quasi-Newton updates,
exhaustive grid scans, dense linear algebra. These are the independent side of
every two-route check in the test suite and in ``minresls check``; none of
them share code with the production kernels they validate.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "dense_bfgs_matrix",
    "backtrack_reference",
    "forward_grid_reference",
    "profile_fraction_reference",
]


def dense_bfgs_matrix(gamma: float, pairs) -> np.ndarray:
    """Textbook recursive BFGS matrix from B0 = gamma * I and ordered pairs.

    Applies, for each (s, y) in order,
        B <- B - (B s)(B s)' / s'Bs + y y' / y's.
    Raises ZeroDivisionError if a denominator vanishes exactly (callers pick
    benign sequences).
    """
    if not pairs:
        raise ValueError("need at least one pair")
    n = pairs[0][0].size
    B = gamma * np.eye(n)
    for s, y in pairs:
        Bs = B @ s
        sBs = float(s @ Bs)
        ys = float(y @ s)
        if sBs == 0.0 or ys == 0.0:
            raise ZeroDivisionError("degenerate update in the dense recursion")
        B = B - np.outer(Bs, Bs) / sBs + np.outer(y, y) / ys
    return B


def backtrack_reference(accept, s: float, shrink: float, min_step: float) -> float:
    """Smallest-exponent grid point s * shrink^j accepted by the predicate."""
    lam = s
    while lam >= min_step:
        if accept(lam):
            return lam
        lam *= shrink
    raise RuntimeError("reference scan hit the minimum step")


def forward_grid_reference(accept, s: float, shrink: float, max_step: float):
    """Largest grid point s / shrink^j accepted, scanning j = 0, 1, 2, ...

    Mirrors the forward-search contract: walking past ``max_step`` clamps to
    it, and the clamped value is returned (flagged) when it is accepted.
    Returns (step, capped).
    """
    if not accept(s):
        raise ValueError("forward scan expects the initial step to be accepted")
    lam = s
    while True:
        cand = min(lam / shrink, max_step)
        if cand == lam:
            return lam, True
        if accept(cand):
            lam = cand
            if cand == max_step:
                return lam, True
        else:
            return lam, False


def profile_fraction_reference(table: dict, solver, tau: float) -> float:
    """Recount a profile value straight from the raw metric table.

    ``table`` maps (solver, problem) to (metric, solved). The fraction is the
    share of ALL problems on which ``solver`` solved within ``tau`` times the
    best solved metric. Written as a plain scan so it shares nothing with the
    vectorized construction it checks.
    """
    problems = sorted({p for _, p in table})
    if not problems:
        raise ValueError("empty metric table")
    hits = 0
    for p in problems:
        solved_values = [v for (s, q), (v, ok) in table.items()
                         if q == p and ok and math.isfinite(v)]
        if not solved_values:
            continue
        best = min(solved_values)
        entry = table.get((solver, p))
        if entry is None:
            continue
        value, ok = entry
        if not ok or not math.isfinite(value):
            continue
        if value == best:
            ratio = 1.0
        elif best == 0.0:
            continue
        else:
            ratio = value / best
        if ratio <= tau:
            hits += 1
    return hits / len(problems)
