"""Hessian representations: exact matrix-free products, compact L-BFGS, shifts.

The quasi-Newton store keeps the most recent curvature pairs and applies the
BFGS matrix (not its inverse) through the compact outer-product form

    B = gamma*I - [gamma*S  Y] * M^{-1} * [gamma*S  Y]'
    M = [[gamma*S'S, L], [L', -D]]

where L is the strictly lower triangle and D the diagonal of S'Y. Updates are
cautious but deliberately loose: a pair is kept whenever |y's| clears a tiny
multiple of ||s||^2, so the matrix may be indefinite. That is a feature, the
inner solver can then surface non-positive curvature directions.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .core import (
    DegenerateMiddleMatrix,
    Objective,
    SymmetricOperator,
)

__all__ = ["exact_hvp_operator", "regularized", "LbfgsStore"]

# |y's| >= CAUTIOUS_FLOOR * ||s||^2 keeps the pair
CAUTIOUS_FLOOR = 1e-18


def exact_hvp_operator(obj: Objective, x: np.ndarray) -> SymmetricOperator:
    """Hessian of ``obj`` at ``x`` as a matrix-free operator.

    Every apply goes through the objective's Hessian-vector oracle and is
    charged to its counter accordingly.
    """
    x = np.array(x, dtype=float, copy=True)   # freeze the evaluation point
    return SymmetricOperator(obj.dim, lambda v: obj.hvp(x, v))


def regularized(base: SymmetricOperator, shift: float) -> SymmetricOperator:
    """The shifted operator ``v -> base(v) + shift * v``."""
    if shift < 0:
        raise ValueError("shift must be nonnegative")
    return SymmetricOperator(base.dim, lambda v: base(v) + shift * v)


class LbfgsStore:
    """Bounded history of curvature pairs with compact-form products.

    The scale ``gamma`` is y'y / y's of the most recently accepted pair (1.0
    while empty) and can be negative when that pair has negative curvature.
    The middle block is factored once per accepted update and reused across
    applies.
    """

    def __init__(self, dim: int, memory: int = 10):
        if memory < 1:
            raise ValueError("memory must be at least 1")
        self.dim = int(dim)
        self.memory = int(memory)
        self.gamma = 1.0
        self._s: list[np.ndarray] = []
        self._y: list[np.ndarray] = []
        self._U = None          # [gamma*S  Y], refreshed on update
        self._lu = None
        self._degenerate = False

    @property
    def n_pairs(self) -> int:
        return len(self._s)

    def update(self, s: np.ndarray, y: np.ndarray) -> bool:
        """Offer a pair (s, y); returns True when it is kept.

        Rejection leaves the store, including ``gamma``, untouched.
        """
        s = np.asarray(s, dtype=float)
        y = np.asarray(y, dtype=float)
        if s.shape != (self.dim,) or y.shape != (self.dim,):
            raise ValueError("pair dimensions do not match the store")
        s_sq = float(s @ s)
        ys = float(y @ s)
        if s_sq == 0.0 or not np.isfinite(ys) or abs(ys) < CAUTIOUS_FLOOR * s_sq:
            return False
        self._s.append(s.copy())
        self._y.append(y.copy())
        if len(self._s) > self.memory:
            self._s.pop(0)
            self._y.pop(0)
        self.gamma = float(y @ y) / ys
        self._refresh()
        return True

    def _refresh(self) -> None:
        S = np.column_stack(self._s)
        Y = np.column_stack(self._y)
        StS = S.T @ S
        StY = S.T @ Y
        L = np.tril(StY, -1)
        D = np.diag(np.diag(StY))
        m = S.shape[1]
        M = np.empty((2 * m, 2 * m))
        M[:m, :m] = self.gamma * StS
        M[:m, m:] = L
        M[m:, :m] = L.T
        M[m:, m:] = -D
        self._U = np.hstack([self.gamma * S, Y])
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
        diag = np.abs(np.diag(lu))
        self._degenerate = (not np.all(np.isfinite(lu))
                            or diag.min() == 0.0
                            or diag.min() < 1e-14 * diag.max())
        self._lu = (lu, piv)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Product B v in O(dim * memory) flops; no oracle calls."""
        v = np.asarray(v, dtype=float)
        if not self._s:
            return v.copy()             # empty store acts as the identity
        if self._degenerate:
            raise DegenerateMiddleMatrix("degenerate L-BFGS middle matrix")
        w = self._U.T @ v
        sol = scipy.linalg.lu_solve(self._lu, w, check_finite=False)
        return self.gamma * v - self._U @ sol

    def operator(self) -> SymmetricOperator:
        return SymmetricOperator(self.dim, self.apply)
