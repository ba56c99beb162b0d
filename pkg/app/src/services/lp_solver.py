"""Bounded-variable revised simplex for the small dense programs built by the planner.

The problem ``min c·x, A_ub x ≤ b_ub, A_eq x = b_eq, l ≤ x ≤ u`` is brought to
equality form with one slack per inequality row. Phase 1 drives artificial
columns to zero, phase 2 optimises the original cost from the same basis.
Nonbasic variables sit at a finite bound (or at zero when free). Dantzig
pricing is used until too many consecutive degenerate pivots occur, after
which Bland's rule guarantees termination.
"""
import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from models import LpProblem, LpSolution, LpStatus


logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-7
OPTIMALITY_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_INTERVAL = 50
DEGENERATE_STEP = 1e-12


class LpError(Exception):
    """Raised when a linear program is malformed."""
    pass


def validate_problem(problem: LpProblem) -> None:
    """Reject dimension mismatches and non-finite data before solving.

    Raises:
        LpError: Describing the first problem found.
    """
    c = np.asarray(problem.c, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise LpError("cost vector must be one-dimensional and non-empty")
    n = c.size
    if not np.all(np.isfinite(c)):
        raise LpError("cost vector contains non-finite values")

    for name, a, b in (('A_ub', problem.a_ub, problem.b_ub), ('A_eq', problem.a_eq, problem.b_eq)):
        a_arr = np.asarray(a, dtype=float)
        b_arr = np.asarray(b, dtype=float)
        if a_arr.ndim != 2 or a_arr.shape[1] != n:
            raise LpError(f"{name} must have shape (rows, {n}), got {a_arr.shape}")
        if b_arr.ndim != 1 or b_arr.shape[0] != a_arr.shape[0]:
            raise LpError(f"{name} has {a_arr.shape[0]} rows but its right-hand side has shape {b_arr.shape}")
        if not (np.all(np.isfinite(a_arr)) and np.all(np.isfinite(b_arr))):
            raise LpError(f"{name} or its right-hand side contains non-finite values")

    lower = np.asarray(problem.lower, dtype=float)
    upper = np.asarray(problem.upper, dtype=float)
    if lower.shape != (n,) or upper.shape != (n,):
        raise LpError(f"bounds must have shape ({n},)")
    if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
        raise LpError("bounds contain NaN")
    if np.any(lower == np.inf) or np.any(upper == -np.inf):
        raise LpError("lower bound +inf or upper bound -inf")
    if np.any(lower > upper):
        bad = int(np.argmax(lower > upper))
        raise LpError(f"variable {bad} has lower bound above upper bound")


class _RevisedSimplex:
    """Working state shared by both phases."""

    def __init__(self, matrix: np.ndarray, rhs: np.ndarray, lower: np.ndarray,
                 upper: np.ndarray, x: np.ndarray, basis: np.ndarray):
        self.matrix = matrix
        self.rhs = rhs
        self.lower = lower
        self.upper = upper
        self.x = x
        self.basis = basis
        self.m, self.ncols = matrix.shape
        self.is_basic = np.zeros(self.ncols, dtype=bool)
        self.is_basic[basis] = True
        self.b_inv = np.eye(self.m)
        self.iterations = 0
        self.duals = np.zeros(self.m)
        self.ray: Optional[np.ndarray] = None

    def refactor(self) -> None:
        if self.m == 0:
            return
        self.b_inv = np.linalg.inv(self.matrix[:, self.basis])
        nonbasic_x = self.x.copy()
        nonbasic_x[self.basis] = 0.0
        self.x[self.basis] = self.b_inv @ (self.rhs - self.matrix @ nonbasic_x)

    def _entering(self, reduced: np.ndarray, bland: bool) -> Tuple[Optional[int], int]:
        movable = (~self.is_basic) & (self.upper > self.lower)
        can_increase = movable & (self.x < self.upper) & (reduced < -OPTIMALITY_TOL)
        can_decrease = movable & (self.x > self.lower) & (reduced > OPTIMALITY_TOL)
        score = np.where(can_increase, -reduced, np.where(can_decrease, reduced, 0.0))
        candidates = np.flatnonzero(score > 0.0)
        if candidates.size == 0:
            return None, 0
        j = int(candidates[0]) if bland else int(np.argmax(score))
        return j, (1 if can_increase[j] else -1)

    def _ratio_test(self, delta: np.ndarray, j: int, bland: bool) -> Tuple[float, Optional[int]]:
        flip = self.upper[j] - self.lower[j]
        if self.m == 0:
            return flip, None
        x_b = self.x[self.basis]
        ratios = np.full(self.m, np.inf)
        dec = delta < -PIVOT_TOL
        inc = delta > PIVOT_TOL
        ratios[dec] = (x_b[dec] - self.lower[self.basis][dec]) / -delta[dec]
        ratios[inc] = (self.upper[self.basis][inc] - x_b[inc]) / delta[inc]
        ratios = np.maximum(ratios, 0.0)
        best = float(ratios.min())
        if not np.isfinite(best) or flip <= best:
            return flip, None
        ties = np.flatnonzero(ratios <= best + DEGENERATE_STEP)
        if bland:
            leave = int(ties[np.argmin(self.basis[ties])])
        else:
            leave = int(ties[np.argmax(np.abs(delta[ties]))])
        return best, leave

    def run(self, cost: np.ndarray, max_iterations: int) -> LpStatus:
        degenerate = 0
        bland = False
        since_refactor = REFACTOR_INTERVAL
        bland_after = 5 * (self.m + self.ncols)
        while True:
            if since_refactor >= REFACTOR_INTERVAL:
                self.refactor()
                since_refactor = 0
            y = cost[self.basis] @ self.b_inv if self.m else np.zeros(0)
            reduced = cost - y @ self.matrix if self.m else cost.copy()
            j, direction = self._entering(reduced, bland)
            if j is None:
                self.duals = y
                return LpStatus.OPTIMAL
            if self.iterations >= max_iterations:
                return LpStatus.ITERATION_LIMIT

            w = self.b_inv @ self.matrix[:, j] if self.m else np.zeros(0)
            delta = -direction * w
            step, leave = self._ratio_test(delta, j, bland)
            if not np.isfinite(step):
                ray = np.zeros(self.ncols)
                ray[j] = direction
                ray[self.basis] = delta
                self.ray = ray
                return LpStatus.UNBOUNDED

            self.iterations += 1
            degenerate = degenerate + 1 if step <= DEGENERATE_STEP else 0
            if not bland and degenerate > bland_after:
                logger.debug("Switching to Bland's rule after %d degenerate pivots", degenerate)
                bland = True

            if self.m:
                self.x[self.basis] += step * delta
            if leave is None:
                self.x[j] = self.upper[j] if direction > 0 else self.lower[j]
                continue

            self.x[j] += direction * step
            out = int(self.basis[leave])
            self.x[out] = self.lower[out] if delta[leave] < 0 else self.upper[out]
            self.basis[leave] = j
            self.is_basic[out] = False
            self.is_basic[j] = True

            row = self.b_inv[leave] / w[leave]
            self.b_inv -= np.outer(w, row)
            self.b_inv[leave] = row
            since_refactor += 1


def solve_lp(problem: LpProblem, max_iterations: Optional[int] = None) -> LpSolution:
    """Solve a linear program to optimality or a certified terminal status.

    Args:
        problem: The program; bounds may be infinite.
        max_iterations: Pivot budget over both phases. Defaults to a multiple
            of the problem size.

    Returns:
        The solution. When optimal, ``duals_ub`` (≤ 0) and ``duals_eq`` hold the
        row multipliers of the final basis; when unbounded, ``ray`` is an
        improving direction. A final point or ray that fails its residual
        check is reported as ``NUMERICAL`` with no point attached.

    Raises:
        LpError: If the problem is malformed.
    """
    validate_problem(problem)
    c = np.asarray(problem.c, dtype=float)
    a_ub = np.asarray(problem.a_ub, dtype=float)
    a_eq = np.asarray(problem.a_eq, dtype=float)
    n = c.size
    m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]
    rows = m_ub + m_eq

    structural = np.vstack([a_ub, a_eq]) if rows else np.zeros((0, n))
    slack_block = np.vstack([np.eye(m_ub), np.zeros((m_eq, m_ub))])
    matrix = np.hstack([structural, slack_block])
    rhs = np.concatenate([np.asarray(problem.b_ub, dtype=float), np.asarray(problem.b_eq, dtype=float)])
    lower = np.concatenate([np.asarray(problem.lower, dtype=float), np.zeros(m_ub)])
    upper = np.concatenate([np.asarray(problem.upper, dtype=float), np.full(m_ub, np.inf)])

    x = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
    residual = rhs - matrix @ x

    basis = np.empty(rows, dtype=int)
    art_rows = []
    for i in range(rows):
        if i < m_ub and residual[i] >= 0.0:
            basis[i] = n + i
            x[n + i] = residual[i]
        else:
            art_rows.append(i)

    n_art = len(art_rows)
    if n_art:
        art = np.zeros((rows, n_art))
        for k, i in enumerate(art_rows):
            art[i, k] = 1.0 if residual[i] >= 0.0 else -1.0
            basis[i] = matrix.shape[1] + k
        matrix = np.hstack([matrix, art])
        lower = np.concatenate([lower, np.zeros(n_art)])
        upper = np.concatenate([upper, np.full(n_art, np.inf)])
        x = np.concatenate([x, np.abs(residual[art_rows])])

    ncols = matrix.shape[1]
    budget = max_iterations if max_iterations is not None else 50 * (rows + ncols) + 1000
    simplex = _RevisedSimplex(matrix, rhs, lower, upper, x, basis)
    art_cols = np.arange(ncols - n_art, ncols)

    if n_art:
        phase1_cost = np.zeros(ncols)
        phase1_cost[art_cols] = 1.0
        status = simplex.run(phase1_cost, budget)
        if status == LpStatus.ITERATION_LIMIT:
            return LpSolution(status=status, iterations=simplex.iterations,
                              message="iteration limit reached in phase 1")
        simplex.refactor()
        infeasibility = float(np.sum(np.abs(simplex.x[art_cols])))
        if infeasibility > FEASIBILITY_TOL * (1.0 + float(np.max(np.abs(rhs), initial=0.0))):
            logger.debug("Phase 1 ended with residual infeasibility %.3e", infeasibility)
            return LpSolution(status=LpStatus.INFEASIBLE, iterations=simplex.iterations,
                              message=f"constraints cannot be met (residual {infeasibility:.3e})")
        simplex.upper[art_cols] = 0.0
        nonbasic_art = art_cols[~simplex.is_basic[art_cols]]
        simplex.x[nonbasic_art] = 0.0

    phase2_cost = np.concatenate([c, np.zeros(ncols - n)])
    status = simplex.run(phase2_cost, budget)

    if status == LpStatus.ITERATION_LIMIT:
        return LpSolution(status=status, iterations=simplex.iterations,
                          message="iteration limit reached in phase 2")
    if status == LpStatus.UNBOUNDED:
        ray = simplex.ray
        assert ray is not None
        scale = 1.0 + float(np.max(np.abs(matrix), initial=0.0))
        if float(phase2_cost @ ray) >= 0 or np.max(np.abs(matrix @ ray), initial=0.0) > FEASIBILITY_TOL * scale:
            logger.warning("Unbounded direction failed verification")
            return LpSolution(status=LpStatus.NUMERICAL, iterations=simplex.iterations,
                              message="unbounded direction failed verification")
        return LpSolution(status=status, ray=ray[:n].copy(), iterations=simplex.iterations,
                          message="objective unbounded below")

    simplex.refactor()
    duals = phase2_cost[simplex.basis] @ simplex.b_inv if rows else np.zeros(0)
    x_opt = simplex.x[:n].copy()
    violation = _constraint_violation(problem, x_opt)
    if violation > FEASIBILITY_TOL * (1.0 + float(np.max(np.abs(x_opt), initial=0.0))):
        logger.warning("Optimal point violates constraints by %.3e", violation)
        return LpSolution(status=LpStatus.NUMERICAL, iterations=simplex.iterations,
                          message=f"final point violates constraints by {violation:.3e}")
    return LpSolution(
        status=LpStatus.OPTIMAL,
        x=x_opt,
        objective=float(c @ x_opt),
        duals_ub=duals[:m_ub].copy(),
        duals_eq=duals[m_ub:].copy(),
        iterations=simplex.iterations,
        message="optimal",
    )


def _constraint_violation(problem: LpProblem, x: np.ndarray) -> float:
    """Largest violation of any row or bound at ``x``."""
    worst = 0.0
    if problem.a_ub.shape[0]:
        worst = max(worst, float(np.max(problem.a_ub @ x - problem.b_ub)))
    if problem.a_eq.shape[0]:
        worst = max(worst, float(np.max(np.abs(problem.a_eq @ x - problem.b_eq))))
    return max(worst, float(np.max(problem.lower - x)), float(np.max(x - problem.upper)))


def _format_row(coefs: np.ndarray) -> str:
    return ' '.join(f"{v:.10g}" for v in coefs)


def dump_lp(problem: LpProblem, path: Union[str, Path]) -> Path:
    """Write the program in a plain-text layout for debugging.

    One line per block: ``c:`` costs, ``ub i:`` / ``eq i:`` rows with their
    right-hand side, and ``bounds j: lower upper``.
    """
    out = Path(path)
    lines = [f"n {problem.n_vars} ub {problem.a_ub.shape[0]} eq {problem.a_eq.shape[0]}",
             f"c: {_format_row(np.asarray(problem.c))}"]
    for i, (row, rhs) in enumerate(zip(problem.a_ub, problem.b_ub)):
        lines.append(f"ub {i}: {_format_row(row)} <= {rhs:.10g}")
    for i, (row, rhs) in enumerate(zip(problem.a_eq, problem.b_eq)):
        lines.append(f"eq {i}: {_format_row(row)} = {rhs:.10g}")
    for j, (lo, hi) in enumerate(zip(problem.lower, problem.upper)):
        lines.append(f"bounds {j}: {lo:.10g} {hi:.10g}")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text('\n'.join(lines) + '\n')
    logger.debug("Wrote LP dump to %s", out)
    return out
