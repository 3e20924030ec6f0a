"""Dense simplex solver for small linear programs over free variables.

Problems have the form  max/min c.x  s.t.  row_i.x (<= | >=) rhs_i  with x unrestricted.
The solver runs a two-phase revised simplex on the dual standard form

    min b.y  s.t.  A^T y = c,  y >= 0

whose basis is a set of active primal rows. Simplex multipliers of that dual are the primal
vertex, and its reduced costs are the primal slacks, so optimality of the dual is primal
feasibility. Free primal variables therefore need no sign splitting.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

import settings
from debug_log import get_logger
from errors import InputError, NumericalError

_PIVOT_TOL = 1e-11
_RATIO_TIE_TOL = 1e-12


class Sense(str, Enum):
    LE = "<="
    GE = ">="


class LPStatus(str, Enum):
    OPTIMAL = "optimal"
    UNBOUNDED = "unbounded"
    INFEASIBLE = "infeasible"


class SingularBasisError(NumericalError):
    def __init__(self, message: str, rows: tuple[int, ...]) -> None:
        super().__init__(message)
        self.rows = rows


class IterationLimitError(NumericalError):
    def __init__(self, message: str, best_point: np.ndarray, objective_value: float) -> None:
        super().__init__(message)
        self.best_point = best_point
        self.objective_value = objective_value


@dataclass(frozen=True)
class LinearProgram:
    objective: np.ndarray
    rows: np.ndarray
    rhs: np.ndarray
    senses: tuple[Sense, ...]
    maximize: bool = True

    def __post_init__(self) -> None:
        objective = np.array(self.objective, dtype=float).reshape(-1)
        rows = np.array(self.rows, dtype=float)
        if rows.ndim == 1:
            rows = rows.reshape(1, -1)
        rhs = np.array(self.rhs, dtype=float).reshape(-1)
        senses = tuple(Sense(sense) for sense in self.senses)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise InputError("Linear program needs at least one constraint row")
        if rows.shape[1] != objective.size:
            raise InputError(
                f"Constraint rows have width {rows.shape[1]}, objective has {objective.size}"
            )
        if rhs.size != rows.shape[0] or len(senses) != rows.shape[0]:
            raise InputError("Every constraint row needs one rhs value and one sense")
        if not all(np.all(np.isfinite(array)) for array in (objective, rows, rhs)):
            raise InputError("Linear program entries must be finite")
        for array in (objective, rows, rhs):
            array.setflags(write=False)
        object.__setattr__(self, "objective", objective)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "senses", senses)

    @classmethod
    def one_sided(
        cls,
        objective: np.ndarray,
        rows: np.ndarray,
        rhs: np.ndarray,
        sense: Sense,
        maximize: bool,
    ) -> LinearProgram:
        count = int(np.asarray(rows).shape[0])
        return cls(objective, rows, rhs, (sense,) * count, maximize)

    @property
    def num_rows(self) -> int:
        return int(self.rows.shape[0])

    @property
    def num_variables(self) -> int:
        return int(self.objective.size)

    def sense_signs(self) -> np.ndarray:
        return np.array([1.0 if sense is Sense.LE else -1.0 for sense in self.senses])


@dataclass(frozen=True)
class LPSolution:
    status: LPStatus
    x: np.ndarray
    objective_value: float
    active_rows: tuple[int, ...]
    iterations: int
    duals: np.ndarray | None = None
    ray: np.ndarray | None = None


@dataclass(frozen=True)
class DualityReport:
    stationarity_residual: float
    duality_gap: float
    min_multiplier: float


@dataclass
class _PhaseOutcome:
    basis: list[int]
    multipliers: np.ndarray
    basic_values: np.ndarray
    unbounded: bool


class DenseSimplex:
    """Single-use solver instance; call :meth:`solve` once."""

    def __init__(
        self,
        problem: LinearProgram,
        *,
        feastol: float = settings.LP_FEASTOL,
        opttol: float = settings.LP_OPTTOL,
        max_iterations: int = settings.LP_MAX_ITERATIONS,
        stall_threshold: int = settings.LP_STALL_THRESHOLD,
    ) -> None:
        self.problem = problem
        self.feastol = feastol
        self.opttol = opttol
        self.max_iterations = max_iterations
        self.stall_threshold = stall_threshold
        self.iterations = 0
        self._bland = False
        self._stalled = 0

        signs = problem.sense_signs()
        rows = signs[:, None] * problem.rows
        rhs = signs * problem.rhs
        scale = np.max(np.abs(rows), axis=1)
        scale[scale == 0.0] = 1.0
        self._row_scale = scale
        self._rows = rows / scale[:, None]
        self._rhs = rhs / scale
        objective = problem.objective if problem.maximize else -problem.objective
        self._objective = np.asarray(objective, dtype=float)
        self._flip = np.where(self._objective < 0.0, -1.0, 1.0)

        n = problem.num_variables
        self._m = problem.num_rows
        dual_matrix = self._flip[:, None] * self._rows.T
        self._columns = np.hstack([dual_matrix, np.eye(n)])
        self._target = self._flip * self._objective

    def solve(self) -> LPSolution:
        empty_rows = np.all(self._rows == 0.0, axis=1)
        if np.any(empty_rows & (self._rhs < -self.feastol)):
            bad = tuple(int(index) for index in np.flatnonzero(empty_rows & (self._rhs < 0)))
            get_logger().debug("LP infeasible: zero rows with negative rhs %s", bad)
            return self._status_only(LPStatus.INFEASIBLE)

        n = self.problem.num_variables
        artificial = list(range(self._m, self._m + n))
        phase_one_costs = np.concatenate([np.zeros(self._m), np.ones(n)])
        allowed = np.ones(self._m + n, dtype=bool)
        first = self._run_phase(list(artificial), phase_one_costs, allowed, phase=1)
        infeasibility = float(
            np.sum(first.basic_values[np.array(first.basis) >= self._m].clip(min=0.0))
        )
        if infeasibility > self.feastol * max(1.0, float(np.max(np.abs(self._target)))):
            ray = self._flip * first.multipliers
            get_logger().debug(
                "LP unbounded after %d iterations (phase-one residual %.3e)",
                self.iterations,
                infeasibility,
            )
            return LPSolution(
                status=LPStatus.UNBOUNDED,
                x=np.zeros(n),
                objective_value=float("inf") if self.problem.maximize else float("-inf"),
                active_rows=(),
                iterations=self.iterations,
                ray=ray,
            )

        phase_two_costs = np.concatenate([self._rhs, np.zeros(n)])
        allowed = np.concatenate([np.ones(self._m, dtype=bool), np.zeros(n, dtype=bool)])
        second = self._run_phase(first.basis, phase_two_costs, allowed, phase=2)
        if second.unbounded:
            get_logger().debug("LP infeasible: dual unbounded after %d iterations", self.iterations)
            return self._status_only(LPStatus.INFEASIBLE)

        x = self._flip * second.multipliers
        duals = np.zeros(self._m)
        for position, column in enumerate(second.basis):
            if column < self._m:
                duals[column] = max(float(second.basic_values[position]), 0.0)
        duals = duals / self._row_scale
        active = tuple(sorted(column for column in second.basis if column < self._m))
        value = float(self.problem.objective @ x)
        get_logger().debug(
            "LP optimal: value=%.12g iterations=%d active=%d", value, self.iterations, len(active)
        )
        return LPSolution(
            status=LPStatus.OPTIMAL,
            x=x,
            objective_value=value,
            active_rows=active,
            iterations=self.iterations,
            duals=duals,
        )

    def _status_only(self, status: LPStatus) -> LPSolution:
        n = self.problem.num_variables
        return LPSolution(
            status=status,
            x=np.zeros(n),
            objective_value=float("nan"),
            active_rows=(),
            iterations=self.iterations,
        )

    def _basis_matrix(self, basis: list[int]) -> np.ndarray:
        matrix = self._columns[:, basis]
        if np.linalg.cond(matrix) > settings.LP_SINGULAR_COND:
            rows = tuple(sorted(column for column in basis if column < self._m))
            raise SingularBasisError(
                f"Simplex basis is numerically singular (rows {list(rows)})", rows
            )
        return matrix

    def _run_phase(
        self, basis: list[int], costs: np.ndarray, allowed: np.ndarray, phase: int
    ) -> _PhaseOutcome:
        basis = list(basis)
        while True:
            matrix = self._basis_matrix(basis)
            basic_values = np.linalg.solve(matrix, self._target)
            multipliers = np.linalg.solve(matrix.T, costs[basis])
            reduced = costs - self._columns.T @ multipliers
            candidates = np.flatnonzero(allowed & (reduced < -self.opttol))
            if candidates.size == 0:
                return _PhaseOutcome(basis, multipliers, basic_values, unbounded=False)

            entering = self._choose_entering(matrix, candidates, reduced)
            direction = np.linalg.solve(matrix, self._columns[:, entering])
            leaving = self._choose_leaving(basis, basic_values, direction, phase)
            if leaving is None:
                return _PhaseOutcome(basis, multipliers, basic_values, unbounded=True)

            step = max(float(basic_values[leaving]), 0.0) / abs(float(direction[leaving]))
            if step <= self.feastol:
                self._stalled += 1
                if not self._bland and self._stalled > self.stall_threshold:
                    self._bland = True
                    get_logger().debug("Simplex stalled; switching to Bland's rule")
            else:
                self._stalled = 0
            basis[leaving] = int(entering)

            self.iterations += 1
            if self.iterations >= self.max_iterations:
                point = self._flip * multipliers
                raise IterationLimitError(
                    f"Simplex exceeded {self.max_iterations} iterations",
                    best_point=point,
                    objective_value=float(self.problem.objective @ point),
                )

    def _choose_entering(
        self, matrix: np.ndarray, candidates: np.ndarray, reduced: np.ndarray
    ) -> int:
        if self._bland:
            return int(candidates[0])
        directions = np.linalg.solve(matrix, self._columns[:, candidates])
        weights = 1.0 + np.sum(directions * directions, axis=0)
        scores = reduced[candidates] ** 2 / weights
        return int(candidates[int(np.argmax(scores))])

    def _choose_leaving(
        self,
        basis: list[int],
        basic_values: np.ndarray,
        direction: np.ndarray,
        phase: int,
    ) -> int | None:
        best: int | None = None
        best_ratio = np.inf
        for position, column in enumerate(basis):
            component = float(direction[position])
            if phase == 2 and column >= self._m and abs(component) > _PIVOT_TOL:
                ratio = 0.0
            elif component > _PIVOT_TOL:
                ratio = max(float(basic_values[position]), 0.0) / component
            else:
                continue
            if best is None or ratio < best_ratio - _RATIO_TIE_TOL:
                best, best_ratio = position, ratio
            elif abs(ratio - best_ratio) <= _RATIO_TIE_TOL:
                if self._bland:
                    if column < basis[best]:
                        best = position
                elif abs(component) > abs(float(direction[best])):
                    best = position
        return best


def solve_lp(problem: LinearProgram, **options: float) -> LPSolution:
    """Solve with a fresh :class:`DenseSimplex`; options override the settings tolerances."""
    solver = DenseSimplex(problem, **options)  # type: ignore[arg-type]
    return solver.solve()


def check_feasibility(x: np.ndarray, problem: LinearProgram) -> float:
    """Largest signed constraint violation; non-positive means every row holds."""
    point = np.asarray(x, dtype=float).reshape(-1)
    if point.size != problem.num_variables:
        raise InputError(
            f"Point has {point.size} entries, program has {problem.num_variables} variables"
        )
    activity = problem.rows @ point
    violation = problem.sense_signs() * (activity - problem.rhs)
    return float(np.max(violation))


def dual_certificate_gap(solution: LPSolution, problem: LinearProgram) -> DualityReport:
    """Check the multipliers reproduce the objective and close the duality gap."""
    if solution.status is not LPStatus.OPTIMAL or solution.duals is None:
        raise InputError("Duality can only be checked on optimal solutions")
    signs = problem.sense_signs()
    objective = problem.objective if problem.maximize else -problem.objective
    combination = (signs[:, None] * problem.rows).T @ solution.duals
    dual_value = float((signs * problem.rhs) @ solution.duals)
    primal_value = float(objective @ solution.x)
    return DualityReport(
        stationarity_residual=float(np.max(np.abs(combination - objective))),
        duality_gap=abs(dual_value - primal_value),
        min_multiplier=float(np.min(solution.duals)),
    )
