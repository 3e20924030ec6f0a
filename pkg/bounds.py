"""Optimal polynomial bounds on weighted eigenstate overlaps, plus closed-form comparators."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from numpy.polynomial import chebyshev, polynomial

import settings
from debug_log import get_logger
from errors import InputError, NumericalError
from indicator import ConstraintGrid, GridProvenance, IndicatorSpec, refine
from lp import LinearProgram, LPStatus, Sense, solve_lp
from moments import Basis, MomentVector, ScalingWindow, rescale_energy
from spectrum import SpectralModel

_ZERO_VARIANCE = 1e-14


class BoundInputError(InputError):
    pass


class ZeroVarianceError(BoundInputError):
    pass


class UnboundedBoundError(NumericalError):
    pass


class Direction(str, Enum):
    LOWER = "lower"
    UPPER = "upper"


@dataclass(frozen=True)
class BoundResult:
    direction: Direction
    degree: int
    basis: Basis
    coefficients: np.ndarray
    raw_value: float
    clamped_value: float
    certified_margin: float | None
    certified: bool
    grid_points: int
    provenance: GridProvenance
    window: ScalingWindow
    lp_status: LPStatus
    active_rows: tuple[int, ...]
    iterations: int

    def to_json_dict(self) -> dict[str, object]:
        return {
            "direction": self.direction.value,
            "degree": self.degree,
            "basis": self.basis.value,
            "coefficients": [float(value) for value in self.coefficients],
            "raw_value": self.raw_value,
            "clamped_value": self.clamped_value,
            "certified_margin": self.certified_margin,
            "certified": self.certified,
            "grid_points": self.grid_points,
            "provenance": self.provenance.value,
            "window": self.window.to_json_dict(),
            "lp_status": self.lp_status.value,
            "active_rows": list(self.active_rows),
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class FirstOrderBounds:
    lower: float
    upper: float
    switch: float

    @property
    def trivial_lower(self) -> bool:
        return self.switch < 0.0


@dataclass(frozen=True)
class FirstOrderErrors:
    upper: float
    lower_trivial: float
    lower_line: float
    upper_worst_case: float


@dataclass(frozen=True)
class ComparatorRow:
    p0: float
    mean: float
    second: float
    eckart: float
    mora_as_printed: float

    @property
    def mora_below_exact(self) -> bool:
        return self.mora_as_printed < self.p0


@dataclass(frozen=True)
class ErrorDecomposition:
    delta: float
    terms: np.ndarray


def basis_matrix(basis: Basis | str, x: np.ndarray | Sequence[float], degree: int) -> np.ndarray:
    """Rows b_n(x_j) for n = 0..degree, one row per abscissa."""
    if degree < 0:
        raise BoundInputError(f"Polynomial degree must be non-negative, got {degree}")
    points = np.asarray(x, dtype=float).reshape(-1)
    if Basis(basis) is Basis.CHEBYSHEV:
        return chebyshev.chebvander(points, degree)
    return polynomial.polyvander(points, degree)


def evaluate_polynomial(
    coefficients: np.ndarray | Sequence[float], basis: Basis | str, x: np.ndarray | float
) -> np.ndarray:
    coefficients = np.asarray(coefficients, dtype=float)
    if Basis(basis) is Basis.CHEBYSHEV:
        return np.asarray(chebyshev.chebval(x, coefficients))
    return np.asarray(polynomial.polyval(x, coefficients))


def _check_pairing(moments: MomentVector, grid: ConstraintGrid, degree: int) -> None:
    if degree < 0:
        raise BoundInputError(f"Polynomial degree must be non-negative, got {degree}")
    if degree > moments.degree:
        raise BoundInputError(f"Moments known to degree {moments.degree}, bound asks for {degree}")
    if moments.grid_window != grid.window:
        raise BoundInputError(
            f"Moment window {moments.grid_window.to_json_dict()} does not match grid window "
            f"{grid.window.to_json_dict()}"
        )


def optimal_bound(
    moments: MomentVector,
    grid: ConstraintGrid,
    degree: int,
    direction: Direction | str,
) -> BoundResult:
    """Best degree-``degree`` minorant (lower) or majorant (upper) of f on the grid.

    Lower maximizes (c, M) subject to p(x_j) <= f_j; upper minimizes subject to p(x_j) >= f_j.
    """
    direction = Direction(direction)
    _check_pairing(moments, grid, degree)
    rows = basis_matrix(moments.basis, grid.abscissae, degree)
    objective = moments.truncated(degree)
    lower = direction is Direction.LOWER
    problem = LinearProgram.one_sided(
        objective, rows, grid.values, Sense.LE if lower else Sense.GE, maximize=lower
    )
    solution = solve_lp(problem)
    if solution.status is LPStatus.UNBOUNDED:
        raise UnboundedBoundError(
            f"Degree {degree} exceeds the resolving power of a {grid.size}-point grid "
            f"({direction.value} bound unbounded); refine the grid or lower the degree"
        )
    if solution.status is not LPStatus.OPTIMAL:
        raise NumericalError(
            f"One-sided bound LP reported {solution.status.value} at degree {degree}"
        )

    raw = solution.objective_value
    clamped = min(max(raw, 0.0), grid.weight_cap)
    exact = grid.provenance is GridProvenance.EXACT_SPECTRUM
    get_logger().debug(
        "%s bound degree=%d basis=%s value=%.12g grid=%d iterations=%d",
        direction.value,
        degree,
        moments.basis.value,
        raw,
        grid.size,
        solution.iterations,
    )
    return BoundResult(
        direction=direction,
        degree=degree,
        basis=moments.basis,
        coefficients=solution.x,
        raw_value=raw,
        clamped_value=clamped,
        certified_margin=0.0 if exact else None,
        certified=exact,
        grid_points=grid.size,
        provenance=grid.provenance,
        window=grid.window,
        lp_status=solution.status,
        active_rows=solution.active_rows,
        iterations=solution.iterations,
    )


def constraint_violation(result: BoundResult, grid: ConstraintGrid) -> float:
    """Largest amount by which the bound polynomial crosses f on the grid's points."""
    values = evaluate_polynomial(result.coefficients, result.basis, grid.abscissae)
    if result.direction is Direction.LOWER:
        excess = values - grid.values
    else:
        excess = grid.values - values
    return max(float(np.max(excess)), 0.0)


def certify(
    result: BoundResult,
    moments: MomentVector,
    grid: ConstraintGrid,
    factor: int = settings.CERTIFY_FACTOR,
    retries: int = settings.CERTIFY_RETRIES,
    tolerance: float = settings.CERTIFY_TOL,
) -> BoundResult:
    """Check the bound polynomial on a refined grid, re-solving there while it still violates f."""
    if result.provenance is GridProvenance.EXACT_SPECTRUM:
        return replace(result, certified_margin=0.0, certified=True)

    attempts = 0
    while True:
        verification = refine(grid, factor)
        margin = constraint_violation(result, verification)
        if margin <= tolerance:
            return replace(result, certified_margin=margin, certified=True)
        if attempts >= retries:
            get_logger().warning(
                "%s bound at degree %d left uncertified: margin %.3e after %d refinements",
                result.direction.value,
                result.degree,
                margin,
                attempts,
            )
            return replace(result, certified_margin=margin, certified=False)
        attempts += 1
        get_logger().debug(
            "Certification margin %.3e > %.1e; re-solving on %d points",
            margin,
            tolerance,
            verification.size,
        )
        grid = verification
        result = optimal_bound(moments, grid, result.degree, result.direction)


def eckart_lower(mean: float, e0: float, e1: float) -> float:
    """Classic first-order lower bound on the ground-state overlap; may be negative."""
    if not e1 > e0:
        raise BoundInputError(f"Eckart bound needs E0 < E1, got E0={e0}, E1={e1}")
    return (e1 - mean) / (e1 - e0)


def mora_upper(mean: float, second: float, e0: float) -> float:
    """Two-moment literature comparator, evaluated exactly as published."""
    variance = second - mean * mean
    if variance <= _ZERO_VARIANCE:
        raise ZeroVarianceError("State is an eigenstate (zero variance); bound undefined")
    return (mean - e0) ** 2 / (2.0 * variance)


def first_order_bounds(mean: float, e0: float, e1: float, ed: float) -> FirstOrderBounds:
    if not e1 > e0:
        raise BoundInputError(f"First-order bounds need E0 < E1, got E0={e0}, E1={e1}")
    if not ed >= e1:
        raise BoundInputError(f"First-order bounds need E1 <= ED, got E1={e1}, ED={ed}")
    switch = e1 - mean
    upper = (ed - mean) / (ed - e0)
    lower = 0.0 if switch < 0.0 else (e1 - mean) / (e1 - e0)
    return FirstOrderBounds(lower=lower, upper=upper, switch=switch)


def first_order_errors(model: SpectralModel) -> FirstOrderErrors:
    """Analytic errors of the degree-1 ground-state polynomials on a complete model."""
    if not model.complete:
        raise BoundInputError("First-order errors need a complete spectral model")
    if model.size < 2:
        raise BoundInputError("First-order errors need at least two levels")
    energies = model.eigenvalues
    weights = model.overlaps
    e0, e1, ed = float(energies[0]), float(energies[1]), float(energies[-1])
    upper = math.fsum(weights[1:] * (ed - energies[1:]) / (ed - e0))
    lower_line = math.fsum(weights[2:] * (energies[2:] - e1) / (e1 - e0))
    worst = (1.0 - float(weights[0])) * (ed - e1) / (ed - e0)
    return FirstOrderErrors(
        upper=upper,
        lower_trivial=float(weights[0]),
        lower_line=lower_line,
        upper_worst_case=worst,
    )


def two_level_comparator(p0_values: Iterable[float]) -> list[ComparatorRow]:
    """Eckart and the published two-moment bound on diag(0, 1) with ground overlap p0."""
    rows = []
    for p0 in p0_values:
        p0 = float(p0)
        if not 0.0 < p0 < 1.0:
            raise BoundInputError(f"Two-level overlap must lie strictly in (0, 1), got {p0}")
        mean = 1.0 - p0
        second = 1.0 - p0
        rows.append(
            ComparatorRow(
                p0=p0,
                mean=mean,
                second=second,
                eckart=eckart_lower(mean, 0.0, 1.0),
                mora_as_printed=mora_upper(mean, second, 0.0),
            )
        )
    return rows


def threshold_decision(result: BoundResult, delta: float) -> bool:
    """True when a certified lower bound proves the target overlap reaches ``delta``."""
    if result.direction is not Direction.LOWER:
        raise BoundInputError("Threshold decisions need a lower bound")
    return result.certified and result.raw_value >= delta


def degree_sweep(
    moments: MomentVector,
    grid: ConstraintGrid,
    degrees: Sequence[int],
    directions: Sequence[Direction | str] = (Direction.LOWER, Direction.UPPER),
    *,
    certify_results: bool = True,
    factor: int = settings.CERTIFY_FACTOR,
    retries: int = settings.CERTIFY_RETRIES,
    tolerance: float = settings.CERTIFY_TOL,
    workers: int = 1,
) -> list[BoundResult]:
    """One bound per (degree, direction), ordered by degree and then direction."""
    if not degrees:
        raise BoundInputError("Degree sweep needs at least one degree")
    if max(degrees) > moments.degree:
        raise BoundInputError(
            f"Sweep reaches degree {max(degrees)} but moments stop at {moments.degree}"
        )
    cells = [(int(degree), Direction(direction)) for degree in degrees for direction in directions]

    def run(cell: tuple[int, Direction]) -> BoundResult:
        degree, direction = cell
        result = optimal_bound(moments, grid, degree, direction)
        if certify_results:
            result = certify(result, moments, grid, factor, retries, tolerance)
        return result

    if workers <= 1:
        return [run(cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, cells))


def error_decomposition(
    model: SpectralModel,
    coefficients: np.ndarray | Sequence[float],
    basis: Basis | str,
    window: ScalingWindow,
    spec: IndicatorSpec,
) -> ErrorDecomposition:
    """|sum_k P_k (f(E_k) - p(E_k))| with the per-level terms P_k (f(E_k) - p(E_k))."""
    if not model.complete:
        raise BoundInputError("Error decomposition needs a complete spectral model")
    tolerance = settings.DEGENERACY_TOL * max(1.0, model.spread)
    targets = []
    for energy in model.eigenvalues:
        value = spec.value_at(float(energy), tolerance)
        if value is None:
            raise BoundInputError(f"Level {energy} lies outside every indicator region")
        targets.append(value)
    rescaled = np.asarray(rescale_energy(model.eigenvalues, window), dtype=float)
    fitted = evaluate_polynomial(coefficients, basis, rescaled)
    terms = model.overlaps * (np.array(targets) - fitted)
    return ErrorDecomposition(delta=abs(math.fsum(terms)), terms=terms)
